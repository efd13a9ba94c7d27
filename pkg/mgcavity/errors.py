from collections.abc import Sequence
from typing import Any


class MinorityGameError(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"[{code}] {message}")
        self.code = code
        self.message = message

    def __reduce__(self) -> tuple[Any, ...]:
        return (_restore, (type(self), self.code, self.message, dict(self.__dict__)))


def _restore(cls: type[MinorityGameError], code: str, message: str, state: dict[str, Any]) -> MinorityGameError:
    error = cls.__new__(cls)
    MinorityGameError.__init__(error, code, message)
    error.__dict__.update(state)
    return error


class OutOfRangeError(MinorityGameError):
    def __init__(
        self,
        x: float,
        operating_range: tuple[float, float],
        *,
        t: int | None = None,
        A: float | None = None,
        eta: float | None = None,
    ) -> None:
        where = "" if t is None else f" at step {t} (A={A!r}, eta={eta!r})"
        super().__init__(
            "mgcavity.price.out_of_range",
            f"Excess demand {x!r} is outside the operating range [{operating_range[0]}, {operating_range[1]}]{where}.",
        )
        self.x = x
        self.operating_range = operating_range
        self.t = t
        self.A = A
        self.eta = eta


class InvalidPriceFunctionError(MinorityGameError):
    def __init__(self, reason: str) -> None:
        super().__init__("mgcavity.price.invalid", f"Invalid price function: {reason}")
        self.reason = reason


class InvalidNoiseModelError(MinorityGameError):
    def __init__(self, reason: str) -> None:
        super().__init__("mgcavity.noise.invalid", f"Invalid noise model: {reason}")
        self.reason = reason


class InvalidGameConfigError(MinorityGameError):
    def __init__(self, field: str, reason: str) -> None:
        super().__init__("mgcavity.game.invalid_config", f"Invalid game configuration field '{field}': {reason}")
        self.field = field
        self.reason = reason


class WrongSError(MinorityGameError):
    def __init__(self, S: int) -> None:
        super().__init__(
            "mgcavity.game.wrong_s",
            f"This observable is only defined for S=2 strategies per agent, got S={S}.",
        )
        self.S = S


class EmptyWindowError(MinorityGameError):
    def __init__(self, T: int, warmup: int) -> None:
        super().__init__(
            "mgcavity.measures.empty_window",
            f"No post-warmup steps to average over (T={T}, warmup={warmup}).",
        )
        self.T = T
        self.warmup = warmup


class InsufficientCoverageError(MinorityGameError):
    def __init__(self, starved: Sequence[int], minimum: int) -> None:
        shown = ", ".join(str(mu) for mu in starved[:20])
        more = "" if len(starved) <= 20 else f" (+{len(starved) - 20} more)"
        super().__init__(
            "mgcavity.measures.insufficient_coverage",
            f"Signals visited fewer than {minimum} times after warmup: {shown}{more}.",
        )
        self.starved = list(starved)
        self.minimum = minimum


class DegenerateReactionError(MinorityGameError):
    def __init__(self, R_x: float) -> None:
        super().__init__(
            "mgcavity.cavity.degenerate_reaction",
            f"Agent reaction term must be strictly negative, got R_x={R_x!r}.",
        )
        self.R_x = R_x


class DegenerateFieldError(MinorityGameError):
    def __init__(self, q_g: float) -> None:
        super().__init__(
            "mgcavity.cavity.degenerate_field",
            f"Agent cavity field has no spread, got q_g={q_g!r}.",
        )
        self.q_g = q_g


class RangeExhaustedError(MinorityGameError):
    def __init__(self, z: float, R_g: float, *, escaped: float | None = None) -> None:
        if escaped is None:
            message = f"Could not bracket the mean price at z_g={z!r}, R_g={R_g!r}."
        else:
            message = (
                f"Price arguments leave the operating range with probability {escaped:.3g} "
                f"around z_g={z!r}, R_g={R_g!r}."
            )
        super().__init__("mgcavity.cavity.range_exhausted", message)
        self.z = z
        self.R_g = R_g
        self.escaped = escaped


class NoBracketError(MinorityGameError):
    def __init__(self, quantity: str, lower: float, upper: float) -> None:
        super().__init__(
            "mgcavity.cavity.no_bracket",
            f"No sign change found for {quantity} in [{lower!r}, {upper!r}].",
        )
        self.quantity = quantity
        self.lower = lower
        self.upper = upper


class NotConvergedError(MinorityGameError):
    def __init__(self, alpha: float, iterations: int, residual: float) -> None:
        super().__init__(
            "mgcavity.cavity.not_converged",
            f"Self-consistent iteration at alpha={alpha!r} did not converge after {iterations} iterations "
            f"(residual {residual:.3e}).",
        )
        self.alpha = alpha
        self.iterations = iterations
        self.residual = residual


class ReplicaSymmetryBrokenError(MinorityGameError):
    def __init__(self, alpha: float, margin: float) -> None:
        super().__init__(
            "mgcavity.cavity.replica_symmetry_broken",
            f"No replica-symmetric solution at alpha={alpha!r}: alpha - (1 - phi) = {margin:.3e}.",
        )
        self.alpha = alpha
        self.margin = margin


class InsufficientEnsembleError(MinorityGameError):
    def __init__(self, available: int, required: int) -> None:
        super().__init__(
            "mgcavity.dynamics.insufficient_ensemble",
            f"Need at least {required} (agent, seed) trajectories, got {available}.",
        )
        self.available = available
        self.required = required


class ConfigError(MinorityGameError):
    def __init__(self, source: str, field: str | None, reason: str, *, line: int | None = None) -> None:
        location = source
        if line is not None:
            location += f":{line}"
        if field is not None:
            location += f" [{field}]"
        super().__init__("mgcavity.config.invalid", f"{location}: {reason}")
        self.source = source
        self.field = field
        self.reason = reason
        self.line = line


class ParameterMismatchError(MinorityGameError):
    def __init__(self, mismatches: dict[str, tuple[object, object]]) -> None:
        details = "; ".join(f"{name}: {left!r} != {right!r}" for name, (left, right) in mismatches.items())
        super().__init__(
            "mgcavity.compare.parameter_mismatch",
            f"Simulation and theory were computed for different parameters: {details}.",
        )
        self.mismatches = mismatches


class ReconciliationError(MinorityGameError):
    def __init__(self, failed: Sequence[str]) -> None:
        super().__init__(
            "mgcavity.compare.reconciliation_failed",
            f"Theory and simulation disagree on: {', '.join(failed)}.",
        )
        self.failed = list(failed)
