"""
Plots for the data files written by ``mg-cavity``.

Needs the ``plot`` dependency group::

    uv run --group plot scripts/plot_figures.py volatility out/simulate_alpha_scan out/sweep_linear
"""

import argparse
import logging
import math
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
from numpy.typing import NDArray

from mgcavity._harness import read_arrays, read_csv, read_json

logger = logging.getLogger("mgcavity.plots")


def _column(rows: list[dict[str, str]], name: str) -> NDArray[np.float64]:
    return np.array([float(row[name]) if row[name] else math.nan for row in rows])


def plot_volatility(simulations: list[Path], sweeps: list[Path], target: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    for directory in simulations:
        _, rows = read_csv(directory / "ensemble.csv")
        alpha, sigma, error = (_column(rows, name) for name in ("alpha", "sigma", "sigma_error"))
        N = int(float(rows[0]["N"]))
        ax.errorbar(alpha, sigma, yerr=np.nan_to_num(error), fmt="o", ms=3, label=f"N={N}")
    for directory in sweeps:
        _, rows = read_csv(directory / "sweep.csv")
        ax.plot(_column(rows, "alpha"), _column(rows, "sigma"), "-", label=f"solver ({directory.name})")
    ax.axhline(1.0, color="grey", lw=0.5, ls=":")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel(r"$\sigma$")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(target)
    plt.close(fig)


def plot_order_parameters(sweeps: list[Path], target: Path) -> None:
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    for directory in sweeps:
        _, rows = read_csv(directory / "sweep.csv")
        alpha = _column(rows, "alpha")
        left.plot(alpha, _column(rows, "phi"), label=rf"$\phi$ ({directory.name})")
        left.plot(alpha, _column(rows, "q_x"), "--", label=rf"$q_x$ ({directory.name})")
        right.plot(alpha, _column(rows, "b"), label=directory.name)
    left.set_xscale("log")
    left.set_xlabel(r"$\alpha$")
    left.legend(fontsize=7)
    right.set_xscale("log")
    right.set_xlabel(r"$\alpha$")
    right.set_ylabel("b")
    right.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(target)
    plt.close(fig)


def plot_histogram(run_directory: Path, target: Path) -> None:
    _, rows = read_csv(run_directory / "a_histogram.csv")
    observables = read_json(run_directory / "observables.json")["observables"]
    centers, density = _column(rows, "A"), _column(rows, "density")
    sigma = observables["sigma"]
    mean = observables["gbar"] if observables["gbar"] is not None else 0.0
    gaussian = np.exp(-((centers - mean) ** 2) / (2 * sigma**2)) / math.sqrt(2 * math.pi * sigma**2)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy(centers, np.where(density > 0, density, np.nan), "o", ms=3, label="simulation")
    ax.semilogy(centers, gaussian, "-", label="gaussian")
    ax.set_xlabel("A")
    ax.set_ylabel("density")
    ax.set_title(f"excess kurtosis {observables['kurtosis']:.3f}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(target)
    plt.close(fig)


def plot_trajectories(dynamics_directory: Path, target: Path, agents: int = 10) -> None:
    archive = sorted((dynamics_directory / "trajectories").glob("seed*.npz"))[0]
    meta, arrays = read_arrays(archive)
    summary = read_json(dynamics_directory / "regime_summary.json")
    P = summary["game"]["P"]
    tau = arrays["times"] / P

    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    for j in range(min(agents, arrays["U"].shape[0])):
        left.plot(tau, arrays["U"][j], lw=0.6)
    left.set_xscale("log")
    left.set_xlabel(r"$t / P$")
    left.set_ylabel("U")
    spread = np.sqrt(np.mean((arrays["U"] - arrays["U"][:, :1]) ** 2, axis=0))
    right.loglog(arrays["times"], spread, label="rms displacement")
    reference = spread[0] * np.sqrt(arrays["times"] / arrays["times"][0])
    right.loglog(arrays["times"], reference, "--", label=r"$t^{1/2}$")
    right.axvline(P, color="grey", lw=0.5)
    right.set_xlabel("t")
    right.legend(fontsize=7)
    fig.suptitle(f"seeds {meta['seeds']}")
    fig.tight_layout()
    fig.savefig(target)
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Plot mg-cavity output directories")
    parser.add_argument("-o", "--output", type=Path, default=Path("figures"))
    subparsers = parser.add_subparsers(dest="figure", required=True)

    volatility = subparsers.add_parser("volatility", help="sigma against alpha, simulated and solved")
    volatility.add_argument("directories", type=Path, nargs="+")
    order = subparsers.add_parser("order", help="phi, q_x and b from solver sweeps")
    order.add_argument("directories", type=Path, nargs="+")
    histogram = subparsers.add_parser("histogram", help="excess-demand density of one run")
    histogram.add_argument("run", type=Path)
    trajectories = subparsers.add_parser("trajectories", help="score-gap trajectories of a dynamics run")
    trajectories.add_argument("directory", type=Path)
    trajectories.add_argument("--agents", type=int, default=10)
    return parser


def main(argv: list[str] | None = None) -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    args.output.mkdir(parents=True, exist_ok=True)
    target = args.output / f"{args.figure}.pdf"
    match args.figure:
        case "volatility":
            simulations = [d for d in args.directories if (d / "ensemble.csv").exists()]
            sweeps = [d for d in args.directories if (d / "sweep.csv").exists()]
            plot_volatility(simulations, sweeps, target)
        case "order":
            plot_order_parameters(args.directories, target)
        case "histogram":
            plot_histogram(args.run, target)
        case "trajectories":
            plot_trajectories(args.directory, target, args.agents)
    logger.info("Wrote %s", target)


if __name__ == "__main__":
    main()
