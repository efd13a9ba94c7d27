from mgcavity._harness._config import (
    CliOverrides as CliOverrides,
    CompareSettings as CompareSettings,
    CriticalSearch as CriticalSearch,
    DynamicsSettings as DynamicsSettings,
    EnsembleSettings as EnsembleSettings,
    Mode as Mode,
    OutputSettings as OutputSettings,
    RunConfig as RunConfig,
    load_config as load_config,
    parse_config as parse_config,
)
from mgcavity._harness._io import (
    Provenance as Provenance,
    read_arrays as read_arrays,
    read_csv as read_csv,
    read_json as read_json,
    write_arrays as write_arrays,
    write_csv as write_csv,
    write_json as write_json,
)
from mgcavity._harness._services import (
    CavitySolver as CavitySolver,
    DynamicsLab as DynamicsLab,
    EnsembleRunner as EnsembleRunner,
    OutputWriter as OutputWriter,
    RunSummary as RunSummary,
    define_services as define_services,
    simulate_one as simulate_one,
)
from mgcavity._harness._commands import (
    CommandMetadata as CommandMetadata,
    ReconciliationCheck as ReconciliationCheck,
    aggregate as aggregate,
    cmd_alpha_c as cmd_alpha_c,
    cmd_compare as cmd_compare,
    cmd_dynamics as cmd_dynamics,
    cmd_simulate as cmd_simulate,
    cmd_solve as cmd_solve,
    cmd_sweep as cmd_sweep,
    command as command,
    command_metadata as command_metadata,
    get_command as get_command,
    reconcile as reconcile,
)
from mgcavity._harness._cli import build_parser as build_parser, exit_code as exit_code, main as main
