"""Layered coalition simulator for relay-assisted wireless uplinks.

Three layers, bottom up:

* physical layer — node geometry, received SNR, path throughput (`model`,
  `radio`);
* network layer  — distributed relay selection inside each cooperation
  group (`linkgame`);
* service layer  — providers merging and splitting coalitions over the
  revenue their traffic earns (`coalitions`, `allocation`).

`tables` ships measured utility matrices for a three-provider scenario at
several cooperation prices, and `cli`/`report` wrap everything in a small
artifact-producing command-line tool.
"""

from __future__ import annotations

from .allocation import (
    Allocation,
    CharacteristicCache,
    SimulatedUtilities,
    allocate,
    characteristic_value,
    check_allocation_stability,
    shapley,
    shapley_from_table,
)
from .coalitions import (
    ENUMERATION_LIMIT,
    CoalitionStructure,
    CycleError,
    Move,
    TransitionGraph,
    enumerate_structures,
    omega_labels,
    run_coalition_formation,
    stable_set,
    structure_count_formula,
    transition_graph,
)
from .config import RunConfig, example_config_path, load_config, parse_config
from .linkgame import (
    ConvergenceError,
    InvalidNetworkError,
    NetworkGraph,
    Strategy,
    best_response,
    flow_path,
    flow_throughput,
    initial_star,
    run_link_formation,
    validate_graph,
    verify_nash,
)
from .model import (
    BaseStation,
    EconomicParams,
    Position,
    RadioParams,
    Scenario,
    ScenarioSpec,
    ServiceProvider,
    TerminalDevice,
    generate_scenario,
    toggle_source,
)
from .radio import (
    PacketSuccess,
    RelayPath,
    ShannonTdd,
    available_models,
    is_admissible,
    link_snr,
    path_throughput,
    resolve_model,
)
from .tables import (
    TableUtilities,
    check_cost_linearity,
    fixture_table,
    read_utility_table,
    write_utility_table,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BaseStation",
    "CharacteristicCache",
    "CoalitionStructure",
    "ConvergenceError",
    "CycleError",
    "ENUMERATION_LIMIT",
    "EconomicParams",
    "InvalidNetworkError",
    "Move",
    "NetworkGraph",
    "PacketSuccess",
    "Position",
    "RadioParams",
    "RelayPath",
    "RunConfig",
    "Scenario",
    "ScenarioSpec",
    "ServiceProvider",
    "ShannonTdd",
    "SimulatedUtilities",
    "Strategy",
    "TableUtilities",
    "TerminalDevice",
    "TransitionGraph",
    "allocate",
    "available_models",
    "best_response",
    "characteristic_value",
    "check_allocation_stability",
    "check_cost_linearity",
    "enumerate_structures",
    "example_config_path",
    "fixture_table",
    "flow_path",
    "flow_throughput",
    "generate_scenario",
    "initial_star",
    "is_admissible",
    "link_snr",
    "load_config",
    "omega_labels",
    "parse_config",
    "path_throughput",
    "read_utility_table",
    "resolve_model",
    "run_coalition_formation",
    "run_link_formation",
    "shapley",
    "shapley_from_table",
    "stable_set",
    "structure_count_formula",
    "toggle_source",
    "transition_graph",
    "validate_graph",
    "verify_nash",
    "write_utility_table",
]
