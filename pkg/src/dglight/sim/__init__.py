from .cityflow import import_cityflow, import_flow, import_roadnet
from .engine import (
    active_backend,
    apply_actions,
    at_decision_boundary,
    available_backends,
    build_grid,
    build_sim,
    restore,
    run_interval,
    run_to_boundary,
    set_backend,
    snapshot,
    step,
)
from .flow import FlowEntry, FlowSpec, flow_from_dict, flow_to_dict, load_flow, save_flow, synthetic_flow
from .metrics import MetricsReport, metrics
from .network import (
    APPROACHES,
    CONTROLLED_LANE_ORDER,
    DIRECTION_WORDS,
    MOVEMENTS,
    PHASE_MOVEMENTS,
    PHASE_NAMES,
    PHASES,
    Intersection,
    Lane,
    NetworkError,
    RoadNetwork,
    SignalPhase,
    build_grid_network,
    exit_heading,
    lane_id,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
)
from .observe import (
    IntersectionObservation,
    LaneObs,
    downstream_queues,
    intersection_queue_lengths,
    observe,
    observe_all,
)
from .state import SimConfig, SimState, Snapshot

__all__ = [
    "APPROACHES",
    "CONTROLLED_LANE_ORDER",
    "DIRECTION_WORDS",
    "MOVEMENTS",
    "PHASES",
    "PHASE_MOVEMENTS",
    "PHASE_NAMES",
    "FlowEntry",
    "FlowSpec",
    "Intersection",
    "IntersectionObservation",
    "Lane",
    "LaneObs",
    "MetricsReport",
    "NetworkError",
    "RoadNetwork",
    "SignalPhase",
    "SimConfig",
    "SimState",
    "Snapshot",
    "active_backend",
    "apply_actions",
    "at_decision_boundary",
    "available_backends",
    "build_grid",
    "build_grid_network",
    "build_sim",
    "downstream_queues",
    "exit_heading",
    "flow_from_dict",
    "flow_to_dict",
    "import_cityflow",
    "import_flow",
    "import_roadnet",
    "intersection_queue_lengths",
    "lane_id",
    "load_flow",
    "load_network",
    "metrics",
    "network_from_dict",
    "network_to_dict",
    "observe",
    "observe_all",
    "restore",
    "run_interval",
    "run_to_boundary",
    "save_flow",
    "save_network",
    "set_backend",
    "snapshot",
    "step",
    "synthetic_flow",
]
