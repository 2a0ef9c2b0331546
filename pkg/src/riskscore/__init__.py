"""Infection risk scores over temporal contact networks."""
from .ble import decode, encode, rssi_to_weight
from .contact_graph import (
    ContactRecord,
    DatasetFormat,
    OccupancyStats,
    SyntheticSpec,
    TemporalGraph,
    generate_synthetic,
    ingest_dataset,
    load_dataset,
    neighborhood,
    occupancy_stats,
    serialize,
)
from .epidemic import (
    Compartment,
    EpidemicParams,
    ode_reference,
    seed_infections,
    step_epidemic,
    tag_infections,
)
from .experiment import ExperimentConfig, run_experiment, simulate_run
from .metrics import (
    MetricsFrame,
    RunSummary,
    aggregate_runs,
    alerted_fraction,
    median_ratio,
    region_score,
)
from .risk import (
    ExposureModel,
    NeighborContribution,
    RiskState,
    WeightModel,
    isolation_time_to_floor,
    neighbor_exposure,
    step_population,
    update_risk,
)

__version__ = "0.1.0"
