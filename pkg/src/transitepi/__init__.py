"""Passenger mobility classification and traced epidemic simulation on
public-transport contact networks."""

from .classify import (
    ALL_GROUPS,
    GROUP_NAMES,
    ClassificationResult,
    DegenerateClusteringError,
    MobilityGroup,
    classify_exploration,
    classify_population,
    group_shares,
    kmeans_1d,
)
from .contacts import (
    DIRECT,
    INDIRECT,
    ExposureEvent,
    ExposureLog,
    PresenceInterval,
    build_exposure_log,
    build_presence_intervals,
    connected_components,
    degree_distribution,
    extract_exposures,
)
from .flows import (
    DataIntegrityError,
    GroupMatrix,
    GroupSummary,
    chord_export,
    chord_import,
    difference_matrix,
    group_flow_matrix,
    per_group_summary,
)
from .geo import HAVERSINE, PLANAR, haversine_m
from .ingest import (
    IngestReport,
    SchemaError,
    StopRef,
    TripFormat,
    TripRecord,
    filter_by_min_trips,
    parse_trip_records,
    population_vs_threshold,
    trip_frequency_distribution,
    write_trip_csv,
)
from .mobility import (
    MobilityVector,
    VisitProfile,
    build_visit_profile,
    encounter_count,
    k_radius_of_gyration,
    mobility_table,
    radius_of_gyration,
)
from .sim import (
    EnsembleResult,
    InfectionEvent,
    SimConfig,
    SimOutcome,
    run_ensemble,
    run_sir,
)
from .synth import BusNetwork, Route, SynthConfig, generate_network, generate_passengers, synthesize

__version__ = "0.1.0"
