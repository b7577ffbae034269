"""Dimensionless transfer learning for braking maneuvers of car-like vehicles."""

from ._core import (
    SCHEMES,
    DatasetError,
    DimensionError,
    Ensemble,
    ExperimentError,
    FeatureError,
    FinalPose,
    GbtError,
    ManeuverError,
    ManeuverInput,
    VehicleSpec,
    analytic_arc_oracle,
    comparative_study,
    default_vehicles,
    features,
    fit_gbt,
    grid_size,
    learning_curve,
    loads_ensemble,
    pi_basis,
    run_matrix,
    simulate_dynamic_surrogate,
    simulate_kinematic,
    transform_row,
    vehicle,
    write_dataset,
)

__all__ = [name for name in dir() if not name.startswith("_")]
