"""Billiards on flat and conformally curved 2-tori with Riccati-based hyperbolicity checks."""

__version__ = "0.1.0"

from .geometry import BilliardTable, CircleWall, LineWall, MetricField, SplineWall, TableError, curvature_at, wall_frame
from .dynamics import CollisionEvent, PhasePoint, TrajectoryRecord, flow, horizon_probe, next_collision, sample_ensemble
from .tangent import (
    JacobiFrame,
    RiccatiState,
    TangentMatrix,
    cocycle,
    jacobi_collision,
    jacobi_flight,
    riccati_collision,
    riccati_consistency_check,
    riccati_flight,
)
from .certify import (
    Certificate,
    ConeParams,
    CriterionConstants,
    HyperbolicityEstimate,
    TimeSequence,
    certify_sinai,
    certify_theorem1,
    certify_theorem3,
    check_theorem4_hypothesis,
    cone_map_check,
    expansion_gain,
    invariant_directions,
    lyapunov_estimate,
)
