"""hausstraight: ball-density certification, straight-part decomposition,
Hausdorff content estimation, and a measure-data semilinear Dirichlet solver."""

from .decomposition import (
    Decomposition,
    ExtractionSchedule,
    LocalizedDecomposition,
    StraightPart,
    decompose,
    extract_straight_part,
    localize,
    subset_with_mass,
)
from .fixtures import CANTOR_DIMENSION, FixtureSpec, generate
from .geometry import Ball, Segment, minimal_enclosing_ball
from .hausdorff import ContentEstimate, Cover, HausdorffParams, capacity_profile, content, omega
from .measure import (
    Atom,
    BallMassEvaluator,
    CarrierSubset,
    DiscreteMeasure,
    MeasureFormatError,
    SegmentPiece,
    ball_mass,
    load_measure,
    restrict,
    save_measure,
    total_mass,
)
from .potential_pde import (
    BumpTestFunction,
    GridDomain,
    GridField,
    SchemeConfig,
    SolverReport,
    distributional_residual,
    exp_integrability_probe,
    minimize_energy,
    newtonian_potential,
    solve_with_measure,
)
from .straightness import (
    CertRequest,
    DensityCertificate,
    certify,
    max_scale_of_straightness,
    worst_ball_ratio,
)

__version__ = "0.1.0"
