"""Sum ranges and explicit rearrangements of conditionally convergent
vector series, plus a torus series that no ordering makes converge."""
from .exceptions import *  # noqa: F401,F403
from .geometry import (
    ConvexWitness,
    Subspace,
    caratheodory_reduce,
    separating_direction,
    simplex_inradius,
    zero_in_convex_hull,
)
from .series import SeriesSpec, StructureCertificate, TermStream, builtin_family, load_spec, serialize_spec
from .scalar import ScalarSeries, Verdict, classify_scalar, riemann_rearrange
from .directions import check_terms_vanish, estimate_divergence_directions
from .steering import SteeringContext, build_omega, build_steering_context, steer
from .rearranger import (
    Budgets,
    PermutationStream,
    SumRange,
    analyze,
    check_feasibility,
    rearrange_to_target,
    verify_stream,
)
from .torus import (
    TorusPoint,
    build_counterexample,
    character_rearrange,
    enumerate_characters,
    torus_metric,
    verify_counterexample,
)

__version__ = "0.1.0"
