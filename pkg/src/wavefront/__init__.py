"""Wave-front tracking for systems with piecewise genuinely nonlinear fields."""
from .envelope import contact_decomposition, lower_convex_envelope, upper_concave_envelope
from .flux_model import FluxModel, ScalarFlux, burgers, make_model, two_inflection
from .riemann import accurate_solver, fixed_point_curve, solve_riemann
from .tracker import FrontLog, FrontTracker, run

__version__ = "0.1.0"
