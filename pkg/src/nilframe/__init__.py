"""Moving-frame computations for immersions into two-step nilpotent Lie groups."""

__version__ = "0.1.0"

from .algebra import Algebra, AlgebraError, builtin, random_algebra, validate  # noqa: E402
from .estimators import CompatibilityChecker, ImmersionReconstructor  # noqa: E402
from .forms import Chart, FormField  # noqa: E402
from .forward import catalog_immersion, extract_data  # noqa: E402
from .immersion import ImmersionData, check_compatibility  # noqa: E402
from .reconstruction import align, integrate_immersion, solve_gauge  # noqa: E402

__all__ = [
    "Algebra",
    "AlgebraError",
    "builtin",
    "random_algebra",
    "validate",
    "Chart",
    "FormField",
    "ImmersionData",
    "check_compatibility",
    "catalog_immersion",
    "extract_data",
    "solve_gauge",
    "integrate_immersion",
    "align",
    "CompatibilityChecker",
    "ImmersionReconstructor",
]
