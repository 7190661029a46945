"""Universal compressed-sensing signal recovery by annealed MCMC.

The estimate minimises an empirical-entropy coding length plus a
quadratic data-fit term over a small reproduction alphabet.  ``samplers``
holds the fixed- and adaptive-level Gibbs samplers, ``sla`` the
size-and-level adaptive driver, ``harness`` the experiment sweeps and
``estimators`` scikit-learn style wrappers.
"""

from .estimators import BMCMCRegressor, LeastSquaresBaseline, LMCMCRegressor, SLARegressor
from .sla import SlaConfig, sla_mcmc
from .sources import SourceKind, SourceSpec, generate_signal, measure

__version__ = "0.1.0"

__all__ = [
    "BMCMCRegressor",
    "LMCMCRegressor",
    "LeastSquaresBaseline",
    "SLARegressor",
    "SlaConfig",
    "SourceKind",
    "SourceSpec",
    "generate_signal",
    "measure",
    "sla_mcmc",
]
