"""Model families addressable by name."""

from __future__ import annotations

from ..priors import ConfigurationError
from .linear_gaussian import LinearGaussianModel
from .negbin import NegativeBinomialModel
from .poisson import PoissonRandomWalkModel, PoissonStructuralModel
from .sv import StochasticVolatilityModel

OUTLIER_OMEGA = 0.03


def _sv(leverage, omega):
    def make(**opts):
        opts.setdefault("omega", omega)
        return StochasticVolatilityModel(leverage=leverage, **opts)

    return make


MODELS = {
    "sv": _sv(False, 0.0),
    "sv_leverage": _sv(True, 0.0),
    "sv_outlier": _sv(False, OUTLIER_OMEGA),
    "sv_leverage_outlier": _sv(True, OUTLIER_OMEGA),
    "negbin": NegativeBinomialModel,
    "poisson_rw": PoissonRandomWalkModel,
    "poisson_structural": PoissonStructuralModel,
    "linear_gaussian": LinearGaussianModel,
}


def build_model(name: str, **options):
    """Instantiate the model registered as ``name`` with keyword ``options``."""
    try:
        factory = MODELS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {name!r}; available: {', '.join(sorted(MODELS))}"
        ) from None
    try:
        model = factory(**options)
    except TypeError as exc:
        raise ConfigurationError(f"bad options for model {name!r}: {exc}") from None
    return model


__all__ = [
    "MODELS",
    "build_model",
    "LinearGaussianModel",
    "NegativeBinomialModel",
    "PoissonRandomWalkModel",
    "PoissonStructuralModel",
    "StochasticVolatilityModel",
]
