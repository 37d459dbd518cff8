"""Build predictors from their stable names and dotted parameter keys."""

from typing import Any, Callable, Dict, Mapping, Optional

from .folkrank import FolkRankParams, FolkRankPredictor
from .pitf import PitfParams, PitfPredictor
from .predictors import (
    BLLACPredictor,
    BLLParams,
    BLLPredictor,
    GIRPParams,
    GIRPPredictor,
    MostPopularPredictor,
    RecencyPredictor,
    SemConPredictor,
    TagPredictor,
)
from .utils import ParameterError

# every recognised parameter key, and the type of its value
PARAMETER_TYPES: Dict[str, Callable[[Any], Any]] = {
    "bll.d": float,
    "bllac.d": float,
    "bllac.beta": float,
    "girp.lambda": float,
    "folkrank.d": float,
    "folkrank.tol": float,
    "folkrank.max_iter": int,
    "folkrank.binary": bool,
    "pitf.k": int,
    "pitf.learn_rate": float,
    "pitf.regularization": float,
    "pitf.epochs": int,
    "pitf.negatives": int,
}

# predictors whose output depends on a random seed
STOCHASTIC = {"pitf"}


def _bll(params: Mapping[str, Any], seed: Optional[int]) -> TagPredictor:
    return BLLPredictor(BLLParams(d=params.get("bll.d", BLLParams().d)))


def _bllac(params: Mapping[str, Any], seed: Optional[int]) -> TagPredictor:
    # share the decay with plain BLL unless set explicitly
    d = params.get("bllac.d", params.get("bll.d", BLLParams().d))
    return BLLACPredictor(BLLParams(d=d, beta=params.get("bllac.beta", BLLParams().beta)))


def _girp(params: Mapping[str, Any], seed: Optional[int]) -> TagPredictor:
    return GIRPPredictor(GIRPParams(lam=params.get("girp.lambda", GIRPParams().lam)))


def _folkrank(params: Mapping[str, Any], seed: Optional[int]) -> TagPredictor:
    defaults = FolkRankParams()
    return FolkRankPredictor(
        FolkRankParams(
            d=params.get("folkrank.d", defaults.d),
            tol=params.get("folkrank.tol", defaults.tol),
            max_iter=params.get("folkrank.max_iter", defaults.max_iter),
            binary=params.get("folkrank.binary", defaults.binary),
        )
    )


def _pitf(params: Mapping[str, Any], seed: Optional[int]) -> TagPredictor:
    if seed is None:
        raise ParameterError("pitf requires a seed")
    defaults = PitfParams()
    return PitfPredictor(
        PitfParams(
            k=params.get("pitf.k", defaults.k),
            learn_rate=params.get("pitf.learn_rate", defaults.learn_rate),
            regularization=params.get("pitf.regularization", defaults.regularization),
            epochs=params.get("pitf.epochs", defaults.epochs),
            negatives=params.get("pitf.negatives", defaults.negatives),
        ),
        seed=seed,
    )


PREDICTORS: Dict[str, Callable[[Mapping[str, Any], Optional[int]], TagPredictor]] = {
    "mp": lambda params, seed: MostPopularPredictor(),
    "recency": lambda params, seed: RecencyPredictor(),
    "semcon": lambda params, seed: SemConPredictor(),
    "girp": _girp,
    "bll": _bll,
    "bllac": _bllac,
    "folkrank": _folkrank,
    "pitf": _pitf,
}


def check_parameters(params: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Validate the keys of `params` and coerce their values to the expected
    types.
    """
    checked = {}
    for key, value in params.items():
        kind = PARAMETER_TYPES.get(key, None)
        if kind is None:
            raise ParameterError(f"unknown parameter: {key}")
        if kind is bool and isinstance(value, str):
            value = value.strip().lower() in {"1", "true", "yes", "on"}
        try:
            checked[key] = kind(value)
        except (TypeError, ValueError):
            raise ParameterError(f"invalid value for {key}: {value!r}") from None
    return checked


def build_predictor(
    name: str, params: Mapping[str, Any] = None, seed: Optional[int] = None
) -> TagPredictor:
    """
    Build the (unfitted) predictor registered under `name`.

    Args:
        name: one of `PREDICTORS`
        params: dotted parameter keys, such as `bll.d`
        seed: the seed of stochastic predictors

    Returns:
        the predictor
    """
    factory = PREDICTORS.get(name, None)
    if factory is None:
        raise ParameterError(f"unknown predictor: {name}")
    return factory(check_parameters(params or {}), seed)
