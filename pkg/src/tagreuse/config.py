"""
Run configuration of the command line tools.

Values come from, in increasing precedence: defaults, a TOML file, command
line flags and `key=value` overrides. Nested TOML tables are flattened to
dotted keys, so these two files are equivalent:

```
[bll]
d = 0.5
```

```
"bll.d" = 0.5
```
"""

import sys
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Iterator, Mapping, NamedTuple, Optional, Tuple

from .registry import PARAMETER_TYPES, PREDICTORS, STOCHASTIC, check_parameters
from .reuse import BINNINGS, FACTORS
from .synthetic import SynthParams
from .utils import ParameterError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _as_bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in {"1", "true", "yes", "on"}
    return bool(value)


def _as_names(value: Any) -> Tuple[str, ...]:
    if isinstance(value, str):
        value = value.split(",")
    return tuple(v.strip() for v in value if v.strip())


def _as_path(value: Any) -> Path:
    return Path(value)


# keys other than predictor and generator parameters
RUN_KEYS: Dict[str, Callable[[Any], Any]] = {
    "dataset": _as_path,
    "out": _as_path,
    "seed": int,
    "threads": int,
    "predictors": _as_names,
    "factor": str,
    "min_support": int,
    "bin": str,
    "weighted": _as_bool,
    "fixed_denominator": _as_bool,
    "metrics.f1_k": int,
    "metrics.ndcg_k": int,
}

SYNTH_TYPES: Dict[str, Callable[[Any], Any]] = {
    f"synth.{name}": type(default) for name, default in SynthParams()._asdict().items()
}


class RunConfig(NamedTuple):
    dataset: Optional[Path] = None
    # generator parameters, used when there is no dataset
    synth: Optional[SynthParams] = None
    predictors: Tuple[str, ...] = tuple(PREDICTORS)
    # dotted predictor parameters
    params: Mapping[str, Any] = {}
    f1_k: int = 5
    ndcg_k: int = 10
    fixed_denominator: bool = True
    out: Path = Path("out")
    seed: Optional[int] = None
    threads: int = 1
    factors: Tuple[str, ...] = FACTORS
    min_support: int = 1
    binning: str = "raw"
    weighted: bool = False

    @property
    def dataset_name(self) -> str:
        """The prefix of the files written for the dataset."""
        return self.dataset.stem if self.dataset is not None else "synth"

    def validate(self, command: str) -> "RunConfig":
        """Check the values needed by `command` (analyze, evaluate or synth)."""
        unknown = [p for p in self.predictors if p not in PREDICTORS]
        if unknown:
            raise ParameterError(f"unknown predictors: {', '.join(unknown)}")
        for k in (self.f1_k, self.ndcg_k):
            if not 1 <= k <= 100:
                raise ParameterError(f"metric k must be in 1..100: {k}")
        if self.threads < 1:
            raise ParameterError(f"threads must be positive: {self.threads}")
        if self.min_support < 1:
            raise ParameterError(f"min support must be positive: {self.min_support}")
        if self.binning not in BINNINGS:
            raise ParameterError(f"unknown binning: {self.binning}")

        if command == "synth":
            if self.synth is None:
                raise ParameterError("synth requires generator parameters")
        elif (self.dataset is None) == (self.synth is None):
            raise ParameterError("exactly one of a dataset or synth parameters is needed")

        stochastic = self.synth is not None and self.dataset is None
        if command == "evaluate":
            stochastic |= any(p in STOCHASTIC for p in self.predictors)
        if stochastic and self.seed is None:
            raise ParameterError(f"{command} requires a seed")
        if self.synth is not None:
            self.synth.validate()
        return self


def flatten(table: Mapping[str, Any], prefix: str = "") -> Iterator[Tuple[str, Any]]:
    """Flatten nested tables into dotted keys."""
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            yield from flatten(value, name + ".")
        else:
            yield name, value


def load_config(path: Path) -> Dict[str, Any]:
    """Read a TOML configuration file into flat dotted keys."""
    with open(path, "rb") as fp:
        try:
            table = tomllib.load(fp)
        except tomllib.TOMLDecodeError as error:
            raise ParameterError(f"{path}: {error}") from None
    return dict(flatten(table))


def parse_overrides(items: Iterable[str]) -> Dict[str, str]:
    """Parse `key=value` strings."""
    overrides = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"expected key=value: {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def _coerce(key: str, value: Any, kind: Callable[[Any], Any]) -> Any:
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ParameterError(f"invalid value for {key}: {value!r}") from None


def build_config(values: Mapping[str, Any]) -> RunConfig:
    """
    Build a `RunConfig` from flat dotted keys.

    Args:
        values: the merged configuration, later sources already overriding
            earlier ones

    Returns:
        the configuration (not yet validated for a command)
    """
    run: Dict[str, Any] = {}
    synth: Dict[str, Any] = {}
    predictor_params: Dict[str, Any] = {}

    for key, value in values.items():
        if value is None:
            continue
        if key in RUN_KEYS:
            run[key] = _coerce(key, value, RUN_KEYS[key])
        elif key in SYNTH_TYPES:
            kind = _as_bool if SYNTH_TYPES[key] is bool else SYNTH_TYPES[key]
            synth[key.split(".", 1)[1]] = _coerce(key, value, kind)
        elif key in PARAMETER_TYPES:
            predictor_params[key] = value
        else:
            raise ParameterError(f"unknown configuration key: {key}")

    factor = run.pop("factor", "all")
    if factor == "all":
        factors = FACTORS
    elif factor in FACTORS:
        factors = (factor,)
    else:
        raise ParameterError(f"unknown factor: {factor}")

    config = RunConfig(
        dataset=run.get("dataset", None),
        synth=SynthParams(**synth) if synth else None,
        predictors=run.get("predictors", RunConfig().predictors),
        params=check_parameters(predictor_params),
        f1_k=run.get("metrics.f1_k", 5),
        ndcg_k=run.get("metrics.ndcg_k", 10),
        fixed_denominator=run.get("fixed_denominator", True),
        out=run.get("out", Path("out")),
        seed=run.get("seed", None),
        threads=run.get("threads", 1),
        factors=factors,
        min_support=run.get("min_support", 1),
        binning=run.get("bin", "raw"),
        weighted=run.get("weighted", False),
    )
    return config
