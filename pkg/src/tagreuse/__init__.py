"""Tag reuse analysis and prediction for social tagging datasets."""

from . import (
    config,
    evaluation,
    folkrank,
    folksonomy,
    pitf,
    predictors,
    registry,
    reuse,
    synthetic,
    utils,
)
