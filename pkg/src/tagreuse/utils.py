"""Common utilities imported in other modules."""

import os
import tempfile
from pathlib import Path
from typing import NamedTuple, Union

SECONDS_PER_DAY = 86400


class TagReuseError(Exception):
    """Base for all errors raised from the package."""

    pass


class ParseError(TagReuseError):
    """A dataset line could not be parsed."""

    def __init__(self, reason: str, line: int, source: str = "<stream>"):
        super().__init__(f"{source}:{line}: {reason}")
        self.reason = reason
        self.line = line
        self.source = source


class DataError(TagReuseError):
    """The data is valid line by line, but unusable as a whole."""

    pass


class ParameterError(TagReuseError):
    """A parameter or configuration value is out of its domain."""

    pass


class ScoredTag(NamedTuple):
    """A tag with the score a predictor assigned to it."""

    tag: str
    score: float


def atomic_write(path: Path, content: Union[str, bytes]):
    """
    Write `content` to `path` such that readers see either the old file or
    the complete new file.

    The content is written to a temporary file in the same directory, which
    is then renamed over `path`.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(content, bytes) else "w"
    fd, tmp_name = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        if mode == "wb":
            with os.fdopen(fd, mode) as fp:
                fp.write(content)
        else:
            with os.fdopen(fd, mode, encoding="utf8", newline="") as fp:
                fp.write(content)
        os.replace(tmp_name, str(path))
    except BaseException:
        # the descriptor is closed by `fdopen`, only the file remains
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
