import dataclasses
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
import semver

# Numeric text output keeps 17 significant digits so written values parse back exactly.
FLOAT_FORMAT = "%.17g"


class EnhancedJSONEncoder(json.JSONEncoder):
    """
    Custom json encoder for dataclasses and numpy values,
    see https://docs.python.org/3/library/json.html#json.JSONEncoder.default
    Returns a serializable type
    """

    def default(self, o: Any) -> Union[Any, Dict[str, Any]]:
        if dataclasses.is_dataclass(o) and not isinstance(o, type):
            return dataclasses.asdict(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, Enum):
            return o.value
        if isinstance(o, Path):
            return o.as_posix()
        return super().default(o)


def valid_semver(string: str) -> Optional[semver.VersionInfo]:
    """
    Check if a string is a valid SemVer version.

    Args:
        string (str): The string to check.

    Returns:
        Optional[semver.VersionInfo]: The version if it's valid, otherwise None.
    """

    # Versions prefixed with a 'v' are accepted.
    if string.startswith("v"):
        string = string[1:]
    try:
        return semver.VersionInfo.parse(string)
    except ValueError:
        return None


def format_number(value: float) -> str:
    """
    Format a float with 17 significant digits, empty string for NaN.
    """

    if value is None or np.isnan(value):
        return ""
    return FLOAT_FORMAT % value


def spawn_generators(seed: Optional[int], count: int) -> List[np.random.Generator]:
    """
    Create independent random generators from a single seed.

    Args:
        seed (Optional[int]): Root seed, None for OS entropy.
        count (int): Number of generators to create.

    Returns:
        List[np.random.Generator]: One generator per independent job.
    """

    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


def child_seeds(seed: Optional[int], count: int) -> List[int]:
    """
    Derive reproducible integer seeds for independent jobs.
    """

    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def write_table(frame: pd.DataFrame, file_name: Union[str, Path]) -> None:
    """
    Write a table as comma separated UTF-8 text with LF line endings, missing values as empty fields.
    """

    frame.to_csv(file_name, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
