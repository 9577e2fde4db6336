"""Utility functions for rankeval"""
import hashlib
import logging
import math
import os
import re
from typing import Optional

from constants import UNDEF_TOKEN
from perm_core import Permutation, PermutationError, SwapSpec, compose, from_text, identity, reverse, swap

logger = logging.getLogger(__name__)

# idN, revN, optionally followed by /i-j to compose with a swap
_SHORTHAND = re.compile(r"^(id|rev)(\d+)(?:/(\d+)-(\d+))?$")


def parse_permutation_arg(value: str) -> Permutation:
    """
    Parse a permutation given on the command line.

    Accepts a path to a file holding the comma-separated image (first
    non-blank line not starting with #), an inline image such as "2,1,3",
    or the shorthands "id10", "rev10" and "id10/1-2" (id10 with positions 1
    and 2 swapped).

    Args:
        value: File path, inline text or shorthand

    Returns:
        Parsed Permutation

    Raises:
        PermutationError: if the value cannot be parsed
    """
    text = value.strip()
    if os.path.isfile(text):
        with open(text, "r", encoding="utf-8") as handle:
            lines = [ln.strip() for ln in handle if ln.strip() and not ln.strip().startswith("#")]
        if not lines:
            raise PermutationError(f"No permutation found in file {text}")
        logger.debug(f"Read permutation from {text}")
        return from_text(lines[0])

    match = _SHORTHAND.match(text)
    if match:
        kind, n, i, j = match.groups()
        base = identity(int(n)) if kind == "id" else reverse(int(n))
        if i is None:
            return base
        return compose(base, swap(int(n), SwapSpec(int(i), int(j))))
    return from_text(text)


def is_undefined(value: Optional[float]) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def format_value(value: Optional[float], digits: int = 12) -> str:
    """Format a metric value with the given significant digits, or the undef token"""
    if is_undefined(value):
        return UNDEF_TOKEN
    return f"{float(value):.{digits}g}"


def file_digest(path: str) -> str:
    """sha256 hex digest of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def parse_csv_list(value: Optional[str]) -> Optional[list]:
    if value is None:
        return None
    return [item.strip() for item in str(value).split(",") if item.strip()]


def describe_error(error: Exception) -> str:
    """
    Convert exceptions to short user-facing messages.

    Args:
        error: Exception object

    Returns:
        Message naming the problem, including the original detail when useful
    """
    ERROR_MESSAGES = {
        "PermutationError": "Invalid permutation",
        "DimensionError": "Rankings have different lengths",
        "EnumerationLimitError": "Exhaustive size too large",
        "UnknownMetricError": "Unknown metric",
        "MetricDomainError": "Metric not defined for these inputs",
        "FileNotFoundError": "File not found",
        "PermissionError": "Permission denied",
        "IsADirectoryError": "Output path is a directory",
        "OSError": "I/O error",
    }

    for cls in type(error).__mro__:
        if cls.__name__ in ERROR_MESSAGES:
            return f"{ERROR_MESSAGES[cls.__name__]}: {error}"

    error_str = str(error).lower()
    if "permission denied" in error_str:
        return f"Permission denied: {error}"
    if "no such file" in error_str:
        return f"File not found: {error}"

    return f"Unexpected error: {error}"
