"""
Input validation utilities.

This module provides helper functions for validating command input,
run labels, run-relative file paths, and numeric arguments.
"""

import math
from pathlib import Path
from typing import List, Optional

from slugify import slugify


def sanitize_run_label(label: str, max_length: int = 60) -> str:
    """
    Turn a free-form run label into a filesystem-safe directory stem.

    Args:
        label: User supplied label (e.g. "rsv eps=0.3")
        max_length: Maximum length of the sanitized label

    Returns:
        str: Lowercase hyphenated label, "run" when nothing usable remains
    """
    safe_name = slugify(label, max_length=max_length)

    if not safe_name:
        safe_name = "run"

    return safe_name


def validate_run_path(base_path: Path, relative_path: str) -> Optional[Path]:
    """
    Resolve a manifest-relative path and keep it inside the run directory.

    Args:
        base_path: Run directory
        relative_path: Path as listed in the manifest

    Returns:
        Path: Resolved absolute path if valid, None otherwise
    """
    try:
        full_path = (base_path / relative_path).resolve()

        if base_path.resolve() in full_path.parents or full_path == base_path.resolve():
            return full_path

        return None
    except Exception:
        return None


def is_finite_positive(value: float) -> bool:
    """
    Check that a scalar is finite and strictly positive.

    Args:
        value: Number to check

    Returns:
        bool: True if 0 < value < inf
    """
    try:
        return math.isfinite(value) and value > 0
    except TypeError:
        return False


def parse_alpha_list(text: str) -> List[float]:
    """
    Parse a comma separated list of Hölder exponents.

    Accepts fractions such as "3/5".

    Args:
        text: e.g. "3/5,0.7,0.8,1"

    Returns:
        List of exponents in (0, 1]

    Raises:
        ValueError: If an entry is malformed or outside (0, 1]
    """
    alphas = []
    for raw in text.split(","):
        item = raw.strip()
        if not item:
            continue
        if "/" in item:
            num, den = item.split("/", 1)
            value = float(num) / float(den)
        else:
            value = float(item)
        if not 0.0 < value <= 1.0:
            raise ValueError(f"Hölder exponent must lie in (0, 1], got {item}")
        alphas.append(value)

    if not alphas:
        raise ValueError("At least one Hölder exponent is required")

    return alphas
