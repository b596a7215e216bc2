"""
Utility functions for the tentlab toolkit.
"""
import math
from typing import Any, List, Sequence, Tuple

import numpy as np

from .errors import ParameterError

TINY = 1e-300


def safe_get(data: dict, *keys: str, default: Any = None) -> Any:
    """
    Safely get nested dictionary value.

    Args:
        data: Dictionary to search
        *keys: Nested keys to traverse
        default: Default value if key not found

    Returns:
        Value at nested key path or default
    """
    current = data
    for key in keys:
        if not isinstance(current, dict) or key not in current:
            return default
        current = current[key]
    return current


def parse_descriptor(descriptor: str) -> Tuple[str, List[float]]:
    """
    Parse a weight descriptor string into its kind and numeric arguments.

    Args:
        descriptor: String like "power:0.5", "step:1:4" or "const:1"

    Returns:
        Tuple of (kind, arguments)

    Raises:
        ParameterError: If an argument is not a number
    """
    parts = descriptor.strip().split(":")
    kind = parts[0].strip().lower()
    try:
        args = [float(part) for part in parts[1:]]
    except ValueError:
        raise ParameterError(f"Descriptor '{descriptor}' has a non-numeric argument")
    return kind, args


def conjugate(p: float) -> float:
    """Hölder conjugate p' = p/(p-1); infinite for p = 1."""
    if p == 1.0:
        return math.inf
    return p / (p - 1.0)


def relative_error(a: float, b: float) -> float:
    """|a - b| / max(|a|, |b|), zero when both vanish."""
    scale = max(abs(a), abs(b))
    if scale < TINY:
        return 0.0
    return abs(a - b) / scale


def drift(values: Sequence[float]) -> float:
    """
    Largest relative change between consecutive entries of a refinement ladder.

    Args:
        values: Measured constants at increasing resolution

    Returns:
        max_i |v_{i+1} - v_i| / v_i, or inf if a non-final value vanishes or
        any value is not finite
    """
    worst = 0.0
    for previous, current in zip(values, values[1:]):
        if not (math.isfinite(previous) and math.isfinite(current)):
            return math.inf
        if previous <= 0.0:
            if current == previous:
                continue
            return math.inf
        worst = max(worst, abs(current - previous) / previous)
    return worst


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Deterministic generator for a (seed, stream...) pair.

    Independent sub-streams keep each check reproducible regardless of
    execution order.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))

