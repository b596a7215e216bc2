"""
Configuration settings for the tentlab toolkit.
"""
import os
from typing import List, Tuple
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def parse_ladder(text: str) -> List[Tuple[int, int]]:
    """
    Parse a resolution ladder such as "256x16,512x32".

    Args:
        text: Comma separated CELLSxLEVELS pairs

    Returns:
        List of (cells_per_axis, t_levels) pairs

    Raises:
        ValueError: If a step is malformed or not positive
    """
    steps = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            cells, levels = (int(part) for part in chunk.lower().split("x"))
        except ValueError:
            raise ValueError(f"Malformed resolution step '{chunk}', expected CELLSxLEVELS")
        if cells < 2 or levels < 1:
            raise ValueError(f"Resolution step '{chunk}' needs cells >= 2 and levels >= 1")
        steps.append((cells, levels))
    if not steps:
        raise ValueError("Resolution ladder is empty")
    return steps


class Config:
    """Toolkit configuration."""

    # Reproducibility
    SEED: int = int(os.getenv("TENTLAB_SEED", "20240601"))

    # Suite execution
    JOBS: int = int(os.getenv("TENTLAB_JOBS", "1"))
    OUTPUT_DIR: str = os.getenv("TENTLAB_OUTPUT_DIR", "reports")
    FORMAT: str = os.getenv("TENTLAB_FORMAT", "both")
    LOG_LEVEL: str = os.getenv("TENTLAB_LOG_LEVEL", "INFO")

    # Resolution ladders (N cells per axis x K t-levels)
    LADDER_1D: str = os.getenv("TENTLAB_LADDER_1D", "256x16,512x32")
    LADDER_2D: str = os.getenv("TENTLAB_LADDER_2D", "32x8,64x16")

    # Numerical tolerances
    STABILITY_TOL: float = float(os.getenv("TENTLAB_STABILITY_TOL", "0.25"))
    DIVERGENCE_GROWTH: float = float(os.getenv("TENTLAB_DIVERGENCE_GROWTH", "1.25"))
    IDENTITY_RTOL: float = float(os.getenv("TENTLAB_IDENTITY_RTOL", "1e-10"))

    # Stencil cache capacity (entries)
    STENCIL_CACHE_SIZE: int = int(os.getenv("TENTLAB_STENCIL_CACHE_SIZE", "256"))

    FORMATS: Tuple[str, ...] = ("json", "csv", "both")

    @classmethod
    def ladder(cls, dim: int) -> List[Tuple[int, int]]:
        """Default resolution ladder for a dimension."""
        return parse_ladder(cls.LADDER_1D if dim == 1 else cls.LADDER_2D)

    @classmethod
    def validate(cls) -> None:
        """Validate configuration values."""
        if cls.JOBS < 1:
            raise ValueError("TENTLAB_JOBS must be a positive integer")
        if cls.STENCIL_CACHE_SIZE < 1:
            raise ValueError("TENTLAB_STENCIL_CACHE_SIZE must be a positive integer")
        if cls.FORMAT not in cls.FORMATS:
            raise ValueError(f"TENTLAB_FORMAT must be one of {', '.join(cls.FORMATS)}")
        if not 0.0 < cls.STABILITY_TOL < 1.0:
            raise ValueError("TENTLAB_STABILITY_TOL must lie in (0, 1)")
        if not 0.0 < cls.IDENTITY_RTOL < 1.0:
            raise ValueError("TENTLAB_IDENTITY_RTOL must lie in (0, 1)")
        if cls.DIVERGENCE_GROWTH <= 1.0:
            raise ValueError("TENTLAB_DIVERGENCE_GROWTH must be greater than 1")
        parse_ladder(cls.LADDER_1D)
        parse_ladder(cls.LADDER_2D)


config = Config()
