"""Sum-product network learning with missing data."""

from ._core import DataError, LearnError, Model, SpnError, learn, synthetic

__all__ = ["DataError", "LearnError", "Model", "SpnError", "learn", "synthetic"]
