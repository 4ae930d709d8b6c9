"""Private utility functions for the API."""
import numpy as np


def _split_range(count: int, size: int) -> list[slice]:
    # Splits range(count) into consecutive slices of at most `size` items.
    if size < 1:
        raise ValueError("Chunk size must be at least 1.")
    return [
        slice(start, min(start + size, count))
        for start in range(0, count, size)]


def _in_box(
    lower: np.ndarray, upper: np.ndarray, points: np.ndarray
) -> np.ndarray:
    # Returns a boolean per point: True if it lies in the closed box.
    points = np.atleast_2d(points)
    return np.all((points >= lower) & (points <= upper), axis=1)
