"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest
from hypothesis import settings

from layermet.image import BinaryMask

settings.register_profile("suite", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("suite")


def band_mask(width: int, top: int, bottom: int, height: int | None = None) -> BinaryMask:
    """Axis-aligned band occupying rows top..bottom over all columns."""
    h = height if height is not None else bottom + top + 10
    cells = np.zeros((h, width), dtype=bool)
    cells[top : bottom + 1, :] = True
    return BinaryMask(cells)


def flood_components(cells: np.ndarray, connectivity: int) -> list[set[tuple[int, int]]]:
    """Brute-force BFS flood fill; the labeling oracle. Returns pixel sets in
    raster discovery order."""
    if connectivity == 4:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    h, w = cells.shape
    seen = np.zeros_like(cells, dtype=bool)
    regions = []
    for y in range(h):
        for x in range(w):
            if not cells[y, x] or seen[y, x]:
                continue
            queue = [(y, x)]
            seen[y, x] = True
            pixels = set()
            while queue:
                cy, cx = queue.pop()
                pixels.add((cy, cx))
                for dy, dx in steps:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and cells[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            regions.append(pixels)
    return regions


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
