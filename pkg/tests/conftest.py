import numpy as np

from patrolkit.grid import ParkGrid, assemble_dataset


def flat_grid(width, height, k=1, posts=(0,), mask=None, cell_size=1.0):
    """All-inside park with zero features unless a mask is given."""
    n = width * height
    return ParkGrid(
        width=width, height=height,
        features=np.zeros((n, k)),
        feature_names=tuple(f"f_{i + 1}" for i in range(k)),
        patrol_posts=tuple(posts),
        mask=np.ones(n, bool) if mask is None else np.asarray(mask, bool),
        cell_size_km=cell_size,
    )


def dataset_from_rows(rows, width=None):
    """Build a 1-window dataset from (effort, label) pairs, one cell each."""
    n = len(rows)
    width = width or n
    grid = flat_grid(width, 1) if width == n else flat_grid(width, (n + width - 1) // width)
    effort = np.array([[e for e, _ in rows]], dtype=float)
    labels = np.array([[y for _, y in rows]], dtype=np.int8)
    return assemble_dataset(grid, effort, labels)
