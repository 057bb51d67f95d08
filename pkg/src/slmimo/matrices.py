"""Reference sparse-layering (SL) matrices used throughout the examples,
tests and baselines.

``A_EXAMPLE`` is the 4x6 full-load example layering; ``A_X``/``A_Y`` mimic the
connectivity shape of classical X-/Y-precoders; ``A1``/``A2`` are the 4x4
layerings used for the 4-antenna comparisons and ``A3``/``A4`` the 6x6 ones.
"""

import numpy as np

A_EXAMPLE = np.array([
    [1, 1, 1, 0, 0, 0],
    [1, 0, 0, 1, 1, 0],
    [0, 1, 0, 1, 0, 1],
    [0, 0, 1, 0, 1, 1],
], dtype=np.int8)

A_X = np.array([
    [1, 0, 0, 1],
    [0, 1, 1, 0],
    [0, 1, 1, 0],
    [1, 0, 0, 1],
], dtype=np.int8)

A_Y = np.array([
    [1, 0, 0, 1],
    [0, 1, 1, 0],
    [0, 1, 0, 0],
    [1, 0, 0, 0],
], dtype=np.int8)

A1 = np.array([
    [1, 1, 1, 0],
    [1, 0, 0, 1],
    [0, 1, 0, 1],
    [0, 0, 1, 0],
], dtype=np.int8)

A2 = np.array([
    [1, 1, 0, 0],
    [0, 0, 1, 1],
    [1, 0, 0, 1],
    [0, 1, 1, 0],
], dtype=np.int8)

A3 = np.array([
    [1, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 1],
    [0, 0, 1, 0, 0, 1],
    [0, 1, 0, 0, 1, 0],
    [1, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, 0],
], dtype=np.int8)

A4 = np.array([
    [1, 1, 0, 0, 0, 0],
    [0, 0, 1, 1, 0, 0],
    [0, 0, 0, 0, 1, 1],
    [0, 0, 0, 1, 1, 0],
    [0, 1, 1, 0, 0, 0],
    [1, 0, 0, 0, 0, 1],
], dtype=np.int8)

BY_NAME = {
    "example": A_EXAMPLE,
    "x": A_X,
    "y": A_Y,
    "a1": A1,
    "a2": A2,
    "a3": A3,
    "a4": A4,
}


def get(name: str) -> np.ndarray:
    try:
        return BY_NAME[name.lower()]
    except KeyError:
        raise KeyError(f"unknown SL matrix name {name!r}; "
                       f"known: {sorted(BY_NAME)}") from None
