"""Transcribed published tables used as regression fixtures."""

import numpy as np

# Relative frequencies for the "not envious" (rows) by "envious" (columns) pair, N = 725.
ENVIOUS_FREQS = np.array(
    [
        [0.019, 0.007, 0.003, 0.028, 0.022],
        [0.007, 0.040, 0.050, 0.138, 0.014],
        [0.006, 0.047, 0.143, 0.030, 0.003],
        [0.054, 0.189, 0.029, 0.019, 0.007],
        [0.108, 0.018, 0.006, 0.008, 0.007],
    ]
)
ENVIOUS_N = 725


def envious_counts() -> np.ndarray:
    counts = np.rint(ENVIOUS_FREQS * ENVIOUS_N).astype(np.int64)
    assert counts.sum() == ENVIOUS_N
    return counts


NEURO_ITEMS = [
    "N1_P", "N1_N", "N2_P", "N2_N", "N3_P", "N3_N",
    "N4_P", "N4_N", "N5_P", "N5_N", "N6_P", "N6_N",
]

# Twelve-item neuroticism scale, items not reverse-coded.
NEURO_PEARSON = np.array(
    [
        [1.00, -0.32, 0.65, -0.44, 0.63, -0.44, 0.24, -0.22, 0.51, -0.41, 0.37, -0.29],
        [-0.32, 1.00, -0.34, 0.48, -0.34, 0.40, -0.16, 0.34, -0.32, 0.53, -0.28, 0.49],
        [0.65, -0.34, 1.00, -0.50, 0.70, -0.50, 0.24, -0.24, 0.50, -0.38, 0.48, -0.42],
        [-0.44, 0.48, -0.50, 1.00, -0.49, 0.59, -0.22, 0.37, -0.37, 0.50, -0.28, 0.46],
        [0.63, -0.34, 0.70, -0.49, 1.00, -0.47, 0.26, -0.25, 0.57, -0.39, 0.48, -0.44],
        [-0.44, 0.40, -0.50, 0.59, -0.47, 1.00, -0.25, 0.37, -0.39, 0.50, -0.27, 0.41],
        [0.24, -0.16, 0.24, -0.22, 0.26, -0.25, 1.00, -0.56, 0.24, -0.17, 0.17, -0.18],
        [-0.22, 0.34, -0.24, 0.37, -0.25, 0.37, -0.56, 1.00, -0.30, 0.40, -0.20, 0.39],
        [0.51, -0.32, 0.50, -0.37, 0.57, -0.39, 0.24, -0.30, 1.00, -0.62, 0.47, -0.41],
        [-0.41, 0.53, -0.38, 0.50, -0.39, 0.50, -0.17, 0.40, -0.62, 1.00, -0.32, 0.50],
        [0.37, -0.28, 0.48, -0.28, 0.48, -0.27, 0.17, -0.20, 0.47, -0.32, 1.00, -0.54],
        [-0.29, 0.49, -0.42, 0.46, -0.44, 0.41, -0.18, 0.39, -0.41, 0.50, -0.54, 1.00],
    ]
)

NEURO_ROBUST = np.array(
    [
        [1.00, -0.47, 0.80, -0.58, 0.79, -0.56, 0.30, -0.26, 0.63, -0.54, 0.49, -0.39],
        [-0.47, 1.00, -0.48, 0.58, -0.49, 0.54, -0.26, 0.45, -0.47, 0.68, -0.43, 0.63],
        [0.80, -0.48, 1.00, -0.66, 0.85, -0.60, 0.32, -0.32, 0.64, -0.50, 0.60, -0.56],
        [-0.58, 0.58, -0.66, 1.00, -0.70, 0.76, -0.37, 0.49, -0.48, 0.60, -0.35, 0.55],
        [0.79, -0.49, 0.85, -0.70, 1.00, -0.62, 0.35, -0.39, 0.66, -0.52, 0.59, -0.57],
        [-0.56, 0.54, -0.60, 0.76, -0.62, 1.00, -0.42, 0.49, -0.52, 0.58, -0.37, 0.53],
        [0.30, -0.26, 0.32, -0.37, 0.35, -0.42, 1.00, -0.92, 0.35, -0.30, 0.30, -0.33],
        [-0.26, 0.45, -0.32, 0.49, -0.39, 0.49, -0.92, 1.00, -0.39, 0.50, -0.33, 0.53],
        [0.63, -0.47, 0.64, -0.48, 0.66, -0.52, 0.35, -0.39, 1.00, -0.82, 0.59, -0.55],
        [-0.54, 0.68, -0.50, 0.60, -0.52, 0.58, -0.30, 0.50, -0.82, 1.00, -0.44, 0.61],
        [0.49, -0.43, 0.60, -0.35, 0.59, -0.37, 0.30, -0.33, 0.59, -0.44, 1.00, -0.75],
        [-0.39, 0.63, -0.56, 0.55, -0.57, 0.53, -0.33, 0.53, -0.55, 0.61, -0.75, 1.00],
    ]
)


def reverse_negative(R: np.ndarray) -> np.ndarray:
    """Flip the sign of every negatively worded item, as reverse-coding would."""
    s = np.array([-1.0 if name.endswith("_N") else 1.0 for name in NEURO_ITEMS])
    return R * np.outer(s, s)
