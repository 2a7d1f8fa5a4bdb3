from __future__ import annotations

import numpy as np


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a run seeded with ``seed``.

    Equivalent to the ``index``-th child of ``SeedSequence(seed).spawn``, so the
    stream depends only on ``(seed, index)`` and not on evaluation order.
    """
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def student_t(rng: np.random.Generator, nu: float, size: int) -> np.ndarray:
    """Standard Student-t draws built as ``Z / sqrt(chi2_nu / nu)``."""
    z = rng.standard_normal(size)
    v = rng.chisquare(nu, size)
    return z / np.sqrt(v / nu)
