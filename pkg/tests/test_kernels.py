import os
import subprocess
import sys

import numpy as np
import pytest

from demri_eval import kernels

needs_both = pytest.mark.skipif(len(kernels.BACKENDS) < 2, reason="compiled backend unavailable")


@needs_both
@pytest.mark.parametrize("seed", range(5))
def test_flood_backends_agree_with_ties(seed):
    rng = np.random.default_rng(seed)
    elev = rng.integers(0, 4, (20, 17)).astype(float)  # heavy plateaus exercise tie-breaking
    mask = rng.random((20, 17)) < 0.8
    markers = np.zeros((20, 17), np.int32)
    idx = rng.choice(np.flatnonzero(mask), 6, replace=False)
    markers.flat[idx] = rng.integers(1, 3, 6)
    a = kernels.flood_2d(elev, markers, mask, "python")
    b = kernels.flood_2d(elev, markers, mask, "compiled")
    np.testing.assert_array_equal(a, b)
    assert not a[~mask].any()
    np.testing.assert_array_equal(a.flat[idx], markers.flat[idx])


@needs_both
def test_hausdorff_backends_agree():
    rng = np.random.default_rng(10)
    a, b = rng.normal(size=(700, 3)), rng.normal(size=(300, 3))
    ref = min(((a[:, None] - b[None]) ** 2).sum(-1).min(1).max(), np.inf)
    for name in kernels.BACKENDS:
        assert kernels.directed_hausdorff_sq(a, b, name) == pytest.approx(ref, rel=1e-12)


@needs_both
def test_glcm_backends_agree():
    rng = np.random.default_rng(11)
    q = rng.integers(0, 5, (12, 9, 3)).astype(np.int32)
    mask = rng.random((12, 9, 3)) < 0.6
    for dx, dy in [(0, 1), (-1, 1), (-1, 0), (-1, -1)]:
        np.testing.assert_array_equal(kernels.glcm_counts(q, mask, dx, dy, 5, "python"),
                                      kernels.glcm_counts(q, mask, dx, dy, 5, "compiled"))


def test_pure_env_forces_fallback():
    env = dict(os.environ, DEMRI_EVAL_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from demri_eval import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"
