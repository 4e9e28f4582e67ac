"""Backend parity: the compiled Dykstra kernel vs the pure-Python mirror."""

import numpy as np
import pytest

from coxerr._kernels import BACKEND, pure

try:
    from coxerr._kernels import _core
except ImportError:
    _core = None


def test_a_backend_was_selected():
    assert BACKEND in ("compiled", "pure")


@pytest.mark.skipif(_core is None, reason="compiled kernel not built")
def test_backends_agree_bit_for_bit():
    rng = np.random.default_rng(0)
    for size in (2, 11, 101):
        for _ in range(20):
            raw = rng.normal(0.5, 2.0, size)
            step = rng.uniform(0.01, 1.0)
            floor = rng.uniform(0.0, 0.3)
            ceiling = floor + rng.uniform(1.0, 5.0)
            out_c, sw_c, ch_c = _core.dykstra_project(
                raw, step, floor, ceiling, 1e-10, 10_000
            )
            out_p, sw_p, ch_p = pure.dykstra_project(
                raw, step, floor, ceiling, 1e-10, 10_000
            )
            np.testing.assert_array_equal(out_c, out_p)
            assert sw_c == sw_p
            assert ch_c == ch_p


@pytest.mark.skipif(_core is None, reason="compiled kernel not built")
def test_pure_env_override(tmp_path):
    import subprocess
    import sys

    code = (
        "import os; os.environ['COXERR_PURE']='1'; "
        "from coxerr import _kernels; print(_kernels.BACKEND)"
    )
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert proc.stdout.strip() == "pure"
