import os
import subprocess
import sys

import numpy as np
import pytest

from unbiot import kernel
from unbiot.experiments import closed_form_specs, config_for
from unbiot.model import Association, Protocol, ProtocolSpec, Scheme, table2_config
from unbiot.sim import InterferenceField, SimOptions, kernel_params

compiled = pytest.mark.skipif("cython" not in kernel.backends(), reason="compiled kernel not built")

ALL_SPECS = closed_form_specs() + [ProtocolSpec(Protocol.UNSLOTTED_MULTIBAND, Scheme.PN, Association.NONE),
                                   ProtocolSpec(Protocol.UNSLOTTED_MULTIBAND, Scheme.RANDOM, Association.NEAREST)]


@compiled
@pytest.mark.parametrize("field", list(InterferenceField))
@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label)
def test_backends_agree(spec, field):
    cfg = config_for(table2_config(), spec)
    kp = kernel_params(cfg, spec, SimOptions(interference=field))
    a = kernel.max_sinr_batch(kp, 40, 30, "cython")
    b = kernel.max_sinr_batch(kp, 40, 30, "python")
    # same draws; only libm vs numpy rounding differs
    assert np.allclose(a, b, rtol=1e-12, atol=0)


@compiled
def test_backends_agree_with_noise_and_custom_bands():
    spec = ProtocolSpec(Protocol.SLOTTED_MULTIBAND, band_probs=(0.5, 0.2, 0.1, 0.1, 0.1))
    kp = kernel_params(table2_config(), spec, SimOptions(include_noise=True))
    assert np.allclose(kernel.max_sinr_batch(kp, 0, 30, "cython"), kernel.max_sinr_batch(kp, 0, 30, "python"),
                       rtol=1e-12, atol=0)


def test_batches_are_position_independent():
    spec = ProtocolSpec(Protocol.BENCHMARK, association=Association.NEAREST)
    kp = kernel_params(table2_config(), spec, SimOptions())
    whole = kernel.max_sinr_batch(kp, 0, 20)
    parts = np.concatenate([kernel.max_sinr_batch(kp, 0, 7), kernel.max_sinr_batch(kp, 7, 13)])
    assert np.array_equal(whole, parts)


def test_pure_python_selected_by_env():
    env = dict(os.environ, UNBIOT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from unbiot import kernel; print(kernel.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
