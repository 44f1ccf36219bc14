"""Time the compiled and pure-Python realization kernels on the same batch.

    python bench/bench_kernels.py [--realizations 500] [--repeat 3]

Both backends consume identical random streams, so their max-SINR outputs
must agree to rounding; the script reports the largest relative difference
alongside the timings.
"""

import argparse
import time

import numpy as np

from unbiot import kernel
from unbiot.experiments import closed_form_specs, config_for
from unbiot.model import table2_config
from unbiot.sim import InterferenceField, SimOptions, kernel_params


def time_backend(fn, kp, n, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(kp, 0, n)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--realizations", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--field", choices=[f.value for f in InterferenceField], default="shared")
    args = ap.parse_args(argv)

    backends = kernel.backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the Python backend is available")
    base = table2_config()
    opts = SimOptions(interference=InterferenceField(args.field))
    print(f"{'protocol':32s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup   max rel diff")
    for spec in closed_form_specs():
        cfg = config_for(base, spec)
        kp = kernel_params(cfg, spec, opts)
        times, outs = {}, {}
        for name, fn in backends.items():
            times[name], outs[name] = time_backend(fn, kp, args.realizations, args.repeat)
        line = f"{spec.label:32s} " + " ".join(f"{times[b]:9.3f}s" for b in backends)
        if len(backends) == 2:
            a, b = outs["cython"], outs["python"]
            rel = np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)) if a.size else 0.0
            line += f"   {times['python'] / times['cython']:6.1f}x   {rel:.1e}"
        print(line)


if __name__ == "__main__":
    main()
