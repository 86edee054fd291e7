"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from filtnoise import _fallback

try:
    from filtnoise import _ext
except ImportError:
    _ext = None


def cases(rng):
    pts = rng.uniform(0, 2 * np.pi, (10_000, 2))
    kvec = np.array([(kx, ky) for kx in range(0, 11) for ky in range(-10, 11)
                     if (kx > 0 or ky > 0) and 8 <= round(np.hypot(kx, ky)) <= 10])
    cw = rng.standard_normal((len(kvec), 2))
    sw = rng.standard_normal((len(kvec), 2))
    cu = rng.standard_normal((512, 512))
    cv = rng.standard_normal((512, 512))
    return {
        f"mode_velocity ({len(pts)} points, {len(kvec)} modes)": ("mode_velocity", (pts, kvec, cw, sw)),
        f"spline_velocity ({len(pts)} points, 512^2 grid)": ("spline_velocity", (cu, cv, pts)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    impls = {"python": _fallback}
    if _ext is not None:
        impls["cython"] = _ext
    print(f"{'case':52s} " + " ".join(f"{k:>12s}" for k in impls) + "   speedup")
    for label, (name, fargs) in cases(rng).items():
        times = {}
        for k, mod in impls.items():
            fn = getattr(mod, name)
            times[k] = min(timeit.repeat(lambda: fn(*fargs), number=1, repeat=args.repeat))
        ref = getattr(_fallback, name)(*fargs)
        if _ext is not None:
            err = float(np.max(np.abs(getattr(_ext, name)(*fargs) - ref)))
            assert err < 1e-9, err
        speed = f"{times['python'] / times['cython']:8.1f}x" if "cython" in times else "       -"
        print(f"{label:52s} " + " ".join(f"{1e3 * t:10.2f}ms" for t in times.values()) + f"  {speed}")


if __name__ == "__main__":
    main()
