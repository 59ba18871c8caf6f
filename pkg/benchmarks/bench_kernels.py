"""Time the compiled numeric core against the pure-numpy fallback.

Both backends are imported side by side, checked for agreement on each
workload, then timed with timeit (best of N repeats).  Run from the repo
root after an editable install:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 9 --points 500 50000

If the compiled extension is unavailable the numpy column still runs and
the rest of the table is dashed out.
"""

import argparse
import timeit

import numpy as np

from ulpos._kernels import backend_name, numpy_backend

try:
    from ulpos._kernels import _core
except ImportError:
    _core = None

SPEED = 3.0e8


def loss_workload(n_points: int, rng):
    antennas = np.array(
        [[x, y, 2.2] for y in (0.0, 10.0) for x in (2.0, 18.0, 33.0, 48.0)]
    )
    obs_antenna = np.array([1, 2, 3, 5, 6, 7], dtype=np.intp)
    obs_reference = np.array([0, 0, 0, 4, 4, 4], dtype=np.intp)
    truth = np.array([25.0, 5.0, 1.5])
    dist = np.linalg.norm(antennas - truth, axis=1)
    measured = (dist[obs_antenna] - dist[obs_reference]) / SPEED
    points = rng.uniform([0.0, 0.0, 1.5], [50.0, 10.0, 1.5], (n_points, 3))
    return points, antennas, obs_antenna, obs_reference, measured, 1.0 / SPEED


def synth_workload(n_fft: int, n_paths: int, rng):
    centers = n_fft / 2.0 + rng.uniform(0.0, 40.0, n_paths)
    gains = rng.normal(size=n_paths) + 1j * rng.normal(size=n_paths)
    return n_fft, centers, gains


def best_seconds(fn, repeats: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeats, number=number)) / number


def fmt_time(seconds: float) -> str:
    if seconds < 1e-3:
        return f"{seconds * 1e6:9.1f} us"
    return f"{seconds * 1e3:9.2f} ms"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="timing repeats per cell")
    ap.add_argument(
        "--points",
        type=int,
        nargs="+",
        default=[200, 2000, 20000],
        help="candidate batch sizes for the loss kernel",
    )
    ap.add_argument(
        "--n-fft",
        type=int,
        nargs="+",
        default=[256, 1024, 4096],
        help="window lengths for the synthesis kernel",
    )
    ap.add_argument("--paths", type=int, default=3, help="taps per synthesized response")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"package backend: {backend_name()}")
    if _core is None:
        print("compiled core not built; timing the numpy fallback only")
    print()
    header = (
        f"{'kernel':<18} {'workload':<22} {'numpy':>12} {'compiled':>12}"
        f" {'speedup':>8} {'max |diff|':>11}"
    )
    print(header)
    print("-" * len(header))

    cells = []
    for n in args.points:
        work = loss_workload(n, rng)
        cells.append(("tdoa_loss_points", f"{n} pts, 6 obs", work))
    for n_fft in args.n_fft:
        work = synth_workload(n_fft, args.paths, rng)
        cells.append(("dirichlet_cir", f"n_fft {n_fft}, {args.paths} taps", work))

    for kernel, label, work in cells:
        ref_fn = getattr(numpy_backend, kernel)
        t_np = best_seconds(lambda: ref_fn(*work), args.repeats)
        if _core is None:
            print(f"{kernel:<18} {label:<22} {fmt_time(t_np):>12} {'-':>12} {'-':>8} {'-':>11}")
            continue
        core_fn = getattr(_core, kernel)
        diff = float(np.max(np.abs(core_fn(*work) - ref_fn(*work))))
        t_core = best_seconds(lambda: core_fn(*work), args.repeats)
        print(
            f"{kernel:<18} {label:<22} {fmt_time(t_np):>12} {fmt_time(t_core):>12}"
            f" {t_np / t_core:7.2f}x {diff:11.2e}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
