"""Batch command line front-end for the whole pipeline.

Subcommands: simulate (config -> dataset file), solve (dataset -> report +
estimates), fingerprint (datasets -> preprocessed samples + kNN report),
stream (dataset -> broker), plotdata (report -> plotter-friendly CSVs).

Exit codes: 0 success, 1 usage error, 2 data/config error.  Every command
is deterministic given its config file and seeds.  ULPOS_BROKER sets the
default broker address for `stream`.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .channel import SimulatedFrame, simulate
from .config import ConfigError, RunConfig, load_config
from .dataset import (
    CorruptPayload,
    VersionMismatch,
    read_dataset,
    records_from_simulation,
    write_dataset,
    write_fingerprints,
)
from .fingerprint import build_dataset as build_fingerprints
from .fingerprint import knn_fit, knn_predict
from .metrics import ErrorReport, error_cdf, horizontal_error
from .solver import PsoConfig, SmootherState, Unsolvable, pso_estimate, smooth
from .stream import CirPublisher, CirSubscriber, LoopbackBroker, cir_topic
from .tdoa import compute_tdoa, filter_tdoa
from .toa import NoPeak, apply_toa_filter, estimate_toa, peak_delay_stats

BROKER_ENV = "ULPOS_BROKER"


class UsageError(Exception):
    """Bad flags or arguments; maps to exit code 1."""


class DataError(Exception):
    """Unusable input data; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    # raise instead of sys.exit so main() owns the exit code
    def error(self, message):
        raise UsageError(message)


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {value!r}")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ulpos", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")

    sim = sub.add_parser("simulate", help="synthesize a labeled CIR dataset from a config")
    sim.add_argument("config", help="YAML run configuration")
    sim.add_argument("out", help="output dataset path (.cird)")

    solve = sub.add_parser("solve", help="run the positioning pipeline over a dataset")
    solve.add_argument("dataset", help="input dataset (.cird)")
    solve.add_argument("--config", required=True, help="YAML config with the deployment geometry")
    solve.add_argument("--report", required=True, help="output report path (.json)")
    solve.add_argument("--estimates", help="optional per-timestamp CSV path")
    solve.add_argument("--toa-filter", type=_on_off, default=True, metavar="on|off",
                       help="statistical peak-delay gate (default on)")
    solve.add_argument("--tdoa-filter", type=_on_off, default=True, metavar="on|off",
                       help="geometric bound gate (default on)")
    solve.add_argument("--ref", choices=("per-ru", "common"), default="per-ru",
                       help="TDoA reference policy (default per-ru)")
    solve.add_argument("--smooth", type=int, metavar="W",
                       help="moving-average window (default from config)")
    solve.add_argument("--pso-particles", type=int, help="override swarm size")
    solve.add_argument("--pso-iterations", type=int, help="override iteration count")
    solve.add_argument("--pso-seed", type=int, help="override base solver seed")

    fp = sub.add_parser("fingerprint", help="preprocess fingerprints and run the kNN baseline")
    fp.add_argument("train", help="training dataset (.cird, labeled)")
    fp.add_argument("test", help="test dataset (.cird, labeled)")
    fp.add_argument("--out-dir", required=True, help="directory for samples, sidecar, report")
    fp.add_argument("--gamma", type=float, default=0.4, help="row mask threshold (default 0.4)")
    fp.add_argument("--columns", type=int, default=100, help="columns kept per row (default 100)")
    fp.add_argument("--neighbors", type=int, default=5, help="k for the kNN baseline (default 5)")

    st = sub.add_parser("stream", help="publish a dataset's frames to a broker")
    st.add_argument("dataset", help="input dataset (.cird)")
    st.add_argument("--deployment", default="default", help="deployment id in the topic")
    st.add_argument("--broker", default=None,
                    help=f"broker address host[:port], or 'loopback' (default ${BROKER_ENV} or loopback)")
    st.add_argument("--rate", type=float, default=0.0, metavar="FPS",
                    help="frames per second; 0 = unpaced (default)")
    st.add_argument("--buffer-depth", type=int, default=1000,
                    help="publisher backlog bound while disconnected")

    pd = sub.add_parser("plotdata", help="emit CDF and trajectory CSVs from a solve report")
    pd.add_argument("report", help="report JSON from `ulpos solve`")
    pd.add_argument("--cdf", help="output CSV: error,fraction")
    pd.add_argument("--trajectory", help="output CSV: per-timestamp path")

    return p


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sim = list(simulate(cfg.scenario, cfg.trajectory))
    offsets = cfg.scenario.resolve_clock_offsets()
    records = records_from_simulation(sim, clock_offsets=offsets)
    write_dataset(args.out, records, deployment_id=cfg.deployment)
    timestamps = len({r.timestamp_index for r in records})
    print(f"wrote {len(records)} frames ({timestamps} timestamps, "
          f"{cfg.geometry.total_antennas} antennas) to {args.out}")
    return 0


def run_solve_pipeline(
    records,
    run_config: RunConfig,
    toa_filter: bool = True,
    tdoa_filter: bool = True,
    policy: str = "per-ru",
    smoother_window: int | None = None,
    pso: PsoConfig | None = None,
) -> dict:
    """Dataset records -> per-timestamp estimates and summary counters.

    Returns a JSON-ready dict; unsolvable timestamps are listed, not fatal.
    """
    g = run_config.geometry
    base_pso = pso if pso is not None else run_config.pso_config()
    window = smoother_window if smoother_window is not None else run_config.smoother_window

    by_t: dict[int, list] = {}
    for r in records:
        by_t.setdefault(r.timestamp_index, []).append(r)

    measurements = []
    skipped_frames = 0
    for t in sorted(by_t):
        for r in by_t[t]:
            try:
                measurements.append(estimate_toa(r.to_frame()))
            except NoPeak:
                skipped_frames += 1
    toa_dropped = 0
    if toa_filter and len(measurements) >= 2:
        stats = peak_delay_stats(measurements)
        kept, dropped = apply_toa_filter(measurements, stats)
        toa_dropped = len(dropped)
        measurements = kept

    meas_by_t: dict[int, list] = {}
    for m in measurements:
        meas_by_t.setdefault(m.timestamp_index, []).append(m)

    truth_by_t = {}
    for t, recs in by_t.items():
        for r in recs:
            if r.true_position is not None:
                truth_by_t[t] = r.true_position
                break

    sample_period = records[0].sample_period if records else 0.0
    smoother = SmootherState(window=window)
    rows = []
    unsolvable = []
    tdoa_rejected = 0
    errors = []
    for t in sorted(by_t):
        ms = meas_by_t.get(t, [])
        try:
            tdoa_set = compute_tdoa(ms, g, policy=policy, on_missing_reference="skip")
        except ValueError:
            unsolvable.append(t)
            continue
        if tdoa_filter:
            tdoa_set, rejections = filter_tdoa(tdoa_set, slack=sample_period)
            tdoa_rejected += len(rejections)
        cfg_t = PsoConfig(
            bounds=base_pso.bounds,
            particles=base_pso.particles,
            iterations=base_pso.iterations,
            inertia=base_pso.inertia,
            cognitive=base_pso.cognitive,
            social=base_pso.social,
            fixed_z=base_pso.fixed_z,
            seed=base_pso.seed + t,
        )
        try:
            est = pso_estimate(tdoa_set, g, cfg_t)
        except (Unsolvable, ValueError):
            unsolvable.append(t)
            continue
        smoothed = smooth(smoother, est)
        row = {
            "t": t,
            "x": est.position.x,
            "y": est.position.y,
            "z": est.position.z,
            "smoothed_x": smoothed.x,
            "smoothed_y": smoothed.y,
            "loss": est.loss,
            "n_obs": est.n_observations_used,
            "converged": est.converged,
        }
        truth = truth_by_t.get(t)
        if truth is not None:
            err = horizontal_error(smoothed, truth)
            row.update(true_x=truth.x, true_y=truth.y, error=err)
            errors.append(err)
        rows.append(row)

    result = {
        "deployment": run_config.deployment,
        "policy": policy,
        "toa_filter": toa_filter,
        "tdoa_filter": tdoa_filter,
        "smoother_window": window,
        "frames": len(records),
        "timestamps": len(by_t),
        "frames_skipped": skipped_frames,
        "toa_dropped": toa_dropped,
        "tdoa_rejected": tdoa_rejected,
        "unsolvable": unsolvable,
        "estimates": rows,
        "metrics": None,
    }
    if errors:
        report = ErrorReport.from_errors(errors)
        result["metrics"] = {
            "count": len(errors),
            "mae": report.mae,
            "median": report.median,
            "ce90": report.ce90,
        }
    return result


def _estimate_csv(path, rows):
    fields = ["t", "x", "y", "z", "smoothed_x", "smoothed_y", "loss", "n_obs",
              "converged", "true_x", "true_y", "error"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, restval="")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def cmd_solve(args) -> int:
    run_config = load_config(args.config)
    records = read_dataset(args.dataset)
    if not records:
        raise DataError(f"{args.dataset} holds no frames")

    pso = run_config.pso_config()
    overrides = {}
    if args.pso_particles is not None:
        overrides["particles"] = args.pso_particles
    if args.pso_iterations is not None:
        overrides["iterations"] = args.pso_iterations
    if args.pso_seed is not None:
        overrides["seed"] = args.pso_seed
    if overrides:
        pso = PsoConfig(
            bounds=pso.bounds,
            particles=overrides.get("particles", pso.particles),
            iterations=overrides.get("iterations", pso.iterations),
            inertia=pso.inertia,
            cognitive=pso.cognitive,
            social=pso.social,
            fixed_z=pso.fixed_z,
            seed=overrides.get("seed", pso.seed),
        )

    result = run_solve_pipeline(
        records,
        run_config,
        toa_filter=args.toa_filter,
        tdoa_filter=args.tdoa_filter,
        policy=args.ref,
        smoother_window=args.smooth,
        pso=pso,
    )
    result["dataset"] = str(args.dataset)
    with open(args.report, "w") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    if args.estimates:
        _estimate_csv(args.estimates, result["estimates"])

    m = result["metrics"]
    if m:
        print(f"solved {len(result['estimates'])}/{result['timestamps']} timestamps: "
              f"MAE {m['mae']:.3f} m, CE90 {m['ce90']:.3f} m")
    else:
        print(f"solved {len(result['estimates'])}/{result['timestamps']} timestamps "
              "(no truth labels, estimates only)")
    if result["unsolvable"]:
        print(f"unsolvable timestamps: {result['unsolvable']}", file=sys.stderr)
    return 0


def _dataset_to_sim_frames(records, what: str) -> list[SimulatedFrame]:
    frames = []
    for r in records:
        if r.true_position is None:
            raise DataError(f"{what} needs ground-truth labels on every frame")
        frames.append(
            SimulatedFrame(
                timestamp_index=r.timestamp_index,
                antenna=r.antenna,
                frame=r.to_frame(),
                true_position=r.true_position,
            )
        )
    return frames


def cmd_fingerprint(args) -> int:
    train_records = _dataset_to_sim_frames(read_dataset(args.train), "fingerprint training")
    test_records = _dataset_to_sim_frames(read_dataset(args.test), "fingerprint testing")
    os.makedirs(args.out_dir, exist_ok=True)

    train_samples, train_masks, alpha = build_fingerprints(
        train_records, columns=args.columns, gamma=args.gamma
    )
    test_samples, test_masks, _ = build_fingerprints(
        test_records, columns=args.columns, gamma=args.gamma, alpha=alpha
    )
    for label, masks in (("train", train_masks), ("test", test_masks)):
        blank = sum(1 for m in masks if m.all_masked)
        if blank:
            print(f"warning: {blank}/{len(masks)} {label} samples fully masked "
                  f"at gamma={args.gamma}", file=sys.stderr)

    train_path = os.path.join(args.out_dir, "train.fpsd")
    test_path = os.path.join(args.out_dir, "test.fpsd")
    write_fingerprints(train_path, train_samples, train_masks,
                       alpha_norm=alpha.alpha_norm, gamma=args.gamma)
    write_fingerprints(test_path, test_samples, test_masks,
                       alpha_norm=alpha.alpha_norm, gamma=args.gamma)

    order = train_samples[0].input.antennas
    sidecar = {
        "alpha_norm": alpha.alpha_norm,
        "gamma": args.gamma,
        "columns": args.columns,
        "rows": len(order),
        "row_order": [[a.ru_index, a.antenna_index] for a in order],
        "train_samples": len(train_samples),
        "test_samples": len(test_samples),
    }
    with open(os.path.join(args.out_dir, "sidecar.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")

    model = knn_fit(train_samples, k=args.neighbors)
    errors = []
    predictions = []
    for s in test_samples:
        px, py = knn_predict(model, s.input)
        tx, ty = s.label
        errors.append(float(np.hypot(px - tx, py - ty)))
        predictions.append({"t": s.timestamp_index, "x": px, "y": py,
                            "true_x": tx, "true_y": ty, "error": errors[-1]})
    report = ErrorReport.from_errors(errors)
    out = {
        "alpha_norm": alpha.alpha_norm,
        "gamma": args.gamma,
        "columns": args.columns,
        "neighbors": args.neighbors,
        "metrics": {"count": len(errors), "mae": report.mae,
                    "median": report.median, "ce90": report.ce90},
        "predictions": predictions,
    }
    with open(os.path.join(args.out_dir, "knn_report.json"), "w") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    print(f"kNN baseline on {len(test_samples)} test samples: "
          f"MAE {report.mae:.3f} m, CE90 {report.ce90:.3f} m")
    return 0


def _make_broker(address: str):
    if address in ("", "loopback"):
        return LoopbackBroker()
    host, _, port = address.partition(":")
    from .stream import MqttBroker

    return MqttBroker(host, int(port) if port else 1883)


def cmd_stream(args) -> int:
    records = read_dataset(args.dataset)
    if not records:
        raise DataError(f"{args.dataset} holds no frames")
    address = args.broker or os.environ.get(BROKER_ENV, "loopback")
    broker = _make_broker(address)

    counts = {"received": 0}
    loopback = isinstance(broker, LoopbackBroker)
    if loopback:
        def on_message(topic, msg):
            counts["received"] += 1

        CirSubscriber(broker, f"cir/{args.deployment}/#", on_message)

    publishers = {}
    interval = 1.0 / args.rate if args.rate > 0 else 0.0
    next_due = time.monotonic()
    published = 0
    for r in sorted(records, key=lambda r: (r.timestamp_index, r.antenna)):
        ru = r.antenna.ru_index
        if ru not in publishers:
            publishers[ru] = CirPublisher(
                broker, args.deployment, f"gnb{ru}", buffer_depth=args.buffer_depth
            )
        if interval:
            delay = next_due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            next_due += interval
        publishers[ru].publish_frame(r.to_frame())
        published += 1

    topics = [cir_topic(args.deployment, f"gnb{ru}") for ru in sorted(publishers)]
    line = f"published {published} frames on {', '.join(topics)}"
    if loopback:
        line += f"; loopback received {counts['received']}"
    print(line)
    return 0


def cmd_plotdata(args) -> int:
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {args.report}: {exc}") from exc
    if not isinstance(report, dict) or "estimates" not in report:
        raise DataError(f"{args.report} is not a solve report")
    if not args.cdf and not args.trajectory:
        raise UsageError("nothing to do: give --cdf and/or --trajectory")

    rows = report["estimates"]
    if args.cdf:
        errors = [r["error"] for r in rows if "error" in r]
        if not errors:
            raise DataError("report has no truth-labeled estimates, no CDF to emit")
        with open(args.cdf, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["error_m", "fraction"])
            for err, frac in error_cdf(errors):
                w.writerow([err, frac])
    if args.trajectory:
        with open(args.trajectory, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "smoothed_x", "smoothed_y", "true_x", "true_y"])
            for r in rows:
                w.writerow([r["t"], r["x"], r["y"], r["smoothed_x"], r["smoothed_y"],
                            r.get("true_x", ""), r.get("true_y", "")])
    made = [p for p in (args.cdf, args.trajectory) if p]
    print(f"wrote {', '.join(made)}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "fingerprint": cmd_fingerprint,
    "stream": cmd_stream,
    "plotdata": cmd_plotdata,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (see --help)")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, DataError, VersionMismatch, CorruptPayload) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ImportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
