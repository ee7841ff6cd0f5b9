"""Command-line entry point: gen, train, synth, eval."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datagen import GenConfig, SampleStream, write_dataset
from .kinematics import ALL_CONFIGS, TypeConfig
from .metrics import InvalidDims, simulation_metric
from .moe import (
    DEFAULT_VARIANTS,
    ExpertRegistry,
    MissingExpert,
    SynthesisResult,
    relative_deviation_deg,
    synthesize_multi,
    synthesize_relative,
    synthesize_single,
)
from .neural.lstm import ExpertHyperParams, predict_batch
from .neural.train import TrainingDiverged, load_checkpoint, new_state, probe_set, run_epochs, save_checkpoint

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MISSING = 0, 2, 3, 4

ABSOLUTE_HEADER = ("theta_in_deg", "theta_out_deg")
RELATIVE_HEADER = ("d_theta_in_deg", "d_theta_out_deg")


class DataError(ValueError):
    pass


class UsageError(Exception):
    pass


@dataclass
class PointsFile:
    mode: str  # "absolute" or "relative"
    rows_deg: np.ndarray  # (n, 2)

    @property
    def radians(self) -> np.ndarray:
        return np.radians(self.rows_deg)

    @classmethod
    def read(cls, path) -> "PointsFile":
        try:
            with open(path, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        if not rows:
            raise DataError(f"{path}: empty points file")
        header = tuple(c.strip() for c in rows[0])
        if header == ABSOLUTE_HEADER:
            mode = "absolute"
        elif header == RELATIVE_HEADER:
            mode = "relative"
        else:
            raise DataError(f"{path}: header must be {','.join(ABSOLUTE_HEADER)} or {','.join(RELATIVE_HEADER)}")
        try:
            data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float).reshape(-1, 2)
        except ValueError as exc:
            raise DataError(f"{path}: each row needs two numbers ({exc})") from exc
        if not np.all(np.isfinite(data)):
            raise DataError(f"{path}: non-finite angle")
        if mode == "absolute" and len(data) < 1:
            raise DataError(f"{path}: need at least one point")
        if mode == "relative":
            if len(data) < 2:
                raise DataError(f"{path}: relative files need a zero reference row and at least one offset")
            if np.any(data[0] != 0.0):
                raise DataError(f"{path}: first relative row must be 0,0")
        return cls(mode, data)

    def write(self, path) -> None:
        header = ABSOLUTE_HEADER if self.mode == "absolute" else RELATIVE_HEADER
        lines = [",".join(header)] + [f"{a!r},{b!r}" for a, b in self.rows_deg.tolist()]
        Path(path).write_text("\n".join(lines) + "\n")


def _type_config(args) -> TypeConfig:
    return TypeConfig.parse(args.type, args.inversion)


def _add_type_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--type", type=int, choices=range(1, 9), required=required, metavar="1..8")
    p.add_argument("--inversion", choices=["+", "-"], default="+")


# -- gen ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = _type_config(args)
    n_points = args.n if args.n is not None else tuple(args.n_range)
    gen = GenConfig(cfg, m=args.m, n_points=n_points, seed=args.seed)
    t0 = time.perf_counter()
    samples = SampleStream(gen).take(args.count)
    elapsed = time.perf_counter() - t0
    write_dataset(args.out, samples, gen)
    print(f"wrote {len(samples)} {cfg.label} samples to {args.out}")
    print(f"throughput: {1000.0 * elapsed / max(len(samples), 1):.4f} ms/sample")
    return EXIT_OK


# -- train --------------------------------------------------------------------


def _hyper_from_args(args) -> ExpertHyperParams:
    return ExpertHyperParams(
        layers=args.layers,
        hidden=args.hidden,
        dropout_p=args.dropout,
        lr=args.lr,
        weight_decay=args.weight_decay,
        schedule_milestones=tuple(args.milestones),
        gamma=args.gamma,
        epochs=args.epochs,
        samples_per_epoch=args.samples_per_epoch,
        batch_size=args.batch_size,
        seed=args.seed,
        m=args.m,
        n_range=tuple(args.n_range),
        probe_size=args.probe_size,
        checkpoint_every=args.checkpoint_every,
    )


def _train_one(cfg: TypeConfig, hyper: ExpertHyperParams, ckpt_dir: Path, resume: bool) -> None:
    path = ckpt_dir / ExpertRegistry.checkpoint_name(cfg)
    if resume and path.exists():
        state = load_checkpoint(path)
        state.model.hyper = replace(state.model.hyper, epochs=hyper.epochs)
        print(f"{cfg.label}: resuming at epoch {state.epoch}")
    else:
        state = new_state(cfg, hyper)
    probe = probe_set(cfg, state.model.hyper) if state.model.hyper.probe_size else None
    t0 = time.perf_counter()
    run_epochs(state, state.model.hyper.epochs, probe, path)
    save_checkpoint(path, state)
    report_path = ckpt_dir / f"{cfg.key}_report.csv"
    state.report.write_csv(report_path)
    rep = state.report
    last = f"loss {rep.epoch_loss[-1]:.5f}, probe S {rep.probe_s_simul[-1]:.5f}" if rep.epoch_loss else "untrained"
    print(f"{cfg.label}: {state.epoch} epochs in {time.perf_counter() - t0:.1f} s ({last}) -> {path}")


def cmd_train(args) -> int:
    hyper = _hyper_from_args(args)
    ckpt_dir = Path(args.ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    if args.all:
        configs = list(ALL_CONFIGS)
    elif args.type is None:
        raise UsageError("train: give --type or --all")
    else:
        configs = [_type_config(args)]
    for cfg in configs:
        _train_one(cfg, hyper, ckpt_dir, args.resume)
    ExpertRegistry.write_manifest(ckpt_dir)
    return EXIT_OK


# -- synth --------------------------------------------------------------------


def _fmt(v: float, width: int = 10) -> str:
    return f"{v:{width}.5f}"


def _result_table(res: SynthesisResult, points_rad: np.ndarray, rank: int | None = None) -> str:
    head = f"#{rank} " if rank is not None else ""
    lines = [f"{head}{res.cfg.label}   S_simul = {res.s_simul:.6g}"]
    if res.initial_angles is not None:
        a, b = np.degrees(res.initial_angles)
        lines.append(f"  initial angles (deg): theta_in = {a:.5f}, theta_out = {b:.5f}")
    lines.append("  r_pred = [" + ", ".join(f"{v:.5f}" for v in res.r_pred) + "]")
    if not res.valid:
        lines.append("  prediction violates the linkage validity conditions")
        return "\n".join(lines)
    lines.append(f"  {'theta_in':>10} {'theta_out':>10} {'pred_out':>10} {'abs_err':>10}  (deg)")
    for (tin, tout), pred, err, ok in zip(
        points_rad.tolist(), res.eval.per_point_pred, res.eval.per_point_abs_err_deg, res.eval.reachable_flags
    ):
        flag = "" if ok else "  unreachable"
        lines.append(
            f"  {_fmt(math.degrees(tin))} {_fmt(math.degrees(tout))} {_fmt(math.degrees(pred))} {_fmt(err)}{flag}"
        )
    lines.append(f"  max abs error: {res.eval.max_abs_err_deg:.5f} deg")
    return "\n".join(lines)


def cmd_synth(args) -> int:
    pts = PointsFile.read(args.points)
    registry = ExpertRegistry.load(args.registry)
    if args.mode == "relative":
        if pts.mode != "relative":
            raise DataError("relative mode needs a d_theta_in_deg,d_theta_out_deg file")
        t0 = time.perf_counter()
        results = synthesize_relative(
            registry, pts.radians, args.variants, rng=np.random.default_rng(args.seed)
        )
        elapsed = time.perf_counter() - t0
        print(f"{len(results)} candidates from {args.variants} variants x 16 experts in {elapsed:.2f} s")
        shown = results[: args.top_k]
        for i, res in enumerate(shown, 1):
            absolute = np.radians(np.degrees(res.initial_angles)) + pts.radians
            print(_result_table(res, absolute, i))
            if res.valid:
                dev = relative_deviation_deg(res, pts.radians)
                print(f"  max relative deviation: {dev.max():.5f} deg")
        best_points = np.asarray(shown[0].initial_angles) + pts.radians if shown else None
    else:
        if pts.mode != "absolute":
            raise DataError(f"{args.mode} mode needs a theta_in_deg,theta_out_deg file")
        if args.mode == "single":
            if args.type is None:
                raise UsageError("synth --mode single needs --type")
            shown = [synthesize_single(registry, _type_config(args), pts.radians)]
        else:
            shown = synthesize_multi(registry, pts.radians, args.top_k, distinct=not args.all_types)
        for i, res in enumerate(shown, 1):
            print(_result_table(res, pts.radians, i))
        best_points = pts.radians
    if args.plot and shown and shown[0].valid:
        from .plotting import plot_displacement

        svg, csv_path = plot_displacement(args.plot, shown[0].r_pred, shown[0].cfg, best_points)
        print(f"plot: {svg} (curve data {csv_path})")
    return EXIT_OK


# -- eval ---------------------------------------------------------------------


def cmd_eval(args) -> int:
    registry = ExpertRegistry.load(args.registry)
    configs = [_type_config(args)] if args.type is not None else list(ALL_CONFIGS)
    print(f"{'key':<7} {'config':<22} {'mean S':>12} {'median S':>12} {'invalid':>8} {'truth S':>12}")
    t0 = time.perf_counter()
    total = 0
    for cfg in configs:
        model = registry.get(cfg)
        stream = SampleStream(GenConfig(cfg, m=model.hyper.m, n_points=tuple(model.hyper.n_range)), np.random.default_rng([args.seed, cfg.type_id, cfg.inversion + 1]))
        scores, truth, invalid = [], [], 0
        left = args.samples
        while left > 0:
            batch = stream.batch(min(left, 32))
            left -= len(batch)
            rs = predict_batch(model, np.stack([s.points for s in batch]))
            for s, r in zip(batch, rs):
                try:
                    scores.append(simulation_metric(tuple(r.tolist()), cfg, s.points).s_simul)
                except InvalidDims:
                    invalid += 1
                    scores.append(2.0)
                truth.append(simulation_metric(s.r, cfg, s.points).s_simul)
        total += args.samples
        print(
            f"{cfg.key:<7} {cfg.label:<22} {np.mean(scores):12.6f} {np.median(scores):12.6f} "
            f"{invalid / args.samples:8.3f} {max(truth):12.3e}"
        )
    elapsed = time.perf_counter() - t0
    print(f"evaluated {total} samples in {elapsed:.1f} s ({1000.0 * elapsed / max(total, 1):.3f} ms/sample)")
    print("invalid predictions count as S = 2; 'truth S' is the worst score of the generating dims")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fourbar", description="Four-bar function-generation synthesis")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a labelled dataset")
    _add_type_args(g)
    g.add_argument("--count", type=int, required=True)
    n = g.add_mutually_exclusive_group()
    n.add_argument("--n", type=int, help="fixed number of points per sample")
    n.add_argument("--n-range", type=int, nargs=2, default=[3, 20], metavar=("LO", "HI"))
    g.add_argument("--m", type=float, default=12.0, help="bound on |T|")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    d = ExpertHyperParams()
    t = sub.add_parser("train", help="train one expert or all sixteen")
    _add_type_args(t, required=False)
    t.add_argument("--all", action="store_true", help="train every configuration in turn")
    t.add_argument("--epochs", type=int, default=d.epochs)
    t.add_argument("--layers", type=int, default=d.layers)
    t.add_argument("--hidden", type=int, default=d.hidden)
    t.add_argument("--dropout", type=float, default=d.dropout_p)
    t.add_argument("--lr", type=float, default=d.lr)
    t.add_argument("--weight-decay", type=float, default=d.weight_decay)
    t.add_argument("--milestones", type=int, nargs="*", default=list(d.schedule_milestones))
    t.add_argument("--gamma", type=float, default=d.gamma)
    t.add_argument("--samples-per-epoch", type=int, default=d.samples_per_epoch)
    t.add_argument("--batch-size", type=int, default=d.batch_size)
    t.add_argument("--m", type=float, default=d.m)
    t.add_argument("--n-range", type=int, nargs=2, default=list(d.n_range), metavar=("LO", "HI"))
    t.add_argument("--probe-size", type=int, default=d.probe_size)
    t.add_argument("--checkpoint-every", type=int, default=d.checkpoint_every)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--ckpt-dir", required=True)
    t.add_argument("--resume", action="store_true", help="continue from an existing checkpoint up to --epochs")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("synth", help="synthesize linkages for precision points")
    s.add_argument("--points", required=True)
    s.add_argument("--mode", choices=["single", "multi", "relative"], default="multi")
    _add_type_args(s, required=False)
    s.add_argument("--top-k", type=int, default=3)
    s.add_argument("--all-types", action="store_true", help="multi mode: do not collapse inversions of a type")
    s.add_argument("--variants", type=int, default=DEFAULT_VARIANTS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--registry", required=True)
    s.add_argument("--plot", help="write the best linkage's displacement curve as SVG (plus CSV)")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="score experts on fresh held-out samples")
    _add_type_args(e, required=False)
    e.add_argument("--samples", type=int, default=512)
    e.add_argument("--seed", type=int, default=12345)
    e.add_argument("--registry", required=True)
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingExpert as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
