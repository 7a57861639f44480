"""Command line entry point.

Exit status: 0 on success, 1 on a runtime error (or any failed run in an
experiment), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import __version__, env
from ..archive import merged, read_archive, training_pairs, write_archive
from ..embed import BottleneckModel, TrainConfig, make_embedding, train_bottleneck
from ..errors import ScenicError, UsageError
from ..explore import RrtParams, run_attract, run_bootstrap, run_chaos_monkey, run_hybrid, run_rrt
from ..metrics import METRICS, series_from_archive
from ..trace import bundled_action_model, bundled_trace, fit_action_model, playback, read_model, read_trace, write_model
from .experiment import format_table, load_config, run_experiment
from .plot import plot_series


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _action_model(spec: str):
    return bundled_action_model() if spec == "bundled" else read_model(spec)


def _load_trace(spec: str):
    return read_trace(spec) if Path(spec).is_file() else bundled_trace(spec)


def _write_series(archive, embed_spec, out: Path, metrics=METRICS):
    series = series_from_archive(archive, make_embedding(embed_spec), tuple(metrics), run=out.name)
    for m, s in series.items():
        s.write_csv(out / f"series_{m}.csv")
    return series


def cmd_explore(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = RrtParams(goal_inflation=args.goal_inflation, cadence_frames=args.cadence, k_seeds=args.k_seeds)
    tree = None
    s = args.strategy
    if s == "attract":
        archive = run_attract(args.game, args.budget_frames, args.cadence)
    elif s == "chaos":
        archive = run_chaos_monkey(args.game, _action_model(args.actions), args.budget_frames, args.seed,
                                   args.cadence, snapshots=args.snapshots)
    elif s == "rrt":
        archive, tree = run_rrt(args.game, make_embedding(args.embed), _action_model(args.actions),
                                args.budget_frames, args.seed, params)
    elif s == "hybrid":
        archive, tree = run_hybrid(args.game, make_embedding(args.embed), _action_model(args.actions),
                                   args.budget_frames, args.seed, args.k_seeds, params, with_tree=True)
    elif s == "trace":
        if not args.trace:
            raise UsageError("--strategy trace needs --trace")
        archive = playback(_load_trace(args.trace), args.game, args.cadence, args.budget_frames)
    else:  # bootstrap
        result = run_bootstrap(args.game, args.rounds, args.budget_frames, _action_model(args.actions),
                               args.seed, TrainConfig(), params, metric_embedding=make_embedding(args.metric_embed))
        for r, (a, series) in enumerate(zip(result.archives, result.series), 1):
            write_archive(a, out / f"r{r}" / "archive")
            series.write_csv(out / f"r{r}" / "series_nuclear_norm.csv")
            print(f"round {r}: {len(a)} moments, scenes {sorted(a.scenes())}, nuclear norm {series.final:.6g}")
        result.model.save(out / "model.p2m")
        return 0
    write_archive(archive, out / "archive")
    if tree is not None:
        (out / "tree.json").write_text(json.dumps(tree.to_json(), sort_keys=True) + "\n", encoding="utf-8")
    series = _write_series(archive, args.metric_embed, out) if len(archive) else {}
    print(f"{s} on {args.game}: {len(archive)} moments, scenes {sorted(archive.scenes())}")
    for m, ser in series.items():
        print(f"  final {m}: {ser.final:.6g}")
    return 0


def cmd_replay(args) -> int:
    trace = _load_trace(args.trace)
    archive = playback(trace, args.game or trace.game, args.cadence, args.budget_frames)
    out = Path(args.out)
    write_archive(archive, out / "archive")
    if len(archive):
        _write_series(archive, args.metric_embed, out)
    print(f"replayed {trace.total_frames} frames: {len(archive)} moments, scenes {sorted(archive.scenes())}")
    return 0


def cmd_fit_actions(args) -> int:
    root = Path(args.traces)
    files = sorted(root.glob("*.trc")) if root.is_dir() else [root]
    if not files:
        raise ScenicError(f"no .trc files under {root}")
    model = fit_action_model([read_trace(f) for f in files], args.cadence)
    write_model(model, args.out)
    print(f"fit {len(model.support)} controller states from {len(files)} traces -> {args.out}")
    return 0


def cmd_train_embed(args) -> int:
    archive = merged(*(read_archive(a) for a in args.archives))
    init = BottleneckModel.load(args.init) if args.init else None
    cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)
    model, history = train_bottleneck(training_pairs(archive), cfg, init, fresh_seed=args.seed,
                                      bottleneck=args.bottleneck)
    model.save(args.out)
    if history:
        print(f"{len(archive)} pairs, loss {history[0]:.6g} -> {history[-1]:.6g}, wrote {args.out}")
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    summary = run_experiment(cfg, args.out, workers=args.workers)
    print(format_table(summary))
    if summary["failed"]:
        for r in summary["runs"]:
            if r["status"] != "ok":
                print(f"run {r['key']} failed: {r['error']}", file=sys.stderr)
        return 1
    return 0


def cmd_plot(args) -> int:
    labels = args.labels if args.labels is not None else [Path(s).stem for s in args.series]
    plot_series(args.series, args.out, labels, title=args.title, metric=args.metric)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scenic", description="Automated exploration of deterministic toy games.")
    p.add_argument("--version", action="version", version=f"scenic {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, budget_default=None):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--budget-frames", type=int, default=budget_default)
        sp.add_argument("--cadence", type=int, default=env.HALF_SECOND)
        sp.add_argument("--metric-embed", default="random-projection",
                        help="embedding for the metric series (default random-projection)")
        sp.add_argument("--out", required=True)

    sp = sub.add_parser("explore", help="run one exploration strategy")
    common(sp, 36000)
    sp.add_argument("--game", required=True, choices=sorted(env.GAMES))
    sp.add_argument("--strategy", required=True, choices=["attract", "trace", "chaos", "rrt", "hybrid", "bootstrap"])
    sp.add_argument("--embed", default="random-projection", help="RRT embedding spec")
    sp.add_argument("--actions", default="bundled", help="action model JSON or 'bundled'")
    sp.add_argument("--trace", help="trace file or bundled trace name")
    sp.add_argument("--k-seeds", type=int, default=100)
    sp.add_argument("--goal-inflation", type=float, default=0.10)
    sp.add_argument("--rounds", type=int, default=4)
    sp.add_argument("--snapshots", action="store_true", help="store snapshots with chaos moments")
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("replay", help="play back a trace and archive its moments")
    common(sp)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--game", choices=sorted(env.GAMES))
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("fit-actions", help="fit the empirical action model to a trace directory")
    sp.add_argument("--traces", required=True)
    sp.add_argument("--cadence", type=int, default=env.HALF_SECOND)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_fit_actions)

    sp = sub.add_parser("train-embed", help="train the bottleneck embedding on archives")
    sp.add_argument("--archives", nargs="+", required=True)
    sp.add_argument("--init", help="continue from this model file")
    sp.add_argument("--epochs", type=int, default=50)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--bottleneck", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train_embed)

    sp = sub.add_parser("experiment", help="run an experiment config (file or bundled name)")
    sp.add_argument("config")
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int, help="parallel runs (overrides SCENIC_WORKERS)")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("plot", help="plot series CSVs to an SVG")
    sp.add_argument("--series", nargs="+", required=True)
    sp.add_argument("--labels", nargs="+")
    sp.add_argument("--title", default="")
    sp.add_argument("--metric", default="value")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "budget_frames", None) is None and args.command == "explore":
            raise UsageError("--budget-frames is required")
        return args.func(args)
    except UsageError as exc:
        print(f"scenic: usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (ScenicError, ValueError, OSError) as exc:
        print(f"scenic: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
