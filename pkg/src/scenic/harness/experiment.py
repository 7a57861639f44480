"""Experiment runner: many (game, strategy, seed) runs, one summary.

Config schema ``scenic-experiment/1`` (JSON)::

    {
      "schema": "scenic-experiment/1",
      "id": "core_coverage",
      "games": ["gridquest"],
      "budget_frames": 36000,
      "cadence": 30,
      "seeds": [0, 1, 2],
      "action_model": "bundled",
      "metric_embedding": "random-projection",
      "metrics": ["nuclear_norm", "bbox_sum"],
      "save_archives": false,
      "workers": 1,
      "strategies": [
        {"name": "attract"},
        {"name": "trace", "traces": {"gridquest": "gridquest_tour"}},
        {"name": "chaos"},
        {"name": "rrt", "embedding": {"gridquest": "bottleneck:gridquest_tour.p2m"}},
        {"name": "hybrid", "embedding": "random-projection", "k_seeds": 100},
        {"name": "bootstrap", "rounds": 4, "training": {"epochs": 50}}
      ]
    }

Relative model and trace paths resolve against the config file's
directory, then the package data.  Outputs land under ``--out``:
``runs/<game>_<label>_<seed>/`` per run, ``means/`` seed-averaged series,
``plots/`` SVGs, ``summary.json`` (deterministic) and ``timing.json``
(wall clock, not deterministic).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .. import env
from ..archive import write_archive
from ..embed import TrainConfig, make_embedding
from ..errors import ConfigError, ScenicError
from ..explore import RrtParams, run_attract, run_bootstrap, run_chaos_monkey, run_hybrid, run_rrt
from ..metrics import METRICS, MetricSeries, read_series_csv, series_from_archive
from ..trace import bundled_action_model, bundled_trace, playback, read_model, read_trace
from .plot import plot_series

SCHEMA = "scenic-experiment/1"
STRATEGIES = ("attract", "trace", "chaos", "rrt", "hybrid", "bootstrap")
DETERMINISTIC = ("attract", "trace")
_TOP_KEYS = {"schema", "id", "games", "budget_frames", "cadence", "seeds", "action_model",
             "metric_embedding", "metrics", "save_archives", "workers", "strategies", "description"}


@dataclass
class ExperimentConfig:
    id: str
    games: list[str]
    budget_frames: int
    seeds: list[int]
    strategies: list[dict]
    cadence: int = env.HALF_SECOND
    action_model: str = "bundled"
    metric_embedding: str = "random-projection"
    metrics: list[str] = field(default_factory=lambda: ["nuclear_norm"])
    save_archives: bool = False
    workers: int = 1
    base_dir: str | None = None
    description: str = ""

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> ExperimentConfig:
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a JSON object")
        if d.get("schema", SCHEMA) != SCHEMA:
            raise ConfigError(f"unsupported schema {d.get('schema')!r}, expected {SCHEMA!r}")
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for key in ("id", "games", "budget_frames", "seeds", "strategies"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        games = d["games"] if isinstance(d["games"], list) else [d["games"]]
        cfg = cls(
            id=str(d["id"]), games=list(games), budget_frames=d["budget_frames"], seeds=list(d["seeds"]),
            strategies=[dict(s) for s in d["strategies"]], cadence=d.get("cadence", env.HALF_SECOND),
            action_model=d.get("action_model", "bundled"),
            metric_embedding=d.get("metric_embedding", "random-projection"),
            metrics=list(d.get("metrics", ["nuclear_norm"])), save_archives=bool(d.get("save_archives", False)),
            workers=d.get("workers", 1), base_dir=None if base_dir is None else str(base_dir),
            description=d.get("description", ""),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("config needs at least one seed")
        if any(not isinstance(s, int) or isinstance(s, bool) for s in self.seeds):
            raise ConfigError("seeds must be integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not isinstance(self.budget_frames, int) or self.budget_frames <= 0:
            raise ConfigError(f"budget_frames must be a positive integer, got {self.budget_frames!r}")
        if not isinstance(self.cadence, int) or self.cadence < 1:
            raise ConfigError(f"cadence must be a positive integer, got {self.cadence!r}")
        if not self.games:
            raise ConfigError("config needs at least one game")
        for g in self.games:
            env.get_game(g)
        for m in self.metrics:
            if m not in METRICS:
                raise ConfigError(f"unknown metric {m!r}; expected one of {METRICS}")
        if not self.strategies:
            raise ConfigError("config needs at least one strategy")
        labels = set()
        for s in self.strategies:
            if s.get("name") not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s.get('name')!r}; expected one of {STRATEGIES}")
            label = s.get("label", s["name"])
            if label in labels:
                raise ConfigError(f"duplicate strategy label {label!r}")
            if "_" in label:
                raise ConfigError(f"strategy label {label!r} must not contain '_'")
            labels.add(label)
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA, "id": self.id, "description": self.description, "games": self.games,
            "budget_frames": self.budget_frames, "cadence": self.cadence, "seeds": self.seeds,
            "action_model": self.action_model, "metric_embedding": self.metric_embedding,
            "metrics": self.metrics, "save_archives": self.save_archives, "strategies": self.strategies,
        }


def load_config(path) -> ExperimentConfig:
    """Load a config file, or a bundled one by name (``exp_bootstrap``)."""
    p = Path(path)
    if not p.is_file():
        name = p.name if p.name.endswith(".json") else p.name + ".json"
        bundled = resources.files("scenic") / "data" / "experiments" / name
        if str(path) == p.name and bundled.is_file():
            with resources.as_file(bundled) as real:
                return load_config(real)
        raise ConfigError(f"no experiment config at {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return ExperimentConfig.from_dict(data, base_dir=p.resolve().parent)


def bundled_configs() -> list[str]:
    root = resources.files("scenic") / "data" / "experiments"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".json"))


def _per_game(value, game, what):
    if isinstance(value, dict):
        if game not in value:
            raise ConfigError(f"no {what} configured for game {game!r}")
        return value[game]
    return value


def _action_model(spec: str, base_dir):
    if spec == "bundled":
        return bundled_action_model()
    p = Path(spec)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return read_model(p)


def _trace(spec: str, base_dir):
    p = Path(spec)
    if not p.is_absolute() and base_dir is not None and (Path(base_dir) / p).is_file():
        return read_trace(Path(base_dir) / p)
    if p.is_file():
        return read_trace(p)
    return bundled_trace(spec)


def _write_series(series: dict[str, MetricSeries], run_dir: Path, out: Path) -> tuple[dict, dict]:
    files, finals = {}, {}
    for m, s in series.items():
        path = run_dir / f"series_{m}.csv"
        s.write_csv(path)
        files[m] = path.relative_to(out).as_posix()
        finals[m] = s.final if len(s) else None
    return files, finals


def _record(game, label, seed, archive, series, run_dir, out, extra=None) -> dict:
    files, finals = _write_series(series, run_dir, out)
    rec = {
        "key": f"{game}_{label}_{'none' if seed is None else seed}", "game": game, "strategy": label,
        "seed": seed, "status": "ok", "moments": len(archive),
        "frames_used": archive.manifest.get("frames_used", archive.total_frames),
        "scenes": sorted(archive.scenes()), "series": files, "final": finals,
    }
    rec.update(extra or {})
    return rec


def execute_run(task: dict) -> list[dict]:
    """Run one (game, strategy, seed) and write its outputs; never raises."""
    game, strat, seed = task["game"], task["strategy"], task["seed"]
    cfg: ExperimentConfig = task["cfg"]
    out = Path(task["out"])
    label = strat.get("label", strat["name"])
    key = f"{game}_{label}_{'none' if seed is None else seed}"
    run_dir = out / "runs" / key
    t0 = time.perf_counter()
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        records = _execute(game, strat, label, seed, cfg, run_dir, out)
    except (ScenicError, ValueError, OSError) as exc:
        records = [{"key": key, "game": game, "strategy": label, "seed": seed, "status": "failed",
                    "error": f"{type(exc).__name__}: {exc}"}]
    elapsed = time.perf_counter() - t0
    for r in records:
        r["_seconds"] = elapsed
    return records


def _execute(game, strat, label, seed, cfg: ExperimentConfig, run_dir: Path, out: Path) -> list[dict]:
    name, budget, cadence, base = strat["name"], cfg.budget_frames, cfg.cadence, cfg.base_dir
    metric_emb = make_embedding(cfg.metric_embedding, base)
    metrics = tuple(cfg.metrics)
    params = RrtParams(goal_inflation=strat.get("goal_inflation", 0.10), cadence_frames=cadence,
                       k_seeds=strat.get("k_seeds", 100))
    tree = None
    if name == "bootstrap":
        result = run_bootstrap(game, strat.get("rounds", 4), strat.get("round_budget", budget),
                               _action_model(cfg.action_model, base), seed,
                               TrainConfig.from_dict(strat.get("training")), params,
                               strat.get("bottleneck", 16), metric_emb)
        records = []
        for r, archive in enumerate(result.archives, 1):
            rdir = run_dir / f"r{r}"
            rdir.mkdir(exist_ok=True)
            if cfg.save_archives:
                write_archive(archive, rdir / "archive")
            series = series_from_archive(archive, metric_emb, metrics, run=f"{game}_{label}_{seed}_r{r}")
            rec = _record(game, f"{label}-r{r}", seed, archive, series, rdir, out,
                          {"round": r, "train_loss": result.loss_histories[r - 1][-1]
                           if result.loss_histories[r - 1] else None})
            rec["key"] = f"{game}_{label}_{seed}_r{r}"
            records.append(rec)
        result.model.save(run_dir / "model.p2m")
        return records
    if name == "attract":
        archive = run_attract(game, budget, cadence)
    elif name == "trace":
        archive = playback(_trace(_per_game(strat.get("traces", strat.get("trace")), game, "trace"), base),
                           game, cadence, budget)
    elif name == "chaos":
        archive = run_chaos_monkey(game, _action_model(cfg.action_model, base), budget, seed, cadence)
    else:
        emb = make_embedding(_per_game(strat.get("embedding", "random-projection"), game, "embedding"), base)
        model = _action_model(cfg.action_model, base)
        if name == "rrt":
            archive, tree = run_rrt(game, emb, model, budget, seed, params,
                                    store_snapshots=cfg.save_archives)
        else:
            archive, tree = run_hybrid(game, emb, model, budget, seed, params.k_seeds, params, with_tree=True)
    if cfg.save_archives:
        write_archive(archive, run_dir / "archive")
    if tree is not None:
        (run_dir / "tree.json").write_text(json.dumps(tree.to_json(), sort_keys=True) + "\n", encoding="utf-8")
    series = series_from_archive(archive, metric_emb, metrics, run=f"{game}_{label}_{seed}")
    return [_record(game, label, seed, archive, series, run_dir, out)]


def _tasks(cfg: ExperimentConfig, out: Path) -> list[dict]:
    tasks = []
    for game in cfg.games:
        for strat in cfg.strategies:
            seeds = [None] if strat["name"] in DETERMINISTIC else cfg.seeds
            for seed in seeds:
                tasks.append({"game": game, "strategy": strat, "seed": seed, "cfg": cfg, "out": str(out)})
    return tasks


def worker_count(cfg: ExperimentConfig) -> int:
    raw = os.environ.get("SCENIC_WORKERS")
    if raw is None or raw == "":
        return cfg.workers
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SCENIC_WORKERS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"SCENIC_WORKERS must be >= 1, got {n}")
    return n


def _stats(values: list[float]) -> dict:
    return {"mean": math.fsum(values) / len(values), "min": min(values), "max": max(values), "n": len(values)}


def _mean_series(paths: list[Path]) -> MetricSeries | None:
    """Pointwise mean over seeds; None when the frame grids differ."""
    runs = [read_series_csv(p) for p in paths]
    frames = runs[0].frames
    if not frames or any(r.frames != frames for r in runs):
        return None
    vals = np.array([r.values for r in runs])
    return MetricSeries("", "", "mean", list(zip(frames, (float(v) for v in vals.mean(0)))))


def aggregate(cfg: ExperimentConfig, records: list[dict], out: Path) -> dict:
    """Summary table plus seed-averaged series and plots; deterministic."""
    order = {}
    for g in cfg.games:
        for r in records:
            if r["game"] == g:
                order.setdefault((g, r["strategy"]), len(order))
    table = []
    means_dir, plots_dir = out / "means", out / "plots"
    means_dir.mkdir(parents=True, exist_ok=True)
    plots_dir.mkdir(parents=True, exist_ok=True)
    plots = {}
    for (game, label), _ in sorted(order.items(), key=lambda kv: kv[1]):
        ok = [r for r in records if r["game"] == game and r["strategy"] == label and r["status"] == "ok"]
        for m in cfg.metrics:
            finals = [r["final"][m] for r in ok if r["final"].get(m) is not None]
            row = {"game": game, "strategy": label, "metric": m,
                   "seeds": [r["seed"] for r in ok], "failed": sum(
                       1 for r in records if r["game"] == game and r["strategy"] == label and r["status"] != "ok")}
            if finals:
                row.update(_stats(finals))
                mean = _mean_series([out / r["series"][m] for r in ok])
                if mean is not None:
                    path = means_dir / f"{game}_{label}_{m}.csv"
                    mean.write_csv(path)
                    row["mean_series"] = path.relative_to(out).as_posix()
                    plots.setdefault((game, m), []).append((path, label))
            row["scenes_mean"] = (math.fsum(len(r["scenes"]) for r in ok) / len(ok)) if ok else None
            table.append(row)
    plot_files = []
    for (game, m), items in sorted(plots.items()):
        svg = plots_dir / f"{game}_{m}.svg"
        plot_series([p for p, _ in items], svg, [lbl for _, lbl in items], title=f"{cfg.id}: {game}", metric=m)
        plot_files.append(svg.relative_to(out).as_posix())
    return {"table": table, "plots": plot_files}


def run_experiment(cfg: ExperimentConfig, out, workers: int | None = None) -> dict:
    """Execute every run of ``cfg`` under ``out`` and write summary.json.

    Failed runs are recorded (status "failed") rather than raised; the
    summary's ``failed`` count tells the caller whether to exit nonzero.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = _tasks(cfg, out)
    workers = worker_count(cfg) if workers is None else workers
    t0 = time.perf_counter()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute_run, tasks))
    else:
        results = [execute_run(t) for t in tasks]
    records = sorted((r for rs in results for r in rs), key=lambda r: r["key"])
    timing = {"total_seconds": time.perf_counter() - t0, "workers": workers,
              "runs": {r["key"]: r.pop("_seconds") for r in records}}
    agg = aggregate(cfg, records, out)
    summary = {
        "experiment": cfg.id, "config": cfg.to_dict(), "runs": records,
        "table": agg["table"], "plots": agg["plots"],
        "failed": sum(1 for r in records if r["status"] != "ok"),
        "timing_file": "timing.json",
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def recompute_table(summary: dict, out) -> list[dict]:
    """Rebuild mean/min/max per (game, strategy, metric) from the series files."""
    out = Path(out)
    rows = []
    for row in summary["table"]:
        finals = [read_series_csv(out / r["series"][row["metric"]]).final
                  for r in summary["runs"]
                  if r["status"] == "ok" and r["game"] == row["game"] and r["strategy"] == row["strategy"]]
        rows.append({"game": row["game"], "strategy": row["strategy"], "metric": row["metric"], **_stats(finals)})
    return rows


def format_table(summary: dict) -> str:
    lines = [f"{'game':<12} {'strategy':<16} {'metric':<13} {'mean':>12} {'min':>12} {'max':>12} {'scenes':>6}"]
    for r in summary["table"]:
        if "mean" not in r:
            lines.append(f"{r['game']:<12} {r['strategy']:<16} {r['metric']:<13} {'failed':>12}")
            continue
        sc = "" if r["scenes_mean"] is None else f"{r['scenes_mean']:.1f}"
        lines.append(f"{r['game']:<12} {r['strategy']:<16} {r['metric']:<13} "
                     f"{r['mean']:>12.6f} {r['min']:>12.6f} {r['max']:>12.6f} {sc:>6}")
    return "\n".join(lines)
