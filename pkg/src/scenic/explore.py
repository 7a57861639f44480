"""Exploration strategies.

Every strategy spends a budget of simulated gameplay frames.  Only
``env.step`` consumes budget; snapshot save/load and embedding are free.
Each is a deterministic function of (game, config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import env
from .archive import ExplorationArchive, merged
from .embed import Bottleneck, BottleneckModel, Embedding, RandomProjection, TrainConfig, downsample, train_arrays
from .env import HALF_SECOND, NOOP, ControllerState
from .errors import ConfigError, DivergenceError, TrainingError
from .metrics import MetricSeries, series_from_archive
from .trace import EmpiricalActionModel, sample_action


@dataclass(frozen=True)
class RrtParams:
    goal_inflation: float = 0.10
    cadence_frames: int = HALF_SECOND
    k_seeds: int = 100


def _check_budget(budget: int, cadence: int):
    if budget < 0:
        raise ConfigError(f"budget must be >= 0, got {budget}")
    if cadence < 1:
        raise ConfigError(f"cadence must be >= 1, got {cadence}")


def _new_archive(game, strategy: dict, seed, cadence, budget) -> ExplorationArchive:
    return ExplorationArchive({"game": game, "strategy": strategy, "seed": seed,
                               "cadence": cadence, "budget": budget})


def run_attract(game: str, budget: int, cadence: int = HALF_SECOND) -> ExplorationArchive:
    """Hold no buttons and extract a moment every ``cadence`` frames."""
    return run_chaos_monkey(game, EmpiricalActionModel.degenerate(NOOP), budget, seed=0,
                            cadence=cadence, _strategy="attract")


def run_chaos_monkey(game: str, model: EmpiricalActionModel, budget: int, seed: int,
                     cadence: int = HALF_SECOND, snapshots: bool = False,
                     rng: np.random.Generator | None = None,
                     _strategy: str = "chaos") -> ExplorationArchive:
    """Sample an action i.i.d. from ``model`` per cadence step and hold it.

    With ``snapshots`` each moment also stores an environment snapshot, so a
    later strategy can branch from it.
    """
    _check_budget(budget, cadence)
    env.get_game(game)
    rng = rng if rng is not None else np.random.default_rng(seed)
    strategy = {"name": _strategy} if _strategy == "attract" else {"name": _strategy, "model": model.to_dict()}
    archive = _new_archive(game, strategy, None if _strategy == "attract" else seed, cadence, budget)
    state = env.boot(game)
    t = 0
    for _ in range(budget // cadence):
        ctrl = NOOP if _strategy == "attract" else sample_action(model, rng)
        state = env.step(state, ctrl, cadence)
        t += cadence
        archive.add(t, env.render(state), env.memory(state),
                    {"strategy": _strategy, "action": str(ctrl)},
                    env.save_snapshot(state) if snapshots else None)
    archive.manifest["frames_used"] = t
    return archive


@dataclass
class RrtNode:
    id: int
    parent: int | None
    action: ControllerState | None
    frames: int
    snapshot: bytes
    vector: np.ndarray
    gameplay_frames: int
    moment: int | None = None  # index of the archive moment recording this node


@dataclass
class RrtTree:
    """A forest of explored states; edges carry the held action."""

    dim: int
    nodes: list[RrtNode] = field(default_factory=list)
    roots: list[int] = field(default_factory=list)

    def __post_init__(self):
        self._vecs = np.zeros((64, self.dim))
        self._lo = self._hi = None

    def __len__(self):
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return sum(1 for n in self.nodes if n.parent is not None)

    def _add(self, node: RrtNode) -> RrtNode:
        n = len(self.nodes)
        if n == len(self._vecs):
            self._vecs = np.concatenate([self._vecs, np.zeros_like(self._vecs)])
        self._vecs[n] = node.vector
        if self._lo is None:
            self._lo, self._hi = node.vector.copy(), node.vector.copy()
        else:
            np.minimum(self._lo, node.vector, out=self._lo)
            np.maximum(self._hi, node.vector, out=self._hi)
        self.nodes.append(node)
        return node

    def add_root(self, snapshot: bytes, vector, gameplay_frames: int = 0) -> RrtNode:
        node = self._add(RrtNode(len(self.nodes), None, None, 0, snapshot,
                                 np.asarray(vector, dtype=np.float64), gameplay_frames))
        self.roots.append(node.id)
        return node

    def add_child(self, parent: int, action: ControllerState, frames: int, snapshot: bytes,
                  vector, gameplay_frames: int) -> RrtNode:
        return self._add(RrtNode(len(self.nodes), parent, action, frames, snapshot,
                                 np.asarray(vector, dtype=np.float64), gameplay_frames))

    def sample_goal(self, rng: np.random.Generator, inflation: float) -> np.ndarray:
        """Uniform point in the bounding box of node vectors.

        The box is widened by ``inflation`` of each side length (half on each
        end); degenerate sides get +-0.5 instead.
        """
        span = self._hi - self._lo
        pad = np.where(span > 0, 0.5 * inflation * span, 0.5)
        return rng.uniform(self._lo - pad, self._hi + pad)

    def nearest(self, goal: np.ndarray) -> int:
        """Euclidean nearest node; argmin breaks ties toward the lowest id."""
        d = self._vecs[:len(self.nodes)] - goal
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def path(self, node_id: int) -> list[RrtNode]:
        """Nodes from the root down to ``node_id`` inclusive."""
        out = []
        cur: int | None = node_id
        while cur is not None:
            out.append(self.nodes[cur])
            cur = self.nodes[cur].parent
        return out[::-1]

    def to_json(self) -> dict:
        return {
            "roots": list(self.roots),
            "nodes": [
                {
                    "id": n.id, "parent": n.parent,
                    "action": None if n.action is None else str(n.action),
                    "frames": n.frames, "vector": [float(v) for v in n.vector],
                    "gameplay_frames": n.gameplay_frames,
                    "snapshot": None if n.moment is None else f"snapshots/{n.moment:06d}.snp",
                }
                for n in self.nodes
            ],
        }


def run_rrt(game: str, embedding: Embedding, model: EmpiricalActionModel, budget: int,
            seed: int | Sequence[int], params: RrtParams = RrtParams(),
            seeds_from: Sequence[bytes] | None = None, *, rng: np.random.Generator | None = None,
            start_frames: int = 0, archive_roots: bool = True, store_snapshots: bool = True,
            strategy: str = "rrt") -> tuple[ExplorationArchive, RrtTree]:
    """Grow a rapidly-exploring random tree over moment vectors.

    Each expansion draws a goal in the inflated bounding box of node vectors,
    picks the nearest node, loads its snapshot, holds one action sampled
    from ``model`` for ``params.cadence_frames`` frames and adds the result
    as a child node and an archive moment.  With ``seeds_from`` the tree is a
    forest rooted at those snapshots instead of the boot state.
    """
    cadence = params.cadence_frames
    _check_budget(budget, cadence)
    env.get_game(game)
    rng = rng if rng is not None else np.random.default_rng(seed)
    archive = _new_archive(game, {"name": strategy, "embedding": embedding.id,
                                  "goal_inflation": params.goal_inflation,
                                  "model": model.to_dict()},
                           seed if isinstance(seed, int) else list(seed), cadence, budget)
    tree = RrtTree(embedding.dim)

    if seeds_from:
        root_states = [env.load_snapshot(b, game) for b in seeds_from]
    else:
        root_states = [env.boot(game)]
    shots = np.stack([env.render(s) for s in root_states])
    vecs = embedding.embed_batch(shots)
    for s, shot, vec in zip(root_states, shots, vecs):
        blob = env.save_snapshot(s)
        node = tree.add_root(blob, vec, start_frames)
        if archive_roots:
            m = archive.add(start_frames, shot, env.memory(s),
                            {"strategy": strategy, "node": node.id},
                            blob if store_snapshots else None)
            node.moment = m.index

    t = start_frames
    for _ in range(budget // cadence):
        goal = tree.sample_goal(rng, params.goal_inflation)
        near = tree.nearest(goal)
        state = env.load_snapshot(tree.nodes[near].snapshot)
        ctrl = sample_action(model, rng)
        state = env.step(state, ctrl, cadence)
        t += cadence
        shot = env.render(state)
        blob = env.save_snapshot(state)
        node = tree.add_child(near, ctrl, cadence, blob, embedding(shot), t)
        m = archive.add(t, shot, env.memory(state),
                        {"strategy": strategy, "node": node.id, "action": str(ctrl)},
                        blob if store_snapshots else None)
        node.moment = m.index
    archive.manifest["frames_used"] = t - start_frames
    return archive, tree


def run_hybrid(game: str, embedding: Embedding, model: EmpiricalActionModel, budget: int,
               seed: int, k_seeds: int = 100, params: RrtParams = RrtParams(),
               with_tree: bool = False):
    """Chaos monkey for half the budget, then an RRT forest rooted at up to
    ``k_seeds`` chaos moments drawn uniformly without replacement.

    The forest roots are already archived by the chaos phase, so only the
    forest's children are appended; the combined archive is ordered by
    cumulative gameplay frames.
    """
    cadence = params.cadence_frames
    _check_budget(budget, cadence)
    if budget < 2 * cadence:
        raise ConfigError(f"hybrid needs a budget of at least two cadence steps ({2 * cadence} frames)")
    rng = np.random.default_rng(seed)
    chaos_budget = budget // 2
    chaos = run_chaos_monkey(game, model, chaos_budget, seed, cadence, snapshots=True, rng=rng)
    used = chaos.manifest["frames_used"]
    k = min(k_seeds, len(chaos))
    picks = sorted(int(i) for i in rng.choice(len(chaos), size=k, replace=False)) if k else []
    seeds = [chaos.moments[i].snapshot for i in picks]
    forest, tree = run_rrt(game, embedding, model, budget - used, seed, params, seeds_from=seeds or None,
                           rng=rng, start_frames=used, archive_roots=False, strategy="hybrid-rrt")
    archive = merged(chaos, forest, manifest={
        "game": game, "seed": seed, "cadence": cadence, "budget": budget,
        "strategy": {"name": "hybrid", "embedding": embedding.id, "k_seeds": k_seeds,
                     "goal_inflation": params.goal_inflation, "model": model.to_dict(),
                     "seed_moments": picks},
    })
    archive.manifest["frames_used"] = used + forest.manifest["frames_used"]
    # root i of the forest is recorded by chaos moment picks[i]
    for root, idx in zip(tree.roots, picks):
        tree.nodes[root].moment = idx
    offset = len(chaos)
    for node in tree.nodes:
        if node.parent is not None and node.moment is not None:
            node.moment += offset
    return (archive, tree) if with_tree else archive


@dataclass
class BootstrapResult:
    archives: list[ExplorationArchive]
    model: BottleneckModel
    series: list[MetricSeries]
    loss_histories: list[list[float]]
    update_norms: list[float]


def run_bootstrap(game: str, rounds: int, round_budget: int, model: EmpiricalActionModel, seed: int,
                  training: TrainConfig = TrainConfig(), params: RrtParams = RrtParams(),
                  bottleneck: int = 16, metric_embedding: Embedding | None = None,
                  metric: str = "nuclear_norm") -> BootstrapResult:
    """Alternate RRT exploration with incremental training of its embedding.

    Round 1 explores with an untrained network.  After every round the
    network is trained further on all (screenshot, memory) pairs gathered so
    far; trees are discarded and each round restarts from boot with the same
    budget.  Round 1 uses ``seed`` exactly as :func:`run_rrt` would.
    """
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}")
    metric_embedding = metric_embedding or RandomProjection()
    net = BottleneckModel.fresh(seed, bottleneck)
    archives, series, histories, norms = [], [], [], []
    xs, ys = [], []
    for r in range(rounds):
        round_seed = seed if r == 0 else (seed, r)
        arch, _ = run_rrt(game, Bottleneck(net, id=f"bottleneck:bootstrap-r{r + 1}"), model,
                          round_budget, round_seed, params, store_snapshots=False,
                          strategy=f"bootstrap-r{r + 1}")
        arch.manifest["round"] = r + 1
        archives.append(arch)
        series.append(series_from_archive(arch, metric_embedding, metric, run=f"{game}_bootstrap_{seed}_r{r + 1}"))
        xs.append(downsample(arch.screenshots()))
        ys.append(np.stack([np.frombuffer(m.memory, dtype=np.uint8) for m in arch.moments]) / 255.0)
        try:
            new, hist = train_arrays(np.concatenate(xs), np.concatenate(ys),
                                     replace(training, seed=training.seed + r), net)
        except DivergenceError as exc:
            err = TrainingError(f"bootstrap round {r + 1}: {exc}")
            err.round = r + 1
            raise err from exc
        norms.append(math.sqrt(sum(float(np.sum((new.params[k] - net.params[k]) ** 2)) for k in net.params)))
        histories.append(hist)
        net = new
    return BootstrapResult(archives, net, series, histories, norms)


def distinct_scenes(archive: ExplorationArchive) -> int:
    return len(archive.scenes())
