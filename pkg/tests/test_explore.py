import numpy as np
import pytest

from scenic import env, explore
from scenic.embed import AvgRGB, Bottleneck, BottleneckModel, RandomProjection, TrainConfig
from scenic.env import NOOP
from scenic.errors import ConfigError
from scenic.explore import (
    RrtParams,
    RrtTree,
    run_attract,
    run_bootstrap,
    run_chaos_monkey,
    run_hybrid,
    run_rrt,
)
from scenic.trace import EmpiricalActionModel


def same_moments(a, b):
    assert len(a) == len(b)
    for x, y in zip(a.moments, b.moments):
        assert (x.gameplay_frames, x.screen, x.memory) == (y.gameplay_frames, y.screen, y.memory)


class StepCounter:
    """Wraps env.step and tallies every frame simulated."""

    def __init__(self, monkeypatch):
        self.frames = 0
        real = env.step

        def counted(state, ctrl, frames):
            self.frames += frames
            return real(state, ctrl, frames)
        monkeypatch.setattr(env, "step", counted)


def test_attract_gridquest_scenes():
    arch = run_attract("gridquest", 36000)
    assert len(arch) == 1200
    assert arch.scenes() == {0, 1, 4}
    assert arch.manifest["seed"] is None


def test_attract_is_chaos_with_noop_model():
    a = run_attract("colorcavern", 3000)
    b = run_chaos_monkey("colorcavern", EmpiricalActionModel.degenerate(NOOP), 3000, seed=99)
    same_moments(a, b)


def test_chaos_reaches_overworld(action_model):
    arch = run_chaos_monkey("gridquest", action_model, 36000, seed=0)
    assert 2 in arch.scenes()


def test_chaos_cadence_and_budget(action_model, monkeypatch):
    counter = StepCounter(monkeypatch)
    arch = run_chaos_monkey("gridquest", action_model, 1000, seed=4, cadence=30)
    assert [m.gameplay_frames for m in arch.moments] == list(range(30, 1000, 30))
    assert counter.frames == arch.manifest["frames_used"] == 990


def test_chaos_is_deterministic(action_model):
    same_moments(run_chaos_monkey("gridquest", action_model, 3000, 7),
                 run_chaos_monkey("gridquest", action_model, 3000, 7))
    a = run_chaos_monkey("gridquest", action_model, 3000, 7)
    b = run_chaos_monkey("gridquest", action_model, 3000, 8)
    assert [m.provenance["action"] for m in a.moments] != [m.provenance["action"] for m in b.moments]


def test_negative_budget_rejected(action_model):
    with pytest.raises(ConfigError):
        run_chaos_monkey("gridquest", action_model, -1, 0)


# --- tree ---------------------------------------------------------------

def test_nearest_breaks_ties_by_lowest_id():
    t = RrtTree(2)
    t.add_root(b"", [0.0, 0.0])
    t.add_child(0, NOOP, 30, b"", [1.0, 0.0], 30)
    t.add_child(0, NOOP, 30, b"", [0.0, 0.0], 60)
    assert t.nearest(np.array([0.0, 0.0])) == 0
    assert t.nearest(np.array([0.9, 0.0])) == 1
    assert t.edge_count == 2


def test_goal_box_inflation():
    t = RrtTree(2)
    t.add_root(b"", [0.0, 1.0])
    t.add_child(0, NOOP, 30, b"", [10.0, 1.0], 30)
    rng = np.random.default_rng(0)
    goals = np.array([t.sample_goal(rng, 0.10) for _ in range(5000)])
    # x side 10 is padded by 0.5 at each end, the degenerate y side by 0.5
    assert goals[:, 0].min() >= -0.5 and goals[:, 0].max() <= 10.5
    assert goals[:, 0].min() < -0.4 and goals[:, 0].max() > 10.4
    assert goals[:, 1].min() >= 0.5 and goals[:, 1].max() <= 1.5


def test_rrt_budget_equal_to_cadence(action_model):
    arch, tree = run_rrt("gridquest", AvgRGB(), action_model, 30, seed=0)
    assert len(tree) == 2 and tree.nodes[1].parent == 0
    assert [m.gameplay_frames for m in arch.moments] == [0, 30]


@pytest.mark.parametrize("budget", [0, 29, 31, 905])
def test_rrt_node_count_and_accounting(action_model, monkeypatch, budget):
    counter = StepCounter(monkeypatch)
    arch, tree = run_rrt("colorcavern", AvgRGB(), action_model, budget, seed=1)
    assert len(tree) == 1 + budget // 30
    assert tree.edge_count == budget // 30
    assert counter.frames == 30 * (budget // 30) <= budget


def test_rrt_tree_paths_replay(action_model):
    arch, tree = run_rrt("gridquest", RandomProjection(), action_model, 3600, seed=2)
    rng = np.random.default_rng(5)
    for nid in rng.choice(len(tree), 20, replace=False):
        state = env.boot("gridquest")
        for node in tree.path(int(nid))[1:]:
            state = env.step(state, node.action, node.frames)
        node = tree.nodes[int(nid)]
        assert env.memory(state) == arch.moments[node.moment].memory
        assert env.save_snapshot(state) == node.snapshot


def test_rrt_tree_json(action_model):
    arch, tree = run_rrt("gridquest", AvgRGB(), action_model, 300, seed=0)
    doc = tree.to_json()
    assert len(doc["nodes"]) == 11
    assert doc["nodes"][0]["parent"] is None
    for n in doc["nodes"][1:]:
        assert n["parent"] < n["id"]
        assert n["snapshot"] == f"snapshots/{n['id']:06d}.snp"


def test_rrt_is_deterministic(action_model):
    a, _ = run_rrt("colorcavern", RandomProjection(), action_model, 1800, seed=3)
    b, _ = run_rrt("colorcavern", RandomProjection(), action_model, 1800, seed=3)
    same_moments(a, b)
    assert a.content_hash() == b.content_hash()


def test_rrt_goal_inflation_param(action_model):
    a, _ = run_rrt("gridquest", AvgRGB(), action_model, 1800, 0, RrtParams(goal_inflation=0.0))
    assert a.manifest["strategy"]["goal_inflation"] == 0.0


# --- hybrid -------------------------------------------------------------

def test_hybrid_single_seed(action_model):
    arch, tree = run_hybrid("gridquest", AvgRGB(), action_model, 3600, seed=0, k_seeds=1, with_tree=True)
    assert len(tree.roots) == 1
    assert arch.manifest["strategy"]["seed_moments"] == [tree.nodes[0].moment]
    assert len(arch) == 60 + 60


def test_hybrid_budget(action_model, monkeypatch):
    counter = StepCounter(monkeypatch)
    arch, tree = run_hybrid("colorcavern", AvgRGB(), action_model, 1000, seed=3, k_seeds=100, with_tree=True)
    assert len(tree.roots) == 16  # floor(500 / 30) chaos moments
    assert counter.frames == arch.manifest["frames_used"] <= 1000
    frames = [m.gameplay_frames for m in arch.moments]
    assert frames == sorted(frames) and frames[-1] <= 1000


def test_hybrid_forest_moments_link_back(action_model):
    arch, tree = run_hybrid("gridquest", RandomProjection(), action_model, 1800, seed=1, k_seeds=5, with_tree=True)
    for node in tree.nodes:
        assert arch.moments[node.moment].snapshot == node.snapshot


def test_hybrid_needs_two_steps(action_model):
    with pytest.raises(ConfigError):
        run_hybrid("gridquest", AvgRGB(), action_model, 59, seed=0)


# --- bootstrap ----------------------------------------------------------

def test_bootstrap_first_round_is_plain_rrt(action_model):
    res = run_bootstrap("gridquest", 1, 900, action_model, seed=4, training=TrainConfig(epochs=2))
    ref, _ = run_rrt("gridquest", Bottleneck(BottleneckModel.fresh(4, 16)), action_model, 900, 4)
    same_moments(res.archives[0], ref)


def test_bootstrap_rounds(action_model):
    res = run_bootstrap("gridquest", 3, 600, action_model, seed=0, training=TrainConfig(epochs=3))
    assert len(res.archives) == len(res.series) == len(res.update_norms) == 3
    assert all(n > 0 for n in res.update_norms)
    assert [a.manifest["round"] for a in res.archives] == [1, 2, 3]
    assert all(len(h) == 3 for h in res.loss_histories)
    # every round restarts from boot
    assert all(a.moments[0].gameplay_frames == 0 for a in res.archives)


def test_bootstrap_rejects_zero_rounds(action_model):
    with pytest.raises(ConfigError):
        run_bootstrap("gridquest", 0, 600, action_model, seed=0)


def test_distinct_scenes():
    assert explore.distinct_scenes(run_attract("gridquest", 300)) == 2
