import numpy as np
import pytest

from scenic import env
from scenic.env import colorcavern as cc
from scenic.env import gridquest as gq
from scenic.env.base import shortest_path
from scenic.env.controller import ControllerState as C
from scenic.errors import ConfigError, SnapshotError

from conftest import random_state

GAMES = sorted(env.GAMES)


# controller

def test_controller_parse_and_canonical_order():
    assert str(C.parse("A+RIGHT+UP")) == "UP+RIGHT+A"
    assert C.parse("-") == env.NOOP
    assert str(env.NOOP) == "-"
    assert "START" in C.parse("START")
    assert len(C.parse("UP+DOWN+A")) == 3


@pytest.mark.parametrize("bad", ["JUMP", "UP+", "", "up"])
def test_controller_rejects_unknown_buttons(bad):
    with pytest.raises(ValueError):
        C.parse(bad)


def test_controller_is_a_set():
    assert C.of(["A", "A", "B"]) == C.of(["B", "A"])


# boot / render / memory

def test_boot_gridquest():
    s = env.boot("gridquest")
    mem = env.memory(s)
    assert s.frame == 0 and mem[0] == gq.Scene.BOOT
    assert mem[4] == 0b0001
    assert len(mem) == 128


def test_boot_colorcavern():
    s = env.boot("colorcavern")
    assert s.frame == 0 and env.memory(s)[0] == cc.TITLE


def test_boot_screen_is_black():
    img = env.render(env.boot("gridquest"))
    assert img.shape == (64, 64, 3) and img.dtype == np.uint8
    assert not img.any()


def test_title_is_blue():
    s = env.step(env.boot("gridquest"), env.NOOP, gq.BOOT_FRAMES)
    assert env.scene(s) == gq.Scene.TITLE
    avg = env.render(s).reshape(-1, 3).mean(0)
    assert avg[2] > avg[0] and avg[2] > avg[1]


def test_unknown_game():
    with pytest.raises(ConfigError):
        env.boot("zelda")


@pytest.mark.parametrize("game", GAMES)
def test_serialization_is_stable(game):
    a = env.step(env.boot(game), C.parse("START"), 90)
    b = env.step(env.boot(game), C.parse("START"), 90)
    assert env.serialize(a) == env.serialize(b)
    assert env.render(a).tobytes() == env.render(b).tobytes()


# GridQuest rules

def title_state():
    return env.step(env.boot("gridquest"), env.NOOP, gq.BOOT_FRAMES)


def test_boot_lasts_60_frames():
    s = env.step(env.boot("gridquest"), env.NOOP, gq.BOOT_FRAMES - 1)
    assert env.scene(s) == gq.Scene.BOOT
    assert env.scene(env.step(s, env.NOOP, 1)) == gq.Scene.TITLE


def test_start_opens_overworld():
    s = env.step(title_state(), C.parse("START"), 30)
    assert env.memory(s)[0] == gq.Scene.OVERWORLD


def test_idle_title_starts_attract_demo():
    s = env.step(title_state(), env.NOOP, gq.IDLE_FRAMES)
    assert env.memory(s)[0] == gq.Scene.ATTRACT
    s = env.step(s, env.NOOP, gq.ATTRACT_FRAMES)
    assert env.memory(s)[0] == gq.Scene.TITLE


def test_button_interrupts_attract():
    s = env.step(title_state(), env.NOOP, gq.IDLE_FRAMES + 50)
    s = env.step(s, C.parse("B"), 1)
    assert env.scene(s) == gq.Scene.TITLE


def test_other_buttons_reset_idle_timer():
    s = env.step(title_state(), env.NOOP, gq.IDLE_FRAMES - 10)
    s = env.step(s, C.parse("A"), 1)
    s = env.step(s, env.NOOP, 20)
    assert env.scene(s) == gq.Scene.TITLE


def walk(state, path, per_tile):
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        name = {(1, 0): "RIGHT", (-1, 0): "LEFT", (0, 1): "DOWN", (0, -1): "UP"}[(x1 - x0, y1 - y0)]
        state = env.step(state, C.parse(name), per_tile)
        state = env.step(state, env.NOOP, 1)  # release so the hold counter restarts
    return state


def test_completing_level_0_unlocks_level_1():
    s = env.step(title_state(), C.parse("START"), 2)
    s = env.step(s, C.parse("A"), 2)
    assert env.scene(s) == gq.Scene.LEVEL and s.level == 0
    walls, start, goal = gq.ROOMS[0]
    s = walk(s, shortest_path(walls, start, goal), gq.FRAMES_PER_TILE)
    assert env.scene(s) == gq.Scene.FANFARE
    s = env.step(s, env.NOOP, gq.FANFARE_FRAMES)
    mem = env.memory(s)
    assert mem[0] == gq.Scene.OVERWORLD
    assert mem[4] == 0b0011


def test_walls_block_and_b_exits():
    s = env.step(env.step(title_state(), C.parse("START"), 2), C.parse("A"), 2)
    x, y = s.x, s.y
    walls = gq.ROOMS[0][0]
    blocked = [d for d, (dx, dy) in {"UP": (0, -1), "LEFT": (-1, 0)}.items() if walls[y + dy, x + dx]]
    for d in blocked:
        t = env.step(s, C.parse(d), 50)
        assert (t.x, t.y) == (x, y)
    assert env.scene(env.step(s, C.parse("B"), 1)) == gq.Scene.OVERWORLD


def test_locked_levels_cannot_be_entered():
    s = env.step(title_state(), C.parse("START"), 2)
    target = gq.LEVEL_CELLS[1]
    s = walk(s, [(1, 1), (2, 1), (3, 1), (3, 2), (3, 3)], gq.FRAMES_PER_TILE)
    assert (s.x, s.y) == target
    assert env.scene(env.step(s, C.parse("A"), 5)) == gq.Scene.OVERWORLD


def test_all_layouts_are_solvable():
    for rooms in (gq.ROOMS, cc.ROOMS):
        for walls, start, goal in rooms:
            assert len(shortest_path(walls, start, goal)) > 1


def test_speedrun_reaches_every_scene_and_level():
    from scenic.trace import bundled_trace, playback
    arch = playback(bundled_trace("gridquest_speedrun"), "gridquest", cadence=1)
    mems = [m.memory for m in arch.moments]
    assert max(m[4] for m in mems) == 0b1111
    assert {m[1] for m in mems if m[0] == gq.Scene.LEVEL} == {0, 1, 2, 3}


def test_boot_unreachable_after_frame_60(rng):
    for _ in range(50):
        s = random_state("gridquest", rng)
        if s.frame >= gq.BOOT_FRAMES:
            assert env.scene(s) != gq.Scene.BOOT


def test_colorcavern_mazes_advance():
    s = env.step(env.boot("colorcavern"), C.parse("START"), 1)
    for k in range(cc.NUM_MAZES):
        assert env.scene(s) == k + 1
        walls, start, goal = cc.ROOMS[k]
        s = walk(s, shortest_path(walls, start, goal), cc.FRAMES_PER_TILE)
    assert env.scene(s) == cc.TITLE and env.memory(s)[4] == 3


# invariants over random states

@pytest.mark.parametrize("game", GAMES)
def test_step_composition(game):
    rng = np.random.default_rng(7)
    for _ in range(500):
        s = random_state(game, rng, 12)
        ctrl = C(int(rng.integers(0, 256)))
        total = int(rng.integers(2, 90))
        k = int(rng.integers(1, total))
        whole = env.step(s, ctrl, total)
        split = env.step(env.step(s, ctrl, k), ctrl, total - k)
        assert env.serialize(whole) == env.serialize(split)


@pytest.mark.parametrize("game", GAMES)
def test_scene_oracle_matches_renderer(game, rng):
    decode = gq.background_scene if game == "gridquest" else cc.background_scene
    for _ in range(200):
        s = random_state(game, rng)
        assert decode(env.render(s)) == env.memory(s)[0] == env.scene(s)


def test_frame_counter_advances(rng):
    s = random_state("gridquest", rng)
    t = env.step(s, env.NOOP, 37)
    assert t.frame == s.frame + 37
    mem = env.memory(t)
    assert int.from_bytes(mem[8:10], "little") == t.frame % 65536


def test_step_needs_a_positive_frame_count():
    with pytest.raises(ValueError):
        env.step(title_state(), C.parse("START"), 0)


# snapshots

@pytest.mark.parametrize("game", GAMES)
def test_snapshot_round_trip(game, rng):
    for _ in range(30):
        s = random_state(game, rng)
        blob = env.save_snapshot(s)
        t = env.load_snapshot(blob)
        assert t == s
        a = C(int(rng.integers(0, 256)))
        assert env.serialize(env.step(t, a, 30)) == env.serialize(env.step(s, a, 30))


@pytest.mark.parametrize("game,size", [("gridquest", 44), ("colorcavern", 45)])
def test_snapshot_size_is_stable(game, size, rng):
    for _ in range(20):
        assert len(env.save_snapshot(random_state(game, rng))) == size


def test_snapshot_errors():
    blob = env.save_snapshot(title_state())
    with pytest.raises(SnapshotError):
        env.load_snapshot(blob[:-3])
    with pytest.raises(SnapshotError):
        env.load_snapshot(b"XXXXXXXX" + blob[8:])
    corrupt = bytearray(blob)
    corrupt[-6] ^= 0xFF
    with pytest.raises(SnapshotError):
        env.load_snapshot(bytes(corrupt))
    with pytest.raises(SnapshotError):
        env.load_snapshot(blob, "colorcavern")
