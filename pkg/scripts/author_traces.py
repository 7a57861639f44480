"""Regenerate the bundled trace corpus under src/scenic/data/traces/.

Traces are authored closed-loop against the simulator: a tiny "player"
plans routes with BFS and a seeded RNG adds hesitation, detours and stray
button presses so tours look like a first-time player rather than a bot.

    python scripts/author_traces.py
"""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np

from scenic import env
from scenic.env import colorcavern as cc
from scenic.env import gridquest as gq
from scenic.env.base import shortest_path
from scenic.env.controller import ControllerState as C
from scenic.trace import ActionTrace, Segment, serialize_trace

OUT = Path(__file__).resolve().parents[1] / "src" / "scenic" / "data" / "traces"
DIRS = {(1, 0): "RIGHT", (-1, 0): "LEFT", (0, 1): "DOWN", (0, -1): "UP"}


class Player:
    def __init__(self, game: str, seed: int, sloppy: bool):
        self.game = game
        self.state = env.boot(game)
        self.segments: list[Segment] = []
        self.rng = random.Random(seed)
        self.sloppy = sloppy
        self.per_tile = gq.FRAMES_PER_TILE if game == "gridquest" else cc.FRAMES_PER_TILE

    def press(self, buttons: str, frames: int):
        ctrl = C.parse(buttons)
        if self.segments and self.segments[-1].ctrl == ctrl:
            frames += self.segments.pop().frames
        self.segments.append(Segment(ctrl, frames))
        self.state = env.step(self.state, ctrl, frames)

    def idle(self, lo: int, hi: int):
        self.press("-", self.rng.randint(lo, hi))

    def hesitate(self):
        if self.sloppy and self.rng.random() < 0.35:
            self.idle(6, 50)

    def fidget(self, harmless: str = "A"):
        if self.sloppy and self.rng.random() < 0.15:
            self.press(harmless, self.rng.randint(4, 20))
            self.idle(4, 12)

    def _walls(self):
        s = self.state
        if self.game == "gridquest":
            if s.scene == gq.Scene.OVERWORLD:
                w = np.ones((gq.MAP_SIZE + 2, gq.MAP_SIZE + 2), dtype=bool)
                w[1:-1, 1:-1] = False
                return w, 1
            return gq.ROOMS[s.level][0], 0
        return cc.ROOMS[s.maze][0], 0

    def walk_to(self, target, harmless: str = "A", detours: float = 0.0):
        """Walk to ``target`` one straight run at a time, re-planning after noise."""
        scene0 = env.scene(self.state)
        for _ in range(200):
            s = self.state
            if (s.x, s.y) == target or env.scene(s) != scene0:
                return
            walls, off = self._walls()
            path = shortest_path(walls, (s.x + off, s.y + off), (target[0] + off, target[1] + off))
            if len(path) < 2:
                raise RuntimeError(f"no route to {target} from {(s.x, s.y)}")
            step = (path[1][0] - path[0][0], path[1][1] - path[0][1])
            run = 1
            while run + 1 < len(path) and (path[run + 1][0] - path[run][0], path[run + 1][1] - path[run][1]) == step:
                run += 1
            if self.sloppy and self.rng.random() < detours:
                wrong = self.rng.choice([d for d in DIRS if d != step])
                self.press(DIRS[wrong], self.per_tile * self.rng.randint(1, 3) + self.rng.randint(0, 2))
                self.idle(3, 20)
                continue
            if self.sloppy and run > 2 and self.rng.random() < 0.3:
                run = self.rng.randint(1, run - 1)
            self.press(DIRS[step], self.per_tile * run + (self.rng.randint(0, self.per_tile - 1) if self.sloppy else 0))
            self.hesitate()
            self.fidget(harmless)
        raise RuntimeError("walk_to did not converge")

    def wander(self, moves: int, harmless: str = "A"):
        for _ in range(moves):
            d = self.rng.choice(list(DIRS.values()))
            if self.rng.random() < 0.15:
                d = self.rng.choice(["UP+RIGHT", "DOWN+LEFT", "DOWN+RIGHT", "UP+LEFT"])
            self.press(d, self.rng.randint(self.per_tile, 4 * self.per_tile))
            self.hesitate()
            self.fidget(harmless)

    def trace(self) -> ActionTrace:
        return ActionTrace(self.game, tuple(self.segments))


def gq_enter(p: Player, level: int, sloppy_wander: int = 0):
    if sloppy_wander:
        p.wander(sloppy_wander, harmless="B")
    p.walk_to(gq.LEVEL_CELLS[level], harmless="B")
    p.idle(5, 25)
    p.press("A", 8)
    assert p.state.scene == gq.Scene.LEVEL and p.state.level == level, p.state


def gq_clear(p: Player, detours: float):
    level = p.state.level
    p.walk_to(gq.ROOMS[level][2], detours=detours)
    assert p.state.scene == gq.Scene.FANFARE, p.state
    p.idle(gq.FANFARE_FRAMES, gq.FANFARE_FRAMES + 40)
    assert p.state.scene == gq.Scene.OVERWORLD


def gridquest_tour() -> ActionTrace:
    p = Player("gridquest", seed=11, sloppy=True)
    p.idle(90, 110)
    p.press("A", 10)
    p.idle(20, 40)
    p.press("B", 8)
    p.idle(380, 420)  # idles long enough to see the attract demo
    assert p.state.scene == gq.Scene.ATTRACT
    p.idle(200, 260)
    p.press("A", 12)
    assert p.state.scene == gq.Scene.TITLE
    p.idle(30, 60)
    p.press("START", 14)
    assert p.state.scene == gq.Scene.OVERWORLD
    p.idle(40, 80)
    gq_enter(p, 0, sloppy_wander=6)
    p.wander(10)
    gq_clear(p, detours=0.25)
    p.idle(30, 60)
    gq_enter(p, 1, sloppy_wander=3)
    p.wander(14)
    p.press("B", 10)  # gives up and leaves the level
    p.idle(60, 90)
    p.wander(8, harmless="B")
    gq_enter(p, 0)
    p.wander(12)
    p.press("B", 10)
    p.idle(40, 80)
    gq_enter(p, 1)
    gq_clear(p, detours=0.3)
    p.idle(40, 60)
    gq_enter(p, 2, sloppy_wander=4)
    p.wander(60)
    p.press("B", 10)
    p.idle(30, 60)
    gq_enter(p, 1, sloppy_wander=10)
    p.wander(40)
    p.press("B", 8)
    gq_enter(p, 2)
    p.wander(50)
    p.idle(100, 150)
    return p.trace()


def gridquest_speedrun() -> ActionTrace:
    p = Player("gridquest", seed=12, sloppy=False)
    p.idle(60, 60)
    p.press("START", 4)
    for level in range(gq.NUM_LEVELS):
        gq_enter(p, level)
        gq_clear(p, detours=0.0)
    assert p.state.unlocked == 0b1111
    p.idle(30, 30)
    return p.trace()


def cc_clear(p: Player, detours: float):
    maze = p.state.maze
    p.walk_to(cc.ROOMS[maze][2], harmless="B", detours=detours)
    p.idle(10, 40)


def colorcavern_tour() -> ActionTrace:
    p = Player("colorcavern", seed=21, sloppy=True)
    p.idle(120, 200)
    p.press("SELECT", 10)
    p.idle(30, 60)
    p.press("START", 10)
    assert p.state.scene == 1
    p.wander(50, harmless="B")
    cc_clear(p, detours=0.3)
    assert p.state.scene == 2
    p.wander(70, harmless="B")
    cc_clear(p, detours=0.3)
    assert p.state.scene == 3
    p.wander(90, harmless="B")
    p.idle(60, 120)
    return p.trace()


def colorcavern_speedrun() -> ActionTrace:
    p = Player("colorcavern", seed=22, sloppy=False)
    p.idle(20, 20)
    p.press("START", 4)
    for _ in range(cc.NUM_MAZES):
        p.walk_to(cc.ROOMS[p.state.maze][2])
    assert p.state.scene == cc.TITLE and p.state.cleared == 3
    p.idle(30, 30)
    p.press("START", 4)
    p.walk_to((6, 1))
    return p.trace()


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, make in [
        ("gridquest_tour", gridquest_tour),
        ("gridquest_speedrun", gridquest_speedrun),
        ("colorcavern_tour", colorcavern_tour),
        ("colorcavern_speedrun", colorcavern_speedrun),
    ]:
        trace = make()
        text = serialize_trace(trace)
        header, body = text.split("\n", 1)
        note = f"# {name}: authored by scripts/author_traces.py, {trace.total_frames} frames\n"
        (OUT / f"{name}.trc").write_text(header + "\n" + note + body, encoding="utf-8", newline="\n")
        print(f"{name}: {len(trace.segments)} segments, {trace.total_frames} frames "
              f"({trace.total_frames / env.FPS:.0f} s)")


if __name__ == "__main__":
    main()
