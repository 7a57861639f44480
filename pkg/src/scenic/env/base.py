"""Shared constants and helpers for the built-in toy games."""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections import deque

import numpy as np

from .controller import ControllerState

FPS = 60
HALF_SECOND = FPS // 2
SCREEN_W = SCREEN_H = 64
MEMORY_SIZE = 128


class Game(ABC):
    """Immutable rules for one deterministic game.

    States are frozen dataclasses; every method here is a pure function of
    its arguments, so one instance can be shared between threads.
    """

    game_id: str
    state_type: type

    @abstractmethod
    def boot(self): ...

    @abstractmethod
    def step(self, state, ctrl: ControllerState, frames: int): ...

    @abstractmethod
    def render(self, state) -> np.ndarray: ...

    @abstractmethod
    def memory(self, state) -> bytes: ...

    def scene(self, state) -> int:
        return self.memory(state)[0]

    def serialize(self, state) -> bytes:
        return state.pack()

    def deserialize(self, payload: bytes):
        return self.state_type.unpack(payload)


def parse_layout(rows: list[str]):
    """Parse an ASCII room. Returns (walls[h][w] bool array, start, goal)."""
    h, w = len(rows), len(rows[0])
    walls = np.zeros((h, w), dtype=bool)
    start = goal = None
    for y, row in enumerate(rows):
        if len(row) != w:
            raise ValueError(f"ragged layout row {y}")
        for x, ch in enumerate(row):
            if ch == "#":
                walls[y, x] = True
            elif ch == "S":
                start = (x, y)
            elif ch in "FE":
                goal = (x, y)
    if start is None or goal is None:
        raise ValueError("layout needs a start and a goal")
    return walls, start, goal


def shortest_path(walls: np.ndarray, start, goal) -> list[tuple[int, int]]:
    """4-connected BFS path from start to goal inclusive; [] if unreachable."""
    h, w = walls.shape
    prev = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            break
        x, y = cur
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < w and 0 <= ny < h and not walls[ny, nx] and (nx, ny) not in prev:
                prev[(nx, ny)] = cur
                queue.append((nx, ny))
    if goal not in prev:
        return []
    path = [goal]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def fill(img: np.ndarray, x: int, y: int, w: int, h: int, color) -> None:
    img[y:y + h, x:x + w] = color


def shade(color, factor: float) -> tuple[int, int, int]:
    return tuple(int(round(c * factor)) for c in color)
