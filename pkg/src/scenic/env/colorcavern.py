"""ColorCavern: a title screen followed by three full-screen mazes.

Memory layout (128 bytes, unused bytes stay zero)::

    [0]    scene (TITLE=0, MAZE_k=k+1)
    [1]    maze index
    [2]    player x (tile)
    [3]    player y
    [4]    mazes cleared (saturating count)
    [5:7]  frames spent on the title screen (little endian)
    [8:10] frame counter mod 65536 (little endian)

There is no attract mode. Clearing the last maze returns to the title.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .base import MEMORY_SIZE, SCREEN_H, SCREEN_W, Game, fill, parse_layout, shade
from .controller import DIRECTIONS, DOWN, LEFT, RIGHT, START, UP, ControllerState

TITLE = 0
FRAMES_PER_TILE = 3
TILE = 4

MAZES = [
    [
        "################",
        "#S.....#.......#",
        "#.####.#.#####.#",
        "#.#....#.#...#.#",
        "#.#.####.#.#.#.#",
        "#.#......#.#...#",
        "#.########.###.#",
        "#..........#...#",
        "#########.##.###",
        "#.......#....#.#",
        "#.#####.####.#.#",
        "#.#...#....#...#",
        "#.#.#.####.###.#",
        "#...#......#..E#",
        "#.####.#####.#.#",
        "################",
    ],
    [
        "################",
        "#S#.....#......#",
        "#.#.###.#.####.#",
        "#.#.#...#....#.#",
        "#...#.######.#.#",
        "#####......#.#.#",
        "#.....####.#.#.#",
        "#.###.#....#...#",
        "#.#...#.########",
        "#.#.###.#......#",
        "#.#.....#.####.#",
        "#.#######.#..#.#",
        "#.........#.##.#",
        "#.#########....#",
        "#............#E#",
        "################",
    ],
    [
        "################",
        "#S..#.........E#",
        "###.#.#######.##",
        "#...#.#.....#..#",
        "#.###.#.###.##.#",
        "#.#...#...#....#",
        "#.#.#####.####.#",
        "#.#.....#....#.#",
        "#.#####.####.#.#",
        "#..........#.#.#",
        "#####.####.#.#.#",
        "#...#....#.#...#",
        "#.#.####.#.#####",
        "#.#......#.....#",
        "#.############.#",
        "################",
    ],
]
ROOMS = [parse_layout(rows) for rows in MAZES]
NUM_MAZES = len(ROOMS)

RED = (255, 0, 0)
WHITE = (250, 250, 250)
MAZE_PALETTES = [
    (40, 200, 220),  # cyan
    (210, 50, 170),  # magenta
    (150, 220, 40),  # lime
]
TITLE_BG = (10, 10, 10)
TITLE_STRIPES = [(200, 40, 40), (40, 200, 220), (210, 50, 170), (150, 220, 40)]


@dataclass(frozen=True, slots=True)
class ColorCavernState:
    frame: int = 0
    scene: int = TITLE
    maze: int = 0
    x: int = 0
    y: int = 0
    cleared: int = 0
    timer: int = 0
    hold: int = 0
    prev_dirs: int = 0

    _FMT = struct.Struct("<QBBBBBHBB")

    game_id = "colorcavern"

    def pack(self) -> bytes:
        return self._FMT.pack(
            self.frame, self.scene, self.maze, self.x, self.y, self.cleared,
            self.timer, self.hold, self.prev_dirs,
        )

    @classmethod
    def unpack(cls, payload: bytes) -> ColorCavernState:
        if len(payload) != cls._FMT.size:
            raise ValueError(f"expected {cls._FMT.size} state bytes, got {len(payload)}")
        return cls(*cls._FMT.unpack(payload))


class ColorCavern(Game):
    game_id = "colorcavern"
    state_type = ColorCavernState

    def boot(self) -> ColorCavernState:
        return ColorCavernState()

    def step(self, state: ColorCavernState, ctrl: ControllerState, frames: int) -> ColorCavernState:
        if frames < 1:
            raise ValueError(f"frames must be >= 1, got {frames}")
        m = ctrl.mask
        dirs = m & DIRECTIONS
        dx = bool(m & RIGHT) - bool(m & LEFT)
        dy = bool(m & DOWN) - bool(m & UP)
        frame, scene, maze, x, y, cleared, timer, hold, prev = (
            state.frame, state.scene, state.maze, state.x, state.y, state.cleared,
            state.timer, state.hold, state.prev_dirs,
        )
        for _ in range(frames):
            if dirs and dirs == prev:
                hold = hold + 1 if hold < FRAMES_PER_TILE else 1
            else:
                hold = 1 if dirs else 0
            prev = dirs

            if scene == TITLE:
                if m & START:
                    scene, maze, timer = 1, 0, 0
                    x, y = ROOMS[0][1]
                else:
                    timer = min(timer + 1, 0xFFFF)
            elif hold == FRAMES_PER_TILE:
                walls, _, goal = ROOMS[maze]
                if dx and not walls[y, x + dx]:
                    x += dx
                if dy and not walls[y + dy, x]:
                    y += dy
                if (x, y) == goal:
                    cleared = min(cleared + 1, 255)
                    if maze + 1 < NUM_MAZES:
                        maze += 1
                        scene = maze + 1
                        x, y = ROOMS[maze][1]
                    else:
                        scene, maze, timer, x, y = TITLE, 0, 0, 0, 0
            frame += 1
        return ColorCavernState(frame, scene, maze, x, y, cleared, timer, hold, prev)

    def memory(self, state: ColorCavernState) -> bytes:
        mem = bytearray(MEMORY_SIZE)
        mem[0] = state.scene
        mem[1] = state.maze
        mem[2] = state.x
        mem[3] = state.y
        mem[4] = state.cleared
        mem[5:7] = state.timer.to_bytes(2, "little")
        mem[8:10] = (state.frame & 0xFFFF).to_bytes(2, "little")
        return bytes(mem)

    def scene(self, state: ColorCavernState) -> int:
        return state.scene

    def render(self, state: ColorCavernState) -> np.ndarray:
        if state.scene == TITLE:
            img = _title_image().copy()
            if (state.frame // 20) % 2 == 0:
                fill(img, 20, 48, 24, 4, WHITE)
            return img
        img = _maze_image(state.maze).copy()
        fill(img, state.x * TILE, state.y * TILE, TILE, TILE, RED)
        return img


@lru_cache(maxsize=None)
def _title_image() -> np.ndarray:
    img = np.empty((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
    img[:] = TITLE_BG
    for i, color in enumerate(TITLE_STRIPES):
        fill(img, 8, 12 + i * 6, 48, 4, color)
    return img


@lru_cache(maxsize=None)
def _maze_image(maze: int) -> np.ndarray:
    walls, _, (ex, ey) = ROOMS[maze]
    floor = MAZE_PALETTES[maze]
    img = np.empty((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
    img[:] = floor
    wall = shade(floor, 0.35)
    ys, xs = np.nonzero(walls)
    for tx, ty in zip(xs, ys):
        fill(img, tx * TILE, ty * TILE, TILE, TILE, wall)
    fill(img, ex * TILE, ey * TILE, TILE, TILE, WHITE)
    return img


def background_scene(img: np.ndarray) -> int | None:
    """Decode the scene from the top-left pixel (border wall or title bg)."""
    probe = tuple(int(c) for c in img[0, 0])
    if probe == TITLE_BG:
        return TITLE
    for k, floor in enumerate(MAZE_PALETTES):
        if probe == shade(floor, 0.35):
            return k + 1
    return None
