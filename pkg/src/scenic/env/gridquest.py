"""GridQuest: a boot screen, a title menu with an attract-mode demo, an
overworld map, four tile rooms and a level-complete fanfare.

Memory layout (128 bytes, unused bytes stay zero)::

    [0]    scene (BOOT=0 TITLE=1 OVERWORLD=2 LEVEL=3 ATTRACT=4 FANFARE=5)
    [1]    level id (room shown in LEVEL/ATTRACT, selected node otherwise)
    [2]    player x (tile in a room, cursor cell on the overworld)
    [3]    player y
    [4]    unlocked-levels bitmask
    [5:7]  idle timer at TITLE / demo clock in ATTRACT (little endian)
    [7]    fanfare timer
    [8:10] frame counter mod 65536 (little endian)

The controller hold counter is a hidden register, not part of memory.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .base import MEMORY_SIZE, SCREEN_H, SCREEN_W, Game, fill, parse_layout, shade, shortest_path
from .controller import A, B, DIRECTIONS, DOWN, LEFT, RIGHT, START, UP, ControllerState


class Scene(IntEnum):
    BOOT = 0
    TITLE = 1
    OVERWORLD = 2
    LEVEL = 3
    ATTRACT = 4
    FANFARE = 5


BOOT_FRAMES = 60
IDLE_FRAMES = 300
ATTRACT_FRAMES = 600
FANFARE_FRAMES = 60
FRAMES_PER_TILE = 5
MAP_SIZE = 8
TILE = 4
ROOM_TOP = 16  # pixel row where rooms start; rows above are the HUD

LEVELS = [
    [
        "################",
        "#S.............#",
        "#..............#",
        "#.....#........#",
        "#.....#........#",
        "#.....#........#",
        "#.....#........#",
        "#.....#........#",
        "#.....#......F.#",
        "#..............#",
        "#..............#",
        "################",
    ],
    [
        "################",
        "#S....#........#",
        "#.....#..####..#",
        "#.....#..#.....#",
        "#..####..#..####",
        "#........#.....#",
        "#####....#.....#",
        "#...#....####..#",
        "#...#.......#..#",
        "#.......#...#F.#",
        "#.......#......#",
        "################",
    ],
    [
        "################",
        "#S.#.......#...#",
        "#..#.#####.#.#.#",
        "#..#.#...#...#.#",
        "#..#.#.#.#####.#",
        "#....#.#.......#",
        "######.#######.#",
        "#......#.....#.#",
        "#.######.###.#.#",
        "#.#......#F..#.#",
        "#...######.....#",
        "################",
    ],
    [
        "################",
        "#S#...#...#....#",
        "#.#.#.#.#.#.##.#",
        "#.#.#.#.#.#..#.#",
        "#.#.#.#.#.##.#.#",
        "#...#...#....#.#",
        "#############..#",
        "#F.........#.#.#",
        "#.########.#.#.#",
        "#.#......#.....#",
        "#...####.#####.#",
        "################",
    ],
]
ROOMS = [parse_layout(rows) for rows in LEVELS]
NUM_LEVELS = len(ROOMS)
# overworld cell of each level node
LEVEL_CELLS = [(1, 1), (3, 3), (5, 2), (6, 6)]
CELL_LEVEL = {cell: k for k, cell in enumerate(LEVEL_CELLS)}
DEMO_LEVEL = 1
DEMO_PATH = shortest_path(*ROOMS[DEMO_LEVEL])

BLACK = (0, 0, 0)
WHITE = (250, 250, 250)
BOOT_GREY = (90, 90, 90)
RED = (255, 0, 0)
TITLE_BLUE = (20, 40, 170)
OVERWORLD_GREEN = (40, 150, 50)
FANFARE_YELLOW = (240, 210, 20)
LEVEL_PALETTES = [
    (230, 130, 30),  # orange
    (120, 50, 160),  # purple
    (20, 140, 140),  # teal
    (120, 75, 35),  # brown
]
# pixel never covered by sprites: always shows the scene background colour
PROBE = (8, 0)


@dataclass(frozen=True, slots=True)
class GridQuestState:
    frame: int = 0
    scene: int = 0
    level: int = 0
    x: int = 0
    y: int = 0
    unlocked: int = 0b0001
    timer: int = 0
    fanfare: int = 0
    hold: int = 0
    prev_dirs: int = 0

    _FMT = struct.Struct("<QBBBBBHBBB")

    game_id = "gridquest"

    def pack(self) -> bytes:
        return self._FMT.pack(
            self.frame, self.scene, self.level, self.x, self.y, self.unlocked,
            self.timer, self.fanfare, self.hold, self.prev_dirs,
        )

    @classmethod
    def unpack(cls, payload: bytes) -> GridQuestState:
        if len(payload) != cls._FMT.size:
            raise ValueError(f"expected {cls._FMT.size} state bytes, got {len(payload)}")
        return cls(*cls._FMT.unpack(payload))


def _try_move(walls, x, y, dx, dy):
    if dx and not walls[y, x + dx]:
        x += dx
    if dy and not walls[y + dy, x]:
        y += dy
    return x, y


class GridQuest(Game):
    game_id = "gridquest"
    state_type = GridQuestState
    Scene = Scene

    def boot(self) -> GridQuestState:
        return GridQuestState()

    def step(self, state: GridQuestState, ctrl: ControllerState, frames: int) -> GridQuestState:
        if frames < 1:
            raise ValueError(f"frames must be >= 1, got {frames}")
        m = ctrl.mask
        dirs = m & DIRECTIONS
        dx = bool(m & RIGHT) - bool(m & LEFT)
        dy = bool(m & DOWN) - bool(m & UP)
        (frame, scene, level, x, y, unlocked, timer, fanfare, hold, prev) = (
            state.frame, state.scene, state.level, state.x, state.y, state.unlocked,
            state.timer, state.fanfare, state.hold, state.prev_dirs,
        )
        for _ in range(frames):
            # controller driver: a held direction repeats every FRAMES_PER_TILE
            if dirs and dirs == prev:
                hold = hold + 1 if hold < FRAMES_PER_TILE else 1
            else:
                hold = 1 if dirs else 0
            prev = dirs
            moving = hold == FRAMES_PER_TILE

            if scene == Scene.BOOT:
                if frame + 1 >= BOOT_FRAMES:
                    scene, timer = Scene.TITLE, 0
            elif scene == Scene.TITLE:
                if m & START:
                    scene, level, timer = Scene.OVERWORLD, 0, 0
                    x, y = LEVEL_CELLS[0]
                elif m:
                    timer = 0
                else:
                    timer += 1
                    if timer >= IDLE_FRAMES:
                        scene, level, timer = Scene.ATTRACT, DEMO_LEVEL, 0
                        x, y = DEMO_PATH[0]
            elif scene == Scene.ATTRACT:
                timer += 1
                if m or timer >= ATTRACT_FRAMES:
                    scene, level, timer, x, y = Scene.TITLE, 0, 0, 0, 0
                else:
                    x, y = DEMO_PATH[min(timer // FRAMES_PER_TILE, len(DEMO_PATH) - 1)]
            elif scene == Scene.OVERWORLD:
                k = CELL_LEVEL.get((x, y))
                if m & A and k is not None and unlocked >> k & 1:
                    scene, level = Scene.LEVEL, k
                    x, y = ROOMS[k][1]
                elif moving:
                    x = min(max(x + dx, 0), MAP_SIZE - 1)
                    y = min(max(y + dy, 0), MAP_SIZE - 1)
                    k = CELL_LEVEL.get((x, y))
                    if k is not None:
                        level = k
            elif scene == Scene.LEVEL:
                if m & B:
                    scene = Scene.OVERWORLD
                    x, y = LEVEL_CELLS[level]
                elif moving:
                    walls, _, flag = ROOMS[level]
                    x, y = _try_move(walls, x, y, dx, dy)
                    if (x, y) == flag:
                        scene, fanfare = Scene.FANFARE, FANFARE_FRAMES
                        if level + 1 < NUM_LEVELS:
                            unlocked |= 1 << (level + 1)
            elif scene == Scene.FANFARE:
                fanfare -= 1
                if fanfare <= 0:
                    scene, fanfare = Scene.OVERWORLD, 0
                    x, y = LEVEL_CELLS[level]
            frame += 1
        return GridQuestState(frame, int(scene), level, x, y, unlocked, timer, fanfare, hold, prev)

    def memory(self, state: GridQuestState) -> bytes:
        mem = bytearray(MEMORY_SIZE)
        mem[0] = state.scene
        mem[1] = state.level
        mem[2] = state.x
        mem[3] = state.y
        mem[4] = state.unlocked
        mem[5:7] = (state.timer & 0xFFFF).to_bytes(2, "little")
        mem[7] = state.fanfare
        mem[8:10] = (state.frame & 0xFFFF).to_bytes(2, "little")
        return bytes(mem)

    def scene(self, state: GridQuestState) -> int:
        return state.scene

    def render(self, state: GridQuestState) -> np.ndarray:
        scene = state.scene
        if scene == Scene.BOOT:
            img = np.zeros((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
            fill(img, 0, 30, state.frame * SCREEN_W // BOOT_FRAMES, 4, BOOT_GREY)  # loading bar
            return img
        if scene == Scene.TITLE:
            img = _title_image().copy()
            # the idle countdown to the attract demo drains along the bottom edge
            fill(img, 0, 60, SCREEN_W - state.timer * SCREEN_W // IDLE_FRAMES, 2, shade(TITLE_BLUE, 0.5))
            if (state.frame // 30) % 2 == 0:
                fill(img, 16, 44, 32, 4, WHITE)  # blinking "press start"
            return img
        if scene == Scene.OVERWORLD:
            img = _overworld_image(state.unlocked).copy()
            fill(img, state.x * 8 + 2, state.y * 8 + 2, 4, 4, RED)
            return img
        if scene == Scene.FANFARE:
            img = _fanfare_image(state.level).copy()
            if (state.fanfare // 10) % 2 == 0:
                fill(img, 24, 24, 16, 16, WHITE)
            return img
        img = _room_image(state.level).copy()
        if scene == Scene.ATTRACT:
            fill(img, 0, 0, SCREEN_W, 4, WHITE)
            for i in range(4):  # "DEMO" banner glyph blocks
                fill(img, 20 + i * 6, 1, 4, 2, BLACK)
        fill(img, state.x * TILE, ROOM_TOP + state.y * TILE, TILE, TILE, RED)
        return img


@lru_cache(maxsize=None)
def _title_image() -> np.ndarray:
    img = np.empty((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
    img[:] = TITLE_BLUE
    fill(img, 8, 16, 48, 16, shade(TITLE_BLUE, 1.5))
    fill(img, 12, 20, 40, 8, (60, 90, 230))
    return img


@lru_cache(maxsize=None)
def _overworld_image(unlocked: int) -> np.ndarray:
    img = np.empty((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
    img[:] = OVERWORLD_GREEN
    path_color = shade(OVERWORLD_GREEN, 0.7)
    for (ax, ay), (bx, by) in zip(LEVEL_CELLS, LEVEL_CELLS[1:]):
        for cx in range(min(ax, bx), max(ax, bx) + 1):
            fill(img, cx * 8 + 3, ay * 8 + 3, 2, 2, path_color)
        for cy in range(min(ay, by), max(ay, by) + 1):
            fill(img, bx * 8 + 3, cy * 8 + 3, 2, 2, path_color)
    for k, (cx, cy) in enumerate(LEVEL_CELLS):
        color = LEVEL_PALETTES[k] if unlocked >> k & 1 else (90, 90, 90)
        fill(img, cx * 8 + 1, cy * 8 + 1, 6, 6, color)
    return img


@lru_cache(maxsize=None)
def _room_image(level: int) -> np.ndarray:
    walls, _, (fx, fy) = ROOMS[level]
    bg = LEVEL_PALETTES[level]
    img = np.empty((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
    img[:] = bg
    for i in range(level + 1):
        fill(img, 44 + i * 5, 4, 3, 3, WHITE)
    wall = shade(bg, 0.45)
    ys, xs = np.nonzero(walls)
    for tx, ty in zip(xs, ys):
        fill(img, tx * TILE, ROOM_TOP + ty * TILE, TILE, TILE, wall)
    fill(img, fx * TILE, ROOM_TOP + fy * TILE, TILE, TILE, WHITE)
    return img


@lru_cache(maxsize=None)
def _fanfare_image(level: int) -> np.ndarray:
    img = np.empty((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
    img[:] = FANFARE_YELLOW
    for i in range(level + 1):
        fill(img, 20 + i * 7, 50, 4, 4, LEVEL_PALETTES[i])
    return img


def background_scene(img: np.ndarray) -> int | None:
    """Decode the scene from pixels alone (inverse of the render palettes)."""
    probe = tuple(int(c) for c in img[PROBE])
    if probe == BLACK:
        return Scene.BOOT
    if probe == TITLE_BLUE:
        return Scene.TITLE
    if probe == OVERWORLD_GREEN:
        return Scene.OVERWORLD
    if probe == FANFARE_YELLOW:
        return Scene.FANFARE
    if probe in LEVEL_PALETTES:
        return Scene.ATTRACT if tuple(int(c) for c in img[0, 0]) == WHITE else Scene.LEVEL
    return None
