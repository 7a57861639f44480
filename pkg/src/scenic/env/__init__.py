"""Deterministic game environments with snapshot save/load.

All functions are pure: a state is an immutable value and ``step`` returns a
new one.  Games are looked up by id in ``GAMES``.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from ..errors import ConfigError, SnapshotError
from .base import FPS, HALF_SECOND, MEMORY_SIZE, SCREEN_H, SCREEN_W, Game
from .colorcavern import ColorCavern, ColorCavernState
from .controller import BUTTONS, NOOP, ControllerState
from .gridquest import GridQuest, GridQuestState, Scene

GAMES: dict[str, Game] = {g.game_id: g for g in (GridQuest(), ColorCavern())}

SNAPSHOT_MAGIC = b"SCNSNAP1"


def get_game(game_id: str) -> Game:
    try:
        return GAMES[game_id]
    except KeyError:
        raise ConfigError(f"unknown game {game_id!r}; expected one of {sorted(GAMES)}") from None


def _game_of(state) -> Game:
    return GAMES[state.game_id]


def boot(game_id: str):
    return get_game(game_id).boot()


def step(state, ctrl: ControllerState, frames: int):
    return _game_of(state).step(state, ctrl, frames)


def render(state) -> np.ndarray:
    """64x64x3 uint8 screenshot."""
    return _game_of(state).render(state)


def memory(state) -> bytes:
    return _game_of(state).memory(state)


def scene(state) -> int:
    return _game_of(state).scene(state)


def serialize(state) -> bytes:
    return state.pack()


def save_snapshot(state) -> bytes:
    game_id = state.game_id.encode("ascii")
    payload = state.pack()
    body = SNAPSHOT_MAGIC + struct.pack("<B", len(game_id)) + game_id + struct.pack("<I", len(payload)) + payload
    return body + struct.pack("<I", zlib.crc32(body))


def load_snapshot(blob: bytes, game_id: str | None = None):
    """Restore a state saved by :func:`save_snapshot`.

    Raises SnapshotError on a bad magic, checksum, length, or (when
    ``game_id`` is given) a snapshot taken from a different game.
    """
    blob = bytes(blob)
    if len(blob) < len(SNAPSHOT_MAGIC) + 9 or not blob.startswith(SNAPSHOT_MAGIC):
        raise SnapshotError("not a scenic snapshot (bad magic or truncated)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise SnapshotError("snapshot checksum mismatch")
    pos = len(SNAPSHOT_MAGIC)
    n = body[pos]
    pos += 1
    blob_game = body[pos:pos + n].decode("ascii", errors="replace")
    pos += n
    if len(body) < pos + 4:
        raise SnapshotError("truncated snapshot header")
    (size,) = struct.unpack_from("<I", body, pos)
    pos += 4
    payload = body[pos:]
    if len(payload) != size:
        raise SnapshotError(f"snapshot payload is {len(payload)} bytes, header says {size}")
    if game_id is not None and blob_game != game_id:
        raise SnapshotError(f"snapshot is for {blob_game!r}, not {game_id!r}")
    if blob_game not in GAMES:
        raise SnapshotError(f"snapshot for unknown game {blob_game!r}")
    try:
        return GAMES[blob_game].deserialize(payload)
    except (ValueError, struct.error) as exc:
        raise SnapshotError(str(exc)) from exc


__all__ = [
    "BUTTONS", "FPS", "GAMES", "HALF_SECOND", "MEMORY_SIZE", "NOOP", "SCREEN_H", "SCREEN_W",
    "ColorCavern", "ColorCavernState", "ControllerState", "Game", "GridQuest", "GridQuestState",
    "Scene", "boot", "get_game", "load_snapshot", "memory", "render", "save_snapshot", "scene",
    "serialize", "step",
]
