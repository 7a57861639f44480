"""Exploration archives: ordered moments (screenshot + memory) persisted to disk.

On-disk layout of an archive directory::

    manifest.json          versioned manifest with a content hash
    moments.jsonl          one JSON record per moment
    screens/000000.ppm     binary P6 screenshot, 64x64, maxval 255
    mem/000000.bin         128 raw memory bytes
    snapshots/000000.snp   optional environment snapshot blob

The content hash covers the logical content (manifest fields, moment
records, pixel, memory and snapshot bytes), never file metadata.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .env import MEMORY_SIZE, SCREEN_H, SCREEN_W
from .errors import ArchiveError

FORMAT = "scenic-archive"
VERSION = 1
PPM_HEADER = f"P6\n{SCREEN_W} {SCREEN_H}\n255\n".encode("ascii")
SCREEN_BYTES = SCREEN_W * SCREEN_H * 3


@dataclass
class Moment:
    index: int
    gameplay_frames: int
    screen: bytes  # row-major RGB, 64*64*3 bytes
    memory: bytes
    provenance: dict = field(default_factory=dict)
    snapshot: bytes | None = None

    @property
    def screenshot(self) -> np.ndarray:
        return np.frombuffer(self.screen, dtype=np.uint8).reshape(SCREEN_H, SCREEN_W, 3)

    @property
    def scene(self) -> int:
        return self.memory[0]

    def record(self) -> dict:
        name = f"{self.index:06d}"
        return {
            "index": self.index,
            "gameplay_frames": self.gameplay_frames,
            "screen": f"screens/{name}.ppm",
            "mem": f"mem/{name}.bin",
            "snapshot": f"snapshots/{name}.snp" if self.snapshot is not None else None,
            "provenance": self.provenance,
        }


@dataclass
class ExplorationArchive:
    manifest: dict
    moments: list[Moment] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.moments)

    def __iter__(self):
        return iter(self.moments)

    def add(self, gameplay_frames: int, screenshot: np.ndarray, memory: bytes,
            provenance: dict | None = None, snapshot: bytes | None = None) -> Moment:
        if self.moments and gameplay_frames < self.moments[-1].gameplay_frames:
            raise ArchiveError(
                f"gameplay frames must be non-decreasing ({gameplay_frames} after "
                f"{self.moments[-1].gameplay_frames})")
        screenshot = np.asarray(screenshot)
        if screenshot.shape != (64, 64, 3):
            raise ArchiveError(f"screenshot must be 64x64x3, got {screenshot.shape}")
        if len(memory) != 128:
            raise ArchiveError(f"memory must be 128 bytes, got {len(memory)}")
        m = Moment(len(self.moments), int(gameplay_frames),
                   np.ascontiguousarray(screenshot, dtype=np.uint8).tobytes(),
                   bytes(memory), dict(provenance or {}), snapshot)
        self.moments.append(m)
        return m

    @property
    def game(self) -> str:
        return self.manifest.get("game", "")

    @property
    def total_frames(self) -> int:
        return self.moments[-1].gameplay_frames if self.moments else 0

    def screenshots(self) -> np.ndarray:
        """All screenshots stacked as an (N, 64, 64, 3) uint8 array."""
        buf = b"".join(m.screen for m in self.moments)
        return np.frombuffer(buf, dtype=np.uint8).reshape(len(self.moments), SCREEN_H, SCREEN_W, 3)

    def scenes(self) -> set[int]:
        return {m.memory[0] for m in self.moments}

    def content_hash(self) -> str:
        return content_hash(self.manifest, self.moments)


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _base_manifest(manifest: dict) -> dict:
    return {k: v for k, v in manifest.items() if k not in ("content_hash", "moment_count", "format", "version")}


def content_hash(manifest: dict, moments: Iterable[Moment]) -> str:
    h = hashlib.sha256()
    h.update(_canonical(_base_manifest(manifest)))
    for m in moments:
        h.update(_canonical(m.record()))
        h.update(m.screen)
        h.update(m.memory)
        if m.snapshot is not None:
            h.update(m.snapshot)
    return h.hexdigest()


def merged(*archives: ExplorationArchive, manifest: dict | None = None) -> ExplorationArchive:
    """Concatenate archives in order, re-indexing moments."""
    out = ExplorationArchive(dict(manifest or (archives[0].manifest if archives else {})))
    for a in archives:
        for m in a.moments:
            out.moments.append(Moment(len(out.moments), m.gameplay_frames, m.screen, m.memory,
                                      dict(m.provenance), m.snapshot))
    return out


def training_pairs(archive: ExplorationArchive) -> list[tuple[np.ndarray, bytes]]:
    """(screenshot, memory) per moment, in archive order, without deduplication."""
    return [(m.screenshot, m.memory) for m in archive.moments]


def write_archive(archive: ExplorationArchive, path) -> None:
    root = Path(path)
    for sub in ("screens", "mem"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    if any(m.snapshot is not None for m in archive.moments):
        (root / "snapshots").mkdir(exist_ok=True)
    lines = []
    for m in archive.moments:
        rec = m.record()
        (root / rec["screen"]).write_bytes(PPM_HEADER + m.screen)
        (root / rec["mem"]).write_bytes(m.memory)
        if m.snapshot is not None:
            (root / rec["snapshot"]).write_bytes(m.snapshot)
        lines.append(json.dumps(rec, sort_keys=True) + "\n")
    (root / "moments.jsonl").write_text("".join(lines), encoding="utf-8", newline="\n")
    manifest = dict(_base_manifest(archive.manifest))
    manifest.update(format=FORMAT, version=VERSION, moment_count=len(archive.moments),
                    content_hash=archive.content_hash())
    # manifest last: readers treat its presence as "archive finalized"
    (root / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                                        encoding="utf-8", newline="\n")


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise ArchiveError("missing file", path) from None


def read_ppm(path) -> bytes:
    data = _read_bytes(Path(path))
    if not data.startswith(PPM_HEADER) or len(data) != len(PPM_HEADER) + SCREEN_BYTES:
        raise ArchiveError("not a 64x64 binary PPM", path)
    return data[len(PPM_HEADER):]


def read_archive(path) -> ExplorationArchive:
    root = Path(path)
    mpath = root / "manifest.json"
    try:
        manifest = json.loads(_read_bytes(mpath))
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"invalid JSON ({exc})", mpath) from None
    if manifest.get("format") != FORMAT or manifest.get("version") != VERSION:
        raise ArchiveError(
            f"unsupported archive format {manifest.get('format')!r} v{manifest.get('version')!r}", mpath)
    jpath = root / "moments.jsonl"
    moments = []
    for lineno, line in enumerate(_read_bytes(jpath).decode("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ArchiveError(f"line {lineno}: invalid JSON ({exc})", jpath) from None
        screen = read_ppm(root / rec["screen"])
        mem = _read_bytes(root / rec["mem"])
        if len(mem) != MEMORY_SIZE:
            raise ArchiveError(f"expected {MEMORY_SIZE} memory bytes, got {len(mem)}", root / rec["mem"])
        snap = _read_bytes(root / rec["snapshot"]) if rec.get("snapshot") else None
        moments.append(Moment(rec["index"], rec["gameplay_frames"], screen, mem,
                              rec.get("provenance", {}), snap))
    if len(moments) != manifest.get("moment_count"):
        raise ArchiveError(
            f"manifest lists {manifest.get('moment_count')} moments, found {len(moments)}", jpath)
    archive = ExplorationArchive(_base_manifest(manifest), moments)
    if archive.content_hash() != manifest.get("content_hash"):
        raise ArchiveError("content hash mismatch", mpath)
    return archive
