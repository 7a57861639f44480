"""Action traces (recorded input movies), playback, and the empirical
controller-state distribution used by the chaos monkey.

Trace file format (UTF-8, LF)::

    scenic-trace v1 game=gridquest
    # comments and blank lines are ignored
    START|30
    RIGHT+A|15
    -|30

Each body line is ``<buttons>|<frames held>`` with buttons in canonical
order UP, DOWN, LEFT, RIGHT, A, B, START, SELECT (``-`` for none).
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import env
from .archive import ExplorationArchive
from .env import HALF_SECOND, ControllerState
from .errors import ConfigError, ModelError, TraceParseError

HEADER_RE = re.compile(r"^scenic-trace v1 game=([A-Za-z0-9_\-]+)$")


@dataclass(frozen=True)
class Segment:
    ctrl: ControllerState
    frames: int
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ActionTrace:
    game: str
    segments: tuple[Segment, ...]

    @property
    def total_frames(self) -> int:
        return sum(s.frames for s in self.segments)

    def controller_at(self, frame: int) -> ControllerState:
        t = 0
        for seg in self.segments:
            t += seg.frames
            if frame < t:
                return seg.ctrl
        raise IndexError(frame)


def parse_trace(text: str) -> ActionTrace:
    game = None
    segments = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if game is None:
            m = HEADER_RE.match(line)
            if not m:
                raise TraceParseError(f"bad header {line!r}", lineno)
            game = m.group(1)
            continue
        buttons, sep, count = line.partition("|")
        if not sep:
            raise TraceParseError(f"expected '<buttons>|<frames>', got {line!r}", lineno)
        try:
            ctrl = ControllerState.parse(buttons)
        except ValueError as exc:
            raise TraceParseError(str(exc), lineno) from None
        try:
            frames = int(count.strip())
        except ValueError:
            raise TraceParseError(f"frame count {count.strip()!r} is not an integer", lineno) from None
        if frames < 1:
            raise TraceParseError(f"frame count must be >= 1, got {frames}", lineno)
        segments.append(Segment(ctrl, frames, lineno))
    if game is None:
        raise TraceParseError("missing header", 1)
    if not segments:
        raise TraceParseError("trace has no segments")
    return ActionTrace(game, tuple(segments))


def serialize_trace(trace: ActionTrace) -> str:
    lines = [f"scenic-trace v1 game={trace.game}"]
    lines += [f"{seg.ctrl}|{seg.frames}" for seg in trace.segments]
    return "\n".join(lines) + "\n"


def read_trace(path) -> ActionTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def bundled_trace_names() -> list[str]:
    root = resources.files("scenic") / "data" / "traces"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".trc"))


def bundled_trace(name: str) -> ActionTrace:
    if not name.endswith(".trc"):
        name += ".trc"
    path = resources.files("scenic") / "data" / "traces" / name
    if not path.is_file():
        raise ConfigError(f"no bundled trace named {name!r}")
    return parse_trace(path.read_text(encoding="utf-8"))


def bundled_traces(game: str | None = None) -> list[ActionTrace]:
    traces = [bundled_trace(n) for n in bundled_trace_names()]
    return [t for t in traces if game is None or t.game == game]


def playback(trace: ActionTrace, game: str, cadence: int = HALF_SECOND,
             budget: int | None = None) -> ExplorationArchive:
    """Replay ``trace`` from boot, extracting a moment every ``cadence`` frames.

    A trailing partial cadence window yields no moment.  ``budget`` truncates
    playback to that many gameplay frames.
    """
    if trace.game != game:
        raise ConfigError(f"trace is for {trace.game!r}, not {game!r}")
    env.get_game(game)
    total = trace.total_frames if budget is None else min(budget, trace.total_frames)
    archive = ExplorationArchive({
        "game": game, "strategy": {"name": "trace"}, "seed": None,
        "cadence": cadence, "budget": total,
    })
    state = env.boot(game)
    t = 0
    next_moment = cadence
    for seg in trace.segments:
        left = seg.frames
        while left and t < total:
            n = min(left, next_moment - t, total - t)
            state = env.step(state, seg.ctrl, n)
            t += n
            left -= n
            if t == next_moment:
                archive.add(t, env.render(state), env.memory(state),
                            {"strategy": "trace", "trace_line": seg.line})
                next_moment += cadence
        if t >= total:
            break
    return archive


@dataclass(frozen=True)
class EmpiricalActionModel:
    support: tuple[ControllerState, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.support:
            raise ModelError("action model has empty support")
        if len(self.support) != len(self.weights):
            raise ModelError("support and weights differ in length")
        if len(set(self.support)) != len(self.support):
            raise ModelError("duplicate controller states in support")
        if any(not (w >= 0.0) for w in self.weights):
            raise ModelError("weights must be non-negative")
        if abs(math.fsum(self.weights) - 1.0) > 1e-9:
            raise ModelError(f"weights sum to {math.fsum(self.weights)!r}, not 1")
        object.__setattr__(self, "_cdf", np.cumsum(np.asarray(self.weights, dtype=np.float64)))

    def weight(self, ctrl: ControllerState | str) -> float:
        if isinstance(ctrl, str):
            ctrl = ControllerState.parse(ctrl)
        try:
            return self.weights[self.support.index(ctrl)]
        except ValueError:
            return 0.0

    def to_dict(self) -> dict[str, float]:
        return {str(c): w for c, w in zip(self.support, self.weights)}

    @classmethod
    def from_dict(cls, mapping: dict[str, float]) -> EmpiricalActionModel:
        try:
            items = sorted((ControllerState.parse(k), float(v)) for k, v in mapping.items())
        except (ValueError, TypeError) as exc:
            raise ModelError(str(exc)) from None
        return cls(tuple(c for c, _ in items), tuple(w for _, w in items))

    @classmethod
    def degenerate(cls, ctrl: ControllerState) -> EmpiricalActionModel:
        return cls((ctrl,), (1.0,))


def fit_action_model(traces: Sequence[ActionTrace], cadence: int = HALF_SECOND) -> EmpiricalActionModel:
    """Count the controller state held at the start of every cadence window.

    Windows start at frames 0, cadence, 2*cadence, ... up to each trace's
    length; no smoothing is applied, so unseen states get zero weight.
    """
    counts: Counter = Counter()
    for trace in traces:
        t = 0
        boundary = 0
        for seg in trace.segments:
            end = t + seg.frames
            while boundary < end:
                counts[seg.ctrl] += 1
                boundary += cadence
            t = end
    total = sum(counts.values())
    if not total:
        raise ModelError("cannot fit an action model to an empty corpus")
    support = tuple(sorted(counts))
    return EmpiricalActionModel(support, tuple(counts[c] / total for c in support))


def sample_action(model: EmpiricalActionModel, rng: np.random.Generator) -> ControllerState:
    i = int(np.searchsorted(model._cdf, rng.random() * model._cdf[-1], side="right"))
    return model.support[min(i, len(model.support) - 1)]


def write_model(model: EmpiricalActionModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n", encoding="utf-8")


def read_model(path) -> EmpiricalActionModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ModelError(f"{path}: expected a JSON object")
    return EmpiricalActionModel.from_dict(data)


def bundled_action_model() -> EmpiricalActionModel:
    """Platform-wide model fit to every bundled trace (all games)."""
    return fit_action_model(bundled_traces())
