"""Controller states: the set of buttons held during one input segment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

BUTTONS = ("UP", "DOWN", "LEFT", "RIGHT", "A", "B", "START", "SELECT")
BIT = {name: 1 << i for i, name in enumerate(BUTTONS)}

UP, DOWN, LEFT, RIGHT, A, B, START, SELECT = (BIT[n] for n in BUTTONS)
DIRECTIONS = UP | DOWN | LEFT | RIGHT


@dataclass(frozen=True, order=True)
class ControllerState:
    """Pressed buttons packed into a bitmask (bit order follows ``BUTTONS``).

    The canonical text form lists buttons in alphabet order joined by ``+``,
    or ``-`` when nothing is pressed.
    """

    mask: int = 0

    def __post_init__(self):
        if not 0 <= self.mask < 256:
            raise ValueError(f"controller mask out of range: {self.mask}")

    @classmethod
    def of(cls, buttons: Iterable[str] = ()) -> ControllerState:
        mask = 0
        for name in buttons:
            try:
                mask |= BIT[name]
            except KeyError:
                raise ValueError(f"unknown button {name!r}") from None
        return cls(mask)

    @classmethod
    def parse(cls, text: str) -> ControllerState:
        text = text.strip()
        if text == "-":
            return cls(0)
        if not text:
            raise ValueError("empty controller state (use '-')")
        return cls.of(text.split("+"))

    @property
    def buttons(self) -> frozenset[str]:
        return frozenset(n for n in BUTTONS if self.mask & BIT[n])

    def __contains__(self, name: str) -> bool:
        return bool(self.mask & BIT.get(name, 0))

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __str__(self) -> str:
        if not self.mask:
            return "-"
        return "+".join(n for n in BUTTONS if self.mask & BIT[n])


NOOP = ControllerState(0)
