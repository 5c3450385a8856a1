"""Which window positions get resampled after the verifier rejects some drafts."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .core import ContractError, GridShape


class ModeKind(str, Enum):
    RASTER_SCAN = "raster"
    LOCAL_NAIVE = "naive"
    LOCAL_EXPAND = "expand"


@dataclass(frozen=True)
class RejectionMode:
    kind: ModeKind = ModeKind.LOCAL_EXPAND
    radius: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", ModeKind(self.kind))
        if self.radius < 0:
            raise ValueError(f"expansion radius must be >= 0, got {self.radius}")
        if self.kind is ModeKind.LOCAL_NAIVE:
            object.__setattr__(self, "radius", 0)

    @classmethod
    def raster(cls) -> "RejectionMode":
        return cls(ModeKind.RASTER_SCAN, 0)

    @classmethod
    def naive(cls) -> "RejectionMode":
        return cls(ModeKind.LOCAL_NAIVE, 0)

    @classmethod
    def expand(cls, radius: int) -> "RejectionMode":
        return cls(ModeKind.LOCAL_EXPAND, radius)

    @classmethod
    def parse(cls, text: str, radius: int = 3) -> "RejectionMode":
        """Accepts ``raster``, ``naive``, ``expand`` or ``expand:<l>``."""
        name, _, arg = text.strip().lower().partition(":")
        if name == "expand" and arg:
            radius = int(arg)
        return cls(ModeKind(name), radius)

    def label(self) -> str:
        if self.kind is ModeKind.LOCAL_EXPAND:
            return f"expand:{self.radius}"
        return self.kind.value


@dataclass(frozen=True)
class WindowRejection:
    window_start: int
    window_len: int
    rejected: tuple[int, ...]
    expanded: tuple[int, ...]

    @property
    def t0(self) -> int:
        return self.rejected[0]


def neighborhood(t: int, radius: int, shape: GridShape, t0: int) -> set[int]:
    """Chebyshev ball of ``radius`` around ``t``, restricted to indices >= t0."""
    n = shape.size
    if not (0 <= t0 < n and 0 <= t < n):
        raise IndexError(f"indices t={t}, t0={t0} outside grid of {n} cells")
    if t < t0:
        raise ContractError(f"position {t} precedes the first rejection {t0}")
    w = shape.width
    i, j = divmod(t, w)
    out = set()
    for ii in range(max(0, i - radius), min(shape.height, i + radius + 1)):
        base = ii * w
        for jj in range(max(0, j - radius), min(w, j + radius + 1)):
            u = base + jj
            if u >= t0:
                out.add(u)
    return out


def expand_rejections(rejected: Iterable[int], mode: RejectionMode, shape: GridShape,
                      window: tuple[int, int]) -> tuple[int, ...]:
    """R_X for rejected set R_T inside ``window = (start, length)``.

    Single pass: neighbourhoods are taken around R_T only, then clamped to
    ``[t0, start + length)``.
    """
    start, length = window
    end = start + length
    r_t = sorted(set(rejected))
    if not r_t:
        raise ContractError("nothing was rejected; skip expansion")
    if r_t[0] < start or r_t[-1] >= end:
        raise ContractError(f"rejections {r_t} fall outside window [{start}, {end})")
    t0 = r_t[0]
    if mode.kind is ModeKind.RASTER_SCAN:
        return tuple(range(t0, end))
    if mode.kind is ModeKind.LOCAL_NAIVE:
        return tuple(r_t)
    out: set[int] = set()
    for t in r_t:
        out |= neighborhood(t, mode.radius, shape, t0)
    return tuple(sorted(u for u in out if u < end))
