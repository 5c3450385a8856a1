"""Grids, categorical distributions, codebooks and the seeded random source."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

NORM_TOL = 1e-9
RNG_ALGORITHM = "numpy.Philox4x64-10"


class ContractError(ValueError):
    """Raised when a caller violates an operation's precondition."""


@dataclass(frozen=True)
class GridShape:
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.height}x{self.width}")

    @property
    def size(self) -> int:
        return self.height * self.width


def raster_to_coord(t: int, shape: GridShape) -> tuple[int, int]:
    if not 0 <= t < shape.size:
        raise IndexError(f"raster index {t} outside grid of {shape.size} cells")
    return divmod(t, shape.width)


def coord_to_raster(i: int, j: int, shape: GridShape) -> int:
    if not (0 <= i < shape.height and 0 <= j < shape.width):
        raise IndexError(f"cell ({i}, {j}) outside {shape.height}x{shape.width} grid")
    return i * shape.width + j


@dataclass(frozen=True)
class TokenGrid:
    """A raster-ordered, possibly partial, grid of token ids."""

    shape: GridShape
    tokens: tuple[int, ...] = ()
    vocab_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if len(self.tokens) > self.shape.size:
            raise ContractError(
                f"{len(self.tokens)} tokens exceed grid capacity {self.shape.size}"
            )
        if self.vocab_size is not None:
            bad = [t for t in self.tokens if not 0 <= t < self.vocab_size]
            if bad:
                raise ContractError(f"token ids {bad} outside vocabulary of size {self.vocab_size}")

    @property
    def complete(self) -> bool:
        return len(self.tokens) == self.shape.size

    def rows(self) -> list[list[int]]:
        w = self.shape.width
        return [list(self.tokens[i : i + w]) for i in range(0, len(self.tokens), w)]


class Categorical:
    """Normalized probability vector over ``range(V)``.

    The mass array is read-only so instances can be shared between model
    tables, traces and decode runs.
    """

    def __init__(self, mass: Iterable[float]):
        arr = np.array(mass, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ContractError("categorical mass must be a non-empty vector")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ContractError("categorical mass must be finite and non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > NORM_TOL:
            raise ContractError(f"categorical mass sums to {total!r}, not 1")
        arr.setflags(write=False)
        self.mass = arr

    @classmethod
    def normalized(cls, weights: Iterable[float]) -> "Categorical":
        arr = np.array(weights, dtype=np.float64)
        total = arr.sum()
        if not total > 0:
            raise ContractError("cannot normalize a zero vector")
        return cls(arr / total)

    @classmethod
    def uniform(cls, size: int) -> "Categorical":
        return cls(np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return self.mass.size

    def __getitem__(self, idx: int) -> float:
        return float(self.mass[idx])

    def __repr__(self) -> str:
        return f"Categorical({self.mass.tolist()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Categorical) and np.array_equal(self.mass, other.mass)

    __hash__ = None

    @cached_property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)

    @cached_property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.mass > 0))


def tvd(a: Categorical, b: Categorical) -> float:
    if len(a) != len(b):
        raise ContractError(f"vocabulary mismatch: {len(a)} vs {len(b)}")
    return 0.5 * float(np.abs(a.mass - b.mass).sum())


class Chooser(Protocol):
    """Source of the two kinds of random decisions a decoder makes.

    ``RandomSource`` draws them; the oracle enumerates them.
    """

    def categorical(self, dist: Categorical) -> int: ...

    def bernoulli(self, prob: float) -> bool: ...


class RandomSource:
    """Counter-based deterministic generator (Philox) owned by one decode run."""

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))
        self.draws = 0

    def uniform(self) -> float:
        self.draws += 1
        return float(self._gen.random())

    def categorical(self, dist: Categorical) -> int:
        return sample(dist, self)

    def bernoulli(self, prob: float) -> bool:
        return self.uniform() < prob

    def spawn(self, key: int) -> "RandomSource":
        """Independent child stream, e.g. one per model table or sweep point."""
        return RandomSource((self.seed * 0x9E3779B97F4A7C15 + key + 1) % 2**64)

    def numpy(self) -> np.random.Generator:
        return self._gen


def sample(dist: Categorical, rng: RandomSource) -> int:
    """Inverse-CDF draw; never lands on a zero-mass id."""
    if not isinstance(dist, Categorical):
        raise ContractError("sample expects a Categorical")
    cdf = dist.cdf
    x = rng.uniform() * cdf[-1]
    idx = int(np.searchsorted(cdf, x, side="right"))
    if idx >= cdf.size or dist.mass[idx] == 0:
        # x rounded up to the total: fall back to the last supported id
        idx = dist.support[-1]
    return idx


@dataclass(frozen=True, eq=False)
class Codebook:
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ContractError("codebook must be a non-empty V x dim matrix")
        if not np.all(np.isfinite(arr)):
            raise ContractError("codebook entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)

    @property
    def vocab_size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @cached_property
    def sq_distances(self) -> np.ndarray:
        diff = self.vectors[:, None, :] - self.vectors[None, :, :]
        return (diff * diff).sum(axis=-1)

    @cached_property
    def neighbor_order(self) -> np.ndarray:
        """Row c lists every id by ascending distance to c, ties by id."""
        v = self.vocab_size
        ids = np.arange(v)
        order = np.empty((v, v), dtype=np.int64)
        for c in range(v):
            order[c] = np.lexsort((ids, self.sq_distances[c]))
            if order[c, 0] != c:
                # another id shares c's vector; c still leads its own ball
                row = [c] + [int(x) for x in order[c] if x != c]
                order[c] = row
        order.setflags(write=False)
        return order

    def __eq__(self, other) -> bool:
        return isinstance(other, Codebook) and np.array_equal(self.vectors, other.vectors)

    __hash__ = None


def nearest_neighbors(codebook: Codebook, center: int, k: int) -> list[int]:
    if not 1 <= k <= codebook.vocab_size:
        raise ValueError(f"k={k} outside [1, {codebook.vocab_size}]")
    return [int(x) for x in codebook.neighbor_order[center, :k]]


def random_codebook(seed: int, vocab_size: int, dim: int) -> Codebook:
    gen = RandomSource(seed).numpy()
    return Codebook(gen.normal(size=(vocab_size, dim)))


def write_codebook(codebook: Codebook, path: str | Path) -> None:
    lines = [f"id,dim={codebook.dim}"]
    for i, row in enumerate(codebook.vectors):
        lines.append(",".join([str(i)] + [repr(float(x)) for x in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_codebook(path: str | Path) -> Codebook:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("id,dim="):
        raise ContractError(f"{path}: missing 'id,dim=<d>' header")
    dim = int(lines[0].split("=", 1)[1])
    rows = []
    for n, line in enumerate(lines[1:]):
        if not line.strip():
            continue
        fields = line.split(",")
        if int(fields[0]) != n or len(fields) != dim + 1:
            raise ContractError(f"{path}: malformed row {n}: {line!r}")
        rows.append([float(x) for x in fields[1:]])
    return Codebook(np.array(rows))
