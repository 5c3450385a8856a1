"""Autoregressive model interface, toy Markov models and toy block samplers.

The toy target conditions each cell on its left neighbour, the cell above
and a conditioning token. Missing neighbours at the top row / left column
read as the sentinel id ``V``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, Union

import numpy as np

from .core import Categorical, Codebook, ContractError, GridShape, RandomSource, TokenGrid

Prefix = Union[Sequence[int], TokenGrid]


@dataclass(frozen=True)
class Conditioning:
    seed_token: int = 0


def _cond_token(conditioning) -> int:
    return conditioning.seed_token if isinstance(conditioning, Conditioning) else int(conditioning)


class ArModel(Protocol):
    vocab_size: int
    shape: GridShape

    def evaluate(self, conditioning, prefix: Prefix, position: int) -> Categorical:
        """Next-token distribution at ``position``; reads only ``prefix[:position]``."""
        ...


class ToyMarkovModel:
    """Table-driven model keyed by (left, above, conditioning).

    ``table`` has shape ``(V+1, V+1, V, V)``; the last axis is the
    distribution over the next token.
    """

    def __init__(self, table: np.ndarray, shape: GridShape, temperature: float, seed: int,
                 meta: dict | None = None):
        table = np.array(table, dtype=np.float64)
        v = table.shape[-1]
        if table.shape != (v + 1, v + 1, v, v):
            raise ContractError(f"table shape {table.shape} is not (V+1, V+1, V, V)")
        table.setflags(write=False)
        self.table = table
        self.vocab_size = v
        self.shape = shape
        self.temperature = float(temperature)
        self.seed = int(seed)
        self.meta = dict(meta or {})
        self._rows = [Categorical(row) for row in table.reshape(-1, v)]

    @property
    def sentinel(self) -> int:
        return self.vocab_size

    def context(self, prefix: Prefix, position: int) -> tuple[int, int]:
        tokens = prefix.tokens if isinstance(prefix, TokenGrid) else prefix
        w = self.shape.width
        if not 0 <= position < self.shape.size:
            raise IndexError(f"position {position} outside {self.shape}")
        if len(tokens) < position:
            raise ContractError(f"prefix of length {len(tokens)} does not reach position {position}")
        left = tokens[position - 1] if position % w else self.sentinel
        above = tokens[position - w] if position >= w else self.sentinel
        return left, above

    def row(self, left: int, above: int, cond: int) -> Categorical:
        v = self.vocab_size
        return self._rows[(left * (v + 1) + above) * v + cond]

    def evaluate(self, conditioning, prefix: Prefix, position: int) -> Categorical:
        left, above = self.context(prefix, position)
        return self.row(left, above, _cond_token(conditioning))

    @property
    def num_contexts(self) -> int:
        return self.table.shape[0] * self.table.shape[1] * self.table.shape[2]

    def same_tables(self, other: "ToyMarkovModel") -> bool:
        return np.array_equal(self.table, other.table)


def build_toy_model(model_seed: int, vocab_size: int, shape: GridShape,
                    temperature: float) -> ToyMarkovModel:
    """Random table model; lower ``temperature`` gives more peaked rows.

    Logits per row are a random permutation of increasing values spaced at
    least 0.1 apart, so every row tends to one-hot as temperature -> 0.
    """
    if vocab_size < 2:
        raise ValueError(f"vocabulary size must be at least 2, got {vocab_size}")
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    v = vocab_size
    gen = RandomSource(model_seed).numpy()
    gaps = 0.1 + gen.exponential(0.3, size=(v + 1, v + 1, v, v))
    logits = gen.permuted(np.cumsum(gaps, axis=-1), axis=-1) / temperature
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    table = w / w.sum(axis=-1, keepdims=True)
    return ToyMarkovModel(table, shape, temperature, model_seed)


def derive_drafter(target: ToyMarkovModel, r: int, noise: float,
                   drafter_seed: int = 0) -> ToyMarkovModel:
    """Low-resolution drafter: the target's table mixed with uniform noise.

    Mixing is deterministic; ``drafter_seed`` is only recorded in the header.
    """
    h, w = target.shape.height, target.shape.width
    if r < 1 or h % r or w % r:
        raise ValueError(f"grid {h}x{w} is not divisible by r={r}")
    if not 0.0 <= noise <= 1.0:
        raise ValueError(f"noise must lie in [0, 1], got {noise}")
    v = target.vocab_size
    table = (1.0 - noise) * target.table + noise / v
    meta = {"noise": noise, "r": r, "target_seed": target.seed}
    return ToyMarkovModel(table, GridShape(h // r, w // r), target.temperature,
                          drafter_seed, meta)


class Upsampler(Protocol):
    r: int

    def up(self, low_rows: Sequence[Sequence[int]], high_context: Sequence[int]) -> list[int]: ...


class Downsampler(Protocol):
    r: int

    def down(self, high_rows: Sequence[Sequence[int]]) -> list[int]: ...


class ToyBlockSampler:
    """Up-samples each token to a fixed r x r template; down-samples by
    nearest template in summed squared codebook distance (ties -> lowest id).
    """

    def __init__(self, codebook: Codebook, templates: np.ndarray, seed: int = 0):
        templates = np.asarray(templates, dtype=np.int64)
        v = codebook.vocab_size
        if templates.ndim != 3 or templates.shape[0] != v or templates.shape[1] != templates.shape[2]:
            raise ContractError(f"templates must have shape (V, r, r), got {templates.shape}")
        if templates.min() < 0 or templates.max() >= v:
            raise ContractError("template entries outside the vocabulary")
        if len({t.tobytes() for t in templates}) != v:
            raise ContractError("block templates must be mutually distinct")
        templates.setflags(write=False)
        self.codebook = codebook
        self.templates = templates
        self.r = templates.shape[1]
        self.seed = seed
        self._flat = templates.reshape(v, -1)

    @property
    def vocab_size(self) -> int:
        return self.codebook.vocab_size

    def up(self, low_rows, high_context=()) -> list[int]:
        # high_context is part of the interface; templates ignore it
        r = self.r
        out: list[int] = []
        for row in low_rows:
            blocks = self.templates[list(row)]  # (w, r, r)
            for di in range(r):
                out.extend(int(x) for x in blocks[:, di, :].reshape(-1))
        return out

    def down(self, high_rows) -> list[int]:
        r = self.r
        arr = np.asarray(high_rows, dtype=np.int64)
        h, w = arr.shape
        blocks = arr.reshape(h // r, r, w // r, r).transpose(0, 2, 1, 3).reshape(-1, r * r)
        sqd = self.codebook.sq_distances
        # cost[b, y] = sum over cells of d(block cell, template cell)
        cost = sqd[blocks[:, None, :], self._flat[None, :, :]].sum(axis=-1)
        return [int(y) for y in cost.argmin(axis=1)]


def build_block_sampler(sampler_seed: int, codebook: Codebook, r: int) -> ToyBlockSampler:
    v = codebook.vocab_size
    if r < 1:
        raise ValueError(f"r must be positive, got {r}")
    gen = RandomSource(sampler_seed).numpy()
    seen: set[bytes] = set()
    templates = []
    while len(templates) < v:
        block = gen.integers(0, v, size=(r, r))
        key = block.tobytes()
        if key not in seen:
            seen.add(key)
            templates.append(block)
    return ToyBlockSampler(codebook, np.stack(templates), sampler_seed)


def _check_low_rows(sampler, low_rows, low_width: int | None):
    if len(low_rows) == 0:
        raise ContractError("up-sampling needs at least one low-resolution row")
    widths = {len(row) for row in low_rows}
    if len(widths) != 1 or (low_width is not None and widths != {low_width}):
        raise ContractError(f"incomplete low-resolution rows (widths {sorted(widths)})")


def up_sample(sampler: Upsampler, low_rows: Sequence[Sequence[int]],
              high_context: Sequence[int] = (), low_width: int | None = None) -> list[int]:
    """r complete high-res rows per low-res row, raster order."""
    _check_low_rows(sampler, low_rows, low_width)
    return sampler.up(low_rows, high_context)


def down_sample(sampler: Downsampler, high_rows: Sequence[Sequence[int]]) -> list[int]:
    r = sampler.r
    widths = {len(row) for row in high_rows}
    if not high_rows or len(high_rows) % r or len(widths) != 1 or next(iter(widths)) % r:
        raise ContractError(
            f"down-sampling needs a multiple of r={r} complete rows of width divisible by r"
        )
    return sampler.down(high_rows)


# -- serialization -----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_model(model: ToyMarkovModel, path: str | Path) -> None:
    v = model.vocab_size
    header = {"V": v, "H": model.shape.height, "W": model.shape.width,
              "temperature": _fmt(model.temperature), "seed": model.seed}
    header.update({k: (_fmt(x) if isinstance(x, float) else x) for k, x in model.meta.items()})
    lines = [",".join(f"{k}={x}" for k, x in header.items())]
    for left in range(v + 1):
        for above in range(v + 1):
            for cond in range(v):
                row = model.table[left, above, cond]
                lines.append(f"{left},{above},{cond}:" + ",".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_scalar(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_model(path: str | Path) -> ToyMarkovModel:
    lines = Path(path).read_text().splitlines()
    header = {}
    for item in lines[0].split(","):
        key, _, val = item.partition("=")
        header[key] = _parse_scalar(val)
    missing = {"V", "H", "W", "temperature", "seed"} - header.keys()
    if missing:
        raise ContractError(f"{path}: header lacks {sorted(missing)}")
    v = header.pop("V")
    table = np.empty((v + 1, v + 1, v, v))
    filled = 0
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, probs = line.partition(":")
        left, above, cond = (int(x) for x in key.split(","))
        table[left, above, cond] = [float(x) for x in probs.split(",")]
        filled += 1
    if filled != (v + 1) * (v + 1) * v:
        raise ContractError(f"{path}: expected {(v + 1) ** 2 * v} table rows, found {filled}")
    shape = GridShape(header.pop("H"), header.pop("W"))
    temperature = float(header.pop("temperature"))
    seed = header.pop("seed")
    return ToyMarkovModel(table, shape, temperature, seed, header)


def write_templates(samplers: Sequence[ToyBlockSampler], path: str | Path) -> None:
    lines = []
    for s in samplers:
        lines.append(f"r={s.r},V={s.vocab_size},seed={s.seed}")
        for y, block in enumerate(s.templates):
            lines.append(f"{y}:" + ",".join(str(int(t)) for t in block.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_templates(path: str | Path, codebook: Codebook) -> dict[int, ToyBlockSampler]:
    """Returns one sampler per factor r found in the file."""
    out: dict[int, ToyBlockSampler] = {}
    section = None
    rows: list[list[int]] = []

    def flush():
        if section is not None:
            r = section["r"]
            out[r] = ToyBlockSampler(codebook, np.array(rows).reshape(-1, r, r), section["seed"])

    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("r="):
            flush()
            section = {k: int(x) for k, x in (kv.split("=") for kv in line.split(","))}
            rows = []
        else:
            idx, _, cells = line.partition(":")
            if section is None or int(idx) != len(rows):
                raise ContractError(f"{path}: malformed template line {line!r}")
            rows.append([int(x) for x in cells.split(",")])
    flush()
    return out
