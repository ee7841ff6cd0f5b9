"""Type-specified training data for four-bar function generators.

A sample is produced in three steps: rejection-sample link lengths through
the T parameters so the sign pattern (and hence the type) is fixed, draw
sorted input angles over the driver's cycle domain, and label them with the
exact output angles of that cycle.
"""
from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterator
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .kinematics import (
    DEFAULT_FOLD_TOL,
    InputRange,
    T_MATRIX,
    TWO_PI,
    LinkageDims,
    TypeConfig,
    dims_from_t_unchecked,
    input_range,
    is_valid,
    simulate_many,
)

MAX_POINTS = 20


class GenerationTimeout(RuntimeError):
    """Rejection sampling hit its retry cap."""


@dataclass(frozen=True)
class GenConfig:
    type_cfg: TypeConfig
    m: float = 12.0
    n_points: tuple[int, int] = (3, 20)
    seed: int = 0
    fold_tol: float = DEFAULT_FOLD_TOL
    max_retries: int = 10_000

    def __post_init__(self):
        n = self.n_points
        if isinstance(n, int):
            object.__setattr__(self, "n_points", (n, n))
        lo, hi = self.n_points
        if not (1 <= lo <= hi <= MAX_POINTS):
            raise ValueError(f"n_points must satisfy 1 <= lo <= hi <= {MAX_POINTS}, got {self.n_points}")
        if not self.m > 0:
            raise ValueError("m must be positive")
        if not self.m > self.fold_tol:
            raise ValueError("m must exceed fold_tol")

    def to_json(self) -> dict:
        d = asdict(self)
        d["type_cfg"] = {"type_id": self.type_cfg.type_id, "inversion": self.type_cfg.inversion}
        d["n_points"] = list(self.n_points)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GenConfig":
        d = dict(d)
        tc = d.pop("type_cfg")
        d["n_points"] = tuple(d["n_points"])
        return cls(type_cfg=TypeConfig(tc["type_id"], tc["inversion"]), **d)


@dataclass
class Sample:
    cfg: TypeConfig
    r: LinkageDims
    points: np.ndarray = field(repr=False)  # (n, 2): cycle parameter, output angle

    @property
    def n(self) -> int:
        return len(self.points)


_BLOCK = 64  # candidates per vectorized draw; acceptance is ~4% at m = 12
_MT_QUARTER = 0.25 * T_MATRIX.T


def generate_dims(cfg: GenConfig, rng: np.random.Generator) -> LinkageDims:
    """Draw link lengths of the configured type by rejection sampling on T.

    |T1|..|T3| are uniform on (fold_tol, m) with the type's signs, T4 is
    uniform on (0, m). Candidates are drawn in blocks and the first valid one
    is kept, so the result depends only on the generator state.
    """
    s1, s2, s3 = cfg.type_cfg.signs
    lo, hi = cfg.fold_tol, cfg.m
    scale = np.array([s1 * (hi - lo), s2 * (hi - lo), s3 * (hi - lo), hi])
    offset = np.array([s1 * lo, s2 * lo, s3 * lo, 0.0])
    tried = 0
    while tried < cfg.max_retries:
        k = min(_BLOCK, cfg.max_retries - tried)
        t = offset + scale * rng.random((k, 4))
        r = t @ _MT_QUARTER.T
        total = r.sum(axis=1, keepdims=True)
        ok = np.all((r > 0.0) & (2.0 * r < total), axis=1)
        hits = np.flatnonzero(ok)
        if hits.size:
            # rebuild from T with the scalar map so the stored r matches dims_from_t exactly
            cand = dims_from_t_unchecked(t[hits[0]].tolist())
            if is_valid(cand):
                return cand
        tried += k
    raise GenerationTimeout(
        f"no valid {cfg.type_cfg.label} linkage after {cfg.max_retries} draws (m={cfg.m})"
    )


def sample_inputs(
    r, cfg: TypeConfig, n: int, rng: np.random.Generator, ir: InputRange | None = None
) -> np.ndarray:
    """n ascending cycle parameters over the driver's domain.

    Rocker domains are the forward arc plus its 2 pi shifted copy; both
    halves have the same length, so a uniform draw on the union picks each
    half with probability 1/2.
    """
    u = rng.random(n)
    if cfg.crank_input:
        phi = -math.pi + TWO_PI * u
    else:
        if ir is None:
            ir = input_range(r, cfg)
        x = 2.0 * ir.span * u
        phi = np.where(x < ir.span, ir.theta_min + x, ir.theta_min + TWO_PI + (x - ir.span))
    phi.sort()
    return phi


def generate_sample(cfg: GenConfig, rng: np.random.Generator, n: int | None = None) -> Sample:
    if n is None:
        lo, hi = cfg.n_points
        n = int(rng.integers(lo, hi + 1))
    tc = cfg.type_cfg
    r = generate_dims(cfg, rng)
    ir = None if tc.crank_input else input_range(r, tc)
    phi = sample_inputs(r, tc, n, rng, ir)
    out = simulate_many(r, tc, phi.tolist(), ir)
    return Sample(tc, r, np.column_stack([phi, np.asarray(out, dtype=float)]))


class SampleStream:
    """Unbounded, seeded source of fresh samples for one configuration.

    A stream owns its generator; it is meant for a single consumer.
    """

    def __init__(self, cfg: GenConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    def __iter__(self) -> Iterator[Sample]:
        return self

    def __next__(self) -> Sample:
        return generate_sample(self.cfg, self.rng)

    def take(self, count: int) -> list[Sample]:
        return [next(self) for _ in range(count)]

    def batch(self, size: int) -> list[Sample]:
        """``size`` samples sharing one sequence length drawn from the n range."""
        lo, hi = self.cfg.n_points
        n = int(self.rng.integers(lo, hi + 1))
        return [generate_sample(self.cfg, self.rng, n) for _ in range(size)]

    def get_state(self) -> dict:
        return self.rng.bit_generator.state

    def set_state(self, state: dict) -> None:
        self.rng.bit_generator.state = state


def stream(cfg: GenConfig) -> SampleStream:
    return SampleStream(cfg)


# -- file format -----------------------------------------------------------
#
# One CSV row per sample:
#   type_id, inversion, r1, r2, r3, r4, n, phi_1, thout_1, ..., phi_n, thout_n
# Floats use repr(), which round-trips float64 exactly (17 significant digits).
# A JSON sidecar ``<file>.json`` stores the GenConfig.


def sample_to_row(s: Sample) -> list[str]:
    row = [str(s.cfg.type_id), str(s.cfg.inversion)]
    row += [repr(float(x)) for x in s.r]
    row.append(str(s.n))
    row += [repr(float(x)) for x in s.points.ravel()]
    return row


def row_to_sample(row: list[str]) -> Sample:
    cfg = TypeConfig(int(row[0]), int(row[1]))
    r = LinkageDims(*(float(x) for x in row[2:6]))
    n = int(row[6])
    vals = [float(x) for x in row[7:]]
    if len(vals) != 2 * n:
        raise ValueError(f"row declares n={n} but carries {len(vals)} angle values")
    return Sample(cfg, r, np.asarray(vals, dtype=float).reshape(n, 2))


def write_dataset(path, samples, gen_cfg: GenConfig | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        for s in samples:
            w.writerow(sample_to_row(s))
    if gen_cfg is not None:
        sidecar = path.with_name(path.name + ".json")
        sidecar.write_text(json.dumps({"format": "fourbar-dataset/1", "gen_config": gen_cfg.to_json()}, indent=2))


def read_dataset(path) -> list[Sample]:
    with Path(path).open(newline="") as fh:
        return [row_to_sample(row) for row in csv.reader(fh) if row]
