"""Mixture of experts: one trained model per linkage configuration, ranked by simulation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kinematics import ALL_CONFIGS, TWO_PI, LinkageDims, TypeConfig, is_valid, wrap_angle
from .metrics import EvalResult, InvalidDims, simulation_metric
from .neural.lstm import ExpertModel, predict_batch
from .neural.train import load_model

MANIFEST = "manifest.json"
MANIFEST_FORMAT = "fourbar-registry/1"
DEFAULT_VARIANTS = 100


class MissingExpert(LookupError):
    def __init__(self, cfg: TypeConfig):
        super().__init__(f"no trained expert for {cfg.label}")
        self.cfg = cfg


@dataclass
class SynthesisResult:
    cfg: TypeConfig
    r_pred: LinkageDims
    s_simul: float
    eval: EvalResult
    valid: bool = True
    initial_angles: tuple[float, float] | None = None
    variant: int | None = None

    def sort_key(self):
        return (self.s_simul, self.cfg.type_id, self.cfg.inversion, -1 if self.variant is None else self.variant)


class ExpertRegistry:
    """Sixteen slots keyed by TypeConfig; a slot is either a model or missing."""

    def __init__(self, models: dict[TypeConfig, ExpertModel] | None = None):
        self._slots: dict[TypeConfig, ExpertModel | None] = {c: None for c in ALL_CONFIGS}
        for cfg, model in (models or {}).items():
            self.add(model, cfg)

    def add(self, model: ExpertModel, cfg: TypeConfig | None = None) -> None:
        cfg = model.cfg if cfg is None else cfg
        if cfg != model.cfg:
            raise ValueError(f"model for {model.cfg.label} placed in slot {cfg.label}")
        self._slots[cfg] = model

    def get(self, cfg: TypeConfig) -> ExpertModel:
        model = self._slots[cfg]
        if model is None:
            raise MissingExpert(cfg)
        return model

    def missing(self) -> list[TypeConfig]:
        return [c for c, m in self._slots.items() if m is None]

    def loaded(self) -> list[TypeConfig]:
        return [c for c, m in self._slots.items() if m is not None]

    def require_all(self) -> None:
        gone = self.missing()
        if gone:
            raise MissingExpert(gone[0])

    @staticmethod
    def checkpoint_name(cfg: TypeConfig) -> str:
        return f"{cfg.key}.npz"

    @classmethod
    def load(cls, directory) -> "ExpertRegistry":
        """Load every checkpoint present in ``directory``; absent ones stay missing."""
        directory = Path(directory)
        reg = cls()
        for cfg in ALL_CONFIGS:
            path = directory / cls.checkpoint_name(cfg)
            if path.exists():
                reg.add(load_model(path))
        return reg

    @classmethod
    def write_manifest(cls, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = [
            {"type_id": c.type_id, "inversion": c.inversion, "file": cls.checkpoint_name(c)} for c in ALL_CONFIGS
        ]
        path = directory / MANIFEST
        path.write_text(json.dumps({"format": MANIFEST_FORMAT, "experts": entries}, indent=2) + "\n")
        return path


# Interval covering both legs of the cycle parameter each type is trained on.
_TRAINED_INPUTS = {
    1: (-math.pi, math.pi),
    3: (-math.pi, math.pi),
    2: (0.0, 3 * math.pi),
    4: (0.0, 3 * math.pi),
    5: (-math.pi, 3 * math.pi),
    6: (-math.pi, 3 * math.pi),
    7: (0.0, 4 * math.pi),
    8: (0.0, 4 * math.pi),
}


def canonical_inputs(points, cfg: TypeConfig) -> np.ndarray:
    """Bring user angles into the range the expert was trained on.

    Sequences whose inputs already lie in the trained cycle domain (such as
    generated samples with return-leg parameters) pass through unchanged.
    Otherwise inputs are wrapped to (-pi, pi]; the forward arc of types 7
    and 8 runs through pi, so their negative inputs are then lifted by 2 pi.
    Outputs are always wrapped to (-pi, pi].
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2).copy()
    pts[:, 1] = [wrap_angle(a) for a in pts[:, 1]]
    lo, hi = _TRAINED_INPUTS[cfg.type_id]
    if np.all((pts[:, 0] >= lo) & (pts[:, 0] <= hi)):
        return pts
    pts[:, 0] = [wrap_angle(a) for a in pts[:, 0]]
    if cfg.type_id in (7, 8):
        pts[pts[:, 0] < 0.0, 0] += TWO_PI
    return pts


def network_input(pts: np.ndarray) -> np.ndarray:
    """Canonical points ordered by ascending cycle parameter, as in training.

    The metric does not depend on point order, so a sequence given in
    descending input order is the same request run backwards.
    """
    return pts[np.argsort(pts[:, 0], kind="stable")]


def _score(cfg: TypeConfig, r: np.ndarray, points) -> SynthesisResult:
    dims = LinkageDims(*(float(v) for v in r))
    if not is_valid(dims):
        return SynthesisResult(cfg, dims, math.inf, EvalResult(math.inf), valid=False)
    try:
        ev = simulation_metric(dims, cfg, points)
    except InvalidDims:
        return SynthesisResult(cfg, dims, math.inf, EvalResult(math.inf), valid=False)
    return SynthesisResult(cfg, dims, ev.s_simul, ev)


def rank(results: list[SynthesisResult]) -> list[SynthesisResult]:
    return sorted(results, key=SynthesisResult.sort_key)


def synthesize_single(registry: ExpertRegistry, cfg: TypeConfig, points) -> SynthesisResult:
    """Predict with one expert and score the prediction on the same points."""
    model = registry.get(cfg)
    pts = canonical_inputs(points, cfg)
    r = predict_batch(model, network_input(pts)[None])[0]
    return _score(cfg, r, pts)


def _distinct_types(results: list[SynthesisResult]) -> list[SynthesisResult]:
    seen, kept = set(), []
    for res in results:
        if res.cfg.type_id not in seen:
            seen.add(res.cfg.type_id)
            kept.append(res)
    return kept


def synthesize_multi(
    registry: ExpertRegistry, points, top_k: int | None = None, distinct: bool = False
) -> list[SynthesisResult]:
    """Run all sixteen experts and rank ascending by S_simul.

    With ``distinct`` only the best result per type (either inversion) is kept
    before truncating to ``top_k``.
    """
    registry.require_all()
    ranked = rank([synthesize_single(registry, cfg, points) for cfg in ALL_CONFIGS])
    if distinct:
        ranked = _distinct_types(ranked)
    return ranked if top_k is None else ranked[:top_k]


def expand_relative(rel_points, variants: int = DEFAULT_VARIANTS, rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """Absolute sequences from relative ones by drawing random initial angles.

    ``rel_points`` is (n, 2) of offsets from the first point; the first row
    is the zero reference. Each variant is initial + offsets.
    """
    rel = np.asarray(rel_points, dtype=float).reshape(-1, 2)
    rng = np.random.default_rng() if rng is None else rng
    starts = rng.uniform(-math.pi, math.pi, size=(variants, 2))
    return [start + rel for start in starts]


def synthesize_relative(
    registry: ExpertRegistry,
    rel_points,
    variants: int = DEFAULT_VARIANTS,
    top_k: int | None = None,
    rng: np.random.Generator | None = None,
) -> list[SynthesisResult]:
    """Score every expert on every variant and rank all candidates together."""
    registry.require_all()
    absolute = expand_relative(rel_points, variants, rng)
    results = []
    for cfg in ALL_CONFIGS:
        model = registry.get(cfg)
        batch = [canonical_inputs(a, cfg) for a in absolute]
        rs = predict_batch(model, np.stack([network_input(p) for p in batch]))
        for v, (pts, r) in enumerate(zip(batch, rs)):
            res = _score(cfg, r, pts)
            res.initial_angles = (float(absolute[v][0, 0]), float(absolute[v][0, 1]))
            res.variant = v
            results.append(res)
    ranked = rank(results)
    return ranked if top_k is None else ranked[:top_k]


def relative_deviation_deg(result: SynthesisResult, rel_points) -> np.ndarray:
    """Per-point gap between the predicted and prescribed output offsets, degrees."""
    rel = np.asarray(rel_points, dtype=float).reshape(-1, 2)
    pred = np.asarray(result.eval.per_point_pred)
    got = np.array([wrap_angle(p - pred[0]) for p in pred])
    want = np.array([wrap_angle(d) for d in rel[:, 1]])
    return np.abs(np.degrees([wrap_angle(g - w) for g, w in zip(got, want)]))
