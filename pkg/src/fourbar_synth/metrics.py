"""Scoring of predicted linkages against prescribed precision points."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (
    TWO_PI,
    InputRange,
    TypeConfig,
    Unreachable,
    input_range,
    is_valid,
    sign_triple,
    simulate_cycle,
    wrap_angle,
)

# Clamped inputs are pulled this far inside a dead-center limit so the
# radical is strictly positive there.
_DCP_INSET = 1e-12


class InvalidDims(ValueError):
    """Predicted dimensions do not form a linkage of the requested type."""


class ZeroVector(ValueError):
    pass


@dataclass
class EvalResult:
    s_simul: float
    per_point_pred: list[float] = field(default_factory=list)
    per_point_abs_err_deg: list[float] = field(default_factory=list)
    reachable_flags: list[bool] = field(default_factory=list)

    @property
    def max_abs_err_deg(self) -> float:
        return max(self.per_point_abs_err_deg) if self.per_point_abs_err_deg else 0.0


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


def absolute_error_deg(theta_out: float, theta_pred: float) -> float:
    """|theta_pred - theta_out| in degrees, with the difference wrapped to (-pi, pi]."""
    return abs(math.degrees(wrap_angle(theta_pred - theta_out)))


def to_cycle_param(phi: float, rng: InputRange) -> tuple[float, bool]:
    """Place an input angle in the cycle domain.

    Returns (parameter, reachable). Values already in the domain are kept;
    otherwise a 2 pi shift into the domain is tried (a principal-value angle
    on a forward arc that runs past pi), and failing that the nearest domain
    boundary is used and the point is flagged unreachable.
    """
    if rng.crank or rng.contains(phi):
        return phi, True
    for shifted in (phi + TWO_PI, phi - TWO_PI):
        if rng.contains(shifted):
            return shifted, True
    lo, hi = rng.theta_min + _DCP_INSET, rng.theta_max - _DCP_INSET
    legs = ((lo, hi), (lo + TWO_PI, hi + TWO_PI))
    best = min(
        (min(max(phi, a), b) for a, b in legs),
        key=lambda p: abs(p - phi),
    )
    return best, False


def check_dims(r_pred, cfg: TypeConfig) -> None:
    if not is_valid(r_pred):
        raise InvalidDims(f"r={tuple(r_pred)} violates the linkage validity conditions")
    if sign_triple(r_pred) != cfg.signs:
        raise InvalidDims(f"r={tuple(r_pred)} is not a {cfg.name}")


def simulation_metric(r_pred, cfg: TypeConfig, points, both_legs: bool = False) -> EvalResult:
    """S = 1 - mean cos(theta_out_i - f(theta_in_i)) for the linkage r_pred.

    ``points`` is an (n, 2) array of (input, output) angles in radians; the
    inputs may be cycle parameters. Unreachable inputs are clamped to the
    nearest dead-center limit so the score stays defined for any request.

    ``both_legs`` is a convenience that is not part of the standard metric:
    for rocker inputs it evaluates each point on the forward and the return
    leg and keeps whichever matches better.
    """
    check_dims(r_pred, cfg)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    rng = input_range(r_pred, cfg)
    preds, errs, flags = [], [], []
    cos_sum = 0.0
    for phi, target in pts.tolist():
        p, ok = to_cycle_param(phi, rng)
        pred = simulate_cycle(r_pred, cfg, p, rng)
        if both_legs and not rng.crank:
            other = p + TWO_PI if p <= rng.theta_max + _DCP_INSET else p - TWO_PI
            try:
                alt = simulate_cycle(r_pred, cfg, other, rng)
            except Unreachable:
                alt = pred
            if math.cos(target - alt) > math.cos(target - pred):
                pred = alt
        cos_sum += math.cos(target - pred)
        preds.append(pred)
        errs.append(absolute_error_deg(target, pred))
        flags.append(ok)
    n = len(preds)
    s = 1.0 - cos_sum / n if n else 0.0
    s = min(max(s, 0.0), 2.0)
    return EvalResult(s, preds, errs, flags)


def displacement_curve(r, cfg: TypeConfig, num: int = 361) -> np.ndarray:
    """(num, 2) samples of the full cycle: cycle parameter and output angle."""
    rng = input_range(r, cfg)
    if rng.crank:
        phis = np.linspace(-math.pi, math.pi, num)
    else:
        half = num // 2
        fwd = np.linspace(rng.theta_min + _DCP_INSET, rng.theta_max - _DCP_INSET, half)
        phis = np.concatenate([fwd, fwd + TWO_PI])
    outs = [simulate_cycle(r, cfg, p, rng) for p in phis.tolist()]
    return np.column_stack([phis, outs])
