"""Position analysis and type classification of planar four-bar linkages.

Conventions used throughout the package:

* The ground link runs from O2 = (0, 0) to O4 = (r1, 0).
* The input link r2 is pinned at O2, the output link r4 at O4, and the
  coupler r3 joins their free ends.
* Angles are measured counterclockwise from +x in radians.
* ``branch`` (+1 / -1) is the sign in front of the radical of the
  half-angle solution. The inversion of a :class:`TypeConfig` is the branch
  used on the forward (CCW) leg of the cycle.

All functions use ``math`` on Python floats and are pure, which keeps the
per-sample cost low enough for online data generation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi

# Rows are T1..T4 as functions of r1..r4. M.T @ M == 4 I.
T_MATRIX = np.array(
    [
        [1.0, -1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
        [-1.0, -1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0, 1.0],
    ]
)

# sgn(T1), sgn(T2), sgn(T3) for type numbers 1..8.
TYPE_SIGNS: dict[int, tuple[int, int, int]] = {
    1: (1, 1, 1),
    2: (1, -1, -1),
    3: (-1, -1, 1),
    4: (-1, 1, -1),
    5: (-1, -1, -1),
    6: (1, 1, -1),
    7: (1, -1, 1),
    8: (-1, 1, 1),
}
SIGNS_TO_TYPE = {v: k for k, v in TYPE_SIGNS.items()}

TYPE_NAMES: dict[int, str] = {
    1: "Crank-Rocker",
    2: "Rocker-Crank",
    3: "Double-Crank",
    4: "Double-Rocker",
    5: "Triple-Rocker 00",
    6: "Triple-Rocker 0pi",
    7: "Triple-Rocker pi0",
    8: "Triple-Rocker pipi",
}

CRANK_INPUT_TYPES = frozenset({1, 3})

DEFAULT_FOLD_TOL = 1e-6

# Relative slack on the radical: values in [-RADICAL_RTOL * (A^2 + B^2), 0)
# are rounding noise at a dead-center position and are treated as zero.
RADICAL_RTOL = 1e-12


class KinematicsError(ValueError):
    """Base class for kinematic failures."""


class FoldingError(KinematicsError):
    """Raised when one of T1..T3 vanishes (folding linkage)."""


class Unreachable(KinematicsError):
    """Raised when an input angle cannot be assembled."""


class ResultNotValidLinkage(KinematicsError):
    """Raised when link lengths fail positivity or the quadrilateral inequality."""


class InternalInconsistency(RuntimeError):
    """Raised when the input-range computation disagrees with the radical."""


class LinkageDims(NamedTuple):
    r1: float
    r2: float
    r3: float
    r4: float

    @property
    def total(self) -> float:
        return self.r1 + self.r2 + self.r3 + self.r4

    def scaled(self, k: float) -> "LinkageDims":
        return LinkageDims(k * self.r1, k * self.r2, k * self.r3, k * self.r4)


class TParams(NamedTuple):
    t1: float
    t2: float
    t3: float
    t4: float


@dataclass(frozen=True, order=True)
class TypeConfig:
    """One of the 16 configurations: linkage type 1..8 and inversion sign."""

    type_id: int
    inversion: int

    def __post_init__(self):
        if self.type_id not in TYPE_SIGNS:
            raise ValueError(f"type_id must be in 1..8, got {self.type_id!r}")
        if self.inversion not in (1, -1):
            raise ValueError(f"inversion must be +1 or -1, got {self.inversion!r}")

    @property
    def signs(self) -> tuple[int, int, int]:
        return TYPE_SIGNS[self.type_id]

    @property
    def crank_input(self) -> bool:
        return self.type_id in CRANK_INPUT_TYPES

    @property
    def name(self) -> str:
        return TYPE_NAMES[self.type_id]

    @property
    def label(self) -> str:
        return f"{self.name}{'+' if self.inversion > 0 else '-'}"

    @property
    def key(self) -> str:
        return f"type{self.type_id}{'p' if self.inversion > 0 else 'm'}"

    @classmethod
    def parse(cls, type_id, inversion) -> "TypeConfig":
        if isinstance(inversion, str):
            inv = inversion.strip()
            if inv in ("+", "+1", "p", "plus"):
                inversion = 1
            elif inv in ("-", "-1", "m", "minus", "−"):
                inversion = -1
            else:
                raise ValueError(f"bad inversion {inversion!r}")
        return cls(int(type_id), int(inversion))


ALL_CONFIGS: tuple[TypeConfig, ...] = tuple(
    TypeConfig(k, s) for k in range(1, 9) for s in (1, -1)
)


def input_is_crank(type_id: int) -> bool:
    return type_id in CRANK_INPUT_TYPES


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.fmod(a, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    elif w > math.pi:
        w -= TWO_PI
    return w


def t_params(r) -> TParams:
    r1, r2, r3, r4 = r
    return TParams(
        r1 - r2 + r3 - r4,
        r1 - r2 - r3 + r4,
        -r1 - r2 + r3 + r4,
        r1 + r2 + r3 + r4,
    )


def is_valid(r) -> bool:
    """Positivity and the quadrilateral inequality 2 r_i < sum(r)."""
    total = r[0] + r[1] + r[2] + r[3]
    for ri in r:
        if not (ri > 0.0) or not (2.0 * ri < total):
            return False
    return True


def dims_from_t_unchecked(t) -> LinkageDims:
    t1, t2, t3, t4 = t
    return LinkageDims(
        0.25 * (t1 + t2 - t3 + t4),
        0.25 * (-t1 - t2 - t3 + t4),
        0.25 * (t1 - t2 + t3 + t4),
        0.25 * (-t1 + t2 + t3 + t4),
    )


def dims_from_t(t) -> LinkageDims:
    """Invert the T map: r = M^T T / 4.

    Raises ResultNotValidLinkage if the lengths do not close a four-bar.
    """
    r = dims_from_t_unchecked(t)
    if not is_valid(r):
        raise ResultNotValidLinkage(f"T={tuple(t)} gives invalid linkage r={tuple(r)}")
    return r


def sign_triple(r) -> tuple[int, int, int]:
    t = t_params(r)
    return (
        1 if t.t1 > 0 else -1,
        1 if t.t2 > 0 else -1,
        1 if t.t3 > 0 else -1,
    )


def classify(r, fold_tol: float = DEFAULT_FOLD_TOL) -> int:
    """Return the type number (1..8) of a linkage.

    Raises FoldingError when any of |T1|, |T2|, |T3| is within ``fold_tol``.
    """
    t = t_params(r)
    for j, tj in enumerate(t[:3], start=1):
        if abs(tj) <= fold_tol:
            raise FoldingError(f"|T{j}| = {abs(tj):.3g} <= {fold_tol:g}; r={tuple(r)}")
    return SIGNS_TO_TYPE[sign_triple(r)]


def _coefficients(r, theta_in: float) -> tuple[float, float, float]:
    r1, r2, r3, r4 = r
    c = math.cos(theta_in)
    s = math.sin(theta_in)
    a = 2.0 * r1 * r4 - 2.0 * r2 * r4 * c
    b = -2.0 * r2 * r4 * s
    cc = r1 * r1 + r2 * r2 + r4 * r4 - r3 * r3 - 2.0 * r1 * r2 * c
    return a, b, cc


def radical(r, theta_in: float) -> float:
    """B^2 - C^2 + A^2; non-negative exactly where the input can be assembled."""
    a, b, c = _coefficients(r, theta_in)
    return b * b - c * c + a * a


def _solve(r1: float, r2: float, r3: float, r4: float, theta_in: float, branch: int) -> float:
    c = math.cos(theta_in)
    a = 2.0 * r1 * r4 - 2.0 * r2 * r4 * c
    b = -2.0 * r2 * r4 * math.sin(theta_in)
    cc = r1 * r1 + r2 * r2 + r4 * r4 - r3 * r3 - 2.0 * r1 * r2 * c
    disc = b * b - cc * cc + a * a
    if disc < 0.0:
        if disc < -RADICAL_RTOL * (a * a + b * b):
            raise Unreachable(
                f"input angle {theta_in:.6g} rad is not reachable for r={(r1, r2, r3, r4)}"
            )
        disc = 0.0
    root = math.sqrt(disc)
    sb = 1.0 if b >= 0.0 else -1.0
    q = -b - sb * root  # numerator of the root with branch == -sb
    if branch == -sb:
        half = math.atan2(q, cc - a)
    else:
        half = math.atan2(cc + a, q)
    return wrap_angle(2.0 * half)


def solve_output(r, theta_in: float, branch: int) -> float:
    """Output angle in (-pi, pi] for the given input angle and radical sign.

    Solves (C - A) t^2 + 2 B t + (C + A) = 0 with t = tan(theta_out / 2),
    where C carries the full 2 r1 r2 cos(theta_in) cross term. The root whose
    numerator would cancel is taken from the product of the roots, which also
    covers the linear case C == A without a division.
    """
    r1, r2, r3, r4 = r
    return _solve(r1, r2, r3, r4, theta_in, branch)


def joint_positions(r, theta_in: float, theta_out: float):
    """Moving joint coordinates ((ax, ay), (bx, by))."""
    r1, r2, _, r4 = r
    ax, ay = r2 * math.cos(theta_in), r2 * math.sin(theta_in)
    bx, by = r1 + r4 * math.cos(theta_out), r4 * math.sin(theta_out)
    return (ax, ay), (bx, by)


def loop_closure_residual(r, theta_in: float, theta_out: float) -> float:
    (ax, ay), (bx, by) = joint_positions(r, theta_in, theta_out)
    return abs(math.hypot(bx - ax, by - ay) - r[2])


@dataclass(frozen=True)
class InputRange:
    """Admissible input motion of the driver.

    For a crank the whole circle is admissible. For a rocker the forward
    (CCW) leg is [theta_min, theta_max] and the return (CW) leg is encoded
    as the 2 pi shifted copy [2 pi + theta_min, 2 pi + theta_max].
    """

    crank: bool
    theta_min: float = -math.pi
    theta_max: float = math.pi

    @property
    def span(self) -> float:
        return self.theta_max - self.theta_min

    def leg(self, phi: float, tol: float = 1e-12) -> int:
        """0 for the forward leg, 1 for the return leg; Unreachable otherwise."""
        if self.crank:
            return 0
        if self.theta_min - tol <= phi <= self.theta_max + tol:
            return 0
        if self.theta_min + TWO_PI - tol <= phi <= self.theta_max + TWO_PI + tol:
            return 1
        raise Unreachable(
            f"cycle parameter {phi:.6g} outside [{self.theta_min:.6g}, {self.theta_max:.6g}]"
            f" and its 2pi shift"
        )

    def contains(self, phi: float, tol: float = 1e-12) -> bool:
        try:
            self.leg(phi, tol)
        except Unreachable:
            return False
        return True

    def clamp(self, phi: float) -> float:
        """Nearest point of the cycle-parameter domain (identity inside it)."""
        if self.crank:
            return phi
        lo0, hi0 = self.theta_min, self.theta_max
        lo1, hi1 = lo0 + TWO_PI, hi0 + TWO_PI
        if lo0 <= phi <= hi0 or lo1 <= phi <= hi1:
            return phi
        return min((lo0, hi0, lo1, hi1), key=lambda b: abs(b - phi))


CRANK_RANGE = InputRange(crank=True)


def _clip_unit(x: float) -> float:
    return -1.0 if x < -1.0 else (1.0 if x > 1.0 else x)


def input_range(r, cfg: TypeConfig | int) -> InputRange:
    """Driver range from the dead-center positions.

    The radical is non-negative exactly when |r3 - r4| <= |A O4| <= r3 + r4,
    and |A O4|^2 = r1^2 + r2^2 - 2 r1 r2 cos(theta), so the reachable inputs
    form the set c_lo <= cos(theta) <= c_hi. Depending on which bound falls
    inside (-1, 1) this is one arc through 0, one arc through pi, or two mirror
    arcs; in the last case (Grashof rocker-input types 2 and 4, one arc per
    circuit) the arc in the upper half plane is used.
    """
    type_id = cfg.type_id if isinstance(cfg, TypeConfig) else int(cfg)
    if type_id in CRANK_INPUT_TYPES:
        return CRANK_RANGE
    r1, r2, r3, r4 = r
    den = 2.0 * r1 * r2
    c_lo = (r1 * r1 + r2 * r2 - (r3 + r4) ** 2) / den
    c_hi = (r1 * r1 + r2 * r2 - (r3 - r4) ** 2) / den
    lo_inside = c_lo > -1.0
    hi_inside = c_hi < 1.0
    if lo_inside and hi_inside:
        # two arcs: cos in [c_lo, c_hi]
        rng = InputRange(False, math.acos(_clip_unit(c_hi)), math.acos(_clip_unit(c_lo)))
    elif lo_inside:
        # arc through 0: cos >= c_lo
        th = math.acos(_clip_unit(c_lo))
        rng = InputRange(False, -th, th)
    elif hi_inside:
        # arc through pi: cos <= c_hi
        th = math.acos(_clip_unit(c_hi))
        rng = InputRange(False, th, TWO_PI - th)
    else:
        raise InternalInconsistency(
            f"rocker-input type {type_id} but the input link fully rotates for r={tuple(r)}"
        )
    if not rng.span > 0.0:
        raise InternalInconsistency(f"empty input range for r={tuple(r)}")
    mid = 0.5 * (rng.theta_min + rng.theta_max)
    if radical(r, mid) < 0.0:
        raise InternalInconsistency(f"midpoint of input range unreachable for r={tuple(r)}")
    return rng


def simulate_cycle(r, cfg: TypeConfig, phi: float, rng: InputRange | None = None) -> float:
    """Output angle at cycle parameter ``phi``.

    Cranks use the configured branch everywhere. Rockers use it on the forward
    leg and the opposite branch on the 2 pi shifted return leg, the motion an
    output link with inertia follows after passing a dead-center position.
    """
    r1, r2, r3, r4 = r
    if cfg.crank_input:
        return _solve(r1, r2, r3, r4, phi, cfg.inversion)
    if rng is None:
        rng = input_range(r, cfg)
    if rng.leg(phi) == 0:
        return _solve(r1, r2, r3, r4, phi, cfg.inversion)
    return _solve(r1, r2, r3, r4, phi - TWO_PI, -cfg.inversion)


def simulate_many(r, cfg: TypeConfig, phis, rng: InputRange | None = None) -> list[float]:
    """simulate_cycle over a sequence of cycle parameters (same arithmetic)."""
    r1, r2, r3, r4 = r
    s = cfg.inversion
    if cfg.crank_input:
        return [_solve(r1, r2, r3, r4, p, s) for p in phis]
    if rng is None:
        rng = input_range(r, cfg)
    out = []
    for p in phis:
        if rng.leg(p) == 0:
            out.append(_solve(r1, r2, r3, r4, p, s))
        else:
            out.append(_solve(r1, r2, r3, r4, p - TWO_PI, -s))
    return out


def circle_intersection_output(r, theta_in: float, branch: int) -> float:
    """Output angle by intersecting two circles; independent check of solve_output.

    Circle 1 is centred at the input joint with radius r3, circle 2 at O4 with
    radius r4. Branch -1 picks the intersection to the left of the directed
    line from the input joint to O4, branch +1 the one to the right.
    """
    r1, r2, r3, r4 = r
    ax, ay = r2 * math.cos(theta_in), r2 * math.sin(theta_in)
    dx, dy = r1 - ax, -ay
    d = math.hypot(dx, dy)
    if d > r3 + r4 or d < abs(r3 - r4) or d == 0.0:
        raise Unreachable("circles do not intersect")
    a = (r3 * r3 - r4 * r4 + d * d) / (2.0 * d)
    h = math.sqrt(max(r3 * r3 - a * a, 0.0))
    ux, uy = dx / d, dy / d
    px, py = ax + a * ux, ay + a * uy
    side = -branch
    bx = px - side * h * uy
    by = py + side * h * ux
    return math.atan2(by, bx - r1)
