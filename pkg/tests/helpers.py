"""Independent random linkage sampling for tests (does not use datagen)."""
import math

import numpy as np

from fourbar_synth.kinematics import TWO_PI, classify, input_range, is_valid, radical


def random_valid_r(rng, scale=5.0):
    while True:
        r = tuple(float(x) for x in rng.uniform(0.05, scale, 4))
        if is_valid(r):
            return r


def random_linkage(cfg, rng, scale=5.0):
    """Valid, non-folding linkage of cfg's type by plain rejection on r."""
    while True:
        r = random_valid_r(rng, scale)
        try:
            if classify(r, fold_tol=1e-3) == cfg.type_id:
                return r
        except ValueError:
            pass


def reachable_input(r, cfg, rng, cycle=False):
    """Input angle with a non-negative radical; a cycle parameter when ``cycle``."""
    if cfg.crank_input:
        return float(rng.uniform(-math.pi, math.pi))
    ir = input_range(r, cfg)
    th = float(rng.uniform(ir.theta_min, ir.theta_max))
    assert radical(r, th) >= 0
    if cycle and rng.random() < 0.5:
        th += TWO_PI
    return th


# criterion number -> (passed, one-line summary); printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class criterion:
    """Record one acceptance criterion's outcome and print its verdict line."""

    def __init__(self, num: int, title: str):
        self.num, self.title, self.detail = num, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{self.detail} | {exc_type.__name__}: {exc}".strip(" |")
        ACCEPTANCE[self.num] = (ok, f"{self.title}: {detail}")
        print(f"[{'PASS' if ok else 'FAIL'}] {self.num}. {self.title}: {detail}")
        return False
