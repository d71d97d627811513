"""Seeded numerical audit of the pseudospin algebra and the Bell-operator bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cvbell.bell import (
    CIRELSON,
    BellSettings,
    bell_operator,
    bell_squared_residual,
    random_settings,
    spectral_bound,
)
from cvbell.fock import (
    commutator,
    identity,
    make_space,
    max_abs_diff,
    pseudospin_component,
    pseudospin_minus,
    pseudospin_minus_alt,
    pseudospin_plus,
    pseudospin_z,
    random_directions,
)

COMMUTATOR_TOL = 1e-14
INVOLUTION_TOL = 1e-14
BELL_SQUARED_TOL = 1e-12
CIRELSON_TOL = 1e-10
DIRECTIONS_PER_SPACE = 100
SETTINGS_PER_SPACE = 50

CHECK_NAMES = ("commutators", "involution", "bell_squared", "cirelson")


@dataclass(frozen=True)
class CheckResult:
    check: str
    pair_count: int
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def as_dict(self) -> dict:
        return {"check": self.check, "pair_count": self.pair_count, "max_residual": self.max_residual,
                "tolerance": self.tolerance, "passed": self.passed}


def _rng(seed: int, pair_count: int, check: str) -> np.random.Generator:
    # one stream per (seed, truncation, check) so results do not depend on list order
    return np.random.default_rng([seed, pair_count, CHECK_NAMES.index(check)])


def check_commutators(pair_count: int) -> CheckResult:
    space = make_space(pair_count)
    sz, sp_, sm = pseudospin_z(space), pseudospin_plus(space), pseudospin_minus(space)
    worst = max(
        max_abs_diff(commutator(sz, sp_), 2.0 * sp_),
        max_abs_diff(commutator(sz, sm), -2.0 * sm),
        max_abs_diff(commutator(sp_, sm), sz),
        max_abs_diff(pseudospin_minus_alt(space), sm),
    )
    return CheckResult("commutators", pair_count, worst, COMMUTATOR_TOL)


def check_involution(pair_count: int, seed: int, count: int = DIRECTIONS_PER_SPACE) -> CheckResult:
    space = make_space(pair_count)
    eye = identity(space)
    worst = 0.0
    for direction in random_directions(_rng(seed, pair_count, "involution"), count):
        op = pseudospin_component(space, direction)
        worst = max(worst, max_abs_diff(op @ op, eye), op.hermitian_residual())
    return CheckResult("involution", pair_count, worst, INVOLUTION_TOL)


def check_bell_squared(pair_count: int, seed: int, count: int = SETTINGS_PER_SPACE) -> CheckResult:
    space = make_space(pair_count)
    rng = _rng(seed, pair_count, "bell_squared")
    worst = max(bell_squared_residual(space, space, random_settings(rng)) for _ in range(count))
    return CheckResult("bell_squared", pair_count, worst, BELL_SQUARED_TOL)


def check_cirelson(pair_count: int, seed: int, count: int = SETTINGS_PER_SPACE) -> CheckResult:
    """Excess of the spectral norm over 2 sqrt 2, plus the miss at the canonical settings."""
    space = make_space(pair_count)
    rng = _rng(seed, pair_count, "cirelson")
    excess = max(spectral_bound(bell_operator(space, space, random_settings(rng))) - CIRELSON
                 for _ in range(count))
    canonical = spectral_bound(bell_operator(space, space, BellSettings.canonical(np.pi / 4)))
    worst = max(excess, abs(canonical - CIRELSON), 0.0)
    return CheckResult("cirelson", pair_count, worst, CIRELSON_TOL)


def run_checks(pair_counts, seed: int = 0) -> list[CheckResult]:
    results = []
    for m in pair_counts:
        results.append(check_commutators(m))
        results.append(check_involution(m, seed))
        results.append(check_bell_squared(m, seed))
        results.append(check_cirelson(m, seed))
    return results
