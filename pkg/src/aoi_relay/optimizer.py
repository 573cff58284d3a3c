"""Optimal update-generation probability.

The average age, seen as a function of the generation probability p at
fixed link qualities, has a derivative whose sign equals the sign of a
quadratic q(p) = a*p^2 + b*p + c in p. On the closed-form domain
(0 < p1 < p2 < 1, 0 < p1 < p3 < 1) that quadratic opens upward whenever
its larger root lies in (0, 1), so the minimizer is either that root or
the boundary p = 1, selected by a threshold on p1.

Every coefficient is evaluated twice, from a factored and from an expanded
polynomial form, and the two must agree; a seeded audit over random domain
samples re-checks the sign facts the case analysis rests on. A grid plus
golden-section minimizer of the average-age curve itself serves as a fully
independent cross-check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analytic import average_aoi
from .model import LinkProbabilities, ParameterError, SystemParams, UndeliverableError

__all__ = [
    "OptimalBranch",
    "OptimumResult",
    "SignCaseAudit",
    "SlopeQuadratic",
    "audit_derivative_signs",
    "audit_sign_cases",
    "branch_threshold",
    "numerical_optimal_p",
    "optimal_p",
    "sample_closed_form_domain",
    "slope_quadratic",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_GRID_POINTS = 1001
_BOUNDARY_SNAP = 1e-12  # roots this close to 1 collapse onto the boundary


# --- coefficient forms -------------------------------------------------
# Factored forms are the primary evaluation; the expanded polynomials are
# kept as an independent transcription cross-check. Plain arithmetic, so
# all of these accept floats or numpy arrays.

def _a_factored(p1, p2, p3):
    return (
        p2 * p3 * (1.0 - p2 * p3)
        - p1**2 * (1.0 - p2) * (1.0 - p3) ** 2
        - p1 * p2 * p3**2 * (1.0 - p2) * (2.0 - p1)
        - p1 * p2 * (1.0 - p3)
    )


def _b_factored(p1, p2, p3):
    return -2.0 * p3 * (p1 + p2 - p1 * p2) * (p1 - p1 * p3 - p2 * p3 + p1 * p2 * p3)


def _c_factored(p1, p2, p3):
    return -(p3**2) * (p1**2 * (p2 - 1.0) ** 2 + p2 * (p2 + 2.0 * p1 * (1.0 - p2)))


def _disc_factored(p1, p2, p3):
    return 4.0 * p2 * p3**2 * (p3 - p1) * (1.0 - p1) * (p1 + p2 - p1 * p2) ** 2


def _a_expanded(p1, p2, p3):
    return -(
        p1**2 * p2**2 * p3**2 - 2 * p1**2 * p2 * p3**2 + 2 * p1**2 * p2 * p3
        - p1**2 * p2 + p1**2 * p3**2 - 2 * p1**2 * p3 + p1**2
        - 2 * p1 * p2**2 * p3**2 + 2 * p1 * p2 * p3**2 - p1 * p2 * p3
        + p1 * p2 + p2**2 * p3**2 - p2 * p3
    )


def _b_expanded(p1, p2, p3):
    return (
        2 * p1**2 * p2**2 * p3**2 - 4 * p1**2 * p2 * p3**2 + 2 * p1**2 * p2 * p3
        + 2 * p1**2 * p3**2 - 2 * p1**2 * p3 - 4 * p1 * p2**2 * p3**2
        + 4 * p1 * p2 * p3**2 - 2 * p1 * p2 * p3 + 2 * p2**2 * p3**2
    )


def _c_expanded(p1, p2, p3):
    return -(
        p1**2 * p2**2 * p3**2 - 2 * p1**2 * p2 * p3**2 + p1**2 * p3**2
        - 2 * p1 * p2**2 * p3**2 + 2 * p1 * p2 * p3**2 + p2**2 * p3**2
    )


# -a as a quadratic in p1: lambda*p1^2 + mu*p1 + xi, used by the audit
def _neg_a_in_p1(p2, p3):
    lam = p2**2 * p3**2 - 2 * p2 * p3**2 + 2 * p2 * p3 - p2 + p3**2 - 2 * p3 + 1.0
    mu = 2 * p2 * p3**2 * (1.0 - p2) + p2 * (1.0 - p3)
    xi = p2 * p3 * (p2 * p3 - 1.0)
    return lam, mu, xi


@dataclass(frozen=True)
class SlopeQuadratic:
    """Coefficients of q(p) = a*p^2 + b*p + c whose sign equals the sign of
    d(average age)/dp, plus the discriminant b^2 - 4ac. On the closed-form
    domain c < 0 and the discriminant is strictly positive, so q always has
    two real roots and is negative at p = 0."""

    a: float
    b: float
    c: float
    discriminant: float

    def evaluate(self, p: float) -> float:
        return (self.a * p + self.b) * p + self.c

    def largest_root(self) -> float:
        """Larger root of q, evaluated in the cancellation-free form
        (requires a > 0, which holds whenever the root is the minimizer)."""
        if self.a <= 0.0:
            raise ParameterError("largest_root needs an upward-opening quadratic")
        s = math.sqrt(self.discriminant)
        q = -(self.b + math.copysign(s, self.b)) / 2.0
        return max(q / self.a, self.c / q)


def _require_domain(links: LinkProbabilities) -> None:
    if not links.in_closed_form_domain():
        raise ParameterError(
            "links outside the closed-form domain (need 0 < p1 < p2 < 1 and "
            "0 < p1 < p3 < 1); use numerical_optimal_p instead"
        )


def slope_quadratic(links: LinkProbabilities) -> SlopeQuadratic:
    """Derivative-sign quadratic for one point of the closed-form domain.

    Each coefficient is computed from its factored and its expanded form
    and the two evaluations must agree; a mismatch means a transcription
    bug, not bad input.
    """
    _require_domain(links)
    p1, p2, p3 = links.p1, links.p2, links.p3
    a, b, c = _a_factored(p1, p2, p3), _b_factored(p1, p2, p3), _c_factored(p1, p2, p3)
    disc = _disc_factored(p1, p2, p3)
    for name, factored, expanded in (
        ("a", a, _a_expanded(p1, p2, p3)),
        ("b", b, _b_expanded(p1, p2, p3)),
        ("c", c, _c_expanded(p1, p2, p3)),
        ("discriminant", disc, b * b - 4.0 * a * c),
    ):
        scale = max(1.0, abs(factored), abs(expanded))
        if abs(factored - expanded) > 1e-10 * scale:
            raise AssertionError(
                f"coefficient {name}: factored {factored!r} and expanded "
                f"{expanded!r} forms disagree"
            )
    return SlopeQuadratic(a=a, b=b, c=c, discriminant=disc)


def branch_threshold(p2: float, p3: float) -> float:
    """Threshold on p1 below which the optimum is the interior root of the
    slope quadratic and above which it is p = 1:

    (p2 + p2*p3 - sqrt((p2 - p2*p3)^2 + 4*p2*p3)) / (2*(p2 - 1))
    """
    if not (0.0 < p2 < 1.0):
        raise ParameterError(f"p2 must be in (0, 1), got {p2!r}")
    if not (0.0 < p3 < 1.0):
        raise ParameterError(f"p3 must be in (0, 1), got {p3!r}")
    num = p2 + p2 * p3 - math.sqrt((p2 - p2 * p3) ** 2 + 4.0 * p2 * p3)
    return num / (2.0 * (p2 - 1.0))


class OptimalBranch(enum.Enum):
    INTERIOR_ROOT = "interior-root"
    BOUNDARY_ONE = "boundary-one"


@dataclass(frozen=True)
class OptimumResult:
    """Minimizer of the average age over the generation probability."""

    p_star: float
    branch: OptimalBranch
    aoi_at_optimum: float
    threshold_p1: Optional[float]


def optimal_p(links: LinkProbabilities) -> OptimumResult:
    """Closed-form optimal generation probability on the closed-form domain.

    Below the p1 threshold the minimizer is the larger root of the slope
    quadratic; above it the age decreases all the way to p = 1. A computed
    root within 1e-12 of 1 is reported as the boundary, removing the
    untestable knife edge where the branches coincide.
    """
    _require_domain(links)
    threshold = branch_threshold(links.p2, links.p3)
    if links.p1 < threshold:
        root = slope_quadratic(links).largest_root()
        if root < 1.0 - _BOUNDARY_SNAP:
            return OptimumResult(
                p_star=root,
                branch=OptimalBranch.INTERIOR_ROOT,
                aoi_at_optimum=average_aoi(SystemParams(links, root)),
                threshold_p1=threshold,
            )
    return OptimumResult(
        p_star=1.0,
        branch=OptimalBranch.BOUNDARY_ONE,
        aoi_at_optimum=average_aoi(SystemParams(links, 1.0)),
        threshold_p1=threshold,
    )


def _aoi_curve(links: LinkProbabilities, p: np.ndarray) -> np.ndarray:
    """Vectorized average age over an array of generation probabilities.
    Points where the age is undefined (only possible at p = 1 with a dead
    direct link) evaluate to +inf."""
    q = 1.0 - p
    alpha = q * (1.0 - links.p3)
    beta = q * (1.0 - links.p1) * (1.0 - links.p2)
    gamma = links.p2 * links.p3 * q * (1.0 - links.p1)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (1.0 - alpha) * (1.0 - beta) / (p * (links.p1 * (1.0 - alpha) + gamma))
    return np.where(np.isfinite(vals), vals, np.inf)


def numerical_optimal_p(
    links: LinkProbabilities, tolerance: float = 1e-8
) -> OptimumResult:
    """Minimize the average age over p in (0, 1] without the closed form.

    Coarse scan on a 1001-point grid, golden-section refinement of the best
    bracket down to ``tolerance``, then two parabolic polish passes whose
    sample spacing is wide enough to beat floating-point noise in the
    objective. The boundary candidate p = 1 is always compared explicitly.
    Works on any valid links, inside or outside the closed-form domain.
    """
    if tolerance <= 0.0:
        raise ParameterError(f"tolerance must be positive, got {tolerance!r}")
    if links.p1 == 0.0 and (links.p2 == 0.0 or links.p3 == 0.0):
        raise UndeliverableError(
            "undeliverable configuration: no path from source to destination"
        )

    def f(p: float) -> float:
        return float(_aoi_curve(links, np.asarray(p)))

    grid = np.linspace(1e-4, 1.0, _GRID_POINTS)
    values = _aoi_curve(links, grid)
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, _GRID_POINTS - 1)]

    c = hi - (hi - lo) * _INV_PHI
    d = lo + (hi - lo) * _INV_PHI
    fc, fd = f(c), f(d)
    while hi - lo > tolerance:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - (hi - lo) * _INV_PHI
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + (hi - lo) * _INV_PHI
            fd = f(d)
    p_best = (lo + hi) / 2.0

    # Golden section stalls once objective differences fall below rounding
    # noise; a parabolic vertex through samples spaced >> that noise scale
    # recovers the extra digits.
    for delta in (5e-4, 2e-5):
        left = max(p_best - delta, 1e-6)
        right = min(p_best + delta, 1.0)
        mid = (left + right) / 2.0
        half = (right - left) / 2.0
        if half <= 0.0:
            continue
        f_l, f_m, f_r = f(left), f(mid), f(right)
        curvature = f_r - 2.0 * f_m + f_l
        if curvature > 0.0:
            step = 0.5 * half * (f_l - f_r) / curvature
            candidate = mid + max(-half, min(half, step))
            if 0.0 < candidate <= 1.0 and f(candidate) <= f_m:
                p_best = candidate
                continue
        p_best = min((left, mid, right), key=f)

    if f(1.0) <= f(p_best):
        p_best = 1.0
    threshold = (
        branch_threshold(links.p2, links.p3)
        if 0.0 < links.p2 < 1.0 and 0.0 < links.p3 < 1.0
        else None
    )
    boundary = p_best >= 1.0 - _BOUNDARY_SNAP
    return OptimumResult(
        p_star=1.0 if boundary else p_best,
        branch=OptimalBranch.BOUNDARY_ONE if boundary else OptimalBranch.INTERIOR_ROOT,
        aoi_at_optimum=f(1.0) if boundary else f(p_best),
        threshold_p1=threshold,
    )


def sample_closed_form_domain(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform samples from the closed-form domain, as an (n, 3) array of
    (p1, p2, p3) rows, by rejection from the unit cube."""
    rows = []
    need = n
    while need > 0:
        cand = rng.random((max(4 * need, 64), 3))
        ok = (cand[:, 0] < cand[:, 1]) & (cand[:, 0] < cand[:, 2]) & (cand[:, 0] > 0.0)
        keep = cand[ok][:need]
        rows.append(keep)
        need -= len(keep)
    return np.concatenate(rows)


def audit_derivative_signs(
    n_pairs: int, seed: int = 42, step: float = 1e-6, exclusion: float = 1e-3
) -> int:
    """Count disagreements between the sign of the slope quadratic and the
    sign of a central finite difference of the average age.

    Draws random (domain point, p) pairs with p at least ``exclusion`` away
    from the quadratic's stationary root, where both signs are well
    defined. Returns the number of mismatches (0 when the quadratic really
    does carry the derivative's sign).
    """
    if n_pairs <= 0:
        raise ParameterError(f"n_pairs must be positive, got {n_pairs!r}")
    rng = np.random.default_rng(seed)
    mismatches = 0
    drawn = 0
    while drawn < n_pairs:
        p1, p2, p3 = sample_closed_form_domain(rng, 1)[0]
        links = LinkProbabilities(p1, p2, p3)
        quad = slope_quadratic(links)
        root = quad.largest_root() if quad.a > 0.0 else -math.inf
        p = rng.uniform(0.01, 0.999)
        if abs(p - root) <= exclusion:
            continue
        drawn += 1
        lo = average_aoi(SystemParams(links, p - step))
        hi = average_aoi(SystemParams(links, p + step))
        if ((hi - lo) > 0.0) != (quad.evaluate(p) > 0.0):
            mismatches += 1
    return mismatches


@dataclass(frozen=True)
class SignCaseAudit:
    """Result of re-checking, on random domain samples, the coefficient-sign
    facts the closed-form case analysis rests on. All counters must be zero
    for the analysis to stand; ``counterexamples`` holds up to ten offending
    (p1, p2, p3) triples tagged by the check they violated."""

    n_samples: int
    seed: int
    c_nonnegative: int           # c >= 0 (quadratic not negative at p = 0)
    disc_nonpositive: int        # b^2 - 4ac <= 0 (roots not real/distinct)
    form_disagreements: int      # factored vs expanded evaluation mismatch
    a_neg_b_pos: int             # opens downward with positive linear term
    b_bound_violations: int      # b > 0 without p1 < p2*p3/(1 - p3 + p2*p3)
    neg_a_at_bound_nonneg: int   # -a at that p1 bound fails to be negative
    mu_nonpositive: int          # linear coefficient of -a(p1) not positive
    xi_nonnegative: int          # constant coefficient of -a(p1) not negative
    counterexamples: tuple

    @property
    def passed(self) -> bool:
        return not (
            self.c_nonnegative
            or self.disc_nonpositive
            or self.form_disagreements
            or self.a_neg_b_pos
            or self.b_bound_violations
            or self.neg_a_at_bound_nonneg
            or self.mu_nonpositive
            or self.xi_nonnegative
        )


def audit_sign_cases(n_samples: int, seed: int = 42) -> SignCaseAudit:
    """Sample the closed-form domain and verify every sign fact behind the
    optimizer's case analysis.

    Checks, per sample: c < 0 and discriminant > 0; factored and expanded
    coefficient forms agree to 1e-10 (relative, floored at magnitude one);
    the excluded pattern a < 0 with b > 0 never occurs; b > 0 implies
    p1 < p2*p3/(1 - p3 + p2*p3); rewriting -a as a quadratic in p1 gives a
    positive linear and a negative constant coefficient, and evaluates to a
    negative value at that p1 bound.
    """
    if n_samples <= 0:
        raise ParameterError(f"n_samples must be positive, got {n_samples!r}")
    rng = np.random.default_rng(seed)
    pts = sample_closed_form_domain(rng, n_samples)
    p1, p2, p3 = pts[:, 0], pts[:, 1], pts[:, 2]

    a_f, b_f, c_f = _a_factored(p1, p2, p3), _b_factored(p1, p2, p3), _c_factored(p1, p2, p3)
    disc_f = _disc_factored(p1, p2, p3)
    disagree = np.zeros(n_samples, dtype=bool)
    for factored, expanded in (
        (a_f, _a_expanded(p1, p2, p3)),
        (b_f, _b_expanded(p1, p2, p3)),
        (c_f, _c_expanded(p1, p2, p3)),
        (disc_f, b_f * b_f - 4.0 * a_f * c_f),
    ):
        scale = np.maximum(1.0, np.maximum(np.abs(factored), np.abs(expanded)))
        disagree |= np.abs(factored - expanded) > 1e-10 * scale

    bound = p2 * p3 / (1.0 - p3 + p2 * p3)
    lam, mu, xi = _neg_a_in_p1(p2, p3)
    neg_a_at_bound = lam * bound**2 + mu * bound + xi

    checks = {
        "c_nonnegative": c_f >= 0.0,
        "disc_nonpositive": disc_f <= 0.0,
        "form_disagreements": disagree,
        "a_neg_b_pos": (a_f < 0.0) & (b_f > 0.0),
        "b_bound_violations": (b_f > 0.0) & ~(p1 < bound),
        "neg_a_at_bound_nonneg": neg_a_at_bound >= 0.0,
        "mu_nonpositive": mu <= 0.0,
        "xi_nonnegative": xi >= 0.0,
    }
    counterexamples = []
    for name, mask in checks.items():
        for idx in np.flatnonzero(mask)[:10]:
            if len(counterexamples) < 10:
                counterexamples.append((name, (p1[idx], p2[idx], p3[idx])))
    return SignCaseAudit(
        n_samples=n_samples,
        seed=seed,
        counterexamples=tuple(counterexamples),
        **{name: int(mask.sum()) for name, mask in checks.items()},
    )
