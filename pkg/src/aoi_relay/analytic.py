"""Closed-form moments and average age of information.

All formulas are exact expectations for the slotted relaying protocol with
Bernoulli(p) update generation and independent per-slot link successes.
They are written in the factored survival products alpha, beta, gamma (see
``model.DerivedConstants``) rather than expanded polynomials: fewer
cancellations and each factor keeps its protocol meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    DerivedConstants,
    ParameterError,
    SystemParams,
    UndeliverableError,
    derive_constants,
)

__all__ = [
    "MomentBundle",
    "average_aoi",
    "average_aoi_noncooperative",
    "expected_delivery_time",
    "expected_delivery_time_sq",
    "expected_interdeparture",
    "expected_service_time",
    "expected_waiting_moments",
    "moments",
]


@dataclass(frozen=True)
class MomentBundle:
    """First and second moments of the cycle intervals at one parameter
    point: service time S, waiting time W, delivery duration T and
    interdeparture time Z (all in slots, squared moments in slots^2)."""

    e_s: float
    e_w: float
    e_w2: float
    e_t: float
    e_t2: float
    e_z: float
    e_z2: float


def _require_generation(p: float) -> None:
    if p <= 0.0:
        raise ParameterError("p must be positive (no updates means unbounded age)")
    if p > 1.0:
        raise ParameterError(f"p must be in (0, 1], got {p!r}")


def _delivery_rate(params: SystemParams, c: DerivedConstants) -> float:
    """Denominator weight p1*(1-alpha) + gamma; zero iff no update can ever
    reach the destination."""
    rate = params.p1 * (1.0 - c.alpha) + c.gamma
    if rate == 0.0:
        raise UndeliverableError(
            "undeliverable configuration: direct link is dead (p1=0) and the "
            "relay path never completes"
        )
    return rate


def expected_service_time(params: SystemParams) -> float:
    """Mean service time E[S]: slots from the generation of a delivered
    update to its delivery.

    E[S] = 1/(1-beta) + gamma / ((1-alpha) * (p1*(1-alpha) + gamma)),
    the direct-link term plus the extra relay-phase slots weighted by the
    chance the delivery went through the relay.
    """
    _require_generation(params.p)
    c = derive_constants(params)
    rate = _delivery_rate(params, c)
    return 1.0 / (1.0 - c.beta) + (1.0 / (1.0 - c.alpha)) * c.gamma / rate


def expected_waiting_moments(p: float) -> tuple[float, float]:
    """First two moments of the waiting time W ~ Geometric(p) on {0, 1, ...}:
    E[W] = (1-p)/p and E[W^2] = (p^2 - 3p + 2)/p^2."""
    _require_generation(p)
    return (1.0 - p) / p, (p * p - 3.0 * p + 2.0) / (p * p)


def expected_delivery_time(params: SystemParams) -> float:
    """Mean delivery duration E[T]: slots from the first post-delivery
    generation until the next delivery, preemption chains included.

    E[T] = ((1-alpha) + beta * p2') / (p1*(1-alpha) + gamma) with
    p2' = p2/(1-p2). Finite and valid up to p = 1 (zero-wait regime), but
    undefined at p2 = 1; use ``average_aoi`` there instead.
    """
    _require_generation(params.p)
    c = derive_constants(params)
    if c.p2_prime is None:
        raise ParameterError(
            "p2 = 1 is outside the component-moment recursion; "
            "average_aoi handles that boundary directly"
        )
    rate = _delivery_rate(params, c)
    return ((1.0 - c.alpha) + c.beta * c.p2_prime) / rate


def expected_interdeparture(params: SystemParams) -> float:
    """Mean interdeparture time E[Z] = E[W] + E[T] in closed form:
    (1-alpha)(1-beta) / (p * (p1*(1-alpha) + gamma))."""
    _require_generation(params.p)
    c = derive_constants(params)
    rate = _delivery_rate(params, c)
    return (1.0 - c.alpha) * (1.0 - c.beta) / (params.p * rate)


def expected_delivery_time_sq(params: SystemParams) -> float:
    """Second moment E[T^2] of the delivery duration.

    Solves the preemption recursion for T^2; needs both odds p' = p/(1-p)
    and p2' = p2/(1-p2), so the open interval 0 < p < 1 and p2 < 1 is
    required.
    """
    _require_generation(params.p)
    if params.p == 1.0:
        raise ParameterError("p = 1 is outside the T^2 recursion (p' diverges)")
    c = derive_constants(params)
    if c.p2_prime is None:
        raise ParameterError(
            "p2 = 1 is outside the component-moment recursion; "
            "average_aoi handles that boundary directly"
        )
    _delivery_rate(params, c)  # reject undeliverable points up front
    a, b = c.alpha, c.beta
    pp, p2p = c.p_prime, c.p2_prime
    e_t = expected_delivery_time(params)
    lead = (1.0 - a) * (1.0 - b) - (1.0 - a) * b * pp - b * pp * p2p
    brace = (
        (1.0 - a) ** 2 * (1.0 + b)
        + (3.0 - a - b - a * b) * b * p2p
        + 2.0 * e_t * ((1.0 - a) ** 2 * b * pp + (1.0 - a * b) * b * pp * p2p)
    )
    return brace / (lead * (1.0 - a) * (1.0 - b))


def moments(params: SystemParams) -> MomentBundle:
    """All cycle-interval moments at an interior point (0 < p < 1, p2 < 1).

    E[Z^2] is assembled from the independence of W and T:
    E[Z^2] = E[W^2] + 2 E[W] E[T] + E[T^2].
    """
    e_w, e_w2 = expected_waiting_moments(params.p)
    e_t = expected_delivery_time(params)
    e_t2 = expected_delivery_time_sq(params)
    return MomentBundle(
        e_s=expected_service_time(params),
        e_w=e_w,
        e_w2=e_w2,
        e_t=e_t,
        e_t2=e_t2,
        e_z=expected_interdeparture(params),
        e_z2=e_w2 + 2.0 * e_w * e_t + e_t2,
    )


def average_aoi(params: SystemParams) -> float:
    """Long-run time-average age of information, in slots.

    avg = (1-alpha)(1-beta) / (p * (p1*(1-alpha) + gamma))

    Valid on the whole parameter box with p > 0, including the boundaries
    p = 1 (where it reduces to 1/p1: generate-at-will, the relay is always
    preempted) and p2 in {0, 1}. Raises UndeliverableError when no update
    can ever reach the destination.
    """
    _require_generation(params.p)
    c = derive_constants(params)
    rate = _delivery_rate(params, c)
    return (1.0 - c.alpha) * (1.0 - c.beta) / (params.p * rate)


def average_aoi_noncooperative(p: float, p1: float) -> float:
    """Average age with the relay disabled: (1 - (1-p)(1-p1)) / (p * p1).

    Identical to ``average_aoi`` with p2 = 0 (any p3; the relay terms
    cancel), which keeps the baseline on the same preemption semantics.
    """
    _require_generation(p)
    if not (0.0 <= p1 <= 1.0):
        raise ParameterError(f"p1 must be in [0, 1], got {p1!r}")
    if p1 == 0.0:
        raise UndeliverableError(
            "undeliverable configuration: without the relay, p1 = 0 never delivers"
        )
    return (1.0 - (1.0 - p) * (1.0 - p1)) / (p * p1)
