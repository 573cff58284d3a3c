"""Shared domain types for the cooperative status-update system.

The system is slotted in time. A source generates a fresh status update at
the start of each slot with probability ``p`` and tries to push the newest
update to a destination, either over the direct link or through a relay
that opportunistically retransmits updates it decoded. A fresh arrival
always preempts: the source replaces its own buffered update and the relay
discards whatever it was retransmitting. The per-slot transmission success
probabilities are ``p1`` (source to destination), ``p2`` (source to relay)
and ``p3`` (relay to destination).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional


class ParameterError(ValueError):
    """A parameter is outside its valid range."""


class UndeliverableError(ValueError):
    """No sequence of transmissions can ever deliver an update."""


def _check_probability(name: str, value: float) -> None:
    # the negated form also rejects NaN
    if not (0.0 <= value <= 1.0):
        raise ParameterError(f"{name} must be in [0, 1], got {value!r}")


@dataclass(frozen=True)
class LinkProbabilities:
    """Per-slot success probabilities of the three links."""

    p1: float  # source -> destination
    p2: float  # source -> relay
    p3: float  # relay -> destination

    def __post_init__(self) -> None:
        for name in ("p1", "p2", "p3"):
            _check_probability(name, getattr(self, name))

    def in_closed_form_domain(self) -> bool:
        """True iff 0 < p1 < p2 < 1 and 0 < p1 < p3 < 1.

        On this region (direct link strictly the weakest, no link saturated)
        the closed-form optimal generation probability is valid; outside it
        only the numerical minimizer is offered.
        """
        return 0.0 < self.p1 < self.p2 < 1.0 and self.p1 < self.p3 < 1.0


@dataclass(frozen=True)
class SystemParams:
    """A full parameter point: link probabilities plus the generation
    probability ``p`` of a fresh status update at each slot start."""

    links: LinkProbabilities
    p: float

    def __post_init__(self) -> None:
        _check_probability("p", self.p)

    @classmethod
    def of(cls, p: float, p1: float, p2: float, p3: float) -> "SystemParams":
        return cls(LinkProbabilities(p1, p2, p3), p)

    @property
    def p1(self) -> float:
        return self.links.p1

    @property
    def p2(self) -> float:
        return self.links.p2

    @property
    def p3(self) -> float:
        return self.links.p3


@dataclass(frozen=True)
class DerivedConstants:
    """Per-slot survival products that every closed form is written in.

    alpha: probability that a relay-held update survives one slot, i.e. no
        fresh arrival preempts it and the relay-to-destination transmission
        fails: (1-p)(1-p3).
    beta: probability that a source-held update survives one slot, i.e. no
        fresh arrival and both the direct and the source-to-relay
        transmissions fail: (1-p)(1-p1)(1-p2).
    gamma: per-slot weight of the relay hand-over path:
        p2*p3*(1-p)(1-p1).
    p_prime: generation odds p/(1-p); None when p = 1.
    p2_prime: relay-decode odds p2/(1-p2); None when p2 = 1.
    """

    alpha: float
    beta: float
    gamma: float
    p_prime: Optional[float]
    p2_prime: Optional[float]


def derive_constants(params: SystemParams) -> DerivedConstants:
    """Evaluate the survival products for one parameter point.

    The primed odds are carried as None at their undefined boundaries
    (p = 1 or p2 = 1); callers that need them must reject those points and
    use the direct average-age formula instead, which stays finite there.
    """
    p, p1, p2, p3 = params.p, params.p1, params.p2, params.p3
    q = 1.0 - p
    return DerivedConstants(
        alpha=q * (1.0 - p3),
        beta=q * (1.0 - p1) * (1.0 - p2),
        gamma=p2 * p3 * q * (1.0 - p1),
        p_prime=p / q if p < 1.0 else None,
        p2_prime=p2 / (1.0 - p2) if p2 < 1.0 else None,
    )


class Holder(enum.Enum):
    """Which node is responsible for the in-flight update."""

    IDLE = "idle"
    SOURCE = "source"
    RELAY = "relay"


@dataclass(frozen=True)
class ProtocolState:
    """State of the slotted relaying protocol between two slots.

    ``generation_slot`` is the slot in which the in-flight update was
    generated (None iff nobody holds one). ``last_delivered_generation_slot``
    is the generation slot of the freshest update the destination has
    received; it starts at -1, which pins the age at slot 0 to one.
    """

    holder: Holder = Holder.IDLE
    generation_slot: Optional[int] = None
    last_delivered_generation_slot: int = -1

    def __post_init__(self) -> None:
        if (self.generation_slot is None) != (self.holder is Holder.IDLE):
            raise ParameterError(
                "generation_slot must be set exactly when a node holds an update"
            )


@dataclass(frozen=True)
class CycleRecord:
    """Intervals of one delivery cycle, all in slots.

    s_k: service time, delivery time minus the generation slot of the
        delivered update.
    w_k: waiting time, slots from the previous delivery until the first
        fresh update is generated (geometric, may be zero).
    t_k: delivery duration, from that first generation to the delivery,
        including any preemption chain.
    z_k: interdeparture time between consecutive deliveries; z_k = w_k + t_k.
    q_k: area under the age staircase across the cycle,
        s_prev*z_k + (z_k^2 - z_k)/2 with s_prev the previous cycle's
        service time.
    """

    s_k: int
    w_k: int
    t_k: int
    z_k: int
    q_k: float


@dataclass(frozen=True)
class SimulationSummary:
    """Pooled outcome of one or more simulation replications.

    avg_aoi is the per-slot time average of the age over the post-warmup
    window; stderr is the standard error of that average across
    replications (NaN for a single replication). The mean_* fields are
    empirical cycle statistics (NaN when fewer than two cycles completed);
    cov_s_z is the empirical covariance between the previous cycle's
    service time and the current interdeparture time, which the renewal
    argument predicts to be zero. n_slots counts post-warmup sampled slots
    over all replications.
    """

    avg_aoi: float
    stderr: float
    mean_s: float
    mean_w: float
    mean_t: float
    mean_z: float
    mean_z2: float
    cov_s_z: float
    n_slots: int
    n_cycles: int
    seed: int

    def __post_init__(self) -> None:
        if self.n_slots > 0 and not math.isnan(self.avg_aoi) and self.avg_aoi < 1.0:
            raise ParameterError("average age below one slot is impossible")
