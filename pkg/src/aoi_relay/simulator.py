"""Slotted Monte Carlo engine for the relaying protocol.

One slot proceeds as: fresh arrival first (with probability p, replacing
the source's buffered update and discarding any copy at the relay), then a
single transmission by the source if it holds an update, otherwise by the
relay, then instantaneous resolution. A source transmission that reaches
the destination delivers; failing that, a successful source-to-relay
reception hands the update over. Acknowledgements and relay channel
sensing are free. An update generated at the start of slot s and delivered
within slot s therefore has service time 1, and between deliveries the age
grows by exactly one per slot.

Four independent uniform draws are consumed per slot (arrival plus the
three links) regardless of which outcomes the state machine actually
needs, so a replication's trajectory is a pure function of its stream.
Replication streams derive from the master seed via SeedSequence keyed by
(seed, replication_index), which keeps runs reproducible under any degree
of parallelism; the slot loop itself is compiled and releases the GIL, so
replications can run on a thread pool.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .model import (
    CycleRecord,
    Holder,
    ParameterError,
    ProtocolState,
    SimulationSummary,
    SystemParams,
)

__all__ = [
    "CycleRecords",
    "CycleStatistics",
    "Mode",
    "SimulationConfig",
    "SlotOutcome",
    "cycle_statistics",
    "run",
    "run_replication",
    "run_with_records",
    "step",
]

_BLOCK_SLOTS = 1 << 20  # slots of pre-drawn randomness per kernel call

_IDLE, _SOURCE, _RELAY = 0, 1, 2
_HOLDER_CODE = {Holder.IDLE: _IDLE, Holder.SOURCE: _SOURCE, Holder.RELAY: _RELAY}


class Mode(enum.Enum):
    COOPERATIVE = "coop"
    NON_COOPERATIVE = "noncoop"


@dataclass(frozen=True)
class SlotOutcome:
    """The four independent per-slot draws: whether a fresh update arrived
    and whether each link's transmission would succeed this slot."""

    new_arrival: bool
    sd_success: bool
    sr_success: bool
    rd_success: bool


@dataclass(frozen=True)
class SimulationConfig:
    params: SystemParams
    n_slots: int
    n_replications: int = 1
    seed: int = 0
    mode: Mode = Mode.COOPERATIVE
    record_cycles: bool = False
    warmup_slots: int = 10_000

    def __post_init__(self) -> None:
        if self.n_slots < 1:
            raise ParameterError(f"n_slots must be >= 1, got {self.n_slots}")
        if self.n_replications < 1:
            raise ParameterError(
                f"n_replications must be >= 1, got {self.n_replications}"
            )
        if not 0 <= self.warmup_slots < self.n_slots:
            raise ParameterError(
                f"warmup_slots must be in [0, n_slots), got {self.warmup_slots}"
            )


def step(
    state: ProtocolState, outcome: SlotOutcome, slot: int
) -> tuple[ProtocolState, Optional[int]]:
    """Advance the protocol by one slot; reference implementation.

    Returns the post-slot state and, if an update reached the destination,
    its generation slot. Slot-internal precedence: the arrival replaces and
    preempts before anything is transmitted; a source transmission heard by
    both destination and relay counts as delivered (the acknowledgement
    voids the relay copy).
    """
    holder, gen = state.holder, state.generation_slot
    if outcome.new_arrival:
        holder, gen = Holder.SOURCE, slot
    delivered: Optional[int] = None
    if holder is Holder.SOURCE:
        if outcome.sd_success:
            delivered = gen
        elif outcome.sr_success:
            holder = Holder.RELAY
    elif holder is Holder.RELAY:
        if outcome.rd_success:
            delivered = gen
    if delivered is not None:
        holder, gen = Holder.IDLE, None
    last = state.last_delivered_generation_slot if delivered is None else delivered
    return ProtocolState(holder, gen, last), delivered


@njit(cache=True, nogil=True)
def _advance(
    u, p, p1, p2, p3, cooperative, slot0, warmup,
    holder, gen, last_gen, prev_time, prev_s, first_gen, have_prev, have_first,
    sum_aoi, n_sampled, n_deliveries,
    c_count, c_sums,  # cycle accumulators: s, w, t, z, z^2, s_prev, s_prev*z, q
    record, s_out, w_out, t_out, z_out, q_out, n_rec,
):
    # Mirrors step() exactly; kept flat so numba emits a tight slot loop.
    n = u.shape[0]
    for i in range(n):
        slot = slot0 + i
        if u[i, 0] < p:
            holder = _SOURCE
            gen = slot
            if not have_first:
                have_first = True
                first_gen = slot
        delivered = False
        if holder == _SOURCE:
            if u[i, 1] < p1:
                delivered = True
                holder = _IDLE
            elif cooperative and u[i, 2] < p2:
                holder = _RELAY
        elif holder == _RELAY:
            if u[i, 3] < p3:
                delivered = True
                holder = _IDLE
        now = slot + 1
        if delivered:
            n_deliveries += 1
            s_k = now - gen
            if have_prev and prev_time > warmup:
                z_k = now - prev_time
                w_k = first_gen - prev_time
                t_k = now - first_gen
                q_k = prev_s * z_k + (z_k * z_k - z_k) / 2.0
                c_count += 1
                c_sums[0] += s_k
                c_sums[1] += w_k
                c_sums[2] += t_k
                c_sums[3] += z_k
                c_sums[4] += float(z_k) * z_k
                c_sums[5] += prev_s
                c_sums[6] += float(prev_s) * z_k
                c_sums[7] += q_k
                if record and n_rec < s_out.shape[0]:
                    s_out[n_rec] = s_k
                    w_out[n_rec] = w_k
                    t_out[n_rec] = t_k
                    z_out[n_rec] = z_k
                    q_out[n_rec] = q_k
                    n_rec += 1
            last_gen = gen
            prev_time = now
            prev_s = s_k
            have_prev = True
            have_first = False
        if slot >= warmup:
            sum_aoi += now - last_gen
            n_sampled += 1
    return (
        holder, gen, last_gen, prev_time, prev_s, first_gen, have_prev,
        have_first, sum_aoi, n_sampled, n_deliveries, c_count, n_rec,
    )


@dataclass(frozen=True)
class CycleRecords:
    """Column-wise store of per-cycle intervals; behaves as a sequence of
    CycleRecord. The first recorded cycle is the second post-warmup
    delivery, so every record has a defined predecessor service time
    (recoverable from q_k)."""

    s: np.ndarray
    w: np.ndarray
    t: np.ndarray
    z: np.ndarray
    q: np.ndarray

    def __len__(self) -> int:
        return len(self.s)

    def __getitem__(self, i: int) -> CycleRecord:
        return CycleRecord(
            s_k=int(self.s[i]), w_k=int(self.w[i]), t_k=int(self.t[i]),
            z_k=int(self.z[i]), q_k=float(self.q[i]),
        )

    def s_prev(self) -> np.ndarray:
        """Previous-cycle service times, one per record, unwound from the
        area identity q = s_prev*z + (z^2 - z)/2."""
        z = self.z.astype(np.float64)
        return (self.q - (z * z - z) / 2.0) / z

    @staticmethod
    def concatenate(parts: Sequence["CycleRecords"]) -> "CycleRecords":
        return CycleRecords(
            s=np.concatenate([r.s for r in parts]),
            w=np.concatenate([r.w for r in parts]),
            t=np.concatenate([r.t for r in parts]),
            z=np.concatenate([r.z for r in parts]),
            q=np.concatenate([r.q for r in parts]),
        )


@dataclass
class _ReplicationResult:
    sum_aoi: float
    n_sampled: int
    n_deliveries: int
    cycle_count: int
    cycle_sums: np.ndarray
    records: Optional[CycleRecords]

    @property
    def avg_aoi(self) -> float:
        return self.sum_aoi / self.n_sampled if self.n_sampled else math.nan


def _replicate(config: SimulationConfig, index: int) -> _ReplicationResult:
    params = config.params
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
    capacity = config.n_slots if config.record_cycles else 0
    s_out = np.empty(capacity, np.int64)
    w_out = np.empty(capacity, np.int64)
    t_out = np.empty(capacity, np.int64)
    z_out = np.empty(capacity, np.int64)
    q_out = np.empty(capacity, np.float64)
    c_sums = np.zeros(8, np.float64)
    state = (_IDLE, 0, -1, 0, 0, 0, False, False, 0.0, 0, 0, 0, 0)
    done = 0
    while done < config.n_slots:
        block = min(_BLOCK_SLOTS, config.n_slots - done)
        u = rng.random((block, 4))
        state = _advance(
            u, params.p, params.p1, params.p2, params.p3,
            config.mode is Mode.COOPERATIVE, done, config.warmup_slots,
            *state[:12], c_sums,
            config.record_cycles, s_out, w_out, t_out, z_out, q_out, state[12],
        )
        done += block
    sum_aoi, n_sampled, n_deliveries, c_count, n_rec = state[8:13]
    records = None
    if config.record_cycles:
        records = CycleRecords(
            s=s_out[:n_rec], w=w_out[:n_rec], t=t_out[:n_rec],
            z=z_out[:n_rec], q=q_out[:n_rec],
        )
    return _ReplicationResult(
        sum_aoi=sum_aoi, n_sampled=n_sampled, n_deliveries=n_deliveries,
        cycle_count=c_count, cycle_sums=c_sums, records=records,
    )


def _summarize(config: SimulationConfig, reps: list[_ReplicationResult]) -> SimulationSummary:
    total_sampled = sum(r.n_sampled for r in reps)
    avg = sum(r.sum_aoi for r in reps) / total_sampled
    if len(reps) > 1:
        means = np.array([r.avg_aoi for r in reps])
        stderr = float(means.std(ddof=1) / math.sqrt(len(reps)))
    else:
        stderr = math.nan
    count = sum(r.cycle_count for r in reps)
    sums = np.sum([r.cycle_sums for r in reps], axis=0)
    if count >= 2:
        mean_s, mean_w, mean_t, mean_z = (sums[:4] / count).tolist()
        mean_z2 = float(sums[4] / count)
        cov_s_z = float(sums[6] / count - (sums[5] / count) * (sums[3] / count))
    else:
        mean_s = mean_w = mean_t = mean_z = mean_z2 = cov_s_z = math.nan
    return SimulationSummary(
        avg_aoi=avg, stderr=stderr, mean_s=mean_s, mean_w=mean_w, mean_t=mean_t,
        mean_z=mean_z, mean_z2=mean_z2, cov_s_z=cov_s_z,
        n_slots=total_sampled, n_cycles=count, seed=config.seed,
    )


def run_replication(config: SimulationConfig, replication_index: int) -> SimulationSummary:
    """Run a single replication on its own deterministic stream."""
    rep = _replicate(config, replication_index)
    return _summarize(config, [rep])


def run_with_records(
    config: SimulationConfig, max_workers: Optional[int] = None
) -> tuple[SimulationSummary, Optional[CycleRecords]]:
    """Like ``run`` but also returns the pooled per-cycle records when the
    config asks for them (None otherwise)."""
    indices = range(config.n_replications)
    if config.n_replications == 1 or max_workers == 1:
        reps = [_replicate(config, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            reps = list(pool.map(lambda i: _replicate(config, i), indices))
    summary = _summarize(config, reps)
    records = None
    if config.record_cycles:
        records = CycleRecords.concatenate([r.records for r in reps])
    return summary, records


def run(config: SimulationConfig, max_workers: Optional[int] = None) -> SimulationSummary:
    """Run all replications and pool them.

    The pooled average is slot-weighted; stderr is taken across
    replication averages. Output is identical for a fixed (seed, config)
    no matter how many workers execute the replications.
    """
    return run_with_records(config, max_workers)[0]


@dataclass(frozen=True)
class CycleStatistics:
    """Empirical cycle-interval statistics, the Monte Carlo counterparts of
    the closed-form moments plus the lag covariance and the renewal-reward
    age estimate mean(Q)/mean(Z)."""

    mean_s: float
    mean_w: float
    mean_t: float
    mean_z: float
    mean_z2: float
    mean_s_prev_z: float
    cov_s_z: float
    renewal_aoi: float
    n_cycles: int


def cycle_statistics(records) -> CycleStatistics:
    """Summarize a sequence of cycle records (at least two).

    Accepts a ``CycleRecords`` column store or any sequence of
    ``CycleRecord``. The previous-cycle service time is recovered from the
    area identity, so the lag product mean and covariance pair each cycle's
    interdeparture time with the service time of the cycle before it.
    """
    if not isinstance(records, CycleRecords):
        if len(records) < 2:
            raise ParameterError("need at least two cycle records")
        records = CycleRecords(
            s=np.array([r.s_k for r in records], np.int64),
            w=np.array([r.w_k for r in records], np.int64),
            t=np.array([r.t_k for r in records], np.int64),
            z=np.array([r.z_k for r in records], np.int64),
            q=np.array([r.q_k for r in records], np.float64),
        )
    if len(records) < 2:
        raise ParameterError("need at least two cycle records")
    z = records.z.astype(np.float64)
    s_prev = records.s_prev()
    mean_z = float(z.mean())
    mean_s_prev = float(s_prev.mean())
    mean_s_prev_z = float((s_prev * z).mean())
    return CycleStatistics(
        mean_s=float(records.s.mean()),
        mean_w=float(records.w.mean()),
        mean_t=float(records.t.mean()),
        mean_z=mean_z,
        mean_z2=float((z * z).mean()),
        mean_s_prev_z=mean_s_prev_z,
        cov_s_z=mean_s_prev_z - mean_s_prev * mean_z,
        renewal_aoi=float(records.q.mean()) / mean_z,
        n_cycles=len(records),
    )
