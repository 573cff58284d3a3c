"""Independent brute-force oracles for the closed-form moments.

These sum the defining series of the cycle-interval expectations directly
(truncated geometric tails, vectorized with numpy) and never touch the
package's closed forms, so agreement is meaningful evidence.
"""

import numpy as np

_TERMS = 1200  # tail factor is < 0.93 for every point used in tests


def series_service_time(p, p1, p2, p3):
    """E[S] from the defining success-path series: direct deliveries after l
    transmissions and relayed deliveries after m source plus n relay
    transmissions, weighted by their path probabilities."""
    l = np.arange(1, _TERMS + 1, dtype=float)
    direct = (1 - p) ** (l - 1) * (1 - p2) ** (l - 1) * (1 - p1) ** (l - 1) * p1
    m = l[:, None]
    n = l[None, :]
    relayed = (
        (1 - p) ** (m - 1) * (1 - p2) ** (m - 1) * (1 - p1) ** m * p2
        * (1 - p) ** n * (1 - p3) ** (n - 1) * p3
    )
    num = (direct * l).sum() + (relayed * (m + n)).sum()
    return num / (direct.sum() + relayed.sum())


def series_waiting_moments(p):
    """Moments of the geometric waiting time on {0, 1, 2, ...}."""
    w = np.arange(0, _TERMS + 1, dtype=float)
    weights = (1 - p) ** w * p
    return (weights * w).sum(), (weights * w * w).sum()


def _delivery_case_sums(p, p1, p2, p3):
    """Per-case probability weights of the delivery-duration recursion:
    direct success, relayed success, preemption at the source, preemption
    after relay hand-over (n >= 0 relay slots)."""
    l = np.arange(1, _TERMS + 1, dtype=float)
    direct = (1 - p) ** (l - 1) * (1 - p2) ** (l - 1) * (1 - p1) ** (l - 1) * p1
    m = l[:, None]
    n = l[None, :]
    relayed = (
        (1 - p) ** (m - 1) * (1 - p2) ** (m - 1) * (1 - p1) ** m * p2
        * (1 - p) ** n * (1 - p3) ** (n - 1) * p3
    )
    preempt_src = (1 - p1) ** l * (1 - p2) ** l * (1 - p) ** (l - 1) * p
    n0 = np.arange(0, _TERMS + 1, dtype=float)[None, :]
    preempt_relay = (
        (1 - p1) ** m * (1 - p2) ** (m - 1) * p2 * (1 - p) ** (m - 1)
        * (1 - p) ** n0 * (1 - p3) ** n0 * p
    )
    return l, direct, m, n, relayed, preempt_src, n0, preempt_relay


def series_delivery_time(p, p1, p2, p3):
    """E[T] by solving the preemption recursion E[T] = A + B*E[T] with
    brute-force sums for A and B."""
    l, direct, m, n, relayed, pre_s, n0, pre_r = _delivery_case_sums(p, p1, p2, p3)
    a = (
        (direct * l).sum()
        + (relayed * (m + n)).sum()
        + (pre_s * l).sum()
        + (pre_r * (m + n0)).sum()
    )
    b = pre_s.sum() + pre_r.sum()
    return a / (1 - b)


def series_delivery_time_sq(p, p1, p2, p3):
    """E[T^2] by the same recursion, reusing the series value of E[T]."""
    e_t = series_delivery_time(p, p1, p2, p3)
    l, direct, m, n, relayed, pre_s, n0, pre_r = _delivery_case_sums(p, p1, p2, p3)
    a = (
        (direct * l * l).sum()
        + (relayed * (m * m + 2 * m * n + n * n)).sum()
        + (pre_s * (l * l + 2 * l * e_t)).sum()
        + (pre_r * (m * m + n0 * n0 + 2 * m * n0 + 2 * (m + n0) * e_t)).sum()
    )
    b = pre_s.sum() + pre_r.sum()
    return a / (1 - b)


def series_average_aoi(p, p1, p2, p3):
    """Average age assembled from the series moments through the
    renewal-reward identity avg = E[S] + E[Z^2]/(2 E[Z]) - 1/2."""
    e_s = series_service_time(p, p1, p2, p3)
    e_w, e_w2 = series_waiting_moments(p)
    e_t = series_delivery_time(p, p1, p2, p3)
    e_t2 = series_delivery_time_sq(p, p1, p2, p3)
    e_z = e_w + e_t
    e_z2 = e_w2 + 2 * e_w * e_t + e_t2
    return e_s + e_z2 / (2 * e_z) - 0.5
