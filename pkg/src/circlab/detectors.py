"""Test statistics and decision rules for planted circular structure.

Detectors (flat samples): scanning interval test, known-phase count test.
Detectors (edge samples): community interval test, coherence test, Rayleigh
test, variance test.

Conventions shared by every statistic:

* Windows are closed arcs [theta, theta + 2 pi tau]; generators sample
  half-open arcs, so boundary ties are measure zero for continuous data.
* Scanning suprema are attained at observed angles (the count as a function
  of the anchor is piecewise constant, and every window can be slid until
  its left end hits a data point without losing any point), so exact
  evaluation anchors at each observation.
* Subset searches are exact: maximum-coherence and minimum-variance scans
  enumerate all C(n,k) subsets in revolving-door (minimal-change) order and
  report the first optimizer in that order; k-clique feasibility uses branch
  and bound with degree pruning. Budgets turn oversized requests into
  CapabilityError, never into silent sampling.

All functions are pure; independent calls may run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .errors import CapabilityError, DomainError, ParameterError
from .models import TWO_PI, EdgeSample, FlatSample, canonical_angle, edge_pairs
from .specfun import arc_prob, mean_resultant

__all__ = [
    "Decision",
    "TestReport",
    "Fixed",
    "Custom",
    "FlatHardA2",
    "FlatVM",
    "CoherencePaper",
    "ThresholdPolicy",
    "default_c_schedule",
    "resolve_flat_threshold",
    "interval_stat_flat",
    "interval_test_flat",
    "known_theta_test_flat",
    "interval_stat_community",
    "interval_test_community",
    "coherence_stat",
    "coherence_test",
    "rayleigh_test",
    "variance_stat",
    "variance_test",
    "sigma2_from_coherence_eps",
    "revolving_door_subsets",
    "subset_edge_table",
    "DEFAULT_SUBSET_BUDGET",
    "DEFAULT_CLIQUE_LIMIT_N",
]

DEFAULT_SUBSET_BUDGET = 100_000_000  # subset-edge operations per exact scan
DEFAULT_CLIQUE_LIMIT_N = 48          # exact community search size cap
_CHUNK_ROWS = 16_384


class Decision(Enum):
    REJECT_H0 = "reject"
    RETAIN_H0 = "retain"


@dataclass
class TestReport:
    """Outcome of one detector run.

    ``decision`` is REJECT_H0 exactly when ``statistic`` compares against
    ``threshold`` per ``comparison`` ("ge" or "le"). ``conditions`` carries
    named side conditions (e.g. threshold feasibility) evaluated during the
    run; ``work_counter`` counts candidate windows/subsets examined.
    """

    statistic: float
    threshold: float
    decision: Decision
    comparison: str = "ge"
    witness_theta: Optional[float] = None
    witness_subset: Optional[tuple] = None
    work_counter: int = 0
    conditions: dict = field(default_factory=dict)

    @property
    def rejected(self) -> bool:
        return self.decision is Decision.REJECT_H0


def _decide(statistic: float, threshold: float, comparison: str) -> Decision:
    if comparison == "ge":
        ok = statistic >= threshold
    elif comparison == "le":
        ok = statistic <= threshold
    else:
        raise ParameterError(f"unknown comparison {comparison!r}")
    return Decision.REJECT_H0 if ok else Decision.RETAIN_H0


# ---------------------------------------------------------------------------
# Threshold policies
# ---------------------------------------------------------------------------


def default_c_schedule(N: int) -> float:
    """Default slowly growing threshold-margin schedule c_N = (log N)^(1/4)."""
    return math.log(N) ** 0.25


@dataclass(frozen=True)
class Fixed:
    """Reject when the statistic reaches a fixed value."""

    value: float


@dataclass(frozen=True)
class Custom:
    """User-supplied threshold; identical mechanics to Fixed, distinct intent."""

    value: float


@dataclass(frozen=True)
class FlatHardA2:
    """gamma = (N-K) tau + K - c_N sqrt((N-K) tau); c_n None uses the default."""

    c_n: Optional[float] = None


@dataclass(frozen=True)
class FlatVM:
    """gamma = N tau + g - c_N sqrt(N tau + g) with g = K (p_kappa(tau) - tau)."""

    c_n: Optional[float] = None


@dataclass(frozen=True)
class CoherencePaper:
    """beta = (1 - epsilon/4) C(k,2) A(kappa)."""

    epsilon: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must be in (0, 1), got {self.epsilon!r}")


ThresholdPolicy = Union[Fixed, Custom, FlatHardA2, FlatVM, CoherencePaper]


def resolve_flat_threshold(policy: ThresholdPolicy, N: int, tau: float,
                           K: Optional[int] = None,
                           kappa: Optional[float] = None) -> tuple[float, dict]:
    """Resolve a policy into a count threshold for the flat interval test.

    Returns (gamma, conditions); conditions records the feasibility check
    gamma >= 1 + (N-1) tau for the recipe-based policies. An infeasible
    recipe is flagged, not rejected: the test still runs at the computed
    gamma.
    """
    conditions: dict = {}
    if isinstance(policy, (Fixed, Custom)):
        return float(policy.value), conditions
    if K is None:
        raise ParameterError(f"policy {policy!r} needs K")
    if isinstance(policy, FlatHardA2):
        c_n = policy.c_n if policy.c_n is not None else default_c_schedule(N)
        base = (N - K) * tau
        gamma = base + K - c_n * math.sqrt(base)
    elif isinstance(policy, FlatVM):
        if kappa is None:
            raise ParameterError("FlatVM policy needs kappa")
        c_n = policy.c_n if policy.c_n is not None else default_c_schedule(N)
        g = K * (arc_prob(kappa, tau) - tau)
        mean_h1 = N * tau + g
        gamma = mean_h1 - c_n * math.sqrt(mean_h1)
        conditions["g"] = g
    else:
        raise ParameterError(f"policy {policy!r} is not a flat interval policy")
    conditions["c_n"] = c_n
    conditions["feasible"] = bool(gamma >= 1.0 + (N - 1) * tau)
    return float(gamma), conditions


# ---------------------------------------------------------------------------
# Flat interval (scan) test
# ---------------------------------------------------------------------------


def interval_stat_flat(sample: FlatSample, tau: float) -> tuple[int, float]:
    """Largest number of angles inside any closed arc of length 2 pi tau.

    Exact O(N log N) evaluation: sort, then a merged search over the doubled
    sequence counts, for each anchor point, the observations in
    [x_i, x_i + 2 pi tau]. Returns (count, anchor angle attaining it).
    """
    if not (0.0 < tau <= 1.0):
        raise DomainError(f"tau must be in (0, 1], got {tau!r}")
    angles = np.asarray(sample.angles, dtype=float)
    if angles.size == 0:
        raise ParameterError("empty sample")
    xs = np.sort(angles)
    n = xs.size
    if tau == 1.0:
        return n, float(xs[0])
    doubled = np.concatenate([xs, xs + TWO_PI])
    counts = np.searchsorted(doubled, xs + TWO_PI * tau, side="right") - np.arange(n)
    best = int(np.argmax(counts))
    return int(counts[best]), float(xs[best])


def interval_test_flat(sample: FlatSample, tau: float, policy: ThresholdPolicy,
                       K: Optional[int] = None,
                       kappa: Optional[float] = None) -> TestReport:
    """Scan test: reject H0 when some window of length 2 pi tau holds >= gamma points."""
    N = sample.n_points
    gamma, conditions = resolve_flat_threshold(policy, N, tau, K=K, kappa=kappa)
    stat, witness = interval_stat_flat(sample, tau)
    return TestReport(
        statistic=float(stat), threshold=gamma,
        decision=_decide(stat, gamma, "ge"), comparison="ge",
        witness_theta=witness, witness_subset=None,
        work_counter=N, conditions=conditions)


def known_theta_test_flat(sample: FlatSample, tau: float, gamma: float,
                          theta: float = 0.0) -> TestReport:
    """Count observations in the fixed closed arc [theta, theta + 2 pi tau].

    The anchor defaults to 0; by rotational symmetry a known planted phase
    can always be rotated there.
    """
    if not (0.0 < tau <= 1.0):
        raise DomainError(f"tau must be in (0, 1], got {tau!r}")
    x = np.asarray(sample.angles, dtype=float)
    a = canonical_angle(float(theta))
    if tau == 1.0:
        count = x.size
    else:
        b = a + TWO_PI * tau
        if b <= TWO_PI:
            count = int(np.count_nonzero((x >= a) & (x <= b)))
        else:
            count = int(np.count_nonzero(x >= a) + np.count_nonzero(x <= b - TWO_PI))
    return TestReport(
        statistic=float(count), threshold=float(gamma),
        decision=_decide(count, gamma, "ge"), comparison="ge",
        witness_theta=a, work_counter=1)


# ---------------------------------------------------------------------------
# Community interval test: window + exact k-clique search
# ---------------------------------------------------------------------------


def _find_k_clique(adj: dict, k: int) -> Optional[tuple]:
    """First k-clique in a graph given as {vertex: neighbor bitmask}, or None.

    Vertices are tried in decreasing window-subgraph degree (ties by index);
    branches are pruned when the current clique plus remaining candidates
    cannot reach size k.
    """
    if k <= 0:
        return ()
    # Iterative peeling: a k-clique member needs degree >= k-1.
    alive = set(adj)
    changed = True
    while changed:
        changed = False
        alive_mask = 0
        for v in alive:
            alive_mask |= 1 << v
        for v in list(alive):
            if (adj[v] & alive_mask).bit_count() < k - 1:
                alive.discard(v)
                changed = True
    if len(alive) < k:
        return None
    alive_mask = 0
    for v in alive:
        alive_mask |= 1 << v
    order = sorted(alive, key=lambda v: (-(adj[v] & alive_mask).bit_count(), v))
    found: list = []

    def expand(current: list, cand_mask: int) -> bool:
        if len(current) == k:
            found.extend(current)
            return True
        if len(current) + cand_mask.bit_count() < k:
            return False
        for v in order:
            bit = 1 << v
            if not (cand_mask & bit):
                continue
            if expand(current + [v], cand_mask & adj[v]):
                return True
            cand_mask &= ~bit
            if len(current) + cand_mask.bit_count() < k:
                return False
        return False

    if expand([], alive_mask):
        return tuple(sorted(found))
    return None


def interval_stat_community(sample: EdgeSample, k: int, tau: float,
                            limit_n: int = DEFAULT_CLIQUE_LIMIT_N,
                            ) -> tuple[bool, Optional[float], Optional[tuple]]:
    """Exact search for a k-set whose intra-edges all fit one closed window.

    Anchors the window at each observed edge angle in increasing order (any
    feasible window can be slid until its left end hits the smallest
    contained edge angle); for each anchor with at least C(k,2) in-window
    edges, runs exact k-clique search on the graph of in-window edges.
    Returns (found, anchor angle, vertex set) for the first witness.
    """
    n = sample.n
    k = int(k)
    if not (2 <= k <= n):
        raise ParameterError(f"need 2 <= k <= n, got k={k}, n={n}")
    if n > limit_n:
        raise CapabilityError(
            f"exact community search is capped at n <= {limit_n}; "
            f"got n = {n}. Use a smaller instance.")
    if not (0.0 < tau <= 1.0):
        raise DomainError(f"tau must be in (0, 1], got {tau!r}")
    m_need = k * (k - 1) // 2
    ang = np.asarray(sample.edge_angles, dtype=float)
    order = np.argsort(ang, kind="stable")
    sa = ang[order]
    pairs = edge_pairs(n)[order]
    m = sa.size
    if tau == 1.0:
        in_window = np.arange(m)
        adj = _window_adjacency(pairs[in_window])
        clique = _find_k_clique(adj, k)
        return True, float(sa[0]) if m else 0.0, clique
    doubled = np.concatenate([sa, sa + TWO_PI])
    counts = np.searchsorted(doubled, sa + TWO_PI * tau, side="right") - np.arange(m)
    candidates = np.flatnonzero(counts >= m_need)
    for idx in candidates:
        take = (np.arange(idx, idx + counts[idx])) % m
        adj = _window_adjacency(pairs[take])
        clique = _find_k_clique(adj, k)
        if clique is not None:
            return True, float(sa[idx]), clique
    return False, None, None


def _window_adjacency(edge_rows: np.ndarray) -> dict:
    adj: dict = {}
    for i, j in edge_rows:
        i, j = int(i), int(j)
        adj[i] = adj.get(i, 0) | (1 << j)
        adj[j] = adj.get(j, 0) | (1 << i)
    return adj


def interval_test_community(sample: EdgeSample, k: int, tau: float,
                            limit_n: int = DEFAULT_CLIQUE_LIMIT_N) -> TestReport:
    """Reject H0 when some window of length 2 pi tau holds a full k-set."""
    found, theta, subset = interval_stat_community(sample, k, tau, limit_n=limit_n)
    stat = 1.0 if found else 0.0
    return TestReport(
        statistic=stat, threshold=1.0,
        decision=_decide(stat, 1.0, "ge"), comparison="ge",
        witness_theta=theta, witness_subset=subset,
        work_counter=sample.n_edges)


# ---------------------------------------------------------------------------
# Exact subset scans: coherence and variance
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def revolving_door_subsets(n: int, k: int) -> np.ndarray:
    """All k-subsets of range(n) in revolving-door order, shape (C(n,k), k).

    Consecutive rows differ by exactly one element swapped, and the first
    optimizer reported by the subset scans refers to this row order.
    """
    def rec(nn: int, kk: int) -> list:
        if kk == 0:
            return [()]
        if kk == nn:
            return [tuple(range(nn))]
        return rec(nn - 1, kk) + [s + (nn - 1,) for s in reversed(rec(nn - 1, kk - 1))]

    subs = rec(int(n), int(k))
    return np.asarray(subs, dtype=np.int32)


@lru_cache(maxsize=8)
def subset_edge_table(n: int, k: int) -> np.ndarray:
    """Edge indices of E(C) for every k-subset C, shape (C(n,k), C(k,2))."""
    subs = revolving_door_subsets(n, k)
    a_idx, b_idx = np.triu_indices(k, k=1)
    va = subs[:, a_idx].astype(np.int64)
    vb = subs[:, b_idx].astype(np.int64)
    return (va * n - va * (va + 1) // 2 + (vb - va - 1)).astype(np.int32)


def _check_subset_budget(n: int, k: int, budget: int) -> None:
    total = math.comb(n, k) * math.comb(k, 2)
    if total > budget:
        raise CapabilityError(
            f"exact subset scan needs {total:.3g} subset-edge operations, "
            f"budget is {budget:.3g}")


def coherence_stat(sample: EdgeSample, k: int,
                   budget: int = DEFAULT_SUBSET_BUDGET) -> tuple[float, tuple]:
    """Exact max over k-subsets C of | sum_{e in E(C)} exp(i X_e) |.

    Returns (maximum, first argmax subset in revolving-door order).
    """
    n = sample.n
    k = int(k)
    if not (2 <= k <= n):
        raise ParameterError(f"need 2 <= k <= n, got k={k}, n={n}")
    _check_subset_budget(n, k, budget)
    z = np.exp(1j * np.asarray(sample.edge_angles, dtype=float))
    table = subset_edge_table(n, k)
    best_val = -1.0
    best_row = 0
    for lo in range(0, table.shape[0], _CHUNK_ROWS):
        chunk = table[lo:lo + _CHUNK_ROWS]
        vals = np.abs(z[chunk].sum(axis=1))
        row = int(np.argmax(vals))
        if vals[row] > best_val:
            best_val = float(vals[row])
            best_row = lo + row
    subs = revolving_door_subsets(n, k)
    return best_val, tuple(int(v) for v in subs[best_row])


def coherence_test(sample: EdgeSample, k: int, kappa: float, epsilon: float = 0.5,
                   budget: int = DEFAULT_SUBSET_BUDGET) -> TestReport:
    """Reject H0 when the max subset coherence reaches (1 - eps/4) C(k,2) A(kappa)."""
    if not (kappa > 0.0 and math.isfinite(kappa)):
        raise DomainError(f"kappa must be finite and > 0, got {kappa!r}")
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must be in (0, 1), got {epsilon!r}")
    m_edges = k * (k - 1) // 2
    beta = (1.0 - epsilon / 4.0) * m_edges * mean_resultant(kappa)
    value, subset = coherence_stat(sample, k, budget=budget)
    return TestReport(
        statistic=value, threshold=beta,
        decision=_decide(value, beta, "ge"), comparison="ge",
        witness_subset=subset, work_counter=math.comb(sample.n, k))


def rayleigh_test(sample: EdgeSample, k: int, kappa: float) -> TestReport:
    """Threshold the modulus of the phasor sum over all edges at mu1 / 2.

    mu1 = C(k,2) A(kappa) is the planted-signal mean of the statistic; the
    witness angle is the direction of the resultant.
    """
    if not (kappa >= 0.0 and math.isfinite(kappa)):
        raise DomainError(f"kappa must be finite and >= 0, got {kappa!r}")
    z = np.exp(1j * np.asarray(sample.edge_angles, dtype=float))
    s = complex(z.sum())
    stat = abs(s)
    mu1 = k * (k - 1) / 2.0 * mean_resultant(kappa)
    beta = mu1 / 2.0
    return TestReport(
        statistic=stat, threshold=beta,
        decision=_decide(stat, beta, "ge"), comparison="ge",
        witness_theta=canonical_angle(math.atan2(s.imag, s.real)),
        work_counter=sample.n_edges)


def variance_stat(sample: EdgeSample, k: int,
                  budget: int = DEFAULT_SUBSET_BUDGET) -> tuple[float, tuple]:
    """Exact min over k-subsets of the circular sample variance of E(C).

    V_C = min_theta (1/(K-1)) sum_{e in E(C)} d(X_e, theta)^2 with d the
    minimal angular difference and K = C(k,2). The inner minimum is exact:
    for each of the K circular cut points the values are linearized and the
    mean-squared deviation evaluated in O(1) from prefix sums; the best cut
    realizes the circular optimum.
    """
    n = sample.n
    k = int(k)
    if not (3 <= k <= n):
        raise ParameterError(f"variance scan needs 3 <= k <= n, got k={k}, n={n}")
    _check_subset_budget(n, k, budget)
    x = np.asarray(sample.edge_angles, dtype=float)
    table = subset_edge_table(n, k)
    m = table.shape[1]
    best_val = math.inf
    best_row = 0
    cuts = np.arange(m)
    for lo in range(0, table.shape[0], _CHUNK_ROWS):
        vals = np.sort(x[table[lo:lo + _CHUNK_ROWS]], axis=1)
        s1 = vals.sum(axis=1, keepdims=True)
        s2 = (vals * vals).sum(axis=1, keepdims=True)
        prefix = np.concatenate(
            [np.zeros((vals.shape[0], 1)), np.cumsum(vals, axis=1)[:, :-1]], axis=1)
        sum_y = s1 + TWO_PI * cuts
        sum_y2 = s2 + 2.0 * TWO_PI * prefix + TWO_PI * TWO_PI * cuts
        ss = np.maximum(sum_y2 - sum_y * sum_y / m, 0.0)
        v = ss.min(axis=1) / (m - 1)
        row = int(np.argmin(v))
        if v[row] < best_val:
            best_val = float(v[row])
            best_row = lo + row
    subs = revolving_door_subsets(n, k)
    return best_val, tuple(int(v) for v in subs[best_row])


def variance_test(sample: EdgeSample, k: int, sigma2: float,
                  budget: int = DEFAULT_SUBSET_BUDGET) -> TestReport:
    """Reject H0 when some k-subset has circular sample variance <= sigma2."""
    if not (sigma2 > 0.0):
        raise DomainError(f"sigma2 must be > 0, got {sigma2!r}")
    value, subset = variance_stat(sample, k, budget=budget)
    return TestReport(
        statistic=value, threshold=float(sigma2),
        decision=_decide(value, float(sigma2), "le"), comparison="le",
        witness_subset=subset, work_counter=math.comb(sample.n, k))


def sigma2_from_coherence_eps(k: int, epsilon: float) -> float:
    """Variance threshold 2 eps / (K-1) matching a coherence threshold K - eps."""
    m_edges = k * (k - 1) // 2
    if m_edges < 2:
        raise ParameterError(f"need C(k,2) >= 2, got k={k}")
    return 2.0 * epsilon / (m_edges - 1)
