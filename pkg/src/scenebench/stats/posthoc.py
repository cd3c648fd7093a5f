"""Tukey-Kramer pairwise comparisons and grouping of indistinguishable systems."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from scenebench.stats.distributions import studentized_range_quantile


@dataclass(frozen=True)
class PosthocMatrix:
    systems: tuple[str, ...]
    means: tuple[float, ...]
    significant: np.ndarray
    q_stat: np.ndarray
    q_crit: float
    alpha: float = 0.05

    def is_significant(self, a: str, b: str) -> bool:
        i, j = self.systems.index(a), self.systems.index(b)
        return bool(self.significant[i, j])

    def pairs(self):
        k = len(self.systems)
        for i in range(k):
            for j in range(i + 1, k):
                yield self.systems[i], self.systems[j], float(self.q_stat[i, j]), bool(self.significant[i, j])


@dataclass(frozen=True)
class SystemGroups:
    groups: tuple[tuple[str, ...], ...]
    group_means: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.groups)

    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]


def tukey_kramer(means: Sequence[float], ns: Sequence[int], mse: float, df_err: float, alpha: float = 0.05,
                 systems: Sequence[str] | None = None) -> PosthocMatrix:
    """All-pairs comparison of level means.

    Pair (i, j) is significant when
    ``|m_i - m_j| / sqrt(mse/2 * (1/n_i + 1/n_j))`` exceeds the
    studentized-range critical value for ``k`` means and ``df_err`` dof.
    """
    m = np.asarray(means, dtype=np.float64)
    n = np.asarray(ns, dtype=np.float64)
    k = m.shape[0]
    if n.shape != (k,):
        raise ValueError("means and ns must have the same length")
    if np.any(n <= 0):
        raise ValueError("group counts must be positive")
    if not mse > 0:
        raise ValueError(f"mse must be positive, got {mse}")
    if not df_err > 0:
        raise ValueError(f"df_err must be positive, got {df_err}")
    names = tuple(systems) if systems is not None else tuple(str(i) for i in range(k))
    if len(names) != k:
        raise ValueError("one name per mean required")
    se = np.sqrt(mse / 2.0 * (1.0 / n[:, None] + 1.0 / n[None, :]))
    q = np.abs(m[:, None] - m[None, :]) / se
    np.fill_diagonal(q, 0.0)
    q_crit = studentized_range_quantile(alpha, k, df_err) if k >= 2 else math.inf
    sig = q > q_crit
    np.fill_diagonal(sig, False)
    sig.flags.writeable = False
    q.flags.writeable = False
    return PosthocMatrix(names, tuple(float(x) for x in m), sig, q, q_crit, alpha)


def cluster_groups(posthoc: PosthocMatrix) -> SystemGroups:
    """Maximal runs of mutually non-significant systems in descending-mean order.

    Runs may overlap (a system can belong to two adjacent groups), as in a
    compact letter display. Every system belongs to at least one group.
    """
    k = len(posthoc.systems)
    if k == 0:
        return SystemGroups((), ())
    order = sorted(range(k), key=lambda i: -posthoc.means[i])
    sig = posthoc.significant

    def fits(start: int, stop: int) -> bool:
        # adding order[stop] to the run order[start:stop]
        new = order[stop]
        return not any(sig[new, order[t]] for t in range(start, stop))

    runs = []
    end = 0
    for start in range(k):
        end = max(end, start)
        while end + 1 < k and fits(start, end + 1):
            end += 1
        if not runs or end > runs[-1][1]:
            runs.append((start, end))
    groups = []
    for start, stop in runs:
        members = tuple(posthoc.systems[order[t]] for t in range(start, stop + 1))
        mean = float(np.mean([posthoc.means[order[t]] for t in range(start, stop + 1)]))
        groups.append((members, mean))
    groups.sort(key=lambda g: -g[1])
    return SystemGroups(tuple(g for g, _ in groups), tuple(m for _, m in groups))
