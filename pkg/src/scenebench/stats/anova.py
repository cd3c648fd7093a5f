"""Repeated-measures ANOVA in three layouts with sphericity handling.

Layouts
-------
``rm_anova_1w``
    n subjects x k conditions, one within-subject factor.
``mixed_anova``
    one within-subject factor plus one between-subject grouping.
``rm_anova_2w``
    two crossed within-subject factors.

For every within-subject effect the contrast covariance is tested with
Mauchly's W and the Greenhouse-Geisser epsilon is computed. The reported
p-value switches to the corrected one whenever sphericity is rejected at
``alpha`` or, when Mauchly's test cannot be run (too few subjects), if
epsilon falls below 0.75.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from scenebench.stats.distributions import chi2_sf, f_sf

GG_FALLBACK_EPSILON = 0.75
_REL_ZERO = 1e-12
# rounding noise in a sum of squares of centred data is ~ (1e-16 * |y|)^2 per cell
_ROUNDING_ZERO = 1e-24


class DegenerateCovarianceError(ValueError):
    pass


@dataclass(frozen=True)
class ObservationTable:
    """Complete score matrix: rows are subjects, columns within-factor cells."""

    values: np.ndarray
    row_meta: tuple[dict, ...] = ()
    column_meta: tuple[dict, ...] = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("observation table must be 2-D")
        if not np.all(np.isfinite(v)):
            raise ValueError("observation table has missing or non-finite cells")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.row_meta and len(self.row_meta) != v.shape[0]:
            raise ValueError("row_meta length does not match table rows")
        if self.column_meta and len(self.column_meta) != v.shape[1]:
            raise ValueError("column_meta length does not match table columns")

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class SphericityResult:
    W: float
    chi2: float
    df: int
    p: float
    applicable: bool
    singular: bool = False


@dataclass(frozen=True)
class AnovaEffect:
    name: str
    F: float
    df1: float
    df2: float
    p: float
    ss: float
    ss_error: float
    epsilon_gg: float = 1.0
    p_gg: float | None = None
    sphericity: SphericityResult | None = None
    corrected: bool = False
    degenerate: bool = False

    @property
    def ms_error(self) -> float:
        return self.ss_error / self.df2

    @property
    def p_reported(self) -> float:
        return self.p_gg if self.corrected and self.p_gg is not None else self.p

    @property
    def within(self) -> bool:
        return self.p_gg is not None


@dataclass(frozen=True)
class AnovaResult:
    layout: str
    effects: tuple[AnovaEffect, ...]
    ss: dict = field(default_factory=dict)
    ss_total: float = 0.0

    def __getitem__(self, name: str) -> AnovaEffect:
        for eff in self.effects:
            if eff.name == name:
                return eff
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self.effects]


def _values(table) -> np.ndarray:
    if isinstance(table, ObservationTable):
        return table.values
    v = np.asarray(table, dtype=np.float64)
    if v.ndim != 2 or not np.all(np.isfinite(v)):
        raise ValueError("expected a complete 2-D table of finite values")
    return v


def orthonormal_contrasts(k: int) -> np.ndarray:
    """(k-1) x k normalized Helmert contrasts: orthonormal rows, each orthogonal to 1."""
    if k < 2:
        raise ValueError("need at least 2 levels")
    m = np.zeros((k - 1, k))
    for i in range(1, k):
        m[i - 1, :i] = 1.0
        m[i - 1, i] = -float(i)
        m[i - 1] /= math.sqrt(i * (i + 1))
    return m


def _contrast_cov(scores: np.ndarray, groups: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """Covariance of contrast scores (pooled within groups) and its dof."""
    if groups is None:
        centered = scores - scores.mean(axis=0)
        dof = scores.shape[0] - 1
    else:
        centered = np.empty_like(scores)
        labels = np.unique(groups)
        for g in labels:
            idx = groups == g
            centered[idx] = scores[idx] - scores[idx].mean(axis=0)
        dof = scores.shape[0] - len(labels)
    if dof <= 0:
        raise DegenerateCovarianceError("not enough subjects to estimate a covariance")
    return centered.T @ centered / dof, dof


def epsilon_from_cov(t: np.ndarray) -> float:
    """Greenhouse-Geisser epsilon of a contrast covariance matrix."""
    t = np.atleast_2d(np.asarray(t, dtype=np.float64))
    p = t.shape[0]
    if p == 1:
        return 1.0
    lam = np.linalg.eigvalsh(0.5 * (t + t.T))
    lam = np.clip(lam, 0.0, None)
    total = float(lam.sum())
    if not total > 0:
        raise DegenerateCovarianceError("contrast covariance is zero")
    eps = total * total / (p * float(np.dot(lam, lam)))
    return min(max(eps, 1.0 / p), 1.0)


def sphericity_from_cov(t: np.ndarray, dof: int) -> SphericityResult:
    """Mauchly's test on a p x p contrast covariance estimated with ``dof`` dof."""
    t = np.atleast_2d(np.asarray(t, dtype=np.float64))
    p = t.shape[0]
    df = p * (p + 1) // 2 - 1
    if p < 2 or dof <= p:
        return SphericityResult(W=1.0 if p < 2 else math.nan, chi2=0.0 if p < 2 else math.nan,
                                df=df, p=1.0 if p < 2 else math.nan, applicable=False)
    lam = np.linalg.eigvalsh(0.5 * (t + t.T))
    mean_lam = float(lam.mean())
    if not mean_lam > 0 or lam.min() <= _REL_ZERO * mean_lam:
        return SphericityResult(W=0.0, chi2=math.inf, df=df, p=0.0, applicable=True, singular=True)
    log_w = float(np.sum(np.log(lam))) - p * math.log(mean_lam)
    w = min(math.exp(log_w), 1.0)
    d = 1.0 - (2 * p * p + p + 2) / (6.0 * p * dof)
    chi2 = max(-dof * d * log_w, 0.0)
    return SphericityResult(W=w, chi2=chi2, df=df, p=chi2_sf(chi2, df) if chi2 > 0 else 1.0, applicable=True)


def _contrasts_1w(values: np.ndarray) -> np.ndarray:
    return values @ orthonormal_contrasts(values.shape[1]).T


def mauchly_test(table) -> SphericityResult:
    v = _values(table)
    if v.shape[1] < 2:
        raise ValueError("need at least 2 conditions")
    if v.shape[1] == 2:
        return SphericityResult(W=1.0, chi2=0.0, df=0, p=1.0, applicable=False)
    t, dof = _contrast_cov(_contrasts_1w(v))
    return sphericity_from_cov(t, dof)


def gg_epsilon(table) -> float:
    v = _values(table)
    if v.shape[1] == 2:
        return 1.0
    t, _ = _contrast_cov(_contrasts_1w(v))
    return epsilon_from_cov(t)


def use_correction(sph: SphericityResult, eps: float, alpha: float = 0.05) -> bool:
    if sph.applicable:
        return sph.p < alpha
    return sph.df > 0 and eps < GG_FALLBACK_EPSILON


def _within_effect(name, ss, df1, ss_err, df2, tiny, contrast_scores, groups, alpha) -> AnovaEffect:
    try:
        t, dof = _contrast_cov(contrast_scores, groups)
        eps = epsilon_from_cov(t)
        sph = sphericity_from_cov(t, dof)
    except DegenerateCovarianceError:
        dim = contrast_scores.shape[1]
        eps = 1.0
        sph = SphericityResult(math.nan, math.nan, dim * (dim + 1) // 2 - 1, math.nan, applicable=False, singular=True)
    base = _effect(name, ss, df1, ss_err, df2, tiny)
    if base.degenerate or base.F == 0.0:
        p_gg = base.p
    else:
        p_gg = f_sf(base.F, eps * df1, eps * df2)
    return AnovaEffect(
        name=name, F=base.F, df1=df1, df2=df2, p=base.p, ss=ss, ss_error=ss_err,
        epsilon_gg=eps, p_gg=p_gg, sphericity=sph,
        corrected=use_correction(sph, eps, alpha), degenerate=base.degenerate,
    )


def _zero_level(y: np.ndarray, ss_total: float) -> float:
    """Sums of squares at or below this are treated as exactly zero."""
    return max(_REL_ZERO * ss_total, _ROUNDING_ZERO * float(np.sum(y * y)), 1e-300)


def _effect(name, ss, df1, ss_err, df2, tiny) -> AnovaEffect:
    if ss <= tiny:
        return AnovaEffect(name, 0.0, df1, df2, 1.0, ss, ss_err)
    if ss_err <= tiny:
        return AnovaEffect(name, math.inf, df1, df2, 0.0, ss, ss_err, degenerate=True)
    f = (ss / df1) / (ss_err / df2)
    return AnovaEffect(name, float(f), df1, df2, f_sf(f, df1, df2), float(ss), float(ss_err))


def rm_anova_1w(table, name: str = "condition", alpha: float = 0.05) -> AnovaResult:
    """One-way repeated-measures ANOVA on an n x k table."""
    y = _values(table)
    n, k = y.shape
    if n < 2 or k < 2:
        raise ValueError(f"need at least 2 subjects and 2 conditions, got {n} x {k}")
    grand = y.mean()
    ss_total = float(np.sum((y - grand) ** 2))
    tiny = _zero_level(y, ss_total)
    ss_cond = float(n * np.sum((y.mean(axis=0) - grand) ** 2))
    ss_subj = float(k * np.sum((y.mean(axis=1) - grand) ** 2))
    resid = y - y.mean(axis=0)[None, :] - y.mean(axis=1)[:, None] + grand
    ss_err = float(np.sum(resid ** 2))
    eff = _within_effect(name, ss_cond, k - 1, ss_err, (k - 1) * (n - 1), tiny,
                         _contrasts_1w(y), None, alpha)
    return AnovaResult(
        layout="one-within",
        effects=(eff,),
        ss={name: ss_cond, "subjects": ss_subj, "error": ss_err},
        ss_total=ss_total,
    )


def mixed_anova(table, groups: Sequence, within_name: str = "condition", between_name: str = "group",
                alpha: float = 0.05) -> AnovaResult:
    """Split-plot ANOVA: k within-subject levels, subjects partitioned into groups.

    Within-subject effects are tested against the pooled subject x condition
    residual; the between effect against subjects within groups. Sphericity
    is assessed on the pooled within-group contrast covariance.
    """
    y = _values(table)
    n, k = y.shape
    groups = np.asarray(groups)
    if groups.shape != (n,):
        raise ValueError("groups must give one label per subject")
    labels = list(dict.fromkeys(groups.tolist()))
    g = len(labels)
    sizes = [int(np.sum(groups == lab)) for lab in labels]
    if any(s < 2 for s in sizes):
        raise ValueError(f"every group needs at least 2 subjects, got sizes {sizes}")
    if k < 2:
        raise ValueError("need at least 2 within-subject levels")

    grand = y.mean()
    subj_mean = y.mean(axis=1)
    cond_mean = y.mean(axis=0)
    ss_total = float(np.sum((y - grand) ** 2))
    tiny = _zero_level(y, ss_total)
    ss_group = ss_subj = ss_inter = ss_err = 0.0
    for lab, size in zip(labels, sizes):
        idx = groups == lab
        yg = y[idx]
        g_mean = yg.mean()
        cell = yg.mean(axis=0)
        ss_group += k * size * float(g_mean - grand) ** 2
        ss_subj += k * float(np.sum((subj_mean[idx] - g_mean) ** 2))
        ss_inter += size * float(np.sum((cell - g_mean - cond_mean + grand) ** 2))
        ss_err += float(np.sum((yg - subj_mean[idx][:, None] - cell[None, :] + g_mean) ** 2))
    ss_cond = float(n * np.sum((cond_mean - grand) ** 2))
    inter_name = f"{within_name} x {between_name}"

    df_err = (k - 1) * (n - g)
    scores = _contrasts_1w(y)
    within = _within_effect(within_name, ss_cond, k - 1, ss_err, df_err, tiny, scores, groups, alpha)
    if g > 1:
        inter = _within_effect(inter_name, ss_inter, (k - 1) * (g - 1), ss_err, df_err, tiny,
                               scores, groups, alpha)
        between = _effect(between_name, ss_group, g - 1, ss_subj, n - g, tiny)
        effects = (within, between, inter)
    else:
        effects = (within,)
    return AnovaResult(
        layout="within-between",
        effects=effects,
        ss={within_name: ss_cond, between_name: ss_group, "subjects within groups": ss_subj,
            inter_name: ss_inter, "error": ss_err},
        ss_total=ss_total,
    )


def rm_anova_2w(table, k: int, b: int, names: tuple[str, str] = ("A", "B"), alpha: float = 0.05) -> AnovaResult:
    """Two-way fully within-subject ANOVA.

    ``table`` is n x (k*b) with column ``a*b + j`` holding level ``a`` of the
    first factor and level ``j`` of the second. A 3-D array of shape
    (n, k, b) is also accepted.
    """
    y = np.asarray(table.values if isinstance(table, ObservationTable) else table, dtype=np.float64)
    if y.ndim == 2:
        if y.shape[1] != k * b:
            raise ValueError(f"table has {y.shape[1]} columns, expected {k}*{b}")
        y = y.reshape(y.shape[0], k, b)
    if y.shape[1:] != (k, b) or not np.all(np.isfinite(y)):
        raise ValueError("expected a complete n x k x b table")
    n = y.shape[0]
    if n < 2 or k < 2 or b < 2:
        raise ValueError("need n >= 2 subjects and at least 2 levels per factor")
    name_a, name_b = names
    name_ab = f"{name_a} x {name_b}"

    grand = y.mean()
    m_s = y.mean(axis=(1, 2))
    m_a = y.mean(axis=(0, 2))
    m_b = y.mean(axis=(0, 1))
    m_ab = y.mean(axis=0)
    m_as = y.mean(axis=2)  # n x k
    m_bs = y.mean(axis=1)  # n x b
    ss_total = float(np.sum((y - grand) ** 2))
    tiny = _zero_level(y, ss_total)
    ss_s = float(k * b * np.sum((m_s - grand) ** 2))
    ss_a = float(n * b * np.sum((m_a - grand) ** 2))
    ss_b = float(n * k * np.sum((m_b - grand) ** 2))
    ss_ab = float(n * np.sum((m_ab - m_a[:, None] - m_b[None, :] + grand) ** 2))
    ss_as = float(b * np.sum((m_as - m_a[None, :] - m_s[:, None] + grand) ** 2))
    ss_bs = float(k * np.sum((m_bs - m_b[None, :] - m_s[:, None] + grand) ** 2))
    resid = (y - m_ab[None] - m_as[:, :, None] - m_bs[:, None, :]
             + m_a[None, :, None] + m_b[None, None, :] + m_s[:, None, None] - grand)
    ss_abs = float(np.sum(resid ** 2))

    ca = orthonormal_contrasts(k)
    cb = orthonormal_contrasts(b)
    flat = y.reshape(n, k * b)
    score_a = flat @ np.kron(ca, np.ones((1, b)) / math.sqrt(b)).T
    score_b = flat @ np.kron(np.ones((1, k)) / math.sqrt(k), cb).T
    score_ab = flat @ np.kron(ca, cb).T

    eff_a = _within_effect(name_a, ss_a, k - 1, ss_as, (k - 1) * (n - 1), tiny, score_a, None, alpha)
    eff_b = _within_effect(name_b, ss_b, b - 1, ss_bs, (b - 1) * (n - 1), tiny, score_b, None, alpha)
    eff_ab = _within_effect(name_ab, ss_ab, (k - 1) * (b - 1), ss_abs, (k - 1) * (b - 1) * (n - 1),
                            tiny, score_ab, None, alpha)
    return AnovaResult(
        layout="two-within",
        effects=(eff_a, eff_b, eff_ab),
        ss={"subjects": ss_s, name_a: ss_a, f"{name_a} x subjects": ss_as, name_b: ss_b,
            f"{name_b} x subjects": ss_bs, name_ab: ss_ab, f"{name_ab} x subjects": ss_abs},
        ss_total=ss_total,
    )
