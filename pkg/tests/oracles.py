"""Independent reference implementations shared by the unit and acceptance tests."""

import itertools

import mpmath
import numpy as np


def exhaustive_max(refs, dets, tol):
    """Independent oracle: size of the largest valid one-to-one assignment, by enumerating subsets."""
    best = 0
    n, m = len(refs), len(dets)
    for size in range(min(n, m), 0, -1):
        for rs in itertools.combinations(range(n), size):
            for ds in itertools.permutations(range(m), size):
                if all(abs(refs[r] - dets[d]) <= tol + 1e-9 for r, d in zip(rs, ds)):
                    return size
    return best


def t_abs_cdf_oracle(t, d):
    """P(|T| <= t) for Student t with d dof by direct integration of the density."""
    mpmath.mp.dps = 30
    c = mpmath.gamma((d + 1) / mpmath.mpf(2)) / (mpmath.sqrt(d * mpmath.pi) * mpmath.gamma(d / mpmath.mpf(2)))
    dens = lambda x: c * (1 + x * x / d) ** (-(d + 1) / mpmath.mpf(2))
    return float(2 * mpmath.quad(dens, [0, t]))


def _indicators(levels):
    """One indicator column per distinct tuple in ``levels`` (rows x factors)."""
    keys = [tuple(r) for r in levels]
    uniq = sorted(set(keys))
    return np.array([[1.0 if key == u else 0.0 for u in uniq] for key in keys])


def _rss(y, blocks):
    x = np.column_stack([np.ones(len(y))] + blocks)
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    return float(np.sum((y - x @ beta) ** 2))


def ls_ss_two_within(cube):
    """Least-squares oracle: each term's SS is the RSS drop from adding it to its marginal terms."""
    n, k, b = cube.shape
    idx = np.array(list(itertools.product(range(n), range(k), range(b))))
    y = cube.reshape(-1)
    col = {"S": [0], "A": [1], "B": [2], "AxB": [1, 2], "AxS": [0, 1], "BxS": [0, 2]}
    design = {t: _indicators(idx[:, c]) for t, c in col.items()}
    margins = {"S": [], "A": [], "B": [], "AxB": ["A", "B"], "AxS": ["A", "S"], "BxS": ["B", "S"]}
    out = {}
    for term, base in margins.items():
        out[term] = _rss(y, [design[m] for m in base]) - _rss(y, [design[m] for m in base + [term]])
    full = _rss(y, list(design.values()))
    out["AxBxS"] = full
    return out
