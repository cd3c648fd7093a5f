"""Orchestration of generate / evaluate / analyze / report.

Each ``cmd_*`` function takes plain arguments, writes its artifacts and
returns their location; the CLI layer only maps flags onto these calls.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from scenebench.annotations import AnnotationTrack, EventAnnotation, parse_annotations, write_annotations
from scenebench.metrics import MetricConfig, evaluate_corpus, read_results, write_results
from scenebench.stats.anova import AnovaEffect, AnovaResult, mixed_anova, rm_anova_1w, rm_anova_2w
from scenebench.stats.posthoc import PosthocMatrix, SystemGroups, cluster_groups, tukey_kramer
from scenebench.synth import AssetPool, derive_seed, generate_dataset, plan_dataset, read_manifest

log = logging.getLogger(__name__)


class IncompleteGridError(ValueError):
    """The results table does not cover the factor grid for every system."""


# ---------------------------------------------------------------- generate

def cmd_generate(assets, out, split: str = "test", seed: int = 0, jobs: int = 1):
    pool = AssetPool.from_directory(assets)
    plan = plan_dataset(split, seed)
    summary = generate_dataset(plan, pool, out, jobs=jobs)
    clipped = {sid: c for sid, c in summary.clip_counts.items() if c}
    print(f"generated {summary.n_scenes} scenes ({split}), {summary.total_minutes:.1f} minutes of audio")
    if clipped:
        print(f"warning: {sum(clipped.values())} clipped samples in {len(clipped)} scenes")
    print(f"manifest: {summary.manifest_path}")
    return summary


# ---------------------------------------------------------------- detectors

def echo_detector(manifest_path, out, jitter: float = 0.0, deletion: float = 0.0, shift: float = 0.0,
                  seed: int = 0) -> Path:
    """Write a synthetic system output derived from the ground truth.

    Every reference event is dropped with probability ``deletion``; kept
    events are moved by ``shift`` plus a uniform offset in
    [-jitter, +jitter] (duration preserved, onsets floored at 0).
    """
    manifest_path = Path(manifest_path)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for rec in read_manifest(manifest_path):
        ref = parse_annotations(manifest_path.parent / rec["gt_path"], rec["scene_id"])
        rng = np.random.default_rng(derive_seed(seed, "echo", rec["scene_id"]))
        events = []
        for ev in ref.events:
            drop = rng.random() < deletion
            delta = shift + (rng.uniform(-jitter, jitter) if jitter > 0 else 0.0)
            if drop:
                continue
            onset = max(ev.onset + delta, 0.0)
            events.append(EventAnnotation(onset, onset + (ev.offset - ev.onset), ev.label))
        write_annotations(AnnotationTrack(rec["scene_id"], tuple(events)), out / f"{rec['scene_id']}.txt")
    return out


# ---------------------------------------------------------------- evaluate

def cmd_evaluate(manifest, est_dirs: Sequence, out, tolerance: float = 0.2,
                 policy: str = "exclude_class", concat: bool = False) -> Path:
    manifest = Path(manifest)
    records = read_manifest(manifest)
    for d in est_dirs:
        if not Path(d).is_dir():
            raise FileNotFoundError(f"estimate directory not found: {d}")
    rows = evaluate_corpus(records, manifest.parent, est_dirs, MetricConfig(tolerance, policy), concat=concat)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(rows, out)
    print(f"scored {len(est_dirs)} system(s) x {len(records)} scenes -> {out}")
    return out


# ---------------------------------------------------------------- analyze

@dataclass
class ScoreGrid:
    """Per-scene scores pivoted to scenes x systems."""

    systems: list[str]
    scenes: list[dict]
    values: np.ndarray

    @classmethod
    def from_rows(cls, rows: Iterable[dict]) -> "ScoreGrid":
        rows = list(rows)
        if not rows:
            raise IncompleteGridError("results table is empty")
        systems = sorted({r["system"] for r in rows})
        meta: dict[str, dict] = {}
        cells: dict[tuple[str, str], float] = {}
        for r in rows:
            key = (r["scene_id"], r["system"])
            if key in cells:
                raise ValueError(f"duplicate result for scene {key[0]!r}, system {key[1]!r}")
            cells[key] = float(r["f_cweb"])
            coords = {k: r[k] for k in ("polyphonic", "ebr_db", "nec", "replication")}
            if meta.setdefault(r["scene_id"], coords) != coords:
                raise ValueError(f"inconsistent condition coordinates for scene {r['scene_id']!r}")
        scene_ids = sorted(meta)
        missing = [(s, sy) for s in scene_ids for sy in systems if (s, sy) not in cells]
        if missing:
            listed = ", ".join(f"{sy}/{s}" for s, sy in missing[:5])
            more = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
            raise IncompleteGridError(f"missing cells: {listed}{more}")
        values = np.array([[cells[(s, sy)] for sy in systems] for s in scene_ids])
        scenes = [{"scene_id": s, **meta[s]} for s in scene_ids]
        return cls(systems, scenes, values)

    def subset(self, pred) -> "ScoreGrid":
        idx = [i for i, s in enumerate(self.scenes) if pred(s)]
        return ScoreGrid(self.systems, [self.scenes[i] for i in idx], self.values[idx])


@dataclass
class Analysis:
    name: str
    anova: AnovaResult | None = None
    posthoc: dict[str, PosthocMatrix] = field(default_factory=dict)
    groups: dict[str, SystemGroups] = field(default_factory=dict)
    contrasts: list[dict] = field(default_factory=list)
    skipped: str | None = None


@dataclass
class AnalysisReport:
    analyses: list[Analysis]
    condition_means: list[dict]
    alpha: float

    def __getitem__(self, name: str) -> Analysis:
        for a in self.analyses:
            if a.name == name:
                return a
        raise KeyError(name)


def _tukey_on_grid(values: np.ndarray, systems, mse, df_err, alpha) -> tuple[PosthocMatrix, SystemGroups]:
    ph = tukey_kramer(values.mean(axis=0), [values.shape[0]] * values.shape[1], mse, df_err, alpha, systems)
    return ph, cluster_groups(ph)


def _one_within(name: str, grid: ScoreGrid, alpha: float) -> Analysis:
    n, k = grid.values.shape
    if n < 2 or k < 2:
        return Analysis(name, skipped=f"need >= 2 scenes and >= 2 systems, have {n} x {k}")
    res = rm_anova_1w(grid.values, name="system", alpha=alpha)
    a = Analysis(name, anova=res)
    eff = res["system"]
    if eff.ms_error > 0:
        a.posthoc["system"], a.groups["system"] = _tukey_on_grid(grid.values, grid.systems, eff.ms_error,
                                                                 eff.df2, alpha)
    return a


def _mixed(name: str, grid: ScoreGrid, between: str, alpha: float) -> Analysis:
    labels = [s[between] for s in grid.scenes]
    counts = defaultdict(int)
    for lab in labels:
        counts[lab] += 1
    if len(counts) < 2:
        return Analysis(name, skipped=f"only one {between} level present")
    if min(counts.values()) < 2:
        return Analysis(name, skipped=f"every {between} group needs >= 2 scenes, sizes {dict(sorted(counts.items()))}")
    if len(grid.systems) < 2:
        return Analysis(name, skipped="need >= 2 systems")
    res = mixed_anova(grid.values, labels, within_name="system", between_name=between, alpha=alpha)
    a = Analysis(name, anova=res)
    eff = res["system"]
    if eff.ms_error > 0:
        a.posthoc["system"], a.groups["system"] = _tukey_on_grid(grid.values, grid.systems, eff.ms_error,
                                                                 eff.df2, alpha)
    return a


def _scene_type(grid: ScoreGrid, alpha: float) -> list[Analysis]:
    a = _mixed("scene_type", grid, "polyphonic", alpha)
    out = [a]
    if a.anova is not None:
        err = a.anova["system x polyphonic"]
        mono = np.array([not s["polyphonic"] for s in grid.scenes])
        if err.ms_error > 0:
            for j, system in enumerate(grid.systems):
                m_mono = float(grid.values[mono, j].mean())
                m_poly = float(grid.values[~mono, j].mean())
                ph = tukey_kramer([m_mono, m_poly], [int(mono.sum()), int((~mono).sum())], err.ms_error,
                                  err.df2, alpha, ("mono", "poly"))
                a.contrasts.append({
                    "system": system, "mean_mono": m_mono, "mean_poly": m_poly,
                    "q": float(ph.q_stat[0, 1]), "q_crit": ph.q_crit, "significant": bool(ph.significant[0, 1]),
                })
    for poly in (False, True):
        half = grid.subset(lambda s, p=poly: s["polyphonic"] == p)
        name = f"global_{'poly' if poly else 'mono'}"
        out.append(_one_within(name, half, alpha) if half.scenes else Analysis(name, skipped="no scenes"))
    return out


def _ebr(grid: ScoreGrid, poly: bool, alpha: float) -> Analysis:
    name = f"ebr_{'poly' if poly else 'mono'}"
    half = grid.subset(lambda s: s["polyphonic"] == poly)
    levels = sorted({s["ebr_db"] for s in half.scenes})
    if len(levels) < 2:
        return Analysis(name, skipped="fewer than 2 EBR levels")
    by_subject: dict[tuple, dict[int, int]] = defaultdict(dict)
    for i, s in enumerate(half.scenes):
        by_subject[(s["nec"], s["replication"])][s["ebr_db"]] = i
    subjects = sorted(k for k, v in by_subject.items() if set(v) == set(levels))
    incomplete = sorted(set(by_subject) - set(subjects))
    if incomplete:
        raise IncompleteGridError(f"{name}: subjects (nec, replication) {incomplete} miss some EBR levels")
    k, b = len(half.systems), len(levels)
    if len(subjects) < 2 or k < 2:
        return Analysis(name, skipped=f"need >= 2 subjects and >= 2 systems, have {len(subjects)} x {k}")
    cube = np.empty((len(subjects), k, b))
    for si, subj in enumerate(subjects):
        for li, lev in enumerate(levels):
            cube[si, :, li] = half.values[by_subject[subj][lev]]
    res = rm_anova_2w(cube, k, b, names=("system", "ebr_db"), alpha=alpha)
    a = Analysis(name, anova=res)
    sys_eff = res["system"]
    if sys_eff.ms_error > 0:
        ph = tukey_kramer(cube.mean(axis=(0, 2)), [len(subjects) * b] * k, sys_eff.ms_error, sys_eff.df2,
                          alpha, half.systems)
        a.posthoc["system"], a.groups["system"] = ph, cluster_groups(ph)
    inter = res["system x ebr_db"]
    if inter.ms_error > 0:
        for li, lev in enumerate(levels):
            ph = tukey_kramer(cube[:, :, li].mean(axis=0), [len(subjects)] * k, inter.ms_error, inter.df2,
                              alpha, half.systems)
            a.posthoc[f"system@ebr{lev:+d}"] = ph
            a.groups[f"system@ebr{lev:+d}"] = cluster_groups(ph)
    return a


def _nec(grid: ScoreGrid, poly: bool, alpha: float) -> Analysis:
    name = f"nec_{'poly' if poly else 'mono'}"
    half = grid.subset(lambda s: s["polyphonic"] == poly)
    if not half.scenes:
        return Analysis(name, skipped="no scenes")
    return _mixed(name, half, "nec", alpha)


def condition_means(grid: ScoreGrid) -> list[dict]:
    cells = defaultdict(list)
    for i, s in enumerate(grid.scenes):
        cells[(s["polyphonic"], s["ebr_db"], s["nec"])].append(i)
    out = []
    for j, system in enumerate(grid.systems):
        for (poly, ebr, nec), idx in sorted(cells.items()):
            out.append({"system": system, "polyphonic": poly, "ebr_db": ebr, "nec": nec,
                        "n": len(idx), "mean_f_cweb": float(grid.values[idx, j].mean())})
    return out


def analyze_results(rows: Iterable[dict], alpha: float = 0.05) -> AnalysisReport:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    grid = ScoreGrid.from_rows(rows)
    analyses = [_one_within("global", grid, alpha)]
    analyses += _scene_type(grid, alpha)
    for poly in (False, True):
        analyses.append(_ebr(grid, poly, alpha))
    for poly in (False, True):
        analyses.append(_nec(grid, poly, alpha))
    return AnalysisReport(analyses, condition_means(grid), alpha)


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x)
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _effect_row(analysis: str, eff: AnovaEffect) -> dict:
    sph = eff.sphericity
    return {
        "analysis": analysis, "effect": eff.name, "F": eff.F, "df1": eff.df1, "df2": eff.df2, "p": eff.p,
        "W": sph.W if sph else None, "mauchly_p": sph.p if sph else None,
        "epsilon": eff.epsilon_gg if eff.within else None, "p_gg": eff.p_gg,
        "p_reported": eff.p_reported, "corrected": eff.corrected, "degenerate": eff.degenerate,
    }


ANOVA_FIELDS = ("analysis", "effect", "F", "df1", "df2", "p", "W", "mauchly_p", "epsilon", "p_gg",
                "p_reported", "corrected", "degenerate")


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(f)) for f in fields])


def write_report(report: AnalysisReport, rows: Sequence[dict], out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    effect_rows, posthoc_rows, group_rows, contrast_rows = [], [], [], []
    text = [f"alpha = {report.alpha}", ""]
    for a in report.analyses:
        text.append(f"== {a.name} ==")
        if a.skipped:
            text.append(f"  skipped: {a.skipped}")
            text.append("")
            continue
        for eff in a.anova.effects:
            effect_rows.append(_effect_row(a.name, eff))
            line = f"  {eff.name}: F[{eff.df1:g},{eff.df2:g}] = {eff.F:.4g}, p = {eff.p:.4g}"
            if eff.within:
                line += f", eps = {eff.epsilon_gg:.4f}, p_gg = {eff.p_gg:.4g}"
                if eff.corrected:
                    line += " (corrected)"
            if eff.degenerate:
                line += " [degenerate: zero error variance]"
            text.append(line)
        for key, ph in a.posthoc.items():
            for sa, sb, q, sig in ph.pairs():
                posthoc_rows.append({"analysis": a.name, "comparison": key, "system_a": sa, "system_b": sb,
                                     "q": q, "q_crit": ph.q_crit, "significant": sig})
        for key, grp in a.groups.items():
            text.append(f"  groups ({key}):")
            for gi, (members, mean) in enumerate(zip(grp.groups, grp.group_means), start=1):
                group_rows.append({"analysis": a.name, "comparison": key, "group": gi,
                                   "systems": ";".join(members), "mean": mean})
                text.append(f"    {gi}. {', '.join(members)} (mean {mean:.4f})")
        for c in a.contrasts:
            contrast_rows.append({"analysis": a.name, **c})
        text.append("")

    _write_csv(out / "anova.csv", ANOVA_FIELDS, effect_rows)
    _write_csv(out / "posthoc.csv", ("analysis", "comparison", "system_a", "system_b", "q", "q_crit",
                                     "significant"), posthoc_rows)
    _write_csv(out / "groups.csv", ("analysis", "comparison", "group", "systems", "mean"), group_rows)
    _write_csv(out / "scene_type_contrasts.csv", ("analysis", "system", "mean_mono", "mean_poly", "q", "q_crit",
                                                  "significant"), contrast_rows)
    _write_csv(out / "condition_means.csv", ("system", "polyphonic", "ebr_db", "nec", "n", "mean_f_cweb"),
               report.condition_means)
    (out / "anova.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
    (out / "skipped.json").write_text(
        json.dumps({a.name: a.skipped for a in report.analyses if a.skipped}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    write_results(list(rows), out / "scores.csv")
    return out


def cmd_analyze(results, out, alpha: float = 0.05) -> Path:
    rows = read_results(results)
    report = analyze_results(rows, alpha)
    path = write_report(report, rows, out)
    done = [a.name for a in report.analyses if not a.skipped]
    print(f"analyses run: {', '.join(done)}; outputs in {path}")
    return path


# ---------------------------------------------------------------- report

def _group_stats(rows, keys) -> list[dict]:
    cells = defaultdict(list)
    for r in rows:
        cells[tuple(r[k] for k in keys)].append(float(r["f_cweb"]))
    out = []
    for key in sorted(cells):
        vals = np.array(cells[key])
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out.append({**dict(zip(keys, key)), "n": int(vals.size), "mean": float(vals.mean()), "std": sd})
    return out


FIGURES = {
    "fig_global.csv": ("system",),
    "fig_scene_type.csv": ("system", "polyphonic"),
    "fig_ebr.csv": ("system", "polyphonic", "ebr_db"),
    "fig_nec.csv": ("system", "polyphonic", "nec"),
}


def cmd_report(analysis, out) -> Path:
    analysis = Path(analysis)
    scores = analysis / "scores.csv"
    if not scores.is_file():
        raise FileNotFoundError(f"no scores.csv in analysis directory {analysis}")
    rows = read_results(scores)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for fname, keys in FIGURES.items():
        _write_csv(out / fname, (*keys, "n", "mean", "std"), _group_stats(rows, keys))
    print(f"wrote {len(FIGURES)} figure tables to {out}")
    return out
