"""Per-seed rank scoring of strategies, one-way ANOVA and Tukey HSD.

The F tail uses a continued-fraction regularized incomplete beta and the
studentized-range tail is integrated numerically, so scipy stays available as
an independent cross-check rather than the implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .harness import RunRecord, fraction_solved
from .initialization import Strategy

TABLE_ORDER = [Strategy.OBLESA.value, Strategy.OBL.value, Strategy.RANDOM.value]


def rank_scores(fractions: Mapping[str, float], higher_better: bool = True) -> dict[str, float]:
    """Best strategy gets ``len(fractions)`` points, worst gets 1; ties share
    the average of the points they span."""
    if len(fractions) < 2:
        raise ValueError("need at least two strategies")
    names = list(fractions)
    values = np.array([fractions[n] for n in names], dtype=float)
    if np.isnan(values).any():
        raise ValueError("NaN fraction")
    ranks = rankdata(values if higher_better else -values, method="average")
    return {n: float(r) for n, r in zip(names, ranks)}


@dataclass
class ScoreTable:
    optimizer: str
    dimension: int
    sums: dict[str, float]
    samples: dict[str, list[float]]
    seeds: list[int] = field(default_factory=list)

    @property
    def total(self) -> float:
        return sum(self.sums.values())


def _ordered(names) -> list[str]:
    known = [s for s in TABLE_ORDER if s in names]
    return known + sorted(set(names) - set(known))


def score_table(
    records: Sequence[RunRecord],
    optimizer: str,
    dimension: int,
    strategies: Optional[Sequence[str]] = None,
) -> ScoreTable:
    rows = [r for r in records if r.optimizer == optimizer and r.dimension == dimension]
    if not rows:
        raise ValueError(f"no records for {optimizer} {dimension}D")
    strategies = _ordered(strategies or {r.strategy for r in rows})
    frac = fraction_solved(rows, ("seed", "strategy"))
    seeds = sorted({seed for seed, _ in frac})
    samples = {s: [] for s in strategies}
    for seed in seeds:
        missing = [s for s in strategies if (seed, s) not in frac]
        if missing:
            raise ValueError(f"seed {seed} has no records for {missing} ({optimizer} {dimension}D)")
        pts = rank_scores({s: frac[(seed, s)] for s in strategies})
        for s in strategies:
            samples[s].append(pts[s])
    return ScoreTable(optimizer, dimension, {s: float(sum(v)) for s, v in samples.items()}, samples, seeds)


def _betacf(a: float, b: float, x: float, tol: float = 1e-15, max_iter: int = 10_000) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        step = d * c
        h *= step
        if abs(step - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f: float, df1: float, df2: float) -> float:
    """Upper tail of the F distribution."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return betainc_regularized(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    p_value: float
    df_between: int
    df_within: int


def _groups(samples: Mapping[str, Sequence[float]]) -> list[np.ndarray]:
    groups = [np.asarray(v, dtype=float) for v in samples.values()]
    if len(groups) < 2 or any(g.size < 2 for g in groups):
        raise ValueError("need at least two groups with at least two observations each")
    return groups


def _within(groups):
    ssw = sum(float(np.sum((g - g.mean()) ** 2)) for g in groups)
    dfw = sum(g.size for g in groups) - len(groups)
    return ssw, dfw


def anova_oneway(samples: Mapping[str, Sequence[float]]) -> AnovaResult:
    groups = _groups(samples)
    grand = np.concatenate(groups).mean()
    ssb = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ssw, dfw = _within(groups)
    dfb = len(groups) - 1
    scale = max(1.0, float(np.max(np.abs(np.concatenate(groups)))))
    if ssw <= (1e-13 * scale) ** 2:
        if ssb <= (1e-13 * scale) ** 2:
            return AnovaResult(0.0, 1.0, dfb, dfw)
        return AnovaResult(math.inf, 0.0, dfb, dfw)
    f = (ssb / dfb) / (ssw / dfw)
    return AnovaResult(float(f), float(min(1.0, max(0.0, f_sf(f, dfb, dfw)))), dfb, dfw)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(160)


def _gauss(lo, hi):
    """Legendre nodes/weights mapped onto [lo, hi] (broadcasts over arrays)."""
    lo, hi = np.asarray(lo, dtype=float)[..., None], np.asarray(hi, dtype=float)[..., None]
    half = 0.5 * (hi - lo)
    return half * _GL_X + (hi + lo) * 0.5, half * _GL_W


def _range_sf(w: np.ndarray, k: int) -> np.ndarray:
    """P(range of k iid standard normals > w), vectorized over ``w >= 0``.

    Integrates ``k * phi(z) * (Phi(z)^(k-1) - (Phi(z) - Phi(z-w))^(k-1))``,
    split at ``z = w/2`` where the integrand peaks.
    """
    w = np.asarray(w, dtype=float)
    total = np.zeros_like(w)
    for lo, hi in ((-12.0 + 0 * w, 0.5 * w), (0.5 * w, 12.0 + w)):
        z, wt = _gauss(lo, hi)
        phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        cdf = special.ndtr(z)
        inner = cdf ** (k - 1) - (cdf - special.ndtr(z - w[..., None])) ** (k - 1)
        total += np.sum(wt * phi * inner, axis=-1)
    return k * total


def studentized_range_sf(q: float, k: int, df: float) -> float:
    """Upper tail of the studentized range with ``k`` means and ``df`` degrees of freedom.

    Averages the normal-range tail at ``q * s`` over ``s = chi_df / sqrt(df)``.
    """
    if q <= 0:
        return 1.0
    if math.isinf(q):
        return 0.0
    nu = float(df)
    log_c = 0.5 * nu * math.log(nu) - math.lgamma(0.5 * nu) - (0.5 * nu - 1.0) * math.log(2.0)
    lo = math.sqrt(special.chdtri(nu, 1.0 - 1e-18) / nu)
    hi = math.sqrt(special.chdtri(nu, 1e-18) / nu)
    mode = math.sqrt(max(nu - 1.0, 0.0) / nu)
    cuts = sorted({lo, max(lo, min(mode, hi)), hi})
    val = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        s, wt = _gauss(a, b)
        dens = np.exp(log_c + (nu - 1.0) * np.log(s) - 0.5 * nu * s * s)
        val += float(np.sum(wt * dens * _range_sf(q * s, k)))
    return min(1.0, max(0.0, val))


def posthoc_pairwise(samples: Mapping[str, Sequence[float]], focus: str) -> dict[tuple[str, str], float]:
    """Tukey HSD (Tukey-Kramer for unequal sizes) p-values for ``focus`` vs every other group."""
    if focus not in samples:
        raise KeyError(focus)
    groups = dict(zip(samples, _groups(samples)))
    ssw, dfw = _within(list(groups.values()))
    mse = ssw / dfw
    k = len(groups)
    scale = max(1.0, max(float(np.max(np.abs(g))) for g in groups.values()))
    out = {}
    a = groups[focus]
    for name, b in groups.items():
        if name == focus:
            continue
        diff = abs(a.mean() - b.mean())
        if mse <= (1e-13 * scale) ** 2:
            p = 1.0 if diff <= 1e-13 * scale else 0.0
        else:
            q = diff / math.sqrt(0.5 * mse * (1.0 / a.size + 1.0 / b.size))
            p = studentized_range_sf(q, k, dfw)
        out[(focus, name)] = p
    return out


@dataclass
class StatsRow:
    table: ScoreTable
    anova: AnovaResult
    posthoc: dict[tuple[str, str], float]


def analyze(records: Sequence[RunRecord], focus: str = Strategy.OBLESA.value) -> dict[str, list[StatsRow]]:
    """Per optimizer, one row per dimension (ascending)."""
    out: dict[str, list[StatsRow]] = {}
    for opt in sorted({r.optimizer for r in records}):
        rows = []
        for dim in sorted({r.dimension for r in records if r.optimizer == opt}):
            t = score_table(records, opt, dim)
            rows.append(StatsRow(t, anova_oneway(t.samples), posthoc_pairwise(t.samples, focus)))
        out[opt] = rows
    return out


def format_p(p: float) -> str:
    if p < 1e-4:
        return "<0.0001"
    if p == 1.0:
        return "1"
    return f"{p:.3f}"


def _fmt_score(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.1f}"


def format_table(optimizer: str, rows: Sequence[StatsRow]) -> str:
    """Aligned text with the strategy score rows, the ANOVA p-value row and
    the post-hoc rows, one column per dimension."""
    dims = [f"{r.table.dimension}D" for r in rows]
    strategies = list(rows[0].table.sums) if rows else []
    focus = next(iter(rows[0].posthoc))[0] if rows else ""
    body = [["Strategy", *dims]]
    for s in strategies:
        body.append([s.upper(), *(_fmt_score(r.table.sums[s]) for r in rows)])
    body.append(["p-value", *(format_p(r.anova.p_value) for r in rows)])
    post = [["post-hoc", *dims]]
    for other in strategies:
        if other == focus:
            continue
        post.append([f"{focus.upper()}-{other.upper()}", *(format_p(r.posthoc[(focus, other)]) for r in rows)])
    width = max(len(c) for line in body + post for c in line) + 2
    render = lambda block: "\n".join("".join(c.ljust(width) for c in line).rstrip() for line in block)
    return f"[{optimizer.upper()}]\n{render(body)}\n\n{render(post)}\n"


def stats_csv(results: Mapping[str, Sequence[StatsRow]]) -> str:
    lines = ["optimizer,dim,kind,name,value"]
    for opt, rows in results.items():
        for r in rows:
            d = r.table.dimension
            for s, v in r.table.sums.items():
                lines.append(f"{opt},{d},score,{s},{v!r}")
            lines.append(f"{opt},{d},anova_f,,{r.anova.f_statistic!r}")
            lines.append(f"{opt},{d},anova_p,,{r.anova.p_value!r}")
            for (a, b), p in r.posthoc.items():
                lines.append(f"{opt},{d},posthoc_p,{a}-{b},{p!r}")
    return "\n".join(lines) + "\n"
