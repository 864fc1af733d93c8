import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from oblesa.harness import RunRecord
from oblesa.stats import (
    analyze,
    anova_oneway,
    betainc_regularized,
    f_sf,
    format_p,
    format_table,
    posthoc_pairwise,
    rank_scores,
    score_table,
    stats_csv,
    studentized_range_sf,
)


def records_for(fractions_by_seed, optimizer="de", dim=2, n_specs=10):
    """Build records whose per-seed solved fractions match the given table."""
    out = []
    for seed, fracs in fractions_by_seed.items():
        for strategy, frac in fracs.items():
            k = round(frac * n_specs)
            for i in range(n_specs):
                out.append(RunRecord(strategy, optimizer, "sphere", i, dim, seed, i < k, 10, 0.0))
    return out


def random_fixture(rng):
    k = int(rng.integers(2, 5))
    sizes = rng.integers(2, 12, size=k) if rng.random() < 0.5 else np.full(k, int(rng.integers(2, 12)))
    return {f"g{i}": rng.normal(rng.normal(0, 1), rng.uniform(0.2, 3), size=n).tolist() for i, n in enumerate(sizes)}


def test_rank_scores_examples():
    assert rank_scores({"A": 0.5, "B": 0.3, "C": 0.2}) == {"A": 3, "B": 2, "C": 1}
    assert rank_scores({"A": 0.4, "B": 0.4, "C": 0.1}) == {"A": 2.5, "B": 2.5, "C": 1}
    assert rank_scores({"A": 0.2, "B": 0.2, "C": 0.2}) == {"A": 2, "B": 2, "C": 2}
    assert rank_scores({"A": 0.5, "B": 0.3}, higher_better=False) == {"A": 1, "B": 2}
    with pytest.raises(ValueError):
        rank_scores({"A": 0.5})
    with pytest.raises(ValueError):
        rank_scores({"A": math.nan, "B": 0.1})


fractions = st.lists(st.integers(0, 30), min_size=3, max_size=3).map(lambda xs: [x / 30 for x in xs])


@given(fractions)
def test_rank_scores_conserve_points(fs):
    pts = rank_scores(dict(zip("ABC", fs)))
    assert sum(pts.values()) == 6
    assert all(1 <= v <= 3 for v in pts.values())


@given(fractions, st.sampled_from([np.sqrt, np.exp, lambda x: x**3 + 2 * x, lambda x: np.log1p(x) * 7]))
def test_rank_scores_monotone_invariance(fs, g):
    a = rank_scores(dict(zip("ABC", fs)))
    b = rank_scores(dict(zip("ABC", [float(g(x)) for x in fs])))
    assert a == b


def test_score_table_oblesa_sweeps():
    table = {s: {"oblesa": 0.9, "obl": 0.5, "random": 0.2} for s in range(1, 11)}
    t = score_table(records_for(table), "de", 2)
    assert t.sums == {"oblesa": 30, "obl": 20, "random": 10}
    assert t.total == 60
    assert list(t.sums) == ["oblesa", "obl", "random"]
    assert all(s == [3.0] * 10 for s in [t.samples["oblesa"]])


@given(st.lists(st.tuples(st.integers(0, 10), st.integers(0, 10), st.integers(0, 10)), min_size=1, max_size=10))
def test_score_table_conservation(rows):
    table = {i + 1: {"oblesa": a / 10, "obl": b / 10, "random": c / 10} for i, (a, b, c) in enumerate(rows)}
    t = score_table(records_for(table), "de", 2)
    assert t.total == 6 * len(rows)
    for i in range(len(rows)):
        assert sum(t.samples[s][i] for s in t.samples) == 6


def test_score_table_missing_strategy():
    recs = records_for({1: {"oblesa": 0.5, "obl": 0.1, "random": 0.2}, 2: {"oblesa": 0.5, "obl": 0.1}})
    with pytest.raises(ValueError):
        score_table(recs, "de", 2)
    with pytest.raises(ValueError):
        score_table(recs, "egwo", 2)


def test_incomplete_beta_against_scipy():
    import scipy.special

    rng = np.random.default_rng(0)
    for _ in range(300):
        a, b = rng.uniform(0.1, 60, 2)
        x = rng.uniform()
        assert betainc_regularized(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x), rel=1e-12, abs=1e-300)
    assert betainc_regularized(2, 3, 0.0) == 0.0 and betainc_regularized(2, 3, 1.0) == 1.0
    for f, d1, d2 in [(0.5, 2, 6), (3.0, 2, 6), (12.0, 3, 40), (1e-3, 1, 1)]:
        assert f_sf(f, d1, d2) == pytest.approx(scipy.stats.f.sf(f, d1, d2), rel=1e-12)


def test_anova_trivial_and_hand_fixture():
    same = anova_oneway({"A": [1, 2, 3], "B": [1, 2, 3], "C": [1, 2, 3]})
    assert same.f_statistic == 0 and same.p_value == 1
    # [DERIVED] group sums of squares are 2 each, so SSB = 6, SSW = 6, F = (6/2)/(6/6)
    r = anova_oneway({"A": [1, 2, 3], "B": [2, 3, 4], "C": [3, 4, 5]})
    assert (r.df_between, r.df_within) == (2, 6)
    assert r.f_statistic == pytest.approx(3.0, rel=1e-12)
    assert r.p_value == pytest.approx(0.125, rel=1e-12)


def test_anova_zero_variance_conventions():
    assert anova_oneway({"A": [2, 2], "B": [2, 2]}).p_value == 1.0
    r = anova_oneway({"A": [1, 1], "B": [3, 3]})
    assert r.p_value == 0.0 and math.isinf(r.f_statistic)
    with pytest.raises(ValueError):
        anova_oneway({"A": [1, 2]})
    with pytest.raises(ValueError):
        anova_oneway({"A": [1], "B": [1, 2]})


def test_anova_separated_groups():
    r = anova_oneway({"A": [0.0, 0.01, -0.01], "B": [5.0, 5.01, 4.99], "C": [10, 10.01, 9.99]})
    assert r.p_value < 1e-4


def test_anova_matches_scipy_on_random_fixtures():
    rng = np.random.default_rng(42)
    for _ in range(50):
        fx = random_fixture(rng)
        ref = scipy.stats.f_oneway(*fx.values())
        r = anova_oneway(fx)
        assert abs(r.f_statistic - ref.statistic) <= 1e-10 * max(1.0, abs(ref.statistic))
        assert abs(r.p_value - ref.pvalue) <= 1e-8


def test_posthoc_matches_scipy_on_random_fixtures():
    rng = np.random.default_rng(7)
    for _ in range(50):
        fx = random_fixture(rng)
        names = list(fx)
        ref = scipy.stats.tukey_hsd(*fx.values()).pvalue
        ours = posthoc_pairwise(fx, names[0])
        for j, other in enumerate(names[1:], start=1):
            assert abs(ours[(names[0], other)] - ref[0, j]) <= 1e-8


def test_posthoc_examples():
    same = posthoc_pairwise({"A": [1, 2, 3], "B": [1, 2, 3], "C": [1, 2, 3]}, "A")
    assert same == {("A", "B"): 1.0, ("A", "C"): 1.0}
    far = posthoc_pairwise({"A": [0, 0.1, -0.1, 0.05], "B": [9, 9.1, 8.9, 9.05], "C": [0, 0.1, 0, 0.1]}, "A")
    assert far[("A", "B")] < 1e-4
    fx = {"A": [1, 2, 3, 2], "B": [2, 3, 5, 4], "C": [0, 1, 1, 2]}
    ab = posthoc_pairwise(fx, "A")[("A", "B")]
    ba = posthoc_pairwise(fx, "B")[("B", "A")]
    assert ab == pytest.approx(ba, rel=1e-14)
    with pytest.raises(KeyError):
        posthoc_pairwise(fx, "Z")


def test_studentized_range_against_scipy():
    for q, k, df in [(0.5, 3, 10), (3.5, 3, 27), (2.0, 2, 5), (6.0, 4, 100), (1e-6, 3, 20)]:
        assert studentized_range_sf(q, k, df) == pytest.approx(scipy.stats.studentized_range.sf(q, k, df), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-100, 100), min_size=2, max_size=8), min_size=2, max_size=4))
def test_p_values_in_unit_interval(groups):
    fx = {f"g{i}": g for i, g in enumerate(groups)}
    assert 0.0 <= anova_oneway(fx).p_value <= 1.0
    assert all(0.0 <= p <= 1.0 for p in posthoc_pairwise(fx, "g0").values())


def test_format_p():
    assert format_p(0.00001) == "<0.0001"
    assert format_p(1.0) == "1"
    assert format_p(0.8734) == "0.873"


def test_format_table_layout():
    table = {s: {"oblesa": 0.3 + 0.05 * (s % 3), "obl": 0.3, "random": 0.1 * (s % 4)} for s in range(1, 11)}
    recs = records_for(table, dim=2) + records_for(table, dim=40)
    res = analyze(recs)
    text = format_table("de", res["de"])
    lines = text.splitlines()
    assert lines[0] == "[DE]"
    assert lines[1].split() == ["Strategy", "2D", "40D"]
    assert [ln.split()[0] for ln in lines[2:6]] == ["OBLESA", "OBL", "RANDOM", "p-value"]
    assert "OBLESA-OBL" in text and "OBLESA-RANDOM" in text
    for line in lines[2:5]:
        cells = line.split()[1:]
        assert len(cells) == 2
    for row in res["de"]:
        assert row.table.total == 60
    csv_text = stats_csv(res)
    assert csv_text.splitlines()[0] == "optimizer,dim,kind,name,value"
    assert "de,40,score,oblesa," in csv_text


# published advantage-score sums per dimension 2D..40D, used as layout fixtures
PUBLISHED = {
    "egwo": {"oblesa": [21, 23, 17, 24, 27, 29], "obl": [20, 20, 23, 17, 21, 16], "random": [19, 17, 20, 19, 12, 15]},
    "de": {"oblesa": [19, 23, 26, 28, 23, 29], "obl": [22, 21, 18, 18, 19, 18], "random": [19, 16, 16, 14, 18, 13]},
}


@pytest.mark.parametrize("optimizer", sorted(PUBLISHED))
def test_published_tables_satisfy_conservation(optimizer):
    cols = zip(*PUBLISHED[optimizer].values())
    # s * g (g + 1) / 2 with 10 seeds and 3 strategies
    assert all(sum(c) == 10 * 3 * 4 // 2 for c in cols)


def test_published_p_value_formatting():
    assert format_p(0.873) == "0.873"
    assert format_p(0.00001) == "<0.0001"
