import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import chi2, norm

from discat.errors import InvalidParameter
from discat.models import PolychoricModel
from discat.simulate import (
    MetricsRow,
    PolycorDesign,
    SemDesign,
    SimulationFailed,
    check_failures,
    contamination_probs,
    draw_polycor,
    draw_polycor_codes,
    draw_sem,
    metrics_csv,
    records_csv,
    run_design,
    run_replications,
)
from discat.tables import ContingencyTable


def test_same_seed_same_table():
    d = PolycorDesign()
    a = draw_polycor(d, 0.1, np.random.default_rng(99))
    b = draw_polycor(d, 0.1, np.random.default_rng(99))
    assert np.array_equal(a.counts, b.counts)
    assert a.total == 1000


def test_fixed_number_of_contaminated_rows():
    # a near-perfect latent correlation leaves cell (5, 1) empty, so it counts the contaminant exactly
    d = PolycorDesign(rho=0.999, contamination_mean=(20.0, -20.0))
    for eps, k in [(0.0, 0), (0.1, 100), (0.2, 200)]:
        t = ContingencyTable.from_codes(draw_polycor_codes(d, eps, np.random.default_rng(1)), (5, 5))
        assert t.count((5, 1)) == k


def cell_h_oracle(d):
    """Brute-force contamination cell mass: quadrature of the contaminant density over each rectangle."""
    t = np.concatenate([[-np.inf], d.thresholds, [np.inf]])
    sx, sy = (math.sqrt(v) for v in d.contamination_var)
    mx, my = d.contamination_mean
    h = np.empty((5, 5))
    for i in range(5):
        for j in range(5):
            h[i, j] = integrate.dblquad(
                lambda y, x: norm.pdf(x, mx, sx) * norm.pdf(y, my, sy),
                max(t[i], mx - 12 * sx), min(t[i + 1], mx + 12 * sx),
                max(t[j], my - 12 * sy), min(t[j + 1], my + 12 * sy),
            )[0] if max(t[i], mx - 12 * sx) < min(t[i + 1], mx + 12 * sx) and max(t[j], my - 12 * sy) < min(t[j + 1], my + 12 * sy) else 0.0
    return h


def test_contamination_probs_against_quadrature():
    d = PolycorDesign()
    assert np.allclose(contamination_probs(d), cell_h_oracle(d), atol=1e-9)


def test_inflated_cells():
    d = PolycorDesign()
    h = contamination_probs(d)
    top = {(int(i) + 1, int(j) + 1) for i, j in zip(*np.unravel_index(np.argsort(h, axis=None)[-3:], h.shape))}
    assert top == {(5, 1), (5, 2), (4, 1)}
    p = PolychoricModel(5, 5).probs_and_grad(d.theta)[0].reshape(5, 5)
    mix = 0.8 * p + 0.2 * h
    for x, y in top:
        assert mix[x - 1, y - 1] > p[x - 1, y - 1]


def test_contaminated_mixture_chi_square():
    d = PolycorDesign()
    rng = np.random.default_rng(2024)
    counts = sum(draw_polycor(d, 0.2, rng).counts for _ in range(20))
    p = PolychoricModel(5, 5).probs_and_grad(d.theta)[0].reshape(5, 5)
    expected = (0.8 * p + 0.2 * cell_h_oracle(d)) * counts.sum()
    keep = expected > 5
    stat = np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep])
    assert chi2.sf(stat, keep.sum() - 1) > 1e-3


def test_clean_table_matches_model_cells():
    d = PolycorDesign()
    rng = np.random.default_rng(3)
    counts = sum(draw_polycor(d, 0.0, rng).counts for _ in range(20))
    p = PolychoricModel(5, 5).probs_and_grad(d.theta)[0].reshape(5, 5)
    expected = p * counts.sum()
    keep = expected > 5
    stat = np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep])
    assert chi2.sf(stat, keep.sum() - 1) > 1e-3


def test_sem_design():
    d = SemDesign()
    assert np.array_equal(np.diag(d.sigma), np.ones(4))
    assert d.alpha_true == pytest.approx(0.8372, abs=1e-4)
    codes = draw_sem(d, 0.1, np.random.default_rng(5))
    assert codes.shape == (1000, 4)
    n_lev = np.sum(np.all(codes == np.array(d.leverage), axis=1))
    assert 100 <= n_lev <= 101
    again = draw_sem(d, 0.1, np.random.default_rng(5))
    assert np.array_equal(codes, again)
    with pytest.raises(InvalidParameter):
        SemDesign(leverage=(1, 5))


def test_design_validation():
    with pytest.raises(InvalidParameter):
        PolycorDesign(eps=(1.5,))
    with pytest.raises(InvalidParameter):
        PolycorDesign(reps=0)


def test_small_run_structure_and_determinism():
    d = PolycorDesign(reps=6, eps=(0.0, 0.2), seed=5)
    rows, recs = run_design(d)
    assert len(rows) == 6 and len(recs) == 12
    for r in rows:
        assert r.n_ok == 6 and r.n_failed == 0
        assert 0 <= r.coverage <= 1 and r.sd >= 0
    by = {(r.eps, r.estimator): r for r in rows}
    assert by[(0.2, "robust")].mean > 0.3
    assert by[(0.2, "mle")].mean < 0
    rows2, recs2 = run_design(d)
    assert metrics_csv(rows) == metrics_csv(rows2)
    assert records_csv(recs) == records_csv(recs2)
    par = run_replications(d, threads=2)
    assert records_csv(par) == records_csv(recs)


def test_seed_changes_output():
    a = run_replications(PolycorDesign(reps=2, eps=(0.0,), seed=1), estimators=("pearson",))
    b = run_replications(PolycorDesign(reps=2, eps=(0.0,), seed=2), estimators=("pearson",))
    assert records_csv(a, ("pearson",)) != records_csv(b, ("pearson",))


def test_check_failures():
    ok = MetricsRow("polycor", 0.0, "robust", 98, 2)
    check_failures([ok])
    with pytest.raises(SimulationFailed):
        check_failures([MetricsRow("polycor", 0.0, "robust", 97, 3)])


def test_sem_small_run():
    d = SemDesign(reps=3, eps=(0.0, 0.1), seed=9)
    rows, _ = run_design(d)
    by = {(r.eps, r.estimator): r for r in rows}
    assert by[(0.1, "robust")].rmse_sigma < by[(0.1, "mle")].rmse_sigma
    assert all(r.rmse_loadings >= 0 for r in rows)
