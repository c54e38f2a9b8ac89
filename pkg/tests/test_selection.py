import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalsel.errors import SelectionFailed
from causalsel.models import ModelFamily, ModelSpec, build_collection
from causalsel.qmle import fit
from causalsel.selection import (
    AIC,
    BIC,
    Custom,
    LogLogPower,
    PowerLaw,
    _raw_criterion,
    choose,
    criterion,
    fit_collection,
    parse_penalty,
    score,
    select,
)
from causalsel.simulate import derive_seed, simulate

AR_COLLECTION = build_collection(ModelFamily.AR(2))
EXHAUSTIVE = build_collection(ModelFamily.AR(3), "exhaustive")


def test_criterion_examples():
    assert criterion(-10.0, 2, math.log(100)) == pytest.approx(29.210340, abs=1e-6)
    assert criterion(-123.25, 0, 7.0) == 246.5
    assert criterion(0.0, 3, 2.0) == 6.0


def test_criterion_rejects_bad_inputs():
    with pytest.raises(ValueError):
        criterion(1.0, 1, 0.0)
    with pytest.raises(ValueError):
        criterion(math.nan, 1, 1.0)


def test_penalty_values():
    assert BIC()(1000) == pytest.approx(math.log(1000))
    assert AIC()(1000) == 2.0
    assert LogLogPower(2.0, 0.5)(1000) == pytest.approx(2.0 * math.log(math.log(1000)) ** 1.5)
    assert PowerLaw(0.25)(10_000) == pytest.approx(10.0)
    assert Custom(((500, 3.0), (1000, 4.0)))(1000) == 4.0
    with pytest.raises(ValueError):
        Custom(((500, 3.0),))(600)
    with pytest.raises(ValueError):
        Custom(((500, -1.0),))(500)
    with pytest.raises(ValueError):
        PowerLaw(1.0)


def test_parse_penalty_round_trip():
    for text in ("BIC", "AIC", "loglog(2.0, 0.25)", "power(0.3)", "custom(500:3.0; 1000:4.5)"):
        rule = parse_penalty(text)
        assert parse_penalty(rule.to_string()) == rule
    assert parse_penalty("bic") == BIC()
    with pytest.raises(ValueError):
        parse_penalty("hqic")
    with pytest.raises(ValueError):
        parse_penalty("BIC(3)")


def test_theorem_conditions():
    assert AIC().theorem_conditions["kappa_over_loglog_n_diverges"] is False
    for rule in (BIC(), LogLogPower(), PowerLaw(0.5)):
        assert all(rule.theorem_conditions.values())
    assert LogLogPower(1.0, 0.0).theorem_conditions["kappa_over_loglog_n_diverges"] is False


def test_identical_specs_tie_to_first():
    x = np.random.default_rng(1).standard_normal(300)
    spec = AR_COLLECTION[1]
    rep = select([spec, spec], x, BIC())
    assert rep.entries[0].criterion == rep.entries[1].criterion
    assert rep.chosen == 0


def test_tie_break_order():
    specs = [AR_COLLECTION[2], AR_COLLECTION[1], AR_COLLECTION[0]]
    assert choose([1.0, 1.0, 1.0], specs) == 2
    lex = [s for s in EXHAUSTIVE if s.dim == 2]
    assert choose([0.0] * len(lex), lex) == min(range(len(lex)), key=lambda i: lex[i].active)
    with pytest.raises(SelectionFailed):
        choose([math.inf, math.inf], specs[:2])


@settings(max_examples=200)
@given(
    st.lists(st.floats(-1e4, 1e4), min_size=len(EXHAUSTIVE), max_size=len(EXHAUSTIVE)),
    st.floats(-1e6, 1e6),
    st.floats(0.1, 50.0),
)
def test_constant_shift_invariance(l_hats, shift, kappa):
    a = [_raw_criterion(v, s.dim, kappa) for v, s in zip(l_hats, EXHAUSTIVE)]
    b = [_raw_criterion(v + shift, s.dim, kappa) for v, s in zip(l_hats, EXHAUSTIVE)]
    # a shift can only flip near-ties through rounding
    ia, ib = choose(a, EXHAUSTIVE), choose(b, EXHAUSTIVE)
    assert ia == ib or math.isclose(a[ia], a[ib], rel_tol=1e-9, abs_tol=1e-6)


@settings(max_examples=300)
@given(
    st.lists(st.integers(-2000, 2000), min_size=len(EXHAUSTIVE), max_size=len(EXHAUSTIVE)),
    st.floats(0.1, 20.0),
    st.floats(0.0, 20.0),
)
def test_monotone_penalty(l_hats, kappa, extra):
    # integer-halves keep the arithmetic exact so ties are genuine
    l_hats = [v / 2 for v in l_hats]
    k2 = kappa + extra + 1e-3
    i1 = choose([_raw_criterion(v, s.dim, kappa) for v, s in zip(l_hats, EXHAUSTIVE)], EXHAUSTIVE)
    i2 = choose([_raw_criterion(v, s.dim, k2) for v, s in zip(l_hats, EXHAUSTIVE)], EXHAUSTIVE)
    assert EXHAUSTIVE[i2].dim <= EXHAUSTIVE[i1].dim


def test_zero_penalty_prefers_largest_nested():
    spec = ModelSpec(ModelFamily.AR(1))
    for seed in range(5):
        x = simulate(spec, spec.param([0.3, 1.0]), 2000, seed=seed).values
        fits = [fit(s, x) for s in build_collection(ModelFamily.AR(3))]
        crit = [_raw_criterion(f.l_hat, f.spec.dim, 0.0) for f in fits]
        assert all(b <= a + 1e-6 * x.size for a, b in zip(crit, crit[1:]))


def test_failed_fit_is_infeasible():
    big = ModelSpec(ModelFamily.AR(3))
    x = np.random.default_rng(0).standard_normal(4)
    rep = select([AR_COLLECTION[0].lift(ModelFamily.AR(3)), big], x, BIC())
    assert rep.entries[1].criterion == math.inf
    assert not rep.entries[1].feasible
    assert "InsufficientDataError" in rep.entries[1].error
    assert rep.chosen == 0


def test_collection_must_share_d():
    with pytest.raises(ValueError):
        select([ModelSpec(ModelFamily.AR(1)), ModelSpec(ModelFamily.AR(2))], np.zeros(10) + 1.0, BIC())
    with pytest.raises(ValueError):
        select([], np.ones(10), BIC())


def test_score_matches_select_and_rescoring():
    x = simulate(AR_COLLECTION[2], AR_COLLECTION[2].param([0.4, 0.2, 1.0]), 800, seed=3).values
    fits = fit_collection(AR_COLLECTION, x)
    for pen in (BIC(), AIC(), PowerLaw(0.4)):
        a = score(AR_COLLECTION, fits, pen, x.size)
        b = select(AR_COLLECTION, x, pen)
        assert a.chosen == b.chosen
        assert [e.criterion for e in a.entries] == [e.criterion for e in b.entries]


def test_report_json_schema():
    x = np.random.default_rng(2).standard_normal(200)
    doc = select(AR_COLLECTION, x, BIC()).to_dict()
    json.dumps(doc)
    assert set(doc) == {"penalty", "kappa_n", "n", "chosen", "chosen_name", "theorem_conditions", "models"}
    assert doc["kappa_n"] == math.log(200)
    m = doc["models"][doc["chosen"]]
    assert m["chosen"] and m["criterion"] == pytest.approx(-2 * m["l_hat"] + m["dim"] * doc["kappa_n"])
    assert {"id", "active", "theta_hat", "l_hat", "criterion"} <= set(m)


def _selection_rate(theta, truth_index, r_count=200, n=5000):
    spec = ModelSpec(ModelFamily.AR(2))
    hits = 0
    for r in range(r_count):
        x = simulate(spec, spec.param(theta), n, seed=derive_seed(77, r))
        hits += select(AR_COLLECTION, x, BIC()).chosen == truth_index
    return hits / r_count


@pytest.mark.slow
def test_bic_finds_white_noise():
    assert _selection_rate([0.0, 0.0, 1.0], 0) >= 0.9


@pytest.mark.slow
def test_bic_finds_ar1():
    assert _selection_rate([0.8, 0.0, 1.0], 1) >= 0.9
