import math

import numpy as np
import pytest

from cvbiloc import biloc, closed_form, states
from cvbiloc.biloc import Scenario
from cvbiloc.errors import ContractError, NumericalIntegrityError, ParameterError

TSIRELSON = 2 * math.sqrt(2)

# one representative point per family (and per photon configuration)
FAMILY_POINTS = [
    ("tmsv", {"r1": 0.4, "r2": 0.9}),
    ("noisy_tmsv", {"r": 0.5, "p": 0.7, "beta1": 1.0, "beta2": 2.0}),
    ("ecs", {"alpha": 0.8, "beta": 1.5}),
    ("werner", {"p1": 0.9, "p2": 0.6, "r": 0.5}),
    *[("photon", {"label": lab, "lam": 0.45}) for lab in ("A1", "A2", "B1", "B2", "C1", "C2")],
]

# ten-point parameter grids per family for the route-agreement property
ROUTE_GRID = (
    [("tmsv", {"r": r}) for r in np.linspace(0.05, 1.5, 10)]
    + [("noisy_tmsv", {"r": r, "p": 0.8, "beta": 1.0}) for r in np.linspace(0.05, 1.2, 10)]
    + [("ecs", {"alpha": a}) for a in np.linspace(0.1, 3.0, 10)]
    + [("werner", {"p": p, "r": 0.6, "case": 1}) for p in np.linspace(0.0, 1.0, 10)]
    + [("photon", {"label": lab, "lam": lam}) for lab in ("A2", "B1", "C1")
       for lam in np.linspace(0.0, 0.85, 10)]
)


def scenario(family, params):
    return biloc.scenario_for(family, **params)


@pytest.mark.parametrize("th1,th2", [(0.3, 1.1), (0.0, 0.0), (np.pi / 2, np.pi / 2), (2.0, 0.7)])
def test_tmsv_correlators(th1, th2):
    r1, r2 = 0.3, 0.8
    sc = biloc.scenario_for("tmsv", r1=r1, r2=r2)
    k1, k2 = math.tanh(2 * r1), math.tanh(2 * r2)
    assert biloc.correlator_I(sc, th1, th2) == pytest.approx(4 * math.cos(th1) * math.cos(th2), abs=1e-10)
    assert biloc.correlator_J(sc, th1, th2) == pytest.approx(
        4 * k1 * k2 * math.sin(th1) * math.sin(th2), abs=1e-10)


def test_noisy_j_uses_n2():
    params = {"r": 0.6, "p": 0.55, "beta1": 1.0, "beta2": 1.0}
    sc = biloc.scenario_for("noisy_tmsv", **params)
    n2 = closed_form.context("noisy_tmsv", **params)["N2"]
    assert biloc.correlator_J(sc, 0.9, 1.3) == pytest.approx(
        4 * math.sin(0.9) * math.sin(1.3) * n2**2, abs=1e-10)


@pytest.mark.parametrize("family,params", FAMILY_POINTS, ids=lambda x: str(x))
def test_j_vanishes_at_theta_zero(family, params):
    sc = scenario(family, params)
    assert biloc.correlator_J(sc, 0.0, 0.8) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("family,params", FAMILY_POINTS, ids=lambda x: str(x))
def test_correlators_factorize_over_sources(family, params):
    sc = scenario(family, params)
    rng = np.random.default_rng(11)
    for th1, th2, ph1, ph2 in rng.uniform(0, np.pi, size=(3, 4)):
        a = biloc.alice_traces(sc, th1, 2, ph1)
        c = biloc.charlie_traces(sc, th2, 2, ph2)
        i = biloc.correlator_I(sc, th1, th2, ph1, ph2)
        assert i == pytest.approx(sum(a) * sum(c), abs=1e-10)
        i_fast, j_fast = biloc.fast_correlators(sc.t_ab, sc.t_bc, th1, th2, ph1, ph2)
        assert i == pytest.approx(float(i_fast), abs=1e-10)
        assert biloc.correlator_J(sc, th1, th2, ph1, ph2) == pytest.approx(float(j_fast), abs=1e-10)


def test_scenario_rejects_unsupported_offsets():
    st_ = states.tmsv(0.5)
    with pytest.raises(ContractError):
        Scenario(st_, st_, offsets=(1, 0, 0, 0))
    xi = states.photon_subtracted(states.SubtractionScheme("asymmetric"), 0.5)
    Scenario(xi, xi)  # default offsets (1, 0) are supported


def test_correlation_matrix_examples():
    lam = 0.5
    r = math.atanh(lam)
    spec = biloc.correlation_matrix(states.tmsv(r), 0, 0)
    k = closed_form.k_from_lambda(lam)
    assert np.allclose(spec.t, np.diag([k, -k, 1.0]), atol=1e-12)
    assert spec.singular_values[0] == pytest.approx(1.0, abs=1e-12)
    assert spec.singular_values[1] == pytest.approx(k, abs=1e-12)
    xi3 = states.photon_subtracted(states.SubtractionScheme("coherent", 0), r)
    nu = biloc.correlation_matrix(xi3, 0, 0).singular_values
    assert nu[0] == pytest.approx(1.0, abs=1e-12)
    assert nu[1] == pytest.approx(closed_form.nu2_coherent(lam), abs=1e-12)
    thermal = states.werner(states.WernerParams(0.0, 0.5))
    assert biloc.correlation_matrix(thermal, 0, 0).singular_values[1] == 0.0


def test_spectrum_invariants_and_degenerate_order():
    spec = biloc.spectrum_of(np.diag([0.3, -0.3, 1.0]))
    assert list(spec.singular_values) == pytest.approx([1.0, 0.3, 0.3])
    again = biloc.spectrum_of(np.diag([0.3, -0.3, 1.0]))
    assert np.array_equal(spec.left_vectors, again.left_vectors)
    with pytest.raises(NumericalIntegrityError):
        biloc.spectrum_of(np.diag([1.5, 0.0, 0.0]))


def test_svd_route_special_spectra():
    perfect = biloc.spectrum_of(np.eye(3))
    assert biloc.maximize_svd(perfect, perfect).s_max == pytest.approx(TSIRELSON, abs=1e-15)
    zero = biloc.spectrum_of(np.zeros((3, 3)))
    res = biloc.maximize_svd(zero, zero)
    assert res.degenerate and res.s_max == 0.0 and math.isnan(res.theta1)


@pytest.mark.parametrize("family,params", ROUTE_GRID, ids=lambda x: str(x))
def test_three_routes_agree(family, params):
    results = [biloc.maximize(family, route, **params) for route in biloc.ROUTES]
    values = [r.s_max for r in results]
    assert max(values) - min(values) <= 1e-6
    assert all(v <= TSIRELSON + 1e-9 for v in values)


@pytest.mark.parametrize("family,params", FAMILY_POINTS, ids=lambda x: str(x))
def test_reported_optimum_reevaluates(family, params):
    sc = scenario(family, params)
    for result in (biloc.maximize_scenario_svd(sc), biloc.maximize_grid(sc)):
        s = biloc.s_biloc(sc, result.theta1, result.theta2)
        assert abs(s - result.s_max) <= 1e-9


def test_grid_argmax_tmsv():
    res = biloc.maximize_grid(biloc.scenario_for("tmsv", r=0.5))
    assert res.theta1 == pytest.approx(math.atan(math.tanh(1.0)), abs=1e-7)
    assert res.theta2 == pytest.approx(res.theta1, abs=1e-7)


@pytest.mark.parametrize("family,params", [
    ("tmsv", {"r": 0.7}), ("noisy_tmsv", {"r": 0.4, "p": 0.9, "beta": 2.0}),
    ("ecs", {"alpha": 1.2}), ("werner", {"p": 0.8, "r": 0.3, "case": 1}),
    ("photon", {"label": "B2", "lam": 0.6}), ("photon", {"label": "C2", "lam": 0.3}),
])
def test_identical_sources_give_symmetric_argmax(family, params):
    res = biloc.maximize_grid(scenario(family, params))
    assert abs(res.theta1 - res.theta2) <= 1e-7


def test_grid_resolution_floor():
    with pytest.raises(ParameterError):
        biloc.maximize_grid(biloc.scenario_for("tmsv", r=0.5), resolution=32)


def test_azimuth_sweep_adds_nothing_for_tmsv():
    sc = biloc.scenario_for("tmsv", r=0.6)
    flat = biloc.maximize_grid(sc)
    swept = biloc.maximize_grid(sc, phi_values=np.linspace(0, np.pi, 5))
    assert swept.s_max == pytest.approx(flat.s_max, abs=1e-10)


def test_tmsv_monotone_in_squeezing():
    values = [biloc.maximize("tmsv", "svd", r=r).s_max for r in np.linspace(0.1, 2.0, 20)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_horodecki_identity_for_equal_sources():
    rng = np.random.default_rng(2)
    for _ in range(5):
        st_ = states.werner(states.WernerParams(rng.uniform(), rng.uniform(0.05, 1.0)))
        spec = biloc.correlation_matrix(st_, 0, 0)
        nu = spec.singular_values
        assert biloc.maximize_svd(spec, spec).s_max == 2 * math.sqrt(nu[0] * nu[0] + nu[1] * nu[1])


def test_closed_form_examples():
    assert biloc.violation_threshold("werner_case1", K=1.0) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert biloc.violation_threshold("werner_case2", K=0.4) == pytest.approx(0.5, abs=1e-15)
    assert biloc.violation_threshold("werner_case2", K=0.0) is None
    assert biloc.violation_threshold("noisy_tmsv", K=0.0, beta1=1.0, beta2=1.0) is None
    xi3 = biloc.closed_form_smax("photon", label="C2", lam=0.0)
    assert xi3.s_max == pytest.approx(TSIRELSON, abs=1e-15)
    with pytest.raises(ParameterError):
        biloc.violation_threshold("ecs", K=0.5)


def test_noisy_threshold_self_consistent():
    for k in (0.3, 0.6, 0.95):
        p = biloc.violation_threshold("noisy_tmsv", K=k, beta1=1.0, beta2=1.0)
        s = biloc.closed_form_smax("noisy_tmsv", K=k, p=p, beta=1.0).s_max
        assert s == pytest.approx(2.0, abs=1e-9)


def test_enhancement_delta():
    assert biloc.enhancement_delta(2.5, 2.5) == 0.0
    assert biloc.config_delta("C2", 0.0) == pytest.approx(math.sqrt(2) - 1, abs=1e-14)
    assert biloc.config_delta("TMSV", 0.4) == 0.0
    assert biloc.config_delta("C1", 0.8) < 0


def test_crossovers():
    lam_c = biloc.enhancement_crossover("C2", 0.3, 0.6)
    assert lam_c == pytest.approx(closed_form.photon_crossover_coherent(), abs=1e-10)
    assert biloc.enhancement_crossover("C1", 0.3, 0.6) == pytest.approx(lam_c, abs=1e-10)
    flip = biloc.ordering_crossover("B2", "A2", 0.3, 0.8)
    assert flip == pytest.approx(0.616, abs=1e-3)


def test_canonical_params_aliases():
    assert biloc.canonical_params("tmsv", L=math.tanh(1.0)) == pytest.approx({"r1": 0.5, "r2": 0.5})
    assert biloc.canonical_params("tmsv", lam=math.tanh(0.5))["r1"] == pytest.approx(0.5)
    w = biloc.canonical_params("werner", p=0.3, K=0.5, case=2)
    assert w["p1"] == 1.0 and w["p2"] == 0.3
    assert biloc.canonical_params("photon", label="A1", r=0.5)["lam"] == pytest.approx(math.tanh(0.5))
    with pytest.raises(ParameterError):
        biloc.canonical_params("werner", p=0.3, K=0.5, case=3)
    with pytest.raises(ParameterError):
        biloc.canonical_params("nope")
