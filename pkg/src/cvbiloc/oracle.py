"""Brute-force verification of the closed-form scalars.

Every oracle value here is assembled from truncated-Fock traces of states
built by :mod:`cvbiloc.states`; the analytic side comes from
:mod:`cvbiloc.closed_form`.  The two never share an evaluation path, so an
agreement within ``TOLERANCE`` certifies both the formula transcription and
the state construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import closed_form, fock, states
from .errors import ParameterError
from .pseudospin import build_spin

TOLERANCE = 1e-8
STATE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class VerificationReport:
    quantity: str
    family: str
    params: dict
    closed: float
    oracle: float
    n_max: int
    tail_mass: float
    tolerance: float = TOLERANCE

    @property
    def absdev(self) -> float:
        if _both_absent(self.closed, self.oracle):
            return 0.0
        return abs(self.closed - self.oracle)

    @property
    def reldev(self) -> float:
        scale = max(abs(self.closed), abs(self.oracle))
        return self.absdev / scale if scale > 0 else self.absdev

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.absdev) and self.absdev <= self.tolerance)

    def params_text(self) -> str:
        return ";".join(f"{k}={v!r}" for k, v in self.params.items())


def _both_absent(a: float, b: float) -> bool:
    return math.isnan(a) and math.isnan(b)


def _none_to_nan(x: Optional[float]) -> float:
    return math.nan if x is None else float(x)


# -- raw trace helpers -------------------------------------------------------


class _Traces:
    """Correlation matrix of one state from direct ``Tr[(s_i (x) s_j) rho]``."""

    def __init__(self, state: fock.TwoModeState, offsets=None):
        q_l, q_r = state.offsets if offsets is None else offsets
        self.state = state
        self.left = build_spin(q_l, state.cutoff)
        self.right = build_spin(q_r, state.cutoff)

    def t(self, i: int, j: int) -> float:
        return fock.expect(fock.kron(self.left.component(i), self.right.component(j)), self.state)

    def matrix(self) -> np.ndarray:
        return np.array([[self.t(i, j) for j in range(3)] for i in range(3)])

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix(), compute_uv=False)


def _track(states_used: list, state):
    states_used.append(state)
    return state


def _lam_to_r(lam: float) -> float:
    return math.atanh(lam)


def _quadratic_through(g0: float, g_half: float, g1: float) -> tuple[float, float, float]:
    """Coefficients of the quadratic through ``(0, g0), (1/2, g_half), (1, g1)``."""
    d = 2 * g1 - 4 * g_half + 2 * g0
    e = 4 * g_half - g1 - 3 * g0
    return d, e, g0


def _threshold_root(g: Callable[[float], float]) -> Optional[float]:
    """Where ``g`` (negative at ``p = 0``) first turns positive on ``(0, 1)``."""
    if g(1.0 - 1e-12) <= 0:
        return None
    return brentq(g, 0.0, 1.0 - 1e-12, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# -- oracle evaluators ---------------------------------------------------------
#
# Each takes a params dict, an optional cutoff and a list that collects the
# states built, and returns the oracle value.


def _o_k(p, cutoff, used):
    return _Traces(_track(used, states.tmsv(p["r"], cutoff))).t(0, 0)


def _o_l2(p, cutoff, used):
    t1 = _Traces(_track(used, states.tmsv(p["r1"], cutoff))).t(0, 0)
    t2 = _Traces(_track(used, states.tmsv(p["r2"], cutoff))).t(0, 0)
    return t1 * t2


def _noisy(p, cutoff, used, weight=None):
    params = states.NoisyTmsvParams(p["r"], p["p"] if weight is None else weight, p["beta1"], p["beta2"])
    return _Traces(_track(used, states.noisy_tmsv(params, cutoff)))


def _o_n1(p, cutoff, used):
    return _noisy(p, cutoff, used).t(2, 2)


def _o_n2(p, cutoff, used):
    return _noisy(p, cutoff, used).t(0, 0)


def _o_epsilon(p, cutoff, used):
    # the thermal product alone: parity correlation of two geometric diagonals
    return _noisy({**p, "r": 0.0}, cutoff, used, weight=0.0).t(2, 2)


def _noisy_linear_traces(p, cutoff, used):
    """``(t_zz, t_xx)`` at ``p = 0`` and ``p = 1``; traces are linear in ``p``."""
    ends = [_noisy(p, cutoff, used, weight=w) for w in (0.0, 1.0)]
    return [(e.t(2, 2), e.t(0, 0)) for e in ends]


def _noisy_gap(p, cutoff, used):
    (z0, x0), (z1, x1) = _noisy_linear_traces(p, cutoff, used)

    def gap(w):
        z, x = (1 - w) * z0 + w * z1, (1 - w) * x0 + w * x1
        return z * z + x * x - 1.0

    return gap


def _o_noisy_coeff(index):
    def evaluate(p, cutoff, used):
        gap = _noisy_gap(p, cutoff, used)
        return _quadratic_through(gap(0.0), gap(0.5), gap(1.0))[index]

    return evaluate


def _o_noisy_threshold(p, cutoff, used):
    return _none_to_nan(_threshold_root(_noisy_gap(p, cutoff, used)))


def _o_q2(p, cutoff, used):
    ta = _Traces(_track(used, states.ecs(p["alpha"], cutoff))).t(0, 0)
    tb = _Traces(_track(used, states.ecs(p["beta"], cutoff))).t(0, 0)
    return ta * tb


def _werner_traces(weight, p, cutoff, used):
    params = states.WernerParams(weight, p["r"], p.get("s"))
    return _Traces(_track(used, states.werner(params, cutoff)))


def _o_t_i(p, cutoff, used):
    return _werner_traces(p["p1"], p, cutoff, used).t(2, 2) * _werner_traces(p["p2"], p, cutoff, used).t(2, 2)


def _o_t_j(p, cutoff, used):
    return _werner_traces(p["p1"], p, cutoff, used).t(0, 0) * _werner_traces(p["p2"], p, cutoff, used).t(0, 0)


def _werner_gap(p, cutoff, used):
    ends = [_werner_traces(w, p, cutoff, used) for w in (0.0, 1.0)]
    (z0, x0), (z1, x1) = [(e.t(2, 2), e.t(0, 0)) for e in ends]

    def gap(w):
        z, x = (1 - w) * z0 + w * z1, (1 - w) * x0 + w * x1
        return z * z + x * x - 1.0

    return gap


def _o_werner_coeff(index):
    def evaluate(p, cutoff, used):
        gap = _werner_gap(p, cutoff, used)
        return _quadratic_through(gap(0.0), gap(0.5), gap(1.0))[index]

    return evaluate


def _o_werner_threshold(p, cutoff, used):
    return _none_to_nan(_threshold_root(_werner_gap(p, cutoff, used)))


_SCHEMES = {
    "nu2_a": states.SubtractionScheme("asymmetric"),
    "nu2_s": states.SubtractionScheme("symmetric"),
    "nu2_c": states.SubtractionScheme("coherent", 0),
}


def _o_nu(scheme_key, index):
    def evaluate(p, cutoff, used):
        xi = _track(used, states.photon_subtracted(_SCHEMES[scheme_key], _lam_to_r(p["lam"]), cutoff))
        return _Traces(xi).singular_values()[index]

    return evaluate


def _o_mu(index):
    def evaluate(p, cutoff, used):
        ref = _track(used, states.tmsv(_lam_to_r(p["lam"]), cutoff))
        return _Traces(ref).singular_values()[index]

    return evaluate


def _svd_smax(sv_ab, sv_bc):
    return 2.0 * math.sqrt(sv_ab[0] * sv_bc[0] + sv_ab[1] * sv_bc[1])


def _o_smax_tmsv(p, cutoff, used):
    a = _Traces(_track(used, states.tmsv(p["r1"], cutoff))).singular_values()
    b = _Traces(_track(used, states.tmsv(p["r2"], cutoff))).singular_values()
    return _svd_smax(a, b)


def _o_smax_noisy(p, cutoff, used):
    sv = _noisy(p, cutoff, used).singular_values()
    return _svd_smax(sv, sv)


def _o_smax_ecs(p, cutoff, used):
    a = _Traces(_track(used, states.ecs(p["alpha"], cutoff))).singular_values()
    b = _Traces(_track(used, states.ecs(p["beta"], cutoff))).singular_values()
    return _svd_smax(a, b)


def _o_smax_werner(p, cutoff, used):
    a = _werner_traces(p["p1"], p, cutoff, used).singular_values()
    b = _werner_traces(p["p2"], p, cutoff, used).singular_values()
    return _svd_smax(a, b)


def _o_smax_photon(p, cutoff, used):
    label, r = p["label"], _lam_to_r(p["lam"])
    scheme = {"A": _SCHEMES["nu2_a"], "B": _SCHEMES["nu2_s"], "C": _SCHEMES["nu2_c"]}
    ref = _Traces(_track(used, states.tmsv(r, cutoff))).singular_values()
    if label == "TMSV":
        return _svd_smax(ref, ref)
    xi = _Traces(_track(used, states.photon_subtracted(scheme[label[0]], r, cutoff))).singular_values()
    return _svd_smax(xi, ref if label[1] == "1" else xi)


# -- closed-form side ----------------------------------------------------------


def _cf(family, key):
    return lambda p: closed_form.context(family, **p)[key]


def _cf_smax(family):
    return lambda p: closed_form.smax_from_context(closed_form.context(family, **p))[0]


def _cf_noisy_coeff(index):
    def evaluate(p):
        return closed_form.noisy_threshold_coefficients(
            closed_form.squeezing_k(p["r"]), closed_form.thermal_epsilon(p["beta1"], p["beta2"])
        )[index]

    return evaluate


def _cf_werner_coeff(index):
    return lambda p: closed_form.werner_case1_coefficients(closed_form.squeezing_k(p["r"]))[index]


# -- registry ------------------------------------------------------------------------


@dataclass(frozen=True)
class Quantity:
    """One verifiable scalar: its closed form, its oracle and test points."""

    qid: str
    family: str
    closed: Callable[[dict], float] = field(repr=False)
    oracle: Callable[..., float] = field(repr=False)
    points: tuple = ()
    # ClosedFormContext keys this quantity certifies
    covers: tuple = ()


_NOISY_POINTS = (
    {"r": 0.5, "p": 0.7, "beta1": 1.0, "beta2": 1.0},
    {"r": 0.3, "p": 0.4, "beta1": 2.0, "beta2": 0.8},
    {"r": 1.0, "p": 0.9, "beta1": 3.0, "beta2": 3.0},
)
_NOISY_THRESHOLD_POINTS = (
    {"r": 0.5, "beta1": 1.0, "beta2": 1.0},
    {"r": 0.2, "beta1": 2.0, "beta2": 0.8},
    {"r": 1.0, "beta1": 0.5, "beta2": 3.0},
)
_WERNER_POINTS = (
    {"p1": 0.8, "p2": 0.8, "r": 0.5},
    {"p1": 1.0, "p2": 0.6, "r": 0.8},
    {"p1": 0.3, "p2": 0.9, "r": 0.25},
    {"p1": 0.7, "p2": 0.5, "r": 0.4, "s": 0.6},
)
_WERNER_K_POINTS = ({"r": 0.3}, {"r": 0.6}, {"r": 1.2})
_LAMS = ({"lam": 0.2}, {"lam": 0.5}, {"lam": 0.8})


def _noisy_closed(key):
    return lambda p: closed_form.context("noisy_tmsv", **p)[key]


REGISTRY: dict[str, Quantity] = {
    q.qid: q
    for q in (
        Quantity("K", "tmsv", lambda p: closed_form.squeezing_k(p["r"]), _o_k,
                 ({"r": 0.1}, {"r": 0.5}, {"r": 1.0}, {"r": 2.0}), ("K1", "K2")),
        Quantity("L2", "tmsv", lambda p: closed_form.l_squared(p["r1"], p["r2"]), _o_l2,
                 ({"r1": 0.5, "r2": 0.5}, {"r1": 0.2, "r2": 1.0}, {"r1": 1.5, "r2": 0.7}), ("L2",)),
        Quantity("N1", "noisy_tmsv", _noisy_closed("N1"), _o_n1, _NOISY_POINTS, ("N1",)),
        Quantity("N2", "noisy_tmsv", _noisy_closed("N2"), _o_n2, _NOISY_POINTS, ("N2", "K")),
        Quantity("epsilon", "noisy_tmsv", lambda p: closed_form.thermal_epsilon(p["beta1"], p["beta2"]),
                 _o_epsilon, _NOISY_THRESHOLD_POINTS, ("epsilon",)),
        Quantity("noisy_D", "noisy_tmsv", _cf_noisy_coeff(0), _o_noisy_coeff(0), _NOISY_THRESHOLD_POINTS, ("D",)),
        Quantity("noisy_E", "noisy_tmsv", _cf_noisy_coeff(1), _o_noisy_coeff(1), _NOISY_THRESHOLD_POINTS, ("E",)),
        Quantity("noisy_F", "noisy_tmsv", _cf_noisy_coeff(2), _o_noisy_coeff(2), _NOISY_THRESHOLD_POINTS, ("F",)),
        Quantity("noisy_threshold", "noisy_tmsv",
                 lambda p: _none_to_nan(closed_form.noisy_threshold(closed_form.squeezing_k(p["r"]), p["beta1"], p["beta2"])),
                 _o_noisy_threshold, _NOISY_THRESHOLD_POINTS),
        Quantity("Q2", "ecs", lambda p: closed_form.ecs_q_squared(p["alpha"], p["beta"]), _o_q2,
                 ({"alpha": 0.1, "beta": 0.1}, {"alpha": 0.5, "beta": 1.0}, {"alpha": 1.0, "beta": 1.0},
                  {"alpha": 2.0, "beta": 3.0}), ("Q2",)),
        Quantity("T_I", "werner", _cf("werner", "T_I"), _o_t_i, _WERNER_POINTS, ("T_I",)),
        Quantity("T_J", "werner", _cf("werner", "T_J"), _o_t_j, _WERNER_POINTS, ("T_J", "K")),
        Quantity("werner_D", "werner", _cf_werner_coeff(0), _o_werner_coeff(0), _WERNER_K_POINTS, ("D",)),
        Quantity("werner_E", "werner", _cf_werner_coeff(1), _o_werner_coeff(1), _WERNER_K_POINTS, ("E",)),
        Quantity("werner_F", "werner", _cf_werner_coeff(2), _o_werner_coeff(2), _WERNER_K_POINTS, ("F",)),
        Quantity("werner_threshold", "werner",
                 lambda p: _none_to_nan(closed_form.werner_case1_threshold(closed_form.squeezing_k(p["r"]))),
                 _o_werner_threshold, _WERNER_K_POINTS),
        Quantity("nu1_a", "photon", lambda p: 1.0, _o_nu("nu2_a", 0), _LAMS, ("nu1",)),
        Quantity("nu2_a", "photon", lambda p: closed_form.nu2_asymmetric(p["lam"]), _o_nu("nu2_a", 1), _LAMS, ("nu2",)),
        Quantity("nu2_s", "photon", lambda p: closed_form.nu2_symmetric(p["lam"]), _o_nu("nu2_s", 1), _LAMS, ("nu2",)),
        Quantity("nu2_c", "photon", lambda p: closed_form.nu2_coherent(p["lam"]), _o_nu("nu2_c", 1), _LAMS, ("nu2",)),
        Quantity("mu1", "photon", lambda p: 1.0, _o_mu(0), _LAMS, ("mu1",)),
        Quantity("mu2", "photon", lambda p: closed_form.k_from_lambda(p["lam"]), _o_mu(1), _LAMS, ("mu2",)),
        Quantity("smax_tmsv", "tmsv", _cf_smax("tmsv"), _o_smax_tmsv,
                 ({"r1": 0.25, "r2": 0.25}, {"r1": 0.5, "r2": 1.0}, {"r1": 2.0, "r2": 2.0}), ("A", "B")),
        Quantity("smax_noisy_tmsv", "noisy_tmsv", _cf_smax("noisy_tmsv"), _o_smax_noisy, _NOISY_POINTS, ("A", "B")),
        Quantity("smax_ecs", "ecs", _cf_smax("ecs"), _o_smax_ecs,
                 ({"alpha": 0.1, "beta": 0.1}, {"alpha": 0.5, "beta": 0.5}, {"alpha": 1.0, "beta": 2.0}), ("A", "B")),
        Quantity("smax_werner", "werner", _cf_smax("werner"), _o_smax_werner, _WERNER_POINTS, ("A", "B")),
        Quantity("smax_photon", "photon", _cf_smax("photon"), _o_smax_photon,
                 tuple({"label": lab, "lam": lam} for lab in ("A1", "A2", "B1", "B2", "C1", "C2", "TMSV")
                       for lam in (0.2, 0.5, 0.8)), ("A", "B")),
    )
}

# families sampled for the completeness check, one representative point each
_CONTEXT_SAMPLES = {
    "tmsv": {"r1": 0.5, "r2": 0.5},
    "noisy_tmsv": _NOISY_POINTS[0],
    "ecs": {"alpha": 1.0, "beta": 1.0},
    "werner": _WERNER_POINTS[0],
    "photon": {"label": "A1", "lam": 0.5},
}


def uncovered_context_keys() -> dict[str, set]:
    """Closed-form scalars without an oracle target, by family (empty when complete)."""
    missing = {}
    for family, sample in _CONTEXT_SAMPLES.items():
        keys = set(closed_form.context(family, **sample).values)
        covered = {k for q in REGISTRY.values() if q.family == family for k in q.covers}
        if keys - covered:
            missing[family] = keys - covered
    return missing


def verify_scalar(qid: str, params: dict, cutoff=None, tolerance: float = TOLERANCE) -> VerificationReport:
    """Compare a closed-form scalar with its trace-built oracle at one point."""
    try:
        quantity = REGISTRY[qid]
    except KeyError:
        raise ParameterError(f"unknown quantity {qid!r}; known: {sorted(REGISTRY)}") from None
    used: list = []
    oracle_value = float(quantity.oracle(params, cutoff, used))
    closed_value = float(quantity.closed(params))
    return VerificationReport(
        qid, quantity.family, dict(params), closed_value, oracle_value,
        n_max=max(s.cutoff.n_max for s in used),
        tail_mass=max(s.tail_mass for s in used),
        tolerance=tolerance,
    )


def run_registry(families=None, tolerance: float = TOLERANCE) -> list[VerificationReport]:
    """Every registered quantity at every registered point, in registry order."""
    reports = []
    for quantity in REGISTRY.values():
        if families is not None and quantity.family not in families:
            continue
        for point in quantity.points:
            reports.append(verify_scalar(quantity.qid, point, tolerance=tolerance))
    return reports


# -- state construction --------------------------------------------------------


def _subtract_from_tmsv(scheme: states.SubtractionScheme, r: float, cutoff) -> np.ndarray:
    """Apply the subtraction operator to the truncated TMSV and renormalize.

    The TMSV is used in the unnormalized form ``sum_{n>=1} l^(n-1) |n, n>``;
    the dropped vacuum term is annihilated anyway and the rescaling by ``l``
    keeps ``r = 0`` well defined as the limit.
    """
    cutoff = fock._as_cutoff(cutoff)
    d = cutoff.dim
    lam = math.tanh(r)
    n = np.arange(d)
    weights = np.where(n >= 1, np.power(lam, np.maximum(n - 1, 0)), 0.0)
    psi = np.diag(weights).astype(complex).reshape(-1)
    a = fock.annihilation(cutoff)
    eye = fock.identity(cutoff)
    if scheme.variant == "asymmetric":
        op = fock.kron(eye, a)
    elif scheme.variant == "symmetric":
        op = fock.kron(a, a)
    else:
        op = fock.kron(a, eye) + (-1) ** scheme.k * fock.kron(eye, a)
    out = op.entries @ psi
    return out / np.linalg.norm(out)


def verify_state_construction(scheme: states.SubtractionScheme, r: float, cutoff=None) -> VerificationReport:
    """Entrywise gap between the expansion-built state and the operator-built one."""
    built = states.photon_subtracted(scheme, r, cutoff)
    reference = _subtract_from_tmsv(scheme, r, built.cutoff)
    vec = built.vector
    # both constructions are real and positive on their leading entry
    phase = np.vdot(reference, vec)
    phase = phase / abs(phase) if abs(phase) > 0 else 1.0
    deviation = float(np.max(np.abs(vec - phase * reference)))
    return VerificationReport(
        f"state_{scheme.family}", "photon", {"variant": scheme.variant, "k": scheme.k, "r": r},
        closed=deviation, oracle=0.0, n_max=built.cutoff.n_max,
        tail_mass=built.tail_mass, tolerance=STATE_TOLERANCE,
    )
