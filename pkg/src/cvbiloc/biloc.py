"""Bilocality correlators and the three routes to the maximal violation.

The network has two independent sources: ``rho_ab`` feeds Alice and Bob's
left mode, ``rho_bc`` feeds Bob's right mode and Charlie.  Bob measures
``B0 = s_z (x) s_z`` (for ``I``) or ``B1 = s_x (x) s_x`` (for ``J``), so every
tripartite correlator is a product of one trace per source.

Routes to ``S_max``:

``closed_form``
    the family's analytic expression (:mod:`cvbiloc.closed_form`);
``svd``
    ``2 sqrt(nu1 mu1 + nu2 mu2)`` from the singular values of the two 3x3
    pseudospin correlation matrices;
``grid``
    direct maximization of ``S(theta1, theta2)`` over ``[0, pi]^2`` by a
    coarse grid followed by golden-section line searches.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import closed_form, fock, states
from .errors import ContractError, NumericalIntegrityError, ParameterError
from .fock import TwoModeState
from .pseudospin import MeasurementSetting, SpinTriple, build_spin, spin_direction

TSIRELSON = 2.0 * math.sqrt(2.0)
SUPPORT_TOL = 1e-10
ROUTES = ("closed_form", "svd", "grid")


@dataclass(frozen=True)
class BilocResult:
    s_max: float
    theta1: float
    theta2: float
    I_at_opt: float
    J_at_opt: float
    route: str
    phi1: float = 0.0
    phi2: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ParameterError(f"unknown route {self.route!r}")
        if not -1e-12 <= self.s_max <= TSIRELSON + 1e-9:
            raise NumericalIntegrityError(
                f"S_max={self.s_max!r} outside [0, 2 sqrt 2] ({self.route})"
            )


@dataclass(frozen=True)
class CorrelationSpectrum:
    """Correlation matrix ``t_ij = Tr[s_i (x) s_j rho]`` and its singular values."""

    t: np.ndarray
    singular_values: np.ndarray
    left_vectors: np.ndarray = field(repr=False)
    right_vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        nu = self.singular_values
        if np.any(np.diff(nu) > 0) or nu[-1] < 0:
            raise NumericalIntegrityError("singular values must be sorted descending, >= 0")
        if np.max(np.abs(self.t)) > 1 + 1e-9:
            raise NumericalIntegrityError("correlation matrix entry exceeds 1 in magnitude")


def spectrum_of(t: np.ndarray) -> CorrelationSpectrum:
    """SVD of a real 3x3 correlation matrix with a deterministic sign convention."""
    t = np.asarray(t, dtype=float)
    u, nu, vt = np.linalg.svd(t)
    # flip each pair of singular vectors so the largest |component| of u is positive
    for k in range(3):
        j = np.argmax(np.abs(u[:, k]) + 1e-12 * np.arange(3)[::-1])
        if u[j, k] < 0:
            u[:, k] *= -1
            vt[k, :] *= -1
    return CorrelationSpectrum(t, nu, u, vt.T)


def _pair_traces(state: TwoModeState, left: SpinTriple, right: SpinTriple) -> np.ndarray:
    t = np.empty((3, 3))
    for i, j in itertools.product(range(3), repeat=2):
        t[i, j] = fock.expect(fock.kron(left.component(i), right.component(j)), state)
    return t


def correlation_matrix(rho: TwoModeState, q_left: int, q_right: int) -> CorrelationSpectrum:
    """Pseudospin correlation matrix of one source and its singular values."""
    left = build_spin(q_left, rho.cutoff)
    right = build_spin(q_right, rho.cutoff)
    return spectrum_of(_pair_traces(rho, left, right))


@dataclass(frozen=True, eq=False)
class Scenario:
    """Two independent sources and the pseudospin offsets ``(qA, qB1, qB2, qC)``."""

    rho_ab: TwoModeState
    rho_bc: TwoModeState
    offsets: Optional[tuple[int, int, int, int]] = None

    def __post_init__(self):
        if self.offsets is None:
            object.__setattr__(self, "offsets", tuple(self.rho_ab.offsets) + tuple(self.rho_bc.offsets))
        q_a, q_b1, q_b2, q_c = self.offsets
        for state, mode, q, who in (
            (self.rho_ab, 0, q_a, "Alice"),
            (self.rho_ab, 1, q_b1, "Bob (left)"),
            (self.rho_bc, 0, q_b2, "Bob (right)"),
            (self.rho_bc, 1, q_c, "Charlie"),
        ):
            w = fock.weight_below(state, mode, q)
            if w > SUPPORT_TOL:
                raise ContractError(
                    f"{who}'s mode carries weight {w:.3e} below pseudospin offset q={q}"
                )

    @cached_property
    def spin_a(self) -> SpinTriple:
        return build_spin(self.offsets[0], self.rho_ab.cutoff)

    @cached_property
    def spin_b1(self) -> SpinTriple:
        return build_spin(self.offsets[1], self.rho_ab.cutoff)

    @cached_property
    def spin_b2(self) -> SpinTriple:
        return build_spin(self.offsets[2], self.rho_bc.cutoff)

    @cached_property
    def spin_c(self) -> SpinTriple:
        return build_spin(self.offsets[3], self.rho_bc.cutoff)

    @cached_property
    def t_ab(self) -> np.ndarray:
        """``Tr[s_i (x) s_j rho_ab]``, Alice's axis first."""
        return _pair_traces(self.rho_ab, self.spin_a, self.spin_b1)

    @cached_property
    def t_bc(self) -> np.ndarray:
        """``Tr[s_j (x) s_k rho_bc]``, Bob's axis first."""
        return _pair_traces(self.rho_bc, self.spin_b2, self.spin_c)

    @property
    def tail_mass(self) -> float:
        return max(self.rho_ab.tail_mass, self.rho_bc.tail_mass)

    @property
    def n_max(self) -> int:
        return max(self.rho_ab.cutoff.n_max, self.rho_bc.cutoff.n_max)


def _outer_settings(theta: float, phi: float, q: int) -> list[MeasurementSetting]:
    # x = 0 -> +theta, x = 1 -> -theta, realized as a half-turn in phi
    return [MeasurementSetting(theta, phi % (2 * math.pi), q),
            MeasurementSetting(theta, (phi + math.pi) % (2 * math.pi), q)]


def alice_traces(sc: Scenario, theta1: float, bob_axis: int, phi1: float = 0.0) -> list[float]:
    """``Tr[(A_x (x) s_bob) rho_ab]`` for ``x = 0, 1``."""
    bob = sc.spin_b1.component(bob_axis)
    return [
        fock.expect(fock.kron(spin_direction(s, sc.spin_a), bob), sc.rho_ab)
        for s in _outer_settings(theta1, phi1, sc.offsets[0])
    ]


def charlie_traces(sc: Scenario, theta2: float, bob_axis: int, phi2: float = 0.0) -> list[float]:
    """``Tr[(s_bob (x) C_z) rho_bc]`` for ``z = 0, 1``."""
    bob = sc.spin_b2.component(bob_axis)
    return [
        fock.expect(fock.kron(bob, spin_direction(s, sc.spin_c)), sc.rho_bc)
        for s in _outer_settings(theta2, phi2, sc.offsets[3])
    ]


def correlator_I(sc: Scenario, theta1: float, theta2: float, phi1: float = 0.0, phi2: float = 0.0) -> float:
    """``I = sum_{x,z} <A_x B0 C_z>`` with ``B0 = s_z (x) s_z``."""
    a = alice_traces(sc, theta1, 2, phi1)
    c = charlie_traces(sc, theta2, 2, phi2)
    return sum(a[x] * c[z] for x, z in itertools.product(range(2), repeat=2))


def correlator_J(sc: Scenario, theta1: float, theta2: float, phi1: float = 0.0, phi2: float = 0.0) -> float:
    """``J = sum_{x,z} (-1)^(x+z) <A_x B1 C_z>`` with ``B1 = s_x (x) s_x``."""
    a = alice_traces(sc, theta1, 0, phi1)
    c = charlie_traces(sc, theta2, 0, phi2)
    return sum((-1) ** (x + z) * a[x] * c[z] for x, z in itertools.product(range(2), repeat=2))


def s_biloc(sc: Scenario, theta1: float, theta2: float, phi1: float = 0.0, phi2: float = 0.0) -> float:
    i = correlator_I(sc, theta1, theta2, phi1, phi2)
    j = correlator_J(sc, theta1, theta2, phi1, phi2)
    return math.sqrt(abs(i)) + math.sqrt(abs(j))


def fast_correlators(t_ab, t_bc, theta1, theta2, phi1=0.0, phi2=0.0):
    """``(I, J)`` from precomputed correlation matrices; broadcasts over angles.

    Uses ``n_0 + n_1 = (0, 0, 2 cos t)`` and
    ``n_0 - n_1 = 2 sin t (cos p, sin p, 0)`` for the two settings of each
    outer party.
    """
    th1, th2 = np.asarray(theta1), np.asarray(theta2)
    i = 4 * np.cos(th1) * t_ab[2, 2] * np.cos(th2) * t_bc[2, 2]
    left = np.cos(phi1) * t_ab[0, 0] + np.sin(phi1) * t_ab[1, 0]
    right = np.cos(phi2) * t_bc[0, 0] + np.sin(phi2) * t_bc[0, 1]
    j = 4 * np.sin(th1) * left * np.sin(th2) * right
    return i, j


def _fast_s(t_ab, t_bc, th1, th2, phi1=0.0, phi2=0.0):
    i, j = fast_correlators(t_ab, t_bc, th1, th2, phi1, phi2)
    return np.sqrt(np.abs(i)) + np.sqrt(np.abs(j))


# -- maximization routes -------------------------------------------------------


def maximize_svd(spec_ab: CorrelationSpectrum, spec_bc: CorrelationSpectrum) -> BilocResult:
    """``S_max = 2 sqrt(nu1 mu1 + nu2 mu2)`` with ``cos(theta) = sqrt(nu1 mu1 / sum)``."""
    nu, mu = spec_ab.singular_values, spec_bc.singular_values
    first, second = nu[0] * mu[0], nu[1] * mu[1]
    total = first + second
    if total == 0.0:
        return BilocResult(0.0, math.nan, math.nan, 0.0, 0.0, "svd", degenerate=True)
    theta = math.acos(min(1.0, math.sqrt(first / total)))
    return BilocResult(
        2.0 * math.sqrt(total), theta, theta,
        float(4 * first * math.cos(theta) ** 2), float(4 * second * math.sin(theta) ** 2), "svd",
    )


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Argmax of a unimodal ``f`` on ``[lo, hi]``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    candidates = [(f(x), x) for x in (a, 0.5 * (a + b), b)]
    return max(candidates)[1]


_DIRECTIONS = [np.array(v) / np.linalg.norm(v) for v in ((1, 0), (0, 1), (1, 1), (1, -1))]


def _line_bounds(x: np.ndarray, d: np.ndarray, h: float) -> tuple[float, float]:
    lo, hi = -h, h
    for xi, di in zip(x, d):
        if di > 0:
            lo, hi = max(lo, -xi / di), min(hi, (math.pi - xi) / di)
        elif di < 0:
            lo, hi = max(lo, (math.pi - xi) / di), min(hi, -xi / di)
    return lo, hi


def _refine(f, x0: np.ndarray, h: float, iters: int, tol: float) -> np.ndarray:
    x = x0.astype(float)
    best = f(x)
    for _ in range(iters):
        start = best
        for d in _DIRECTIONS:
            lo, hi = _line_bounds(x, d, h)
            if hi - lo <= 0:
                continue
            t = golden_section_max(lambda s: f(x + s * d), lo, hi, tol)
            value = f(x + t * d)
            if value > best:
                x, best = x + t * d, value
        if best - start <= 1e-16:
            break
    return x


def maximize_grid(
    sc: Scenario,
    resolution: int = 128,
    refine_iters: int = 200,
    phi_values: Sequence[float] = (0.0,),
    angle_tol: float = 1e-10,
) -> BilocResult:
    """Maximize ``S(theta1, theta2)`` numerically.

    A ``resolution x resolution`` grid on ``[0, pi]^2`` locates the basin;
    golden-section searches along the axes and both diagonals polish it.
    ``phi_values`` optionally sweeps the azimuths of Alice and Charlie.
    """
    if resolution < 64:
        raise ParameterError("grid resolution must be at least 64 points per angle")
    t_ab, t_bc = sc.t_ab, sc.t_bc
    grid = np.linspace(0.0, math.pi, resolution)
    h = grid[1] - grid[0]
    th1, th2 = np.meshgrid(grid, grid, indexing="ij")
    best: Optional[tuple[float, np.ndarray, float, float]] = None
    for phi1, phi2 in itertools.product(phi_values, repeat=2):
        values = _fast_s(t_ab, t_bc, th1, th2, phi1, phi2)
        k = np.unravel_index(np.argmax(values), values.shape)
        f = lambda x: float(_fast_s(t_ab, t_bc, x[0], x[1], phi1, phi2))  # noqa: E731
        x = _refine(f, np.array([grid[k[0]], grid[k[1]]]), h, refine_iters, angle_tol)
        value = f(x)
        if best is None or value > best[0] + 1e-15:
            best = (value, x, phi1, phi2)
    value, x, phi1, phi2 = best
    i, j = fast_correlators(t_ab, t_bc, x[0], x[1], phi1, phi2)
    return BilocResult(value, float(x[0]), float(x[1]), float(i), float(j), "grid", phi1, phi2)


# -- families ----------------------------------------------------------------------

FAMILIES = ("tmsv", "noisy_tmsv", "ecs", "werner", "photon")


def canonical_params(family: str, **params) -> dict:
    """Resolve parameter aliases to each family's canonical set.

    ``tmsv``: r1, r2 (aliases r, L, K, lam for equal sources).
    ``noisy_tmsv``: r, p, beta1, beta2 (aliases K, beta).
    ``ecs``: alpha, beta (beta defaults to alpha).
    ``werner``: p1, p2, r, s (aliases K; p with case=1 gives p1=p2=p,
    case=2 gives p1=1, p2=p).
    ``photon``: label, lam (alias r).
    """
    p = dict(params)

    def r_of(d):
        if "r" in d:
            return float(d.pop("r"))
        if "L" in d:
            return closed_form.r_from_k(float(d.pop("L")))
        if "K" in d:
            return closed_form.r_from_k(float(d.pop("K")))
        if "lam" in d:
            return math.atanh(float(d.pop("lam")))
        return None

    if family == "tmsv":
        r = r_of(p)
        if r is not None:
            p.setdefault("r1", r)
            p.setdefault("r2", r)
        out = {"r1": float(p["r1"]), "r2": float(p["r2"])}
    elif family == "noisy_tmsv":
        r = r_of(p)
        if "beta" in p:
            p.setdefault("beta1", p["beta"])
            p.setdefault("beta2", p["beta"])
        out = {"r": r, "p": float(p["p"]), "beta1": float(p["beta1"]), "beta2": float(p["beta2"])}
    elif family == "ecs":
        alpha = float(p["alpha"])
        out = {"alpha": alpha, "beta": float(p.get("beta", alpha))}
    elif family == "werner":
        r = r_of(p)
        case = int(p.pop("case", 1))
        if "p" in p:
            if case == 1:
                p.setdefault("p1", p["p"])
                p.setdefault("p2", p["p"])
            elif case == 2:
                p.setdefault("p1", 1.0)
                p.setdefault("p2", p["p"])
            else:
                raise ParameterError("werner case must be 1 or 2")
        out = {"p1": float(p["p1"]), "p2": float(p["p2"]), "r": r}
        if p.get("s") is not None:
            out["s"] = float(p["s"])
    elif family == "photon":
        lam = float(p["lam"]) if "lam" in p else math.tanh(float(p["r"]))
        out = {"label": str(p["label"]), "lam": lam}
    else:
        raise ParameterError(f"unknown family {family!r}; choose from {FAMILIES}")
    if any(v is None for v in out.values()):
        raise ParameterError(f"{family}: missing squeezing parameter")
    return out


_SCHEMES = {
    "A": states.SubtractionScheme("asymmetric"),
    "B": states.SubtractionScheme("symmetric"),
    "C": states.SubtractionScheme("coherent", 0),
}


def _config_states(label: str, lam: float, cutoff, tail_tol):
    r = math.atanh(lam)
    ref = states.tmsv(r, cutoff, tail_tol=tail_tol)
    if label == "TMSV":
        return ref, ref
    if label not in closed_form.PHOTON_CONFIGS:
        raise ParameterError(f"unknown configuration {label!r}")
    xi = states.photon_subtracted(_SCHEMES[label[0]], r, cutoff, tail_tol=tail_tol)
    return xi, (ref if label[1] == "1" else xi)


def scenario_for(family: str, cutoff=None, tail_tol: float = fock.DEFAULT_TAIL_TOL, **params) -> Scenario:
    """Build both sources of a family at its default offsets."""
    p = canonical_params(family, **params)
    kw = {"tail_tol": tail_tol}
    if family == "tmsv":
        ab, bc = states.tmsv(p["r1"], cutoff, **kw), states.tmsv(p["r2"], cutoff, **kw)
    elif family == "noisy_tmsv":
        ab = bc = states.noisy_tmsv(states.NoisyTmsvParams(**p), cutoff, **kw)
    elif family == "ecs":
        ab, bc = states.ecs(p["alpha"], cutoff, **kw), states.ecs(p["beta"], cutoff, **kw)
    elif family == "werner":
        s = p.get("s")
        ab = states.werner(states.WernerParams(p["p1"], p["r"], s), cutoff, **kw)
        bc = ab if p["p2"] == p["p1"] else states.werner(states.WernerParams(p["p2"], p["r"], s), cutoff, **kw)
    else:
        ab, bc = _config_states(p["label"], p["lam"], cutoff, tail_tol)
    return Scenario(ab, bc)


def closed_form_context(family: str, **params) -> closed_form.ClosedFormContext:
    return closed_form.context(family, **canonical_params(family, **params))


def closed_form_smax(family: str, **params) -> BilocResult:
    """The family's analytic ``S_max`` and optimal common angle."""
    ctx = closed_form_context(family, **params)
    s, theta, i, j = closed_form.smax_from_context(ctx)
    return BilocResult(s, theta, theta, i, j, "closed_form", degenerate=math.isnan(theta))


def maximize_scenario_svd(sc: Scenario) -> BilocResult:
    return maximize_svd(spectrum_of(sc.t_ab), spectrum_of(sc.t_bc.T))


def maximize(family: str, route: str = "closed_form", cutoff=None, **params) -> BilocResult:
    """Dispatch one family/parameter point to one route."""
    if route == "closed_form":
        return closed_form_smax(family, **params)
    sc = scenario_for(family, cutoff, **params)
    if route == "svd":
        return maximize_scenario_svd(sc)
    if route == "grid":
        return maximize_grid(sc)
    raise ParameterError(f"unknown route {route!r}; choose from {ROUTES}")


# -- thresholds and enhancement ------------------------------------------------------


def violation_threshold(family: str, **params) -> Optional[float]:
    """Critical mixing weight ``p*``: the state violates bilocality iff ``p > p*``.

    ``noisy_tmsv`` takes K (or r), beta1, beta2; ``werner_case1`` and
    ``werner_case2`` take K (or r).  ``None`` means no ``p`` in ``[0, 1]``
    gives a violation.
    """
    k = params["K"] if "K" in params else closed_form.squeezing_k(params["r"])
    if family == "noisy_tmsv":
        eps = closed_form.thermal_epsilon(params["beta1"], params["beta2"])
        return closed_form.solve_threshold(*closed_form.noisy_threshold_coefficients(k, eps))
    if family == "werner_case1":
        return closed_form.solve_threshold(*closed_form.werner_case1_coefficients(k))
    if family == "werner_case2":
        # 1 + (2p - 1) K^2 = 1  ->  2 K^2 p - K^2 = 0
        return closed_form.solve_threshold(0.0, 2 * k * k, -k * k)
    raise ParameterError(f"no threshold defined for family {family!r}")


def enhancement_delta(s_config: float, s_reference: float) -> float:
    """Relative change of ``S_max`` against the TMSV reference pair."""
    return (s_config - s_reference) / s_reference


def config_delta(label: str, lam: float, route: str = "closed_form") -> float:
    s = maximize("photon", route, label=label, lam=lam).s_max
    ref = maximize("photon", route, label="TMSV", lam=lam).s_max
    return enhancement_delta(s, ref)


def enhancement_crossover(label: str, lo: float, hi: float, route: str = "closed_form", xtol: float = 1e-12) -> float:
    """Squeezing ``lambda`` in ``[lo, hi]`` where a configuration's ``Delta`` changes sign."""
    return brentq(lambda lam: config_delta(label, lam, route), lo, hi, xtol=xtol)


def ordering_crossover(first: str, second: str, lo: float, hi: float, route: str = "closed_form", xtol: float = 1e-12) -> float:
    """Squeezing ``lambda`` where two configurations exchange their ``S_max`` ordering."""

    def gap(lam):
        return (maximize("photon", route, label=first, lam=lam).s_max
                - maximize("photon", route, label=second, lam=lam).s_max)

    return brentq(gap, lo, hi, xtol=xtol)
