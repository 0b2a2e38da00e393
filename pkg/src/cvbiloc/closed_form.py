"""Analytic expressions for correlators, maximal bilocality values and thresholds.

Nothing here touches a Fock basis; the :mod:`cvbiloc.oracle` module
recomputes every quantity from truncated-space traces and compares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from scipy.special import gammaln

from .errors import NumericalIntegrityError, ParameterError

SERIES_RTOL = 1e-16
SERIES_MAX_TERMS = 500


def squeezing_k(r: float) -> float:
    """``K(r) = tanh(2r)``, the ``s_x (x) s_x`` correlation of a TMSV."""
    return math.tanh(2.0 * r)


def k_from_lambda(lam: float) -> float:
    """``2 lambda / (1 + lambda^2)``, equal to ``tanh(2r)`` for ``lambda = tanh r``."""
    return 2.0 * lam / (1.0 + lam * lam)


def r_from_k(k: float) -> float:
    if not 0.0 <= k < 1.0:
        raise ParameterError(f"K must lie in [0, 1), got {k}")
    return 0.5 * math.atanh(k)


def l_squared(r1: float, r2: float) -> float:
    return squeezing_k(r1) * squeezing_k(r2)


def thermal_epsilon(beta1: float, beta2: float) -> float:
    return math.tanh(beta1 / 2) * math.tanh(beta2 / 2)


def noisy_n1(p: float, beta1: float, beta2: float) -> float:
    return p + (1 - p) * thermal_epsilon(beta1, beta2)


def noisy_n2(p: float, k: float) -> float:
    return p * k


def noisy_threshold_coefficients(k: float, eps: float) -> tuple[float, float, float]:
    """``(D, E, F)`` of ``D p^2 + E p + F = 0`` where the noisy-TMSV value equals 2."""
    return k * k + (1 - eps) ** 2, 2 * eps * (1 - eps), eps * eps - 1


def _series(log_terms) -> float:
    """Sum ``exp(log_terms(n))`` until a term drops below 1e-16 of the partial sum."""
    total = 0.0
    log_t = -math.inf
    for n in range(SERIES_MAX_TERMS):
        previous, log_t = log_t, log_terms(n)
        term = math.exp(log_t) if log_t > -745 else 0.0
        total += term
        if n > 0 and term <= SERIES_RTOL * total:
            return total
    reason = "terms still growing" if log_t > previous else "slow decay"
    raise NumericalIntegrityError(
        f"series did not converge within {SERIES_MAX_TERMS} terms ({reason})"
    )


def ecs_series(alpha: float) -> float:
    """``sum_n alpha^(4n+1) / sqrt((2n)! (2n+1)!)``."""
    if alpha <= 0:
        raise ParameterError("alpha must be > 0")
    la = math.log(alpha)
    return _series(
        lambda n: (4 * n + 1) * la - 0.5 * (gammaln(2 * n + 1) + gammaln(2 * n + 2))
    )


def ecs_q_squared(alpha: float, beta: float) -> float:
    """``Q^2(alpha, beta)``: the product of the two ECS ``s_x (x) s_x`` magnitudes."""
    a2, b2 = alpha * alpha, beta * beta
    num = (ecs_series(alpha) * ecs_series(beta)) ** 2
    # cosh(x) sinh(x) = sinh(2x)/2 overflows late enough for any sane alpha
    return num / (0.25 * math.sinh(2 * a2) * math.sinh(2 * b2))


def werner_t(p1: float, p2: float, r: float, s: Optional[float] = None) -> tuple[float, float]:
    """``(T_I, T_J)`` for two CV Werner states.

    With ``s = r`` this is the printed expression; for ``s != r`` the thermal
    parity factor uses ``tanh(2s)`` in place of ``K``.
    """
    k = squeezing_k(r)
    c = 1.0 - squeezing_k(r if s is None else s) ** 2
    t_i = p1 * p2 + c * (p1 - 2 * p1 * p2 + p2) + (1 - p1) * (1 - p2) * c * c
    t_j = p1 * p2 * k * k
    return t_i, t_j


def werner_case1_coefficients(k: float) -> tuple[float, float, float]:
    """``(D, E, F)`` for equal mixing weights: violation iff ``D p^2 + E p + F > 0``."""
    c = 1.0 - k * k
    return 3 * k * k - 1 + c * c, 2 * k * k * c, c * c - 1


def nu2_asymmetric(lam: float) -> float:
    """``2 l (1-l^2)^2 sum l^(4n) sqrt((2n+1)(2n+2))``."""
    if lam == 0.0:
        return 0.0
    l4 = 4 * math.log(lam)
    s = _series(lambda n: n * l4 + 0.5 * math.log((2 * n + 1) * (2 * n + 2)))
    return 2 * lam * (1 - lam * lam) ** 2 * s


def nu2_symmetric(lam: float) -> float:
    l2, l4 = lam * lam, lam**4
    return 2 * lam * (1 - l2) ** 3 * (6 * l4 + 2) / ((1 + l2) * (1 - l4) ** 3)


def nu2_coherent(lam: float) -> float:
    return (1 + lam**4) / (1 + lam * lam) ** 2


def solve_threshold(d: float, e: float, f: float) -> Optional[float]:
    """Larger root of ``d p^2 + e p + f = 0`` if it lies in ``(0, 1)``, else ``None``.

    A root at ``p = 1`` means violation needs ``p > 1``, which no state reaches.
    """
    if abs(d) < 1e-14:
        if abs(e) < 1e-14:
            return None
        root = -f / e
    else:
        disc = e * e - 4 * d * f
        if disc < 0:
            return None
        root = (-e + math.sqrt(disc)) / (2 * d)
    if not 0.0 < root < 1.0 - 1e-12:
        return None
    return root


@dataclass(frozen=True)
class ClosedFormContext:
    """Derived scalars of one family evaluated at one parameter point."""

    family: str
    params: dict
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]


def _pair_angles(a: float, b: float) -> float:
    """Optimal common angle for ``2 (sqrt(a) cos t + sqrt(b) sin t)``."""
    if a + b == 0:
        return float("nan")
    return math.acos(math.sqrt(a / (a + b)))


PHOTON_CONFIGS = ("A1", "A2", "B1", "B2", "C1", "C2")


def photon_config_spectra(label: str, lam: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Leading singular values ``((nu1, nu2), (mu1, mu2))`` of a photon-subtraction configuration."""
    nu2 = {"A": nu2_asymmetric, "B": nu2_symmetric, "C": nu2_coherent}
    if label == "TMSV":
        k = k_from_lambda(lam)
        return (1.0, k), (1.0, k)
    if label not in PHOTON_CONFIGS:
        raise ParameterError(f"unknown configuration {label!r}")
    left = (1.0, nu2[label[0]](lam))
    right = (1.0, k_from_lambda(lam)) if label[1] == "1" else left
    return left, right


def context(family: str, **params) -> ClosedFormContext:
    """Evaluate every closed-form scalar of a family.

    Families and their parameters: ``tmsv`` (r1, r2), ``noisy_tmsv``
    (r or K, p, beta1, beta2), ``ecs`` (alpha, beta), ``werner`` (p1, p2, r,
    optional s), ``photon`` (label in A1..C2 or TMSV, lam).
    """
    v: dict = {}
    if family == "tmsv":
        v["K1"], v["K2"] = squeezing_k(params["r1"]), squeezing_k(params["r2"])
        v["L2"] = v["K1"] * v["K2"]
        v["A"], v["B"] = 1.0, v["L2"]
    elif family == "noisy_tmsv":
        k = params["K"] if "K" in params else squeezing_k(params["r"])
        eps = thermal_epsilon(params["beta1"], params["beta2"])
        v.update(K=k, epsilon=eps)
        v["N1"] = noisy_n1(params["p"], params["beta1"], params["beta2"])
        v["N2"] = noisy_n2(params["p"], k)
        v["D"], v["E"], v["F"] = noisy_threshold_coefficients(k, eps)
        v["A"], v["B"] = v["N1"] ** 2, v["N2"] ** 2
    elif family == "ecs":
        v["Q2"] = ecs_q_squared(params["alpha"], params["beta"])
        v["A"], v["B"] = 1.0, v["Q2"]
    elif family == "werner":
        v["K"] = squeezing_k(params["r"])
        v["T_I"], v["T_J"] = werner_t(params["p1"], params["p2"], params["r"], params.get("s"))
        v["D"], v["E"], v["F"] = werner_case1_coefficients(v["K"])
        v["A"], v["B"] = v["T_I"], v["T_J"]
    elif family == "photon":
        (nu1, nu2), (mu1, mu2) = photon_config_spectra(params["label"], params["lam"])
        v.update(nu1=nu1, nu2=nu2, mu1=mu1, mu2=mu2)
        v["A"], v["B"] = nu1 * mu1, nu2 * mu2
    else:
        raise ParameterError(f"unknown family {family!r}")
    return ClosedFormContext(family, dict(params), v)


def smax_from_context(ctx: ClosedFormContext) -> tuple[float, float, float, float]:
    """``(S_max, theta, I, J)`` with ``I = 4 A cos^2``, ``J = 4 B sin^2`` at the optimum."""
    a, b = ctx["A"], ctx["B"]
    s_max = 2.0 * math.sqrt(a + b)
    theta = _pair_angles(a, b)
    if math.isnan(theta):
        return 0.0, theta, 0.0, 0.0
    return s_max, theta, 4 * a * math.cos(theta) ** 2, 4 * b * math.sin(theta) ** 2


def werner_case2_smax(p: float, k: float) -> float:
    return 2.0 * math.sqrt(1.0 + (2 * p - 1) * k * k)


def werner_case1_smax(p: float, k: float) -> float:
    c = 1.0 - k * k
    return 2.0 * math.sqrt(p * p * (1 + k * k) + 2 * p * (1 - p) * c + (1 - p) ** 2 * c * c)


def noisy_smax(p: float, k: float, beta1: float, beta2: float) -> float:
    return 2.0 * math.sqrt((p * k) ** 2 + noisy_n1(p, beta1, beta2) ** 2)


def photon_crossover_coherent() -> float:
    """Root of ``nu2_coherent(l) = K(l)``: ``l^4 - 2l^3 - 2l + 1 = 0`` on ``(0, 1)``."""
    u = 1 + math.sqrt(3.0)
    return (u - math.sqrt(u * u - 4)) / 2


def werner_case1_threshold(k: float) -> Optional[float]:
    return solve_threshold(*werner_case1_coefficients(k))


def noisy_threshold(k: float, beta1: float, beta2: float) -> Optional[float]:
    return solve_threshold(*noisy_threshold_coefficients(k, thermal_epsilon(beta1, beta2)))

