"""Constructors for the two-mode state families.

Every constructor computes the probability weight discarded by the Fock
cutoff in closed form (``tail_mass``), renormalizes the retained part, and
tags the state with its default pseudospin offsets.  When no cutoff is
given, the smallest one whose tail is below ``tail_tol`` is used, plus a
margin of :data:`CUTOFF_MARGIN` levels so the unpaired top level of a
pseudospin ladder carries no weight either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from . import fock
from .errors import CutoffError, DegenerateStateError, ParameterError
from .fock import DEFAULT_TAIL_TOL, FockCutoff, TwoModeState

CUTOFF_MARGIN = 2
MIN_N_MAX = 3
MAX_N_MAX = 20000

FAMILY_OFFSETS = {
    "tmsv": (0, 0),
    "noisy_tmsv": (0, 0),
    "ecs": (0, 0),
    "werner": (0, 0),
    "xi1": (1, 0),
    "xi2": (0, 0),
    "xi3": (0, 0),
}


def default_offsets(family: str) -> tuple[int, int]:
    """Pseudospin offsets ``(q_left, q_right)`` suited to a state family."""
    try:
        return FAMILY_OFFSETS[family]
    except KeyError:
        raise ParameterError(f"unknown state family {family!r}") from None


# -- parameters --------------------------------------------------------------


def _check_unit(name, value):
    if not (0.0 <= value <= 1.0):
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")


def _check_real(name, value):
    if isinstance(value, complex) or np.iscomplexobj(value):
        raise ParameterError(f"{name} must be real")
    if not np.isfinite(value):
        raise ParameterError(f"{name} must be finite")


@dataclass(frozen=True)
class TmsvParams:
    r: float

    def __post_init__(self):
        _check_real("r", self.r)
        if self.r < 0:
            raise ParameterError(f"squeezing r must be >= 0, got {self.r}")

    @property
    def lam(self) -> float:
        return math.tanh(self.r)


@dataclass(frozen=True)
class NoisyTmsvParams:
    r: float
    p: float
    beta1: float
    beta2: float

    def __post_init__(self):
        TmsvParams(self.r)
        _check_unit("p", self.p)
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            _check_real(name, value)
            if value <= 0:
                raise ParameterError(f"{name} must be > 0, got {value}")


@dataclass(frozen=True)
class EcsParams:
    alpha: float

    def __post_init__(self):
        _check_real("alpha", self.alpha)
        if self.alpha < 0:
            raise ParameterError("alpha must be real and non-negative")


@dataclass(frozen=True)
class WernerParams:
    p: float
    r: float
    s: Optional[float] = None

    def __post_init__(self):
        _check_unit("p", self.p)
        TmsvParams(self.r)
        if self.s is None:
            object.__setattr__(self, "s", self.r)
        TmsvParams(self.s)


@dataclass(frozen=True)
class SubtractionScheme:
    """Which photon subtraction produced the state.

    ``asymmetric`` removes a photon from mode 2, ``symmetric`` from both
    modes, ``coherent`` applies ``a (x) 1 + (-1)^k 1 (x) b``.
    """

    variant: str
    k: int = 0

    VARIANTS = ("asymmetric", "symmetric", "coherent")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ParameterError(f"variant must be one of {self.VARIANTS}")
        if self.k not in (0, 1):
            raise ParameterError("k must be 0 or 1")

    @property
    def family(self) -> str:
        return {"asymmetric": "xi1", "symmetric": "xi2", "coherent": "xi3"}[self.variant]


# -- analytic tails ----------------------------------------------------------


def _sech2(r: float) -> float:
    """``1 - tanh(r)^2`` without cancellation."""
    return 1.0 / math.cosh(r) ** 2 if r < 350 else 0.0


def _pow(x: float, k: float) -> float:
    if x == 0.0:
        return 0.0 if k > 0 else 1.0
    return math.exp(k * math.log(x))


def tmsv_tail(r: float, n_max: int) -> float:
    """Weight of ``|n,n>`` with ``n > n_max``: ``lambda^(2(n_max+1))``."""
    return _pow(math.tanh(r), 2 * (n_max + 1))


def thermal_tail(beta: float, n_max: int) -> float:
    """Weight of a geometric distribution ``(1-e^-b) e^-bn`` above ``n_max``."""
    return math.exp(-beta * (n_max + 1))


def _product_tail(g1: float, g2: float) -> float:
    return g1 + g2 - g1 * g2


def noisy_tmsv_tail(params: NoisyTmsvParams, n_max: int) -> float:
    thermal = _product_tail(thermal_tail(params.beta1, n_max), thermal_tail(params.beta2, n_max))
    return params.p * tmsv_tail(params.r, n_max) + (1 - params.p) * thermal


def werner_tail(params: WernerParams, n_max: int) -> float:
    g = tmsv_tail(params.s, n_max)
    return params.p * tmsv_tail(params.r, n_max) + (1 - params.p) * _product_tail(g, g)


def _linear_weight_tail(r: float, start: int) -> float:
    # sum_{n >= start} (1-x)^2 x^n (n+1),  x = lambda^2
    x = math.tanh(r) ** 2
    return _pow(x, start) * ((start + 1) * _sech2(r) + x)


def _quadratic_weight_tail(r: float, start: int) -> float:
    # sum_{n >= start} (1-x)^3/(1+x) x^n (n+1)^2
    x = math.tanh(r) ** 2
    if x == 0.0:
        return 0.0 if start > 0 else 1.0
    one_minus = _sech2(r)
    m1 = start + 1
    series = x * (1 + x) / one_minus**3 + 2 * m1 * x / one_minus**2 + m1**2 / one_minus
    return _pow(x, start) * series * one_minus**3 / (1 + x)


def photon_subtracted_tail(scheme: SubtractionScheme, r: float, n_max: int) -> float:
    if scheme.variant == "symmetric":
        return _quadratic_weight_tail(r, n_max + 1)
    # |n+1, n> (and |n, n+1>) is retained only while n + 1 <= n_max
    return _linear_weight_tail(r, n_max)


def _poisson_parity_tail(mean: float, n_max: int) -> tuple[float, float]:
    """Even and odd parts of ``sum_{n > n_max} e^-mean mean^n / n!``."""
    if mean == 0.0:
        return 0.0, 0.0
    n = np.arange(n_max + 1, n_max + 60 + int(10 * mean))
    terms = np.exp(n * math.log(mean) - mean - gammaln(n + 1))
    return float(terms[n % 2 == 0].sum()), float(terms[n % 2 == 1].sum())


def ecs_tail(alpha: float, n_max: int) -> float:
    mean = alpha * alpha
    even_out, odd_out = _poisson_parity_tail(mean, n_max)
    even = math.exp(-mean) * math.cosh(mean)
    odd = math.exp(-mean) * math.sinh(mean)
    norm2 = 1.0 / (2.0 * -math.expm1(-4 * mean))
    # |c_nm|^2 = 4 N^2 P(n) P(m) on odd n+m; the box keeps n, m <= n_max
    return 8 * norm2 * (even_out * odd + (even - even_out) * odd_out)


def required_n_max(tail: Callable[[int], float], tol: float, minimum: int = 1) -> int:
    """Smallest ``n_max >= minimum`` with ``tail(n_max) <= tol``."""
    n = minimum
    while tail(n) > tol:
        n += 1
        if n > MAX_N_MAX:
            raise CutoffError(f"no cutoff up to n_max={MAX_N_MAX} meets tail tolerance {tol}")
    return n


def _tail_function(family: str, params) -> Callable[[int], float]:
    if family == "tmsv":
        return lambda n: tmsv_tail(params.r, n)
    if family == "noisy_tmsv":
        return lambda n: noisy_tmsv_tail(params, n)
    if family == "werner":
        return lambda n: werner_tail(params, n)
    if family == "ecs":
        return lambda n: ecs_tail(params.alpha, n)
    if family in ("xi1", "xi2", "xi3"):
        scheme, r = params
        return lambda n: photon_subtracted_tail(scheme, r, n)
    raise ParameterError(f"unknown state family {family!r}")


def default_cutoff(family: str, params, tail_tol: float = DEFAULT_TAIL_TOL) -> FockCutoff:
    """Automatic cutoff for a family: tail below ``tail_tol`` plus a safety margin.

    For the photon-subtracted families ``params`` is ``(scheme, r)``.
    """
    n = required_n_max(_tail_function(family, params), tail_tol)
    return FockCutoff(max(n + CUTOFF_MARGIN, MIN_N_MAX))


def _resolve_cutoff(family, params, cutoff, tail_tol) -> tuple[FockCutoff, float]:
    tail = _tail_function(family, params)
    if cutoff is None:
        cutoff = default_cutoff(family, params, tail_tol)
    cutoff = fock._as_cutoff(cutoff)
    mass = tail(cutoff.n_max)
    if mass > tail_tol:
        need = required_n_max(tail, tail_tol, cutoff.n_max)
        raise CutoffError(
            f"{family}: tail mass {mass:.3e} at n_max={cutoff.n_max} exceeds {tail_tol:.1e}; "
            f"need n_max >= {need}",
            required_n_max=need,
        )
    return cutoff, mass


# -- constructors -----------------------------------------------------------

ParamsLike = Union[float, TmsvParams]


def _tmsv_coefficients(r: float, dim: int) -> np.ndarray:
    lam = math.tanh(r)
    n = np.arange(dim)
    if lam == 0.0:
        out = np.zeros(dim)
        out[0] = 1.0
        return out
    return np.sqrt(_sech2(r)) * np.exp(n * math.log(lam))


def _diagonal_ket(coeffs: np.ndarray, d: int, shift: int = 0) -> np.ndarray:
    """Amplitude matrix with ``coeffs[n]`` at ``(n + shift, n)``."""
    amps = np.zeros((d, d), dtype=np.complex128)
    n = np.arange(coeffs.size)
    amps[n + shift, n] = coeffs
    return amps


def tmsv(params: ParamsLike, cutoff=None, *, tail_tol: float = DEFAULT_TAIL_TOL) -> TwoModeState:
    """Two-mode squeezed vacuum ``sqrt(1-l^2) sum l^n |n,n>``, ``l = tanh r``."""
    if not isinstance(params, TmsvParams):
        params = TmsvParams(float(params))
    cutoff, mass = _resolve_cutoff("tmsv", params, cutoff, tail_tol)
    d = cutoff.dim
    amps = _diagonal_ket(_tmsv_coefficients(params.r, d), d)
    return fock.pure_state(
        amps, cutoff, mass, family="tmsv", offsets=default_offsets("tmsv"), tail_tol=tail_tol
    )


def _projector_on_diagonal(coeffs: np.ndarray, d: int) -> sp.csr_array:
    idx = np.arange(coeffs.size) * (d + 1)
    nz = np.flatnonzero(coeffs)
    rows = np.repeat(idx[nz], nz.size)
    cols = np.tile(idx[nz], nz.size)
    vals = np.outer(coeffs[nz], coeffs[nz].conj()).reshape(-1)
    return sp.csr_array((vals, (rows, cols)), shape=(d * d, d * d), dtype=np.complex128)


def _product_diagonal(w1: np.ndarray, w2: np.ndarray) -> sp.csr_array:
    diag = np.kron(w1 / w1.sum(), w2 / w2.sum()).astype(np.complex128)
    return sp.csr_array(sp.diags_array(diag))


def _geometric(log_ratio: float, dim: int) -> np.ndarray:
    """Unnormalized ``exp(log_ratio * n)`` for ``n < dim``."""
    return np.exp(log_ratio * np.arange(dim))


def noisy_tmsv(params: NoisyTmsvParams, cutoff=None, *, tail_tol: float = DEFAULT_TAIL_TOL) -> TwoModeState:
    """``p |zeta><zeta| + (1-p) rho_th(beta1) (x) rho_th(beta2)``."""
    cutoff, mass = _resolve_cutoff("noisy_tmsv", params, cutoff, tail_tol)
    d = cutoff.dim
    coeffs = _tmsv_coefficients(params.r, d)
    coeffs = coeffs / np.linalg.norm(coeffs)
    thermal = _product_diagonal(_geometric(-params.beta1, d), _geometric(-params.beta2, d))
    rho = params.p * _projector_on_diagonal(coeffs, d) + (1 - params.p) * thermal
    return fock.mixed_state(
        rho, cutoff, mass, family="noisy_tmsv", offsets=default_offsets("noisy_tmsv"),
        tail_tol=tail_tol,
    )


def werner(params: WernerParams, cutoff=None, *, tail_tol: float = DEFAULT_TAIL_TOL) -> TwoModeState:
    """``p |zeta(r)><zeta(r)| + (1-p) rho_T(s)`` with ``rho_T`` a product of thermal states."""
    cutoff, mass = _resolve_cutoff("werner", params, cutoff, tail_tol)
    d = cutoff.dim
    coeffs = _tmsv_coefficients(params.r, d)
    coeffs = coeffs / np.linalg.norm(coeffs)
    lam2 = math.tanh(params.s)
    if lam2 == 0.0:
        w = np.zeros(d)
        w[0] = 1.0
    else:
        w = _geometric(2 * math.log(lam2), d)
    rho = params.p * _projector_on_diagonal(coeffs, d) + (1 - params.p) * _product_diagonal(w, w)
    return fock.mixed_state(
        rho, cutoff, mass, family="werner", offsets=default_offsets("werner"), tail_tol=tail_tol
    )


def ecs(params: Union[float, EcsParams], cutoff=None, *, tail_tol: float = DEFAULT_TAIL_TOL) -> TwoModeState:
    """Entangled coherent state ``N(|a,-a> - |-a,a>)`` for real ``a > 0``."""
    if not isinstance(params, EcsParams):
        params = EcsParams(params)
    alpha = float(params.alpha)
    if alpha == 0.0:
        raise DegenerateStateError("the entangled coherent state vanishes at alpha = 0")
    cutoff, mass = _resolve_cutoff("ecs", params, cutoff, tail_tol)
    d = cutoff.dim
    n = np.arange(d)
    nn, mm = np.meshgrid(n, n, indexing="ij")
    mean = alpha * alpha
    log_norm = -0.5 * math.log(2.0 * -math.expm1(-4 * mean))
    log_mag = (
        math.log(2.0) + log_norm - mean + (nn + mm) * math.log(alpha)
        - 0.5 * (gammaln(nn + 1) + gammaln(mm + 1))
    )
    # ((-1)^m - (-1)^n) / 2: +1 for odd n / even m, -1 for even n / odd m
    sign = ((-1.0) ** mm - (-1.0) ** nn) / 2.0
    amps = sign * np.exp(log_mag)
    return fock.pure_state(
        amps, cutoff, mass, family="ecs", offsets=default_offsets("ecs"), tail_tol=tail_tol
    )


def photon_subtracted(
    scheme: SubtractionScheme, r: float, cutoff=None, *, tail_tol: float = DEFAULT_TAIL_TOL
) -> TwoModeState:
    """Single-photon-subtracted squeezed vacuum from its Fock expansion.

    * asymmetric: ``(1-l^2) sum l^n sqrt(n+1) |n+1, n>``
    * symmetric: ``(1-l^2) sqrt((1-l^2)/(1+l^2)) sum l^n (n+1) |n, n>``
    * coherent: ``(1-l^2)/sqrt(2) sum l^n sqrt(n+1) (|n, n+1> + (-1)^k |n+1, n>)``
    """
    TmsvParams(r)
    family = scheme.family
    cutoff, mass = _resolve_cutoff(family, (scheme, r), cutoff, tail_tol)
    d = cutoff.dim
    lam = math.tanh(r)
    n = np.arange(d)
    geo = np.zeros(d)
    if lam == 0.0:
        geo[0] = 1.0
    else:
        geo = np.exp(n * math.log(lam))
    one_minus = _sech2(r)
    if scheme.variant == "symmetric":
        coeffs = one_minus * math.sqrt(one_minus / (1 + lam * lam)) * geo * (n + 1)
        amps = _diagonal_ket(coeffs, d)
    else:
        coeffs = (one_minus * geo * np.sqrt(n + 1))[: d - 1]
        if scheme.variant == "asymmetric":
            amps = _diagonal_ket(coeffs, d, shift=1)
        else:
            amps = (_diagonal_ket(coeffs, d, shift=1) * (-1) ** scheme.k
                    + _diagonal_ket(coeffs, d, shift=1).T) / math.sqrt(2)
    return fock.pure_state(
        amps, cutoff, mass, family=family, offsets=default_offsets(family), tail_tol=tail_tol
    )
