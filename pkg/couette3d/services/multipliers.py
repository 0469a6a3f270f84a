"""
Norm multipliers: critical times, the resonance weight w, the pressure weight
w_L, the dissipation clock D, the Gevrey radius lambda(t), the A families and
the dissipation (CK) functionals built from them.

Everything that can underflow (w(1, eta) ~ e^{-mu sqrt(eta)}) is evaluated in
log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import integrate, special, stats

from couette3d.core import ParameterRangeError, get_logger
from couette3d.schemas.params import MultiplierParams

logger = get_logger(__name__)

Family = Literal["Q", "1", "2", "3", "A", "nu", "nu1", "nu2", "nu3"]
FAMILIES: tuple[str, ...] = ("Q", "1", "2", "3", "A", "nu", "nu1", "nu2", "nu3")


def japanese(*components) -> np.ndarray:
    """<v> = sqrt(1 + |v|^2) with |v| the l1 magnitude."""
    magnitude = sum(np.abs(np.asarray(c, dtype=float)) for c in components)
    return np.sqrt(1.0 + magnitude ** 2)


def l1_magnitude(k, eta, l) -> np.ndarray:
    return np.abs(k) + np.abs(eta) + np.abs(l)


# -- critical times ----------------------------------------------------------

def E(x: float) -> int:
    """Integer part."""
    return int(math.floor(x + 1e-12))


def critical_time(k: int, eta: float) -> float | None:
    """
    t_{k,eta}; ``None`` when the critical interval is empty.

    t_{0,eta} = 2|eta| and, for 1 <= |k| <= E(sqrt|eta|) with k eta > 0,
    t_{k,eta} = |eta/k| - |eta| / (2|k|(|k|+1)).
    """
    if k == 0:
        return 2.0 * abs(eta)
    if k * eta <= 0 or abs(k) > E(math.sqrt(abs(eta))):
        return None
    ak, ae = abs(k), abs(eta)
    value = ae / ak - ae / (2.0 * ak * (ak + 1))
    return value


@dataclass(frozen=True)
class CriticalSchedule:
    """Critical times and intervals of one eta > 0."""

    eta: float
    kmax: int
    times: tuple[float, ...]  # t_{0}, t_{1}, ..., t_{kmax}

    def interval(self, k: int) -> tuple[float, float] | None:
        """I_{k,eta} = [t_k, t_{k-1}]."""
        if not 1 <= k <= self.kmax:
            return None
        return (self.times[k], self.times[k - 1])

    def resonant_interval(self, k: int) -> tuple[float, float] | None:
        """The interval I_{k,eta} when 2 sqrt(eta) <= t_{k,eta}, else ``None``."""
        bounds = self.interval(k)
        if bounds is None or 2.0 * math.sqrt(self.eta) > bounds[0]:
            return None
        return bounds

    def intervals(self) -> list[tuple[float, float]]:
        return [self.interval(k) for k in range(1, self.kmax + 1)]


def critical_schedule(eta: float) -> CriticalSchedule:
    eta = abs(eta)
    kmax = E(math.sqrt(eta))
    times = [2.0 * eta] + [critical_time(k, eta) for k in range(1, kmax + 1)]
    return CriticalSchedule(eta=eta, kmax=kmax, times=tuple(times))


def resonant_interval(k: int, eta: float) -> tuple[float, float] | None:
    if k * eta <= 0:
        return None
    return critical_schedule(eta).resonant_interval(abs(k))


# -- the resonance weight ----------------------------------------------------

@dataclass(frozen=True)
class WProfile:
    """Breakpoint table of log w_bar for one (|eta|, kappa)."""

    eta: float
    kappa: float
    kmax: int
    t_left: np.ndarray      # t_{k}, k = 1..kmax
    t_right: np.ndarray     # t_{k-1}
    center: np.ndarray      # eta / k
    a: np.ndarray           # a_{k,eta}
    b: np.ndarray           # b_{k,eta}
    log_right: np.ndarray   # log w_bar(t_{k-1})
    log_center: np.ndarray  # log w_bar(eta / k)

    @property
    def log_floor(self) -> float:
        """log w_bar on [0, t_{kmax}]."""
        if self.kmax == 0:
            return 0.0
        return float(self.log_center[-1] - (1.0 + self.kappa) * math.log(self.eta / self.kmax ** 2))

    def locate(self, t: np.ndarray) -> np.ndarray:
        """Index k-1 of the interval containing t, -1 before t_kmax and kmax after 2 eta."""
        if self.kmax == 0:
            return np.where(t >= 2.0 * self.eta, 0, -1)
        bounds = np.concatenate([self.t_left[::-1], [2.0 * self.eta]])
        pos = np.searchsorted(bounds, t, side="right") - 1
        idx = np.where(pos < 0, -1, self.kmax - 1 - pos)
        return np.where(pos >= self.kmax, self.kmax, idx)


@lru_cache(maxsize=4096)
def w_profile(eta: float, kappa: float) -> WProfile:
    """Backward recursion of w_bar from w_bar = 1 at t >= 2 eta over k = 1..E(sqrt eta)."""
    eta = abs(float(eta))
    kmax = E(math.sqrt(eta)) if eta > 0 else 0
    ks = np.arange(1, kmax + 1, dtype=float)
    if kmax:
        sched = critical_schedule(eta)
        t_left = np.array(sched.times[1:])
        t_right = np.array(sched.times[:-1])
    else:
        t_left = t_right = np.zeros(0)
    ratio = ks ** 2 / eta if kmax else ks
    b = np.where(ks == 1, 1.0 - 1.0 / eta if eta else 0.0, 2.0 * (ks - 1) / ks * (1.0 - ratio))
    a = 2.0 * (ks + 1) / ks * (1.0 - ratio)
    log_right = np.zeros(kmax)
    log_center = np.zeros(kmax)
    current = 0.0
    for i in range(kmax):
        log_right[i] = current
        log_center[i] = current + kappa * math.log(ratio[i])
        current += (1.0 + 2.0 * kappa) * math.log(ratio[i])
    center = eta / ks if kmax else ks
    return WProfile(eta, kappa, kmax, t_left, t_right, center, a, b, log_right, log_center)


def log_w_bar(t, eta: float, kappa: float) -> np.ndarray:
    """log w_bar(t, eta); w_bar is the non-decreasing piecewise weight, 1 for t >= 2|eta|."""
    t = np.asarray(t, dtype=float)
    prof = w_profile(abs(float(eta)), float(kappa))
    out = np.zeros_like(t)
    if prof.kmax == 0:
        return out
    idx = prof.locate(t)
    out = np.where(idx < 0, prof.log_floor, out)
    inside = (idx >= 0) & (idx < prof.kmax)
    j = np.where(inside, idx, 0)
    c = prof.center[j]
    right = t >= c
    k = j + 1.0
    log_r = prof.kappa * np.log((k * k / prof.eta) * (1.0 + prof.b[j] * np.abs(t - c))) + prof.log_right[j]
    log_l = -(1.0 + prof.kappa) * np.log1p(prof.a[j] * np.abs(t - c)) + prof.log_center[j]
    return np.where(inside, np.where(right, log_r, log_l), out)


def w_bar(t, eta: float, kappa: float) -> np.ndarray:
    return np.exp(log_w_bar(t, eta, kappa))


def log_extra_loss(t, eta: float, kappa: float) -> np.ndarray:
    """-kappa (2 sqrt(eta) - t)_+ - kappa eta (1/max(t, sqrt(eta)) - 1/(2 eta))_+."""
    t = np.asarray(t, dtype=float)
    eta = abs(float(eta))
    if eta == 0.0:
        return np.zeros_like(t)
    root = math.sqrt(eta)
    first = np.maximum(2.0 * root - t, 0.0)
    second = eta * np.maximum(1.0 / np.maximum(t, root) - 1.0 / (2.0 * eta), 0.0)
    return -kappa * (first + second)


def log_w(t, eta: float, kappa: float) -> np.ndarray:
    return log_w_bar(t, eta, kappa) + log_extra_loss(t, eta, kappa)


def w_full(t, eta: float, kappa: float) -> np.ndarray:
    """w = w_bar times the steady Gevrey-2 losses over [0, 2|eta|]."""
    return np.exp(log_w(t, eta, kappa))


def dtw_log_derivative(t, eta: float, kappa: float) -> np.ndarray:
    """d_t w / w from the piecewise closed form (right-derivative at breakpoints)."""
    t = np.asarray(t, dtype=float)
    eta = abs(float(eta))
    out = np.zeros_like(t)
    if eta == 0.0:
        return out
    prof = w_profile(eta, float(kappa))
    if prof.kmax:
        idx = prof.locate(t)
        inside = (idx >= 0) & (idx < prof.kmax)
        j = np.where(inside, idx, 0)
        c = prof.center[j]
        d = np.abs(t - c)
        right = t >= c
        on_r = kappa * prof.b[j] / (1.0 + prof.b[j] * d)
        on_l = (1.0 + kappa) * prof.a[j] / (1.0 + prof.a[j] * d)
        out = np.where(inside, np.where(right, on_r, on_l), 0.0)
    root = math.sqrt(eta)
    out = out + kappa * (t < 2.0 * root)
    out = out + np.where((t >= root) & (t < 2.0 * eta), kappa * eta / np.maximum(t, 1e-300) ** 2, 0.0)
    return out


# -- the pressure weight -----------------------------------------------------

def log_w_L(t, k, eta, l, kappa: float) -> np.ndarray:
    """kappa <l>/|k,l| sign(k) [arctan((kt - eta)/|k,l|) - arctan((k - eta)/|k,l|)]; zero for k = 0."""
    t, k, eta, l = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, k, eta, l)))
    a = np.hypot(k, l)
    safe = np.where(a > 0, a, 1.0)
    value = kappa * (japanese(l) / safe) * np.sign(k) * (
        np.arctan((k * t - eta) / safe) - np.arctan((k - eta) / safe)
    )
    return np.where(k == 0, 0.0, value)


def w_L_value(t, k, eta, l, kappa: float) -> np.ndarray:
    if np.any(np.asarray(t) < 1.0):
        raise ParameterRangeError("w_L is normalized at t = 1 and defined for t >= 1")
    return np.exp(log_w_L(t, k, eta, l, kappa))


def wL_log_derivative(t, k, eta, l, kappa: float) -> np.ndarray:
    """kappa |k| <l> / (k^2 + l^2 + |eta - kt|^2)."""
    t, k, eta, l = (np.asarray(v, dtype=float) for v in (t, k, eta, l))
    denom = k ** 2 + l ** 2 + (eta - k * t) ** 2
    return np.where(k == 0, 0.0, kappa * np.abs(k) * japanese(l) / np.where(denom > 0, denom, 1.0))


def wL_total_variation(k: int, eta: float, l: int) -> float:
    """int_0^infty kappa^-1 d_t log w_L dt, in closed form."""
    if k == 0:
        return 0.0
    a = math.hypot(k, l)
    return japanese(l).item() / a * (math.pi / 2.0 + math.atan(math.copysign(1.0, k) * eta / a))


def w_L_by_ode(t_end: float, k: int, eta: float, l: int, kappa: float, rtol: float = 1e-12) -> float:
    """Direct integration of d_t w_L = (d_t w_L / w_L) w_L from w_L(1) = 1."""
    sol = integrate.solve_ivp(
        lambda t, y: wL_log_derivative(t, k, eta, l, kappa) * y,
        (1.0, t_end),
        [1.0],
        method="DOP853",
        rtol=rtol,
        atol=1e-14,
    )
    return float(sol.y[0, -1])


# -- dissipation clock and Gevrey radius ----------------------------------------

def D_value(t, eta, nu: float, alpha: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    ae = np.abs(np.asarray(eta, dtype=float))
    return nu * ae ** 3 / (3.0 * alpha) + nu * np.maximum(t ** 3 - 8.0 * ae ** 3, 0.0) / (24.0 * alpha)


def _gevrey_power(s: float) -> float:
    return min(2.0 * s, 1.5)


def _radius_antiderivative(tau, q: float):
    """int_0^tau (1 + x^2)^(-q) dx."""
    tau = np.asarray(tau, dtype=float)
    return tau * special.hyp2f1(0.5, q, 1.5, -tau * tau)


def radius_drop(t, s: float):
    """int_1^t <tau>^{-min(2s, 3/2)} dtau in closed form."""
    q = 0.5 * _gevrey_power(s)
    return _radius_antiderivative(t, q) - _radius_antiderivative(1.0, q)


def radius_drop_by_quadrature(t: float, s: float) -> float:
    p = _gevrey_power(s)
    value, _ = integrate.quad(lambda x: (1.0 + x * x) ** (-0.5 * p), 1.0, t, epsabs=1e-13, epsrel=1e-13, limit=200)
    return value


def lambda_initial(params: MultiplierParams) -> float:
    return 0.75 * params.lambda0 + 0.25 * params.lambda_prime


def lambda_at_infinity(params: MultiplierParams) -> float:
    q = 0.5 * _gevrey_power(params.s)
    total = 0.5 * special.beta(0.5, q - 0.5) - float(_radius_antiderivative(1.0, q))
    return lambda_initial(params) - params.delta_lambda * total


def lambda_of_t(t, params: MultiplierParams):
    t = np.asarray(t, dtype=float)
    if np.any(t < 1.0):
        raise ParameterRangeError("the Gevrey radius is defined for t >= 1")
    return lambda_initial(params) - params.delta_lambda * radius_drop(t, params.s)


def lambda_dot(t, params: MultiplierParams):
    t = np.asarray(t, dtype=float)
    return -params.delta_lambda * (1.0 + t * t) ** (-0.5 * _gevrey_power(params.s))


# -- mu calibration and fits -----------------------------------------------------

DEFAULT_MU_SAMPLES = tuple(float(10 ** e) for e in (2, 3, 4, 5, 6))


def fit_mu(kappa: float, eta_samples=DEFAULT_MU_SAMPLES, margin: float = 0.1) -> float:
    """mu = (1 + margin) max 2 log(1/w(1, eta)) / sqrt(eta) over the samples."""
    ratios = [2.0 * -float(log_w(1.0, eta, kappa)) / math.sqrt(eta) for eta in eta_samples]
    return (1.0 + margin) * max(ratios)


def resolved_mu(params: MultiplierParams) -> float:
    return params.mu if params.mu is not None else _cached_mu(params.kappa)


@lru_cache(maxsize=32)
def _cached_mu(kappa: float) -> float:
    mu = fit_mu(kappa)
    logger.info(f"Calibrated mu={mu:.6g} for kappa={kappa}")
    return mu


@dataclass(frozen=True)
class LossFit:
    exponent: float
    prefactor: float
    r2: float


def fit_total_loss(kappa: float, etas) -> LossFit:
    """Regress log(log 1/w(1, eta)) on log eta."""
    etas = np.asarray(etas, dtype=float)
    losses = np.array([-float(log_w(1.0, eta, kappa)) for eta in etas])
    res = stats.linregress(np.log(etas), np.log(losses))
    return LossFit(exponent=float(res.slope), prefactor=float(math.exp(res.intercept)), r2=float(res.rvalue ** 2))


def dtw_band(kappa: float, etas, samples_per_interval: int = 64) -> float:
    """Smallest B with (d_t w / w) / [kappa/(1+|eta/k - t|) + kappa eta/t^2] in [1/B, B] on resonant intervals."""
    lo, hi = math.inf, 0.0
    for eta in etas:
        sched = critical_schedule(eta)
        for k in range(1, sched.kmax + 1):
            interval = sched.resonant_interval(k)
            if interval is None:
                continue
            ts = np.linspace(interval[0], interval[1], samples_per_interval, endpoint=False)
            reference = kappa / (1.0 + np.abs(eta / k - ts)) + kappa * eta / ts ** 2
            ratio = dtw_log_derivative(ts, eta, kappa) / reference
            lo, hi = min(lo, float(ratio.min())), max(hi, float(ratio.max()))
    if hi == 0.0:
        return math.nan
    return max(hi, 1.0 / lo)


def w_ratio_constant(kappa: float, samples) -> float:
    """Smallest K with log(w(t, eta)/w(t, xi)) <= K |eta - xi|^(1/2) over (t, eta, xi) samples."""
    best = 0.0
    for t, eta, xi in samples:
        if eta == xi:
            continue
        gap = float(log_w(t, eta, kappa) - log_w(t, xi, kappa))
        best = max(best, gap / math.sqrt(abs(eta - xi)))
    return best


# -- the A families --------------------------------------------------------------

def _low_frequency(t, eta, l, power: float) -> np.ndarray:
    return np.minimum(1.0, japanese(eta, l) ** power / np.asarray(t, dtype=float) ** power)


def log_A_value(family: str, t, k, eta, l, params: MultiplierParams) -> np.ndarray:
    """log of the multiplier ``family`` at (t, k, eta, l); -inf where it vanishes."""
    if family not in FAMILIES:
        raise ParameterRangeError(f"unknown multiplier family '{family}'")
    t = np.asarray(t, dtype=float)
    if np.any(t < 1.0):
        raise ParameterRangeError("multipliers are defined for t >= 1")
    k, eta, l = (np.asarray(v, dtype=float) for v in (k, eta, l))
    kappa = params.kappa
    lam = lambda_of_t(t, params)
    gevrey = lam * l1_magnitude(k, eta, l) ** params.s
    nonzero = k != 0

    if family in ("Q", "1", "2", "3", "A"):
        kk = np.zeros_like(k) if family == "A" else k
        base = (
            lam * l1_magnitude(kk, eta, l) ** params.s
            + params.sigma * np.log(japanese(kk, eta, l))
            + resolved_mu(params) * np.sqrt(np.abs(eta))
            - _log_w_grid(t, eta, kappa)
            - log_w_L(t, kk, eta, l, kappa)
        )
        if family == "Q":
            return base
        if family == "A":
            return base + 2.0 * np.log(japanese(eta, l))
        power = {"1": 1.0 + params.delta1, "2": 1.0, "3": 2.0}[family]
        factor = np.where(nonzero, _low_frequency(t, eta, l, power), 1.0)
        out = base + np.log(factor)
        if family == "1":
            out = out - np.log(japanese(t))
        return out

    d = D_value(t, eta, params.nu, params.alpha)
    base = (
        gevrey
        + params.beta * np.log(japanese(k, eta, l))
        + params.alpha * np.log(japanese(d))
        - log_w_L(t, k, eta, l, kappa)
    )
    if family == "nu1":
        base = base + np.log(_low_frequency(t, eta, l, 1.0 + params.delta1)) - np.log(japanese(t))
    elif family == "nu2":
        base = base + np.log(_low_frequency(t, eta, l, params.delta1))
    elif family == "nu3":
        base = base + np.log(_low_frequency(t, eta, l, 2.0))
    return np.where(nonzero, base, -np.inf)


def _log_w_grid(t, eta, kappa: float) -> np.ndarray:
    """log w(t, eta) for an array of eta values (memoized per |eta|)."""
    t, eta = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(eta, dtype=float))
    out = np.empty(t.shape)
    flat_t, flat_eta, flat_out = t.ravel(), np.abs(eta).ravel(), out.reshape(-1)
    for value in np.unique(flat_eta):
        sel = flat_eta == value
        flat_out[sel] = log_w(flat_t[sel], float(value), kappa)
    return out


def A_value(family: str, t, k, eta, l, params: MultiplierParams) -> np.ndarray:
    return np.exp(log_A_value(family, t, k, eta, l, params))


# -- norms and dissipation functionals ----------------------------------------------

def _mode_arrays(field):
    g = field.grid
    shape = g.spec.spectral_shape
    k = np.broadcast_to(g.k, shape)
    eta = np.broadcast_to(g.eta, shape)
    l = np.broadcast_to(g.l, shape)
    return k, eta, l, np.broadcast_to(g.hermitian_weight, shape)


def gevrey_norm(coeffs: np.ndarray, grid, lam: float, sigma: float, s: float) -> float:
    """
    ||e^{lam |k,eta,l|^s} <k,eta,l>^sigma f|| in coefficient form.

    Each real Fourier pair is counted once, i.e. the value is the L^2 based norm
    divided by sqrt(2 deta).
    """
    shape = grid.spec.spectral_shape
    k = np.broadcast_to(grid.k, shape)
    eta = np.broadcast_to(grid.eta, shape)
    l = np.broadcast_to(grid.l, shape)
    weight = np.exp(2.0 * lam * l1_magnitude(k, eta, l) ** s) * japanese(k, eta, l) ** (2.0 * sigma)
    herm = np.broadcast_to(grid.hermitian_weight, shape)
    return math.sqrt(0.5 * float(np.sum(herm * weight * np.abs(coeffs) ** 2)))


@dataclass(frozen=True)
class CKFunctionals:
    CK_lambda: float
    CK_w: float
    CK_wL: float
    CK_L: float
    dissipation: float


def ck_functionals(field, family: str, t: float, params: MultiplierParams, component: int = 0) -> CKFunctionals:
    """
    Dissipation energies of one component of a shear-frame field measured with ``family``.

    CK_lambda is reported as |lambda'| ||(|grad|^{s/2}) A f||^2 (non-negative).
    Norms are in coefficient form (see :func:`gevrey_norm`).
    """
    f = field.coeffs[component]
    k, eta, l, herm = _mode_arrays(field)
    amp2 = 0.5 * herm * np.abs(f) ** 2
    log_a = log_A_value(family, t, k, eta, l, params)
    weighted = np.where(np.isfinite(log_a), amp2 * np.exp(2.0 * np.where(np.isfinite(log_a), log_a, 0.0)), 0.0)

    k2 = field.laplacian_symbol() if field.frame == "shear" else (k ** 2 + eta ** 2 + l ** 2)
    k2 = np.broadcast_to(k2, weighted.shape)
    dissipation = params.nu * float(np.sum(k2 * weighted))
    ck_lambda = float(abs(lambda_dot(t, params))) * float(np.sum(l1_magnitude(k, eta, l) ** params.s * weighted))
    if family.startswith("nu"):
        ck_w = 0.0
    else:
        dtw = np.empty(weighted.shape)
        for value in np.unique(np.abs(eta)):
            sel = np.abs(eta) == value
            dtw[sel] = dtw_log_derivative(np.full(int(sel.sum()), t), float(value), params.kappa)
        ck_w = float(np.sum(dtw * weighted))
    ck_wl = 0.0 if family == "A" else float(np.sum(wL_log_derivative(t, k, eta, l, params.kappa) * weighted))
    active = (k != 0) & (t >= japanese(eta, l))
    ck_l = float(np.sum(np.where(active, weighted, 0.0))) / t
    return CKFunctionals(ck_lambda, ck_w, ck_wl, ck_l, dissipation)
