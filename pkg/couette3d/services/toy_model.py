"""
The six-amplitude resonance toy model and its growth predictions.

Amplitudes are ordered (Q2_k, Q2_k', Q3_k', Q3_k, Q2_0, Q3_0).  Every implicit
constant of the model is set to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import special, stats

from couette3d.core import ParameterRangeError, get_logger, get_settings
from couette3d.schemas.params import ToyParams
from couette3d.services import multipliers

logger = get_logger(__name__)

COMPONENTS = ("Q2k", "Q2kp", "Q3kp", "Q3k", "Q20", "Q30")


@dataclass(frozen=True)
class ToyState:
    Q2k: float = 0.0
    Q2kp: float = 0.0
    Q3kp: float = 0.0
    Q3k: float = 0.0
    Q20: float = 0.0
    Q30: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.Q2k, self.Q2kp, self.Q3kp, self.Q3k, self.Q20, self.Q30], dtype=float)

    @classmethod
    def from_array(cls, values) -> "ToyState":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class ToyTrajectory:
    t: np.ndarray
    states: np.ndarray  # (n, 6)

    def component(self, name: str) -> np.ndarray:
        return self.states[:, COMPONENTS.index(name)]

    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(self.states.max(axis=1))


def _streak_factor(t: float, p: ToyParams) -> float:
    return max(p.eps * t, p.c0)


def _enhanced_damping(t: float, p: ToyParams) -> float:
    """<nu t^3>^-alpha."""
    return (1.0 + (p.nu * t ** 3) ** 2) ** (-0.5 * p.alpha)


def toy_rhs_array(y: np.ndarray, t: float, p: ToyParams) -> np.ndarray:
    q2k, q2kp, q3kp, q3k, q20, q30 = y
    sw = p.switches
    k, kp, eta = p.k, p.kprime, p.eta
    shear = abs(eta - k * t)
    resonant = k / (k + shear)
    mixing = k * k + shear * shear
    streak = _streak_factor(t, p)
    forcing = p.eps / mixing * _enhanced_damping(t, p)

    d = np.zeros(6)
    d[0] = streak * resonant * q3k
    if sw.stretching:
        d[3] = resonant * q3k + resonant * q2k
    if sw.nonresonant:
        d[1] = streak * kp / math.sqrt(1.0 + (abs(kp) + t) ** 2) * q3kp
        d[2] = t ** 3 * forcing * q2k
    if sw.zero_modes:
        d[4] = p.eps * q30 + t ** 2 * forcing * q2k
        d[5] = p.eps * q30 + t ** 3 * forcing * q2k
    if sw.dissipation:
        d[:4] -= p.nu * mixing * y[:4]
        d[4:] -= p.nu * eta * eta * y[4:]
    return d


def toy_rhs(state: ToyState, t: float, params: ToyParams) -> ToyState:
    """Tendency of the final toy model (with the switches of ``params``)."""
    if t < 1.0:
        raise ParameterRangeError(f"the toy model is posed for t >= 1, got {t}")
    return ToyState.from_array(toy_rhs_array(state.as_array(), t, params))


def resonant_fourier_rhs(q2: float, q3: float, t: float, params: ToyParams) -> tuple[float, float]:
    """Two-amplitude resonant model with the undimensionalised kernel (eta - kt) k / |k, eta - kt, l|^2."""
    k, l, eta = params.k, params.l, params.eta
    mixing = k * k + l * l + (eta - k * t) ** 2
    kernel = (eta - k * t) * k / mixing
    return (
        _streak_factor(t, params) * kernel * q3,
        kernel * q3 + k * l / mixing * q2,
    )


def _rk4(y: np.ndarray, t: float, h: float, p: ToyParams) -> np.ndarray:
    k1 = toy_rhs_array(y, t, p)
    k2 = toy_rhs_array(y + 0.5 * h * k1, t + 0.5 * h, p)
    k3 = toy_rhs_array(y + 0.5 * h * k2, t + 0.5 * h, p)
    k4 = toy_rhs_array(y + h * k3, t + h, p)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_toy(
    params: ToyParams,
    t0: float,
    t1: float,
    init: ToyState,
    dt: float = 0.01,
    dt_out: float | None = None,
) -> ToyTrajectory:
    """RK4 trajectory from t0 to t1; steps are split at the kink t = c0/eps of max(eps t, c0)."""
    if t0 < 1.0:
        raise ParameterRangeError(f"the toy model is posed for t >= 1, got t0={t0}")
    if t1 < t0:
        raise ParameterRangeError(f"t1={t1} precedes t0={t0}")
    if dt <= 0:
        raise ParameterRangeError(f"dt must be positive, got {dt}")
    dt_out = dt if dt_out is None else dt_out

    breaks = [t0]
    if params.eps > 0:
        kink = params.c0 / params.eps
        if t0 < kink < t1:
            breaks.append(kink)
    n_out = max(1, int(round((t1 - t0) / dt_out))) if t1 > t0 else 0
    outputs = [t0 + i * (t1 - t0) / n_out for i in range(1, n_out + 1)] if n_out else []
    breaks = sorted(set(breaks + outputs))

    y = init.as_array()
    ts, states = [t0], [y.copy()]
    out_set = set(outputs)
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / n
        t = a
        for _ in range(n):
            y = _rk4(y, t, h, params)
            t += h
        if not np.all(np.isfinite(y)):
            raise ParameterRangeError(f"toy trajectory diverged before t={b}")
        negative = y < 0
        if np.any(negative & (y < -1e-12 * max(1.0, float(np.abs(y).max())))):
            logger.warning(f"Toy amplitudes went negative at t={b:.4g}; clipping")
        y = np.where(negative, 0.0, y)
        if b in out_set:
            ts.append(b)
            states.append(y.copy())
    return ToyTrajectory(np.array(ts), np.array(states))


def interval_growth_ratio(eta: float, k: int) -> float:
    """exp of int (1 + |t - eta/k|)^-1 over [eta/k - eta/k^2, eta/k + eta/k^2] = (1 + eta/k^2)^2."""
    if k < 1 or k * k > eta:
        raise ParameterRangeError(f"need 1 <= k and k^2 <= eta, got k={k}, eta={eta}")
    return (1.0 + eta / (k * k)) ** 2


def stirling_total_growth(eta: float) -> float:
    """log prod_{k=1}^{E(sqrt eta)} eta / k^2, through log-Gamma for non-square eta."""
    if eta < 1.0:
        raise ParameterRangeError(f"need eta >= 1, got {eta}")
    n = multipliers.E(math.sqrt(eta))
    return n * math.log(eta) - 2.0 * float(special.gammaln(n + 1))


def stablesuper_profile(t, eta: float, k: int, t_start: float) -> np.ndarray:
    """exp int_{t_start}^t (1 + |tau - eta/k|)^-1 dtau."""
    c = eta / k
    t = np.asarray(t, dtype=float)

    def antiderivative(x):
        return np.sign(x - c) * np.log1p(np.abs(x - c))

    return np.exp(antiderivative(t) - antiderivative(t_start))


def supersolution_constant(traj: ToyTrajectory, eta: float, kappa: float) -> float:
    """Smallest K with every component <= K * max(initial) * w(t)/w(t_start) along the trajectory."""
    base = float(traj.states[0].max())
    if base == 0.0:
        return 0.0
    log_w0 = float(multipliers.log_w(traj.t[0], eta, kappa))
    profile = np.exp(multipliers.log_w(traj.t, eta, kappa) - log_w0)
    return float(np.max(traj.states.max(axis=1) / (base * profile)))


@dataclass(frozen=True)
class SweepResult:
    eta: float
    k: int
    t_start: float
    t_end: float
    K: float
    growth: float


def run_resonant_interval(params: ToyParams, kappa: float = 4.0, dt: float = 0.02) -> SweepResult:
    """Integrate from unit amplitudes across the resonant interval of (k, eta) and fit K."""
    interval = multipliers.resonant_interval(params.k, params.eta)
    if interval is None:
        interval = multipliers.critical_schedule(params.eta).interval(params.k)
    if interval is None:
        raise ParameterRangeError(f"no critical interval for k={params.k}, eta={params.eta}")
    t_start, t_end = max(interval[0], 1.0), interval[1]
    traj = integrate_toy(params, t_start, t_end, ToyState(*([1.0] * 6)), dt=dt, dt_out=(t_end - t_start) / 200)
    K = supersolution_constant(traj, params.eta, kappa)
    growth = float(traj.states[-1].max() / traj.states[0].max())
    logger.info(f"Toy interval eta={params.eta} k={params.k}: K={K:.4g} growth={growth:.4g}")
    return SweepResult(params.eta, params.k, t_start, t_end, K, growth)


def sweep(params_list: Sequence[ToyParams], kappa: float = 4.0, dt: float = 0.02, n_jobs: int | None = None) -> list[SweepResult]:
    """Independent resonant-interval runs in parallel; results keep the input order."""
    n_jobs = n_jobs if n_jobs is not None else get_settings().threads
    return Parallel(n_jobs=n_jobs)(delayed(run_resonant_interval)(p, kappa, dt) for p in params_list)


def stirling_slope(etas: Sequence[float]) -> float:
    """Slope of the cumulative log-growth against sqrt(eta); tends to 2."""
    etas = np.asarray(etas, dtype=float)
    if etas.size < 2:
        raise ParameterRangeError("need at least two frequencies for a slope")
    growth = np.array([stirling_total_growth(e) for e in etas])
    return float(stats.linregress(np.sqrt(etas), growth).slope)
