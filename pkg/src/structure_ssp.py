"""
Структурная подзадача (SSP): модальная система пластина/теплопроводность на окне.

  β' = γ
  γ' = −(γ − T_Δt V)/Δt − 2 diag(Ξ^s) β + 2 M_k α − 2 F(β) − 2δ E_k β
  α' = −diag(Ξ^h) α − M_k^T γ

Интегратор — RK4 на системе, расширенной интегральными переменными
∫‖γ − Tv‖², ∫‖γ‖², ∫‖Tv‖², ∫ α^T Ξ^h α: невязка энергетического тождества
окна при этом имеет тот же порядок, что и сам интегратор.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Optional
import logging
import math

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from src.errors import BlowUpError, DimensionMismatchError, UnknownNonlinearityError
from src.galerkin_bases import CoupledMatrices, PlateBasis

logger = logging.getLogger(__name__)

NONLINEARITIES = ("linear_zero", "cubic_quasilinear", "berger_type")


# ============================
# Состояния
# ============================


@dataclass
class PlateState:
    beta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, k: int, t: float = 0.0) -> "PlateState":
        return cls(beta=np.zeros(k), gamma=np.zeros(k), alpha=np.zeros(k), t=t)

    @classmethod
    def from_modes(cls, k: int, w0=(), v0=(), theta0=(), t: float = 0.0) -> "PlateState":
        """Проекции начальных данных, заданные амплитудами мод (недостающие — нули)"""
        def pad(vals) -> np.ndarray:
            out = np.zeros(k)
            vals = np.asarray(list(vals), float)
            if vals.size > k:
                raise DimensionMismatchError("more modal amplitudes than basis functions", k=k, given=int(vals.size))
            out[: vals.size] = vals
            return out

        return cls(beta=pad(w0), gamma=pad(v0), alpha=pad(theta0), t=t)

    @property
    def k(self) -> int:
        return int(self.beta.size)

    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.gamma)) and np.all(np.isfinite(self.alpha)))

    def copy(self) -> "PlateState":
        return PlateState(beta=self.beta.copy(), gamma=self.gamma.copy(), alpha=self.alpha.copy(), t=self.t)

    def displacement(self, plate: PlateBasis, x: np.ndarray) -> np.ndarray:
        return plate.synthesize(self.beta, x)


@dataclass(frozen=True)
class TraceHistory:
    """
    Модальные коэффициенты следа скорости жидкости v на предыдущем окне.

    Сдвиг T_Δt v(t) = v(t − shift); на первом окне — константа v(0).
    Между отсчётами — линейная интерполяция.
    """

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)  # (n_samples, k)
    shift: float = 0.0

    @classmethod
    def constant(cls, v0: np.ndarray, t0: float, t1: float) -> "TraceHistory":
        v0 = np.asarray(v0, float)
        return cls(times=np.array([t0, t1]), values=np.vstack([v0, v0]), shift=0.0)

    @classmethod
    def from_samples(cls, times: np.ndarray, values: np.ndarray, shift: float) -> "TraceHistory":
        times = np.asarray(times, float)
        values = np.asarray(values, float)
        if values.ndim != 2 or values.shape[0] != times.size:
            raise DimensionMismatchError("trace samples do not match sample times", times=int(times.size), shape=list(values.shape))
        return cls(times=times, values=values, shift=float(shift))

    @property
    def k(self) -> int:
        return int(self.values.shape[1])

    @property
    def knots(self) -> np.ndarray:
        """Моменты излома T_Δt v (для согласования подшагов интегратора)"""
        return self.times + self.shift

    def covers(self, t0: float, t1: float, tol: float = 1e-12) -> bool:
        lo, hi = self.knots[0], self.knots[-1]
        span = max(abs(t1 - t0), 1.0)
        return lo <= t0 + tol * span and hi >= t1 - tol * span

    def at(self, t: float) -> np.ndarray:
        s = t - self.shift
        return np.array([np.interp(s, self.times, self.values[:, j]) for j in range(self.k)])


# ============================
# Нелинейность
# ============================


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str = "linear_zero"
    q1: float = 1.0
    q2: float = 0.0

    def __post_init__(self):
        if self.kind not in NONLINEARITIES:
            raise UnknownNonlinearityError(f"unknown nonlinearity: {self.kind!r}", allowed=list(NONLINEARITIES))

    @classmethod
    def from_config(cls, plate_cfg) -> "NonlinearitySpec":
        return cls(kind=plate_cfg.nonlinearity, q1=plate_cfg.berger_q1, q2=plate_cfg.berger_q2)

    def witness(self) -> tuple[float, float]:
        """(κ, C*) для условия κ‖Δw‖² + Π(w) + C* ≥ 0"""
        if self.kind == "berger_type" and self.q2 > 0:
            return 0.0, self.q2**2 / (4.0 * self.q1)
        return 0.0, 0.0


def evaluate_nonlinearity(beta: np.ndarray, nl: NonlinearitySpec, plate: PlateBasis) -> np.ndarray:
    """Модальный вектор F_j = (F(w), s_j)"""
    beta = np.asarray(beta, float)
    if beta.size != plate.k:
        raise DimensionMismatchError("beta does not match plate basis", k=plate.k, given=int(beta.size))
    w = plate.quad.w
    if nl.kind == "linear_zero":
        return np.zeros(plate.k)
    if nl.kind == "cubic_quasilinear":
        s2 = plate.node_values[2]
        w2 = beta @ s2
        return s2 @ (w * w2**3)
    if nl.kind == "berger_type":
        s1 = plate.node_values[1]
        w1 = beta @ s1
        stretch = nl.q1 * float(np.dot(w, w1**2)) - nl.q2
        return stretch * (s1 @ (w * w1))
    raise UnknownNonlinearityError(f"unknown nonlinearity: {nl.kind!r}")


def potential(beta: np.ndarray, nl: NonlinearitySpec, plate: PlateBasis) -> float:
    """Π(w), градиент которого по β равен evaluate_nonlinearity"""
    beta = np.asarray(beta, float)
    w = plate.quad.w
    if nl.kind == "linear_zero":
        return 0.0
    if nl.kind == "cubic_quasilinear":
        w2 = beta @ plate.node_values[2]
        return 0.25 * float(np.dot(w, w2**4))
    if nl.kind == "berger_type":
        I = float(np.dot(w, (beta @ plate.node_values[1]) ** 2))
        return 0.25 * nl.q1 * I**2 - 0.5 * nl.q2 * I
    raise UnknownNonlinearityError(f"unknown nonlinearity: {nl.kind!r}")


def coercivity_value(beta: np.ndarray, nl: NonlinearitySpec, plate: PlateBasis) -> float:
    kappa, c_star = nl.witness()
    bending = float(np.dot(plate.xi_s, np.asarray(beta) ** 2))  # ‖w''‖² = Σ ξ_i β_i²
    return kappa * bending + potential(beta, nl, plate) + c_star


# ============================
# Правая часть и энергия
# ============================


def ssp_rhs(
    state: PlateState,
    v_shift: np.ndarray,
    mats: CoupledMatrices,
    nl: NonlinearitySpec,
    delta: float,
    dt_window: float,
    plate: PlateBasis,
) -> PlateState:
    """(β', γ', α') как PlateState (поле t не используется)"""
    k = mats.k
    if state.k != k or np.size(v_shift) != k or plate.k != k:
        raise DimensionMismatchError("state, trace and matrices must share k", k=k, state=state.k, trace=int(np.size(v_shift)))
    F = evaluate_nonlinearity(state.beta, nl, plate)
    dgamma = (
        -(state.gamma - v_shift) / dt_window
        - 2.0 * mats.Xi_s * state.beta
        + 2.0 * mats.M_k @ state.alpha
        - 2.0 * F
        - 2.0 * delta * mats.E_k @ state.beta
    )
    dalpha = -mats.Xi_h * state.alpha - mats.M_k.T @ state.gamma
    return PlateState(beta=state.gamma.copy(), gamma=dgamma, alpha=dalpha, t=state.t)


def structure_energy(state: PlateState, mats: CoupledMatrices, nl: NonlinearitySpec, plate: PlateBasis, delta: float) -> float:
    """S = ¼‖∂t w‖² + ½‖Δw‖² + Π(w) + ½‖θ‖² + ½δ‖∇³w‖²"""
    b = state.beta
    return float(
        0.25 * state.gamma @ state.gamma
        + 0.5 * np.dot(mats.Xi_s, b**2)
        + potential(b, nl, plate)
        + 0.5 * state.alpha @ state.alpha
        + 0.5 * delta * b @ mats.E_k @ b
    )


@dataclass(frozen=True)
class SspEnergyReport:
    S_start: float
    S_end: float
    SD: float
    gap_sq: float  # ∫‖∂t w − T v‖²
    wt_sq: float  # ∫‖∂t w‖²
    tv_sq: float  # ∫‖T v‖²
    dt: float
    coercivity_min: float

    @property
    def residual(self) -> float:
        c = 1.0 / (4.0 * self.dt)
        return self.S_end + self.SD + c * (self.gap_sq + self.wt_sq) - self.S_start - c * self.tv_sq


@dataclass(frozen=True)
class SspWindowOutput:
    state: PlateState
    times: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)  # (n+1, k)
    gamma: np.ndarray = field(repr=False)
    gamma_dot: np.ndarray = field(repr=False)
    energy: SspEnergyReport = None  # type: ignore[assignment]
    theta: Optional[np.ndarray] = field(default=None, repr=False)  # (n+1, k) температура в узлах

    def beta_at(self, t: np.ndarray) -> np.ndarray:
        return CubicHermiteSpline(self.times, self.beta, self.gamma, axis=0)(t)

    def gamma_at(self, t: np.ndarray) -> np.ndarray:
        return CubicHermiteSpline(self.times, self.gamma, self.gamma_dot, axis=0)(t)


def default_substeps(window: float, dt: float, mats: CoupledMatrices, delta: float, block: int = 1) -> int:
    """
    max(16, ceil(8·window/(Δt/4)), ceil(2·window·ω_max)), округлённое вверх до кратного block
    (block — число интервалов следа на окне).
    """
    e_max = float(np.max(np.linalg.eigvalsh(mats.E_k))) if mats.k else 0.0
    omega = math.sqrt(2.0 * (float(np.max(mats.Xi_s)) + delta * max(e_max, 0.0)))
    heat = float(np.max(mats.Xi_h))
    n = max(16, math.ceil(8.0 * window / (dt / 4.0)), math.ceil(2.0 * window * omega), math.ceil(window * heat))
    block = max(1, int(block))
    return int(math.ceil(n / block) * block)


def _pack(s: PlateState, q: np.ndarray) -> np.ndarray:
    return np.concatenate([s.beta, s.gamma, s.alpha, q])


def _unpack(y: np.ndarray, k: int, t: float) -> tuple[PlateState, np.ndarray]:
    return PlateState(beta=y[:k].copy(), gamma=y[k : 2 * k].copy(), alpha=y[2 * k : 3 * k].copy(), t=t), y[3 * k :].copy()


def ssp_step(
    state_in: PlateState,
    trace: TraceHistory,
    window: tuple[float, float],
    substeps: int,
    mats: CoupledMatrices,
    nl: NonlinearitySpec,
    plate: PlateBasis,
    delta: float,
    dt: Optional[float] = None,
) -> SspWindowOutput:
    """RK4 на окне; плотные отсчёты β, γ в узлах подшагов и отчёт по энергии окна"""
    t0, t1 = float(window[0]), float(window[1])
    dt = float(dt if dt is not None else t1 - t0)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if not trace.covers(t0, t1):
        raise DimensionMismatchError("trace history does not cover the window", window=[t0, t1], knots=[float(trace.knots[0]), float(trace.knots[-1])])
    k = mats.k
    h = (t1 - t0) / substeps

    def f(t: float, y: np.ndarray) -> np.ndarray:
        s, _ = _unpack(y, k, t)
        tv = trace.at(t)
        d = ssp_rhs(s, tv, mats, nl, delta, dt, plate)
        g = s.gamma - tv
        dq = np.array([g @ g, s.gamma @ s.gamma, tv @ tv, float(np.dot(mats.Xi_h, s.alpha**2))])
        return _pack(d, dq)

    y = _pack(state_in, np.zeros(4))
    times = t0 + h * np.arange(substeps + 1)
    times[-1] = t1
    betas = np.empty((substeps + 1, k))
    gammas = np.empty_like(betas)
    gdots = np.empty_like(betas)
    thetas = np.empty_like(betas)
    betas[0], gammas[0], thetas[0] = state_in.beta, state_in.gamma, state_in.alpha
    coercivity = coercivity_value(state_in.beta, nl, plate)
    k1 = f(t0, y)
    gdots[0] = k1[k : 2 * k]
    for m in range(substeps):
        t = times[m]
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise BlowUpError("non-finite structure state", t=float(times[m + 1]), substep=m + 1)
        k1 = f(times[m + 1], y)
        betas[m + 1], gammas[m + 1], thetas[m + 1] = y[:k], y[k : 2 * k], y[2 * k : 3 * k]
        gdots[m + 1] = k1[k : 2 * k]
        coercivity = min(coercivity, coercivity_value(y[:k], nl, plate))

    out, q = _unpack(y, k, t1)
    if coercivity < -1e-12:
        logger.warning(f"[ssp] coercivity witness violated: min value {coercivity:.3e}")
    report = SspEnergyReport(
        S_start=structure_energy(state_in, mats, nl, plate, delta),
        S_end=structure_energy(out, mats, nl, plate, delta),
        SD=float(q[3]),
        gap_sq=float(q[0]),
        wt_sq=float(q[1]),
        tv_sq=float(q[2]),
        dt=dt,
        coercivity_min=float(coercivity),
    )
    logger.debug(f"[ssp] window [{t0:.6g}, {t1:.6g}] substeps={substeps} residual={report.residual:.3e}")
    return SspWindowOutput(state=out, times=times, beta=betas, gamma=gammas, gamma_dot=gdots, energy=report, theta=thetas)
