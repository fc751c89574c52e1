"""
Энергетические функционалы и проверка тождеств/неравенств на дискретных траекториях.

Основные функции:
- compute_ledger() - все энергии и мгновенные диссипации состояния
- korn_like_lower_bound() - μ‖∇u‖² + (μ+λ)‖∇·u‖² ≥ c(λ,μ)‖∇u‖²
- entropy_monitor() - ∫ J r ln r
- inequality_verdicts() - тождества окон, телескопическая оценка, масса
- physical_kinetic_energy() - кинетическая энергия через физическую область
"""
from __future__ import annotations
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence
import logging
import math

import numpy as np
from scipy.integrate import trapezoid

from src.continuity import diffusive_dissipation, make_frame
from src.errors import DensityPositivityError
from src.fluid_fsp import FluidState, FspTables, PressureLaw, assemble_mass_matrix, transformed_basis_gradients
from src.galerkin_bases import CoupledMatrices, FluidBasis
from src.geometry_ale import AleMap, push_forward_samples
from src.structure_ssp import NonlinearitySpec, PlateState, potential

logger = logging.getLogger(__name__)

# Фиксированный порядок колонок ledger.csv
LEDGER_COLUMNS = [
    "step",
    "t",
    "kinetic",
    "internal",
    "artificial_internal",
    "plate_kinetic_half",
    "plate_kinetic_quarter",
    "bending",
    "potential",
    "heat",
    "regularizer",
    "DF",
    "DS",
    "FD_eps",
    "fluid_energy",
    "structure_energy",
    "total",
    "mass",
    "entropy",
    "min_J",
    "interface_length",
    "SD_cum",
    "FD_cum",
    "penalty_cum",
]


@dataclass(frozen=True)
class EnergyLedger:
    t: float
    kinetic: float  # ½∫J r|U|²
    internal: float  # ∫J r^γ/(γ−1)
    artificial_internal: float  # δ∫J r^a/(a−1)
    plate_kinetic_half: float  # ½‖∂t w‖²
    plate_kinetic_quarter: float  # ¼‖∂t w‖²
    bending: float  # ½‖Δw‖²
    potential: float  # Π(w)
    heat: float  # ½‖θ‖²
    regularizer: float  # ½δ‖∇³w‖²
    DF: float  # мгновенная вязкая диссипация
    DS: float  # ‖∇θ‖²
    FD_eps: float  # ε∫J|∇r|²(γr^{γ−2} + δa r^{a−2})
    grad_sq: float  # ∫J|∇^w U|²
    div_sq: float  # ∫J|∇^w·U|²
    mass: float
    entropy: float
    min_J: float
    interface_length: float  # ∫_Γ S^w, длина деформированной пластины
    total_direct: float  # F + S одной формулой, для проверки аддитивности

    @property
    def fluid_energy(self) -> float:
        return self.kinetic + self.internal + self.artificial_internal

    @property
    def structure_energy(self) -> float:
        """S со множителем ¼ при ‖∂t w‖² (как в оценках схемы)"""
        return self.plate_kinetic_quarter + self.bending + self.potential + self.heat + self.regularizer

    @property
    def physical_structure_energy(self) -> float:
        """Энергия пластины исходной задачи (½‖∂t w‖²)"""
        return self.plate_kinetic_half + self.bending + self.potential + self.heat + self.regularizer

    @property
    def total(self) -> float:
        return self.fluid_energy + self.structure_energy

    def finite(self) -> bool:
        return all(math.isfinite(v) for v in asdict(self).values())

    def as_row(self, step: int) -> Dict[str, float]:
        row = {"step": step, **asdict(self)}
        row.update(fluid_energy=self.fluid_energy, structure_energy=self.structure_energy, total=self.total)
        return row


@dataclass(frozen=True)
class EnergyParams:
    mu: float
    lam: float
    eps: float
    delta: float

    @classmethod
    def from_config(cls, cfg) -> "EnergyParams":
        return cls(mu=cfg.fluid.mu, lam=cfg.fluid.lam, eps=cfg.fluid.eps, delta=cfg.fluid.delta)


def compute_ledger(
    fluid: FluidState,
    plate: PlateState,
    tabs: FspTables,
    press: PressureLaw,
    mats: CoupledMatrices,
    nl: NonlinearitySpec,
    plate_basis,
    params: EnergyParams,
) -> EnergyLedger:
    quad, table = tabs.quad, tabs.table
    ale = tabs.ale(plate.beta, plate.gamma)
    W = quad.weights
    r_pts = tabs.points(fluid.r)
    JW = W * ale.J[:, None]
    alpha = np.asarray(fluid.alpha, float)

    M = assemble_mass_matrix(fluid.r, ale, table, quad, check=False)
    kinetic = 0.5 * float(alpha @ M @ alpha)
    rp = np.maximum(r_pts, 0.0)
    internal = float(np.sum(JW * rp**press.gamma)) / (press.gamma - 1.0)
    artificial = press.delta * float(np.sum(JW * rp**press.a)) / (press.a - 1.0)

    grad, div = transformed_basis_gradients(table, ale, quad.z)
    gU = np.einsum("i,ildxz->ldxz", alpha, grad)
    dU = np.einsum("i,ixz->xz", alpha, div)
    grad_sq = float(np.sum(JW * np.sum(gU**2, axis=(0, 1))))
    div_sq = float(np.sum(JW * dU**2))
    DF = params.mu * grad_sq + (params.mu + params.lam) * div_sq

    frame = make_frame(tabs.continuity, plate.beta, alpha)
    FD_eps = diffusive_dissipation(fluid.r, frame, tabs.continuity, params.eps, press.h_prime)

    b = plate.beta
    bending = 0.5 * float(np.dot(mats.Xi_s, b**2))
    pot = potential(b, nl, plate_basis)
    heat = 0.5 * float(plate.alpha @ plate.alpha)
    reg = 0.5 * params.delta * float(b @ mats.E_k @ b)
    wt = float(plate.gamma @ plate.gamma)

    ent = entropy_monitor(fluid.r, ale, tabs, strict=False)
    density = 0.5 * rp * np.sum(np.einsum("i,ilxz->lxz", alpha, table.vals) ** 2, axis=0) + press.internal(rp)
    total_direct = float(np.sum(JW * density)) + 0.25 * wt + bending + pot + heat + reg

    return EnergyLedger(
        t=float(fluid.t),
        kinetic=kinetic,
        internal=internal,
        artificial_internal=artificial,
        plate_kinetic_half=0.5 * wt,
        plate_kinetic_quarter=0.25 * wt,
        bending=bending,
        potential=pot,
        heat=heat,
        regularizer=reg,
        DF=DF,
        DS=float(np.dot(mats.Xi_h, plate.alpha**2)),
        FD_eps=FD_eps,
        grad_sq=grad_sq,
        div_sq=div_sq,
        mass=float(np.sum(JW * r_pts)),
        entropy=ent,
        min_J=ale.min_J,
        interface_length=float(np.sum(W.sum(axis=1) * ale.surface_jacobian)),
        total_direct=total_direct,
    )


# ============================
# Вердикты
# ============================


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    value: float
    threshold: float
    margin: float
    detail: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def korn_constant(mu: float, lam: float, dimension: int = 2) -> float:
    """
    c(λ,μ): при λ ≥ −μ берём c = μ; иначе из (∇·u)² ≤ d|∇u|² поточечно
    c = μ + d(μ + λ) > 0 при λ + (2/3)μ > 0.
    """
    return mu if lam >= -mu else mu + dimension * (mu + lam)


def korn_like_lower_bound(ledger: EnergyLedger, mu: float, lam: float, dimension: int = 2) -> Verdict:
    c = korn_constant(mu, lam, dimension)
    lhs = mu * ledger.grad_sq + (mu + lam) * ledger.div_sq
    rhs = c * ledger.grad_sq
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return Verdict(
        name="korn_lower_bound",
        passed=bool(lhs >= rhs - 1e-12 * scale),
        value=lhs,
        threshold=rhs,
        margin=lhs - rhs,
        detail={"c": c, "ratio": lhs / ledger.grad_sq if ledger.grad_sq > 0 else math.inf},
    )


def korn_ratio_search(
    mu: float, lam: float, tabs: FspTables, rng: np.random.Generator, samples: int = 50
) -> float:
    """Минимум (μ‖∇U‖² + (μ+λ)‖∇·U‖²)/‖∇U‖² по случайным модальным полям при w ≡ 0"""
    quad, table = tabs.quad, tabs.table
    k = tabs.k
    ale = tabs.ale(np.zeros(k), np.zeros(k))
    grad, div = transformed_basis_gradients(table, ale, quad.z)
    W = quad.weights
    best = math.inf
    for _ in range(samples):
        a = rng.standard_normal(2 * k)
        g2 = float(np.sum(W * np.sum(np.einsum("i,ildxz->ldxz", a, grad) ** 2, axis=(0, 1))))
        d2 = float(np.sum(W * np.einsum("i,ixz->xz", a, div) ** 2))
        if g2 > 0:
            best = min(best, (mu * g2 + (mu + lam) * d2) / g2)
    return best


def entropy_monitor(r: np.ndarray, ale: AleMap, tabs: FspTables, strict: bool = True) -> float:
    """∫ J r ln r; при strict=False ячейки с r ≤ 0 дают предел 0"""
    r_pts = tabs.points(np.asarray(r, float))
    positive = r_pts > 0
    if strict and not np.all(positive):
        raise DensityPositivityError("entropy requires a positive density", min_density=float(np.min(r_pts)))
    r_ln_r = np.where(positive, r_pts * np.log(np.where(positive, r_pts, 1.0)), 0.0)
    return float(np.sum(tabs.quad.weights * ale.J[:, None] * r_ln_r))


def physical_kinetic_energy(fluid: FluidState, ale: AleMap, basis: FluidBasis, tabs: FspTables, samples: int = 2001) -> float:
    """
    ½∫ ρ|u|² по физической области: отсчёты переносятся через A_w в точки
    (X, z_phys), по z_phys — формула трапеций, по X — веса Ω-квадратуры.
    """
    quad = tabs.quad
    z = np.linspace(-1.0, 0.0, samples)
    U = basis.velocity_on_grid(fluid.alpha, quad.x, z)
    cz = np.clip(((z + 1.0) / quad.hz).astype(int), 0, quad.nz - 1)
    rho = np.asarray(fluid.r, float)[np.ix_(quad.cx, cz)]
    _, z_phys, density = push_forward_samples(ale, z, 0.5 * rho * np.sum(U**2, axis=0))
    return float(np.dot(quad.wx, trapezoid(density, z_phys, axis=1)))


def _margin(name: str, value: float, threshold: float, **detail: Any) -> Verdict:
    return Verdict(name=name, passed=bool(value <= threshold), value=value, threshold=threshold, margin=threshold - value, detail=detail)


def inequality_verdicts(
    initial: EnergyLedger,
    ledgers: Sequence[EnergyLedger],
    ssp_reports: Sequence,
    fsp_reports: Sequence,
    dt: float,
    T: float,
    c_star: float = 0.0,
    v0_sq: float = 0.0,
    rel_tol: float = 1e-6,
    ssp_tol: Optional[float] = None,
    fsp_tol: Optional[float] = None,
    fsp_tol_rate: float = 0.1,
) -> List[Verdict]:
    """
    Вердикты по завершённым окнам:
    - ssp_identity: |невязка тождества SSP| ≤ ssp_tol (по умолчанию 1e−6(S0 + 1));
    - fsp_inequality: невязка баланса FSP (левая часть минус правая) ≤ fsp_tol
      (по умолчанию fsp_tol_rate·Δt·(E0 + 1): на [0, T] набегает не больше fsp_tol_rate·T·(E0 + 1));
    - telescoped_bound: LHS(m) ≤ E0 + C* + T√Δt + Σ max(невязка, 0) + расхождение квадратур
      передачи следа + rel_tol(E0 + 1) на каждом окне;
    - mass: относительный дрейф ∫J r.
    """
    E0 = initial.total + 0.25 * v0_sq
    c = 1.0 / (4.0 * dt)
    out: List[Verdict] = []
    if ssp_tol is None:
        ssp_tol = 1e-6 * (abs(initial.structure_energy) + 1.0)
    if fsp_tol is None:
        fsp_tol = fsp_tol_rate * dt * (abs(E0) + 1.0)

    ssp_res = [abs(rep.residual) for rep in ssp_reports]
    fsp_signed = [rep.residual for rep in fsp_reports]
    out.append(_margin("ssp_identity", max(ssp_res, default=0.0), ssp_tol))
    out.append(_margin("fsp_inequality", max(fsp_signed, default=0.0), fsp_tol, worst_abs=max(map(abs, fsp_signed), default=0.0)))

    diss = 0.0
    residual_sum = 0.0
    interface = 0.0
    transfer = 0.0
    prev_v_sq = dt * v0_sq
    worst = math.inf
    worst_window = -1
    lhs_max = 0.0
    bound_at = E0 + c_star
    for m, (led, s_rep, f_rep) in enumerate(zip(ledgers, ssp_reports, fsp_reports)):
        diss += s_rep.SD + f_rep.FD + c * (s_rep.gap_sq + f_rep.gap_sq)
        # отрицательная невязка (лишняя численная диссипация) оценку не ослабляет
        residual_sum += max(s_rep.residual, 0.0) + max(f_rep.residual, 0.0)
        interface += f_rep.interface_term
        # квадратуры SSP и FSP для ∫‖∂t w‖² и ∫‖v‖² различаются на дискретизационную величину
        transfer += c * (abs(f_rep.wt_sq - s_rep.wt_sq) + abs(s_rep.tv_sq - prev_v_sq))
        prev_v_sq = f_rep.v_sq
        lhs = led.structure_energy + led.fluid_energy + diss + c * f_rep.v_sq
        bound = E0 + c_star + T * math.sqrt(dt) + max(0.0, -interface) + residual_sum + transfer + rel_tol * (abs(E0) + 1.0)
        if bound - lhs < worst:
            worst, worst_window, lhs_max, bound_at = bound - lhs, m, lhs, bound
    if worst_window < 0:
        worst, lhs_max, bound_at = math.inf, 0.0, E0 + c_star
    out.append(
        Verdict(
            name="telescoped_bound",
            passed=bool(worst >= 0),
            value=lhs_max,
            threshold=bound_at,
            margin=worst,
            detail={"window": worst_window, "E0": E0, "c_star": c_star, "transfer": transfer},
        )
    )

    m0 = initial.mass
    drift = max((abs(led.mass - m0) / max(abs(m0), 1e-300) for led in ledgers), default=0.0)
    out.append(_margin("mass_drift", drift, 1e-6))
    finite = all(led.finite() for led in ledgers) and initial.finite()
    out.append(Verdict(name="ledger_finite", passed=finite, value=float(finite), threshold=1.0, margin=0.0 if finite else -1.0))
    for v in out:
        if not v.passed:
            logger.warning(f"[diagnostics] verdict {v.name} failed: value={v.value:.6g} threshold={v.threshold:.6g}")
    return out
