"""
Реестр инвариантных проверок (команда `check`).

Каждая проверка — функция без аргументов, возвращающая Verdict; регистрация
декоратором @register("имя"). run_checks(filter) выполняет отобранные по
подстроке имени проверки и возвращает вердикты в порядке регистрации.
"""
from __future__ import annotations
from typing import Callable, Dict, List, Optional
import logging
import math
import time

import numpy as np
from scipy.optimize import bisect

from src.continuity import build_continuity_tables, damped_continuity_step
from src.diagnostics_energy import Verdict, korn_constant, korn_ratio_search
from src.errors import FsiError, HandoffError, MassMatrixError
from src.fluid_fsp import assemble_mass_matrix, build_fsp_tables
from src.galerkin_bases import (
    analytic_sine_lifting,
    build_bases,
    clamped_beam_roots,
    harmonic_extension,
    spectral_residual,
)
from src.quadrature import OmegaQuadrature
from src.splitting_driver import envelope_margin, handoff_validate, lifespan_from_records
from src.structure_ssp import NonlinearitySpec, PlateState, TraceHistory, evaluate_nonlinearity, potential, ssp_step
from src.sweep import SweepState, cauchy_table

logger = logging.getLogger(__name__)

CHECKS: Dict[str, Callable[[], Verdict]] = {}
SEED = 20240611


def register(name: str):
    def deco(fn: Callable[[], Verdict]) -> Callable[[], Verdict]:
        CHECKS[name] = fn
        return fn

    return deco


def _verdict(name: str, value: float, threshold: float, passed: Optional[bool] = None, **detail) -> Verdict:
    ok = value <= threshold if passed is None else passed
    return Verdict(name=name, passed=bool(ok), value=float(value), threshold=float(threshold), margin=float(threshold - value), detail=detail)


def _small_tables(k: int = 2, nx: int = 16, nz: int = 8):
    bases = build_bases(k, 1.0)
    quad = OmegaQuadrature.build(1.0, nx, nz, 2)
    return bases, quad


# ============================
# Базисы
# ============================


@register("clamped_root")
def check_clamped_root() -> Verdict:
    roots = clamped_beam_roots(8, 1.0)
    oracle = [bisect(lambda m: math.cos(m) * math.cosh(m) - 1.0, 3.0, 6.0, xtol=1e-14)]
    for i in range(2, 9):
        oracle.append(bisect(lambda m: math.cos(m) - 1.0 / math.cosh(m), i * math.pi, (i + 1) * math.pi, xtol=1e-14))
    err = float(np.max(np.abs(roots - np.array(oracle))))
    return _verdict("clamped_root", err, 1e-9, mu1=float(roots[0]))


@register("spectral_residual")
def check_spectral_residual() -> Verdict:
    res = spectral_residual(build_bases(8, 1.0).plate)
    return _verdict("spectral_residual", float(np.max(res)), 1e-8)


@register("lifting_oracle")
def check_lifting_oracle() -> Verdict:
    xs = np.linspace(0.0, 1.0, 129)
    lift = harmonic_extension(np.sin(np.pi * xs), 1.0)
    x = np.linspace(0.0, 1.0, 129)
    z = np.linspace(-1.0, 0.0, 65)
    err = float(np.max(np.abs(lift.value(x, z) - analytic_sine_lifting(1, 1.0, x, z))))
    return _verdict("lifting_oracle", err, 1e-6, sample=float(lift.value(np.array([0.5]), np.array([-0.5]))[0, 0]))


# ============================
# Структура
# ============================


@register("potential_gradient")
def check_potential_gradient() -> Verdict:
    rng = np.random.default_rng(SEED)
    plate = build_bases(3, 1.0).plate
    worst = 0.0
    h = 1e-6
    for kind, nl in (("cubic_quasilinear", NonlinearitySpec("cubic_quasilinear")), ("berger_type", NonlinearitySpec("berger_type", 1.0, 0.5))):
        for _ in range(50 if kind == "cubic_quasilinear" else 10):
            beta = 0.1 * rng.standard_normal(3)
            F = evaluate_nonlinearity(beta, nl, plate)
            e = np.eye(3)
            fd = np.array([(potential(beta + h * e[j], nl, plate) - potential(beta - h * e[j], nl, plate)) / (2 * h) for j in range(3)])
            worst = max(worst, float(np.max(np.abs(fd - F))) / max(float(np.max(np.abs(F))), 1e-3))
    return _verdict("potential_gradient", worst, 1e-6)


@register("ssp_energy_order")
def check_ssp_energy_order() -> Verdict:
    bases = build_bases(1, 1.0)
    nl = NonlinearitySpec("linear_zero")
    dt = 0.01
    state = PlateState.from_modes(1, [0.02], [0.1], [0.01])
    trace = TraceHistory.constant(np.array([0.05]), 0.0, dt)

    def residual(n: int) -> tuple[float, float]:
        out = ssp_step(state, trace, (0.0, dt), n, bases.mats, nl, bases.plate, 1e-3, dt)
        return abs(out.energy.residual), out.energy.S_start

    r4, _ = residual(4)
    r8, _ = residual(8)
    r64, S0 = residual(64)
    ratio = r4 / r8 if r8 > 0 else math.inf
    return _verdict("ssp_energy_order", r64, 1e-8 * (S0 + 1.0), passed=bool(r64 <= 1e-8 * (S0 + 1.0) and ratio >= 8.0), ratio=ratio)


# ============================
# Жидкость
# ============================


def _random_window(rng: np.random.Generator, k: int, dt: float, n: int, amp_w: float = 0.2, amp_u: float = 0.5):
    times = np.linspace(0.0, dt, n + 1)
    b0 = amp_w * rng.uniform(-1, 1, k) / k
    b1 = amp_w * rng.uniform(-1, 1, k) / k
    betas = b0[None, :] + (b1 - b0)[None, :] * (times / dt)[:, None]
    a0 = amp_u * rng.standard_normal(2 * k)
    a1 = amp_u * rng.standard_normal(2 * k)
    alphas = a0[None, :] + (a1 - a0)[None, :] * (times / dt)[:, None]
    startup = (0.5 * (betas[0] + betas[1]), 0.5 * (alphas[0] + alphas[1]))
    return times, betas, alphas, startup


@register("continuity_mass")
def check_continuity_mass() -> Verdict:
    rng = np.random.default_rng(SEED)
    bases, quad = _small_tables()
    tables = build_continuity_tables(quad, bases.plate, bases.fluid)
    worst = 0.0
    for closure in ("closed", "open"):
        for _ in range(5):
            times, betas, alphas, startup = _random_window(rng, 2, 0.01, 8)
            r0 = 1.0 + 0.2 * rng.uniform(-1, 1, (quad.nx, quad.nz))
            cont = damped_continuity_step(r0, times, betas, alphas, tables, 1e-2, closure=closure, startup=startup)
            balance = cont.mass_balance
            worst = max(worst, float(np.max(np.abs(balance - balance[0]))) / balance[0])
    return _verdict("continuity_mass", worst, 1e-6)


@register("maximum_principle")
def check_maximum_principle() -> Verdict:
    rng = np.random.default_rng(SEED)
    bases, quad = _small_tables()
    tables = build_continuity_tables(quad, bases.plate, bases.fluid)
    worst = math.inf
    for _ in range(100):
        times, betas, alphas, startup = _random_window(rng, 2, 0.01, 8)
        r0 = 1.0 + 0.5 * rng.uniform(-1, 1, (quad.nx, quad.nz))
        cont = damped_continuity_step(r0, times, betas, alphas, tables, 1e-2, startup=startup)
        worst = min(worst, envelope_margin(cont))
    return _verdict("maximum_principle", -worst, 0.0, margin_min=worst)


@register("mass_matrix_spd")
def check_mass_matrix_spd() -> Verdict:
    rng = np.random.default_rng(SEED)
    bases, quad = _small_tables(nx=8, nz=4)
    tabs = build_fsp_tables(quad, bases)
    failures = 0
    for _ in range(1000):
        r = rng.uniform(0.05, 3.0, (quad.nx, quad.nz))
        beta = 0.3 * rng.uniform(-1, 1, tabs.k) / tabs.k
        ale = tabs.ale(beta, np.zeros(tabs.k))
        try:
            assemble_mass_matrix(r, ale, tabs.table, quad)
        except MassMatrixError:
            failures += 1
    try:
        assemble_mass_matrix(-np.ones((quad.nx, quad.nz)), tabs.ale(np.zeros(tabs.k), np.zeros(tabs.k)), tabs.table, quad)
        detected = False
    except MassMatrixError:
        detected = True
    return _verdict("mass_matrix_spd", failures, 0, passed=bool(failures == 0 and detected), nonpositive_detected=detected)


@register("korn_bound")
def check_korn_bound() -> Verdict:
    rng = np.random.default_rng(SEED)
    bases, quad = _small_tables(k=4, nx=8, nz=8)
    tabs = build_fsp_tables(quad, bases)
    mu = 1.0
    lam = -2.0 * mu / 3.0 + 0.01
    ratio = korn_ratio_search(mu, lam, tabs, rng, samples=50)
    c = korn_constant(mu, lam)
    return _verdict("korn_bound", -ratio, 0.0, passed=bool(ratio > 0 and ratio >= c - 1e-9), min_ratio=ratio, witness=c)


# ============================
# Драйвер и свип
# ============================


@register("handoff_detector")
def check_handoff_detector() -> Verdict:
    state = {"beta": np.array([0.1, -0.2]), "U": np.array([0.0, 1.0, 2.0, 3.0])}
    handoff_validate(state, {k: v.copy() for k, v in state.items()})
    bad = {k: v.copy() for k, v in state.items()}
    bad["U"][2] += 1e-9
    try:
        handoff_validate(state, bad)
        located = None
    except HandoffError as e:
        located = (e.detail.get("field"), e.detail.get("index"))
    ok = located == ("U", [2])
    return _verdict("handoff_detector", 0.0 if ok else 1.0, 0.0, located=located)


def lifespan_oracle(times: np.ndarray, min_J: np.ndarray, C: float, steps: int) -> List[float]:
    T = [float(times[0])]
    for _ in range(steps):
        idx = max(int(np.searchsorted(times, T[-1], side="right")) - 1, 0)
        c = float(np.min(min_J[: idx + 1]))
        if not c > 0:
            break
        nxt = T[-1] + (c / (2.0 * C)) ** 4
        if nxt > times[-1]:
            break
        T.append(nxt)
    return T


@register("lifespan_recurrence")
def check_lifespan_recurrence() -> Verdict:
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for i in range(100):
        times = np.linspace(0.0, 2.0, 51)
        if i % 2:
            mins = np.maximum(1.0 - rng.uniform(0.2, 1.5) * times, 0.0)
        else:
            mins = 0.5 + 0.5 * np.exp(-rng.uniform(0.5, 3.0) * times)
        C = rng.uniform(0.05, 0.5)
        got = lifespan_from_records(times, mins, C, steps=200)["horizons"]
        if got != lifespan_oracle(times, mins, C, 200):
            mismatches += 1
    return _verdict("lifespan_recurrence", mismatches, 0)


@register("cauchy_order")
def check_cauchy_order() -> Verdict:
    hs = [0.1, 0.05, 0.025, 0.0125]
    base = np.linspace(0.0, 1.0, 16).reshape(4, 4)
    states = [
        SweepState(r=1.0 + h * base, alpha=np.full(2, h), beta=np.array([0.3 + h]), gamma=np.zeros(1), theta=np.zeros(1)) for h in hs
    ]
    table = cauchy_table(states, hs)
    orders = table["order"].dropna().to_numpy()
    err = float(np.max(np.abs(orders - 1.0)))
    return _verdict("cauchy_order", err, 0.01, orders=orders)


# ============================
# Запуск
# ============================


def run_checks(name_filter: Optional[str] = None) -> List[Verdict]:
    selected = [(n, fn) for n, fn in CHECKS.items() if not name_filter or name_filter in n]
    out: List[Verdict] = []
    for name, fn in selected:
        t0 = time.perf_counter()
        try:
            v = fn()
        except FsiError as e:
            v = Verdict(name=name, passed=False, value=math.nan, threshold=math.nan, margin=math.nan, detail=e.to_dict())
        v.detail["seconds"] = round(time.perf_counter() - t0, 3)
        logger.info(f"[check] {name}: {'PASS' if v.passed else 'FAIL'} value={v.value:.3e} threshold={v.threshold:.3e}")
        out.append(v)
    return out
