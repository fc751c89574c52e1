"""
Свип параметров и таблицы Коши.

Основные функции:
- load_sweep_plan() - plan.axes.<параметр> = v1, v2, ...; plan.reduction = ...
- sweep_points() - декартово произведение осей
- run_sweep() - параллельно по точкам (joblib), каталог на точку
- project_state() - приведение состояний к грубейшему общему представлению
- cauchy_table() - нормы последовательных разностей и оценка порядка
- axis_parameter() - шаг разрешения для оси свипа (time.N -> Δt)
"""
from __future__ import annotations
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.errors import ConfigError, DimensionMismatchError, FsiError
from src.run_schema import RunConfig, build_run_config
from src.utils import deep_merge, flatten_dotted, load_config_tree, set_dotted

logger = logging.getLogger(__name__)

REDUCTIONS = ("final_energy", "coupling_gap", "entropy", "mass_drift")


# ============================
# План
# ============================


@dataclass(frozen=True)
class SweepPlan:
    base: Dict[str, Any]
    axes: List[Tuple[str, List[Any]]]
    reduction: str = "coupling_gap"

    def __post_init__(self):
        if self.reduction not in REDUCTIONS:
            raise ConfigError(f"unknown reduction: {self.reduction!r}", allowed=list(REDUCTIONS))
        if not self.axes:
            raise ConfigError("sweep plan has no axes")
        known = set(flatten_dotted(RunConfig().model_dump()))
        for name, values in self.axes:
            if name not in known:
                raise ConfigError(f"unknown sweep parameter: {name!r}", parameter=name)
            if not values:
                raise ConfigError(f"sweep axis {name!r} has no values", parameter=name)
        build_run_config(self.base)

    @property
    def size(self) -> int:
        return int(np.prod([len(v) for _, v in self.axes]))


def plan_from_tree(tree: Dict[str, Any]) -> SweepPlan:
    tree = dict(tree)
    plan = tree.pop("plan", None)
    if not isinstance(plan, dict) or "axes" not in plan:
        raise ConfigError("sweep plan must define plan.axes.<parameter>")
    axes = [(name, list(v) if isinstance(v, list) else [v]) for name, v in flatten_dotted(plan["axes"]).items()]
    return SweepPlan(base=tree, axes=axes, reduction=plan.get("reduction", "coupling_gap"))


def load_sweep_plan(path: str | Path) -> SweepPlan:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"plan file not found: {p}", path=str(p))
    try:
        tree = load_config_tree(p)
    except ValueError as e:
        raise ConfigError(f"plan parse error: {e}", path=str(p)) from e
    return plan_from_tree(tree)


@dataclass(frozen=True)
class SweepPoint:
    index: int
    overrides: Dict[str, Any]

    def config_tree(self, base: Dict[str, Any]) -> Dict[str, Any]:
        nested: Dict[str, Any] = {}
        for key, value in self.overrides.items():
            set_dotted(nested, key, value)
        return deep_merge(base, nested)


def sweep_points(plan: SweepPlan) -> List[SweepPoint]:
    names = [name for name, _ in plan.axes]
    combos = product(*[values for _, values in plan.axes])
    return [SweepPoint(index=i, overrides=dict(zip(names, combo))) for i, combo in enumerate(combos)]


# ============================
# Состояния для таблиц Коши
# ============================


@dataclass(frozen=True)
class SweepState:
    """Конечное состояние прогона в модальном/сеточном виде"""

    r: np.ndarray = field(repr=False)  # (nx, nz)
    alpha: np.ndarray = field(repr=False)  # (2k,)
    beta: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    L: float = 1.0

    @property
    def k(self) -> int:
        return int(self.beta.size)

    @classmethod
    def from_run(cls, result) -> "SweepState":
        return cls(
            r=result.fluid.r.copy(),
            alpha=result.fluid.alpha.copy(),
            beta=result.plate.beta.copy(),
            gamma=result.plate.gamma.copy(),
            theta=result.plate.alpha.copy(),
            L=result.config.geometry.L,
        )


def _block_average(r: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    nx, nz = r.shape
    tx, tz = shape
    if nx % tx or nz % tz:
        raise DimensionMismatchError("grid sizes are not integer multiples", source=[nx, nz], target=[tx, tz])
    return r.reshape(tx, nx // tx, tz, nz // tz).mean(axis=(1, 3))


def project_state(state: SweepState, shape: Tuple[int, int], k: int) -> SweepState:
    """Блочное усреднение плотности до shape и усечение модальных векторов до k мод"""
    if k > state.k:
        raise DimensionMismatchError("cannot project to a richer basis", k=state.k, target=k)
    kk = state.k
    return SweepState(
        r=_block_average(np.asarray(state.r, float), shape),
        alpha=np.concatenate([state.alpha[:k], state.alpha[kk : kk + k]]),
        beta=state.beta[:k].copy(),
        gamma=state.gamma[:k].copy(),
        theta=state.theta[:k].copy(),
        L=state.L,
    )


def state_distance(a: SweepState, b: SweepState) -> float:
    """L²-норма разности: плотность по ячейкам с весом площади, модальные части — евклидово"""
    cell = a.L / (a.r.shape[0] * a.r.shape[1])
    dr = float(np.sum((a.r - b.r) ** 2)) * cell
    dm = sum(float(np.sum((x - y) ** 2)) for x, y in ((a.alpha, b.alpha), (a.beta, b.beta), (a.gamma, b.gamma), (a.theta, b.theta)))
    return math.sqrt(dr + dm)


def cauchy_table(states: Sequence[SweepState], params: Sequence[float]) -> pd.DataFrame:
    """
    ‖x_{j+1} − x_j‖ вдоль оси и порядок p_j = ln(d_j/d_{j+1}) / ln(h_j/h_{j+1}),
    где h_j = |params_{j+1} − params_j|.
    """
    if len(states) != len(params):
        raise DimensionMismatchError("states and parameters differ in length", states=len(states), params=len(params))
    if len(states) < 3:
        raise DimensionMismatchError("cauchy table needs at least 3 points", points=len(states))
    nx = min(s.r.shape[0] for s in states)
    nz = min(s.r.shape[1] for s in states)
    k = min(s.k for s in states)
    proj = [project_state(s, (nx, nz), k) for s in states]
    rows = []
    for j in range(len(proj) - 1):
        rows.append(
            {
                "j": j,
                "param": float(params[j]),
                "param_next": float(params[j + 1]),
                "h": abs(float(params[j + 1]) - float(params[j])),
                "difference": state_distance(proj[j], proj[j + 1]),
            }
        )
    table = pd.DataFrame(rows)
    order = [float("nan")]
    for j in range(1, len(rows)):
        d0, d1 = rows[j - 1]["difference"], rows[j]["difference"]
        h0, h1 = rows[j - 1]["h"], rows[j]["h"]
        if d0 > 0 and d1 > 0 and h0 > 0 and h1 > 0 and h0 != h1:
            order.append(math.log(d0 / d1) / math.log(h0 / h1))
        else:
            order.append(float("nan"))
    table["order"] = order
    return table


def axis_parameter(name: str, cfg: RunConfig) -> float:
    """
    Значение оси для оценки порядка: для счётчиков разрешения — соответствующий
    шаг (time.N -> Δt, geometry.nx -> L/nx, geometry.nz -> 1/nz), иначе само значение.
    """
    if name == "time.N":
        return cfg.dt
    if name == "geometry.nx":
        return cfg.geometry.L / cfg.geometry.nx
    if name == "geometry.nz":
        return 1.0 / cfg.geometry.nz
    node: Any = cfg.model_dump()
    for part in name.split("."):
        node = node[part]
    return float(node)


# ============================
# Выполнение
# ============================


def _run_point(point: SweepPoint, base: Dict[str, Any], reduction: str, out_dir: Optional[str]) -> Dict[str, Any]:
    # импорт внутри воркера: joblib (loky) запускает отдельные процессы
    from src.reports import ensure_out_dir, save_run
    from src.splitting_driver import run

    cfg = build_run_config(point.config_tree(base))
    row: Dict[str, Any] = {"point": point.index, **point.overrides}
    try:
        result = run(cfg)
    except FsiError as e:
        logger.error(f"[sweep] point {point.index} failed: {e.code} {e.message}")
        row.update(status="error", code=e.code, value=float("nan"))
        return {"row": row, "state": None}
    summary = result.summary()
    row.update(status=result.status, value=summary[reduction], **{f"summary.{k}": v for k, v in summary.items() if k != "status"})
    if out_dir is not None:
        save_run(result, ensure_out_dir(Path(out_dir) / f"point_{point.index:03d}", force=True))
    return {"row": row, "state": SweepState.from_run(result)}


def run_sweep(plan: SweepPlan, out_dir: Optional[str | Path] = None, jobs: int = -1) -> Tuple[pd.DataFrame, Optional[pd.DataFrame]]:
    """
    Таблица свипа (строки отсортированы по номеру точки, порядок выполнения не влияет)
    и таблица Коши, если ось одна и точек не меньше трёх.
    """
    points = sweep_points(plan)
    for p in points:
        build_run_config(p.config_tree(plan.base))
    logger.info(f"[sweep] {len(points)} points, reduction={plan.reduction}, jobs={jobs}")
    results = Parallel(n_jobs=jobs)(
        delayed(_run_point)(p, plan.base, plan.reduction, None if out_dir is None else str(out_dir)) for p in points
    )
    results = sorted(results, key=lambda res: res["row"]["point"])
    table = pd.DataFrame([res["row"] for res in results])
    table = table.rename(columns={"value": plan.reduction})
    if len(plan.axes) == 1:
        table["ratio"] = table[plan.reduction].shift(1) / table[plan.reduction]

    cauchy = None
    if len(plan.axes) == 1 and len(points) >= 3 and all(res["state"] is not None for res in results):
        name, _ = plan.axes[0]
        try:
            params = [axis_parameter(name, build_run_config(p.config_tree(plan.base))) for p in points]
        except (TypeError, ValueError):
            params = None
        if params is not None:
            cauchy = cauchy_table([res["state"] for res in results], params)
            cauchy.insert(0, "axis", name)
    return table, cauchy


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Наклон прямой ln y = p ln x + c (по точкам с положительными x, y)"""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    mask = (x > 0) & (y > 0)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)[0])
