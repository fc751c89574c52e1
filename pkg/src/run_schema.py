from __future__ import annotations
from pathlib import Path
from typing import Any, List, Literal, Optional
from pydantic import BaseModel, Field, ValidationError, model_validator, ConfigDict

from src.errors import ConfigError
from src.utils import deep_merge, load_config_tree

# ---- Разделы конфигурации прогона ----


class GeometryCfg(BaseModel):
    model_config = ConfigDict(extra="forbid")

    L: float = Field(1.0, gt=0.0, le=100.0)
    nx: int = Field(32, ge=4, le=256)
    nz: int = Field(16, ge=4, le=128)
    collision_floor: float = Field(1e-3, gt=0.0, lt=1.0)


class TimeCfg(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: float = Field(0.1, gt=0.0)
    N: int = Field(10, ge=1, le=100000)
    ssp_substeps: Optional[int] = Field(None, ge=1)  # None -> автоматический выбор по жёсткости
    fsp_substeps: int = Field(8, ge=1, le=10000)
    trace_oversampling: int = Field(4, ge=1, le=64)  # подшагов SSP на подшаг FSP (минимум)


class BasisCfg(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(2, ge=1, le=16)
    quad_order: int = Field(2, ge=1, le=8)  # точек Гаусса на ячейку Ω по направлению
    gamma_cells: int = Field(64, ge=1, le=4096)
    gamma_order: int = Field(6, ge=2, le=16)
    lift_nodes: int = Field(256, ge=8, le=8192)


class FluidCfg(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(1.4, gt=1.0)
    mu: float = Field(1.0, gt=0.0)
    lam: float = 0.0
    eps: float = Field(1e-2, ge=0.0)
    delta: float = Field(1e-3, ge=0.0)
    a: float = Field(9.0, ge=9.0)
    dimension: Literal[2, 3] = 2
    interface_flux: Literal["closed", "open"] = "closed"
    rho0: float = Field(1.0, gt=0.0)
    rho0_amplitude: float = Field(0.0, ge=0.0, lt=1.0)
    u0_modes: List[float] = Field(default_factory=list)
    allow_zero_eps: bool = False


class PlateCfg(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nonlinearity: Literal["linear_zero", "cubic_quasilinear", "berger_type"] = "linear_zero"
    berger_q1: float = Field(1.0, ge=0.0)
    berger_q2: float = 0.0
    w0_modes: List[float] = Field(default_factory=lambda: [0.02])
    v0_modes: List[float] = Field(default_factory=list)
    theta0_modes: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _berger(self):
        if self.nonlinearity == "berger_type" and self.berger_q2 > 0 and self.berger_q1 <= 0:
            raise ValueError("berger_q2 > 0 requires berger_q1 > 0 (potential must be bounded below)")
        return self


class SolverCfg(BaseModel):
    model_config = ConfigDict(extra="forbid")

    picard_tol: float = Field(1e-10, gt=0.0)
    picard_max_iter: int = Field(50, ge=1, le=10000)
    positivity_tol: float = Field(1e-12, ge=0.0)
    fsp_tol_rate: float = Field(0.1, gt=0.0)  # допуск баланса FSP на окне: rate·Δt·(E0 + 1)


class OutputCfg(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cadence: int = Field(1, ge=1)  # снимок плотности каждые cadence окон
    write_fields: bool = False


class ContinuationCfg(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    steps: int = Field(50, ge=1, le=100000)
    energy_constant: Optional[float] = Field(None, gt=0.0)  # None -> измеренная sqrt(E0 + C*)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    geometry: GeometryCfg = Field(default_factory=GeometryCfg)
    time: TimeCfg = Field(default_factory=TimeCfg)
    basis: BasisCfg = Field(default_factory=BasisCfg)
    fluid: FluidCfg = Field(default_factory=FluidCfg)
    plate: PlateCfg = Field(default_factory=PlateCfg)
    solver: SolverCfg = Field(default_factory=SolverCfg)
    output: OutputCfg = Field(default_factory=OutputCfg)
    continuation: ContinuationCfg = Field(default_factory=ContinuationCfg)
    seed: int = 0

    @model_validator(mode="after")
    def _physics(self):
        fl = self.fluid
        if fl.lam + 2.0 * fl.mu / 3.0 <= 0:
            raise ValueError(f"lam + (2/3)mu must be > 0 (got lam={fl.lam}, mu={fl.mu})")
        if fl.dimension == 3 and fl.gamma <= 12.0 / 7.0:
            raise ValueError("gamma must exceed 12/7 in 3D mode")
        if fl.eps <= 0 and not fl.allow_zero_eps:
            raise ValueError("eps must be > 0 (set fluid.allow_zero_eps for module experiments)")
        k = self.basis.k
        pl = self.plate
        for name in ("w0_modes", "v0_modes", "theta0_modes"):
            if len(getattr(pl, name)) > k:
                raise ValueError(f"plate.{name} has more than k={k} entries")
        if len(fl.u0_modes) > 2 * k:
            raise ValueError(f"fluid.u0_modes has more than 2k={2 * k} entries")
        return self

    @property
    def dt(self) -> float:
        return self.time.T / self.time.N


# ---- Утилиты: загрузка + красивое объяснение ошибок ----


def explain_validation_errors(err: ValidationError) -> list[dict]:
    friendly = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e.get("loc", []))
        msg = e.get("msg", "invalid")
        val = e.get("input", None)
        friendly.append({"path": loc, "message": msg, "value": val if _plain(val) else repr(val)})
    return friendly


def _plain(val: Any) -> bool:
    return val is None or isinstance(val, (int, float, str, bool, list))


def build_run_config(tree: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Дерево (из файла / свипа) + overrides -> валидированный RunConfig или ConfigError"""
    data = deep_merge(tree or {}, overrides or {})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError("run config validation failed", errors=explain_validation_errors(e)) from e


def load_run_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}", path=str(p))
    try:
        tree = load_config_tree(p)
    except ValueError as e:
        raise ConfigError(f"config parse error: {e}", path=str(p)) from e
    return build_run_config(tree)
