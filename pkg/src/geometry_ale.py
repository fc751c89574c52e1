"""
ALE-отображение A_w: Ω = Γ × (−1, 0) -> Ω^w(t), (X, z) ↦ (X, (z+1)·w(t,X) + z).

Все поля хранятся на узлах Γ (ось x); поля на Ω — массивы (..., Nx, Nz),
величины A_w зависят только от X и транслируются по оси z.

  det ∇A_w = J = 1 + w
  (∇A_w)^{-1} = [[1, 0], [−(z+1)∂x w / J, 1 / J]]
  ∇^w f = (∂x f − (z+1)∂x w/J · ∂z f,  ∂z f / J)
  w_ale = (0, (z+1) ∂t w)
"""
from __future__ import annotations
from dataclasses import dataclass, field

import numpy as np

from src.errors import DegenerateMapError

DEFAULT_COLLISION_FLOOR = 1e-3


@dataclass(frozen=True)
class AleMap:
    x: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    dw_dx: np.ndarray = field(repr=False)
    dw_dt: np.ndarray = field(repr=False)
    collision_floor: float = DEFAULT_COLLISION_FLOOR

    @classmethod
    def from_values(
        cls,
        x: np.ndarray,
        w: np.ndarray,
        dw_dx: np.ndarray | None = None,
        dw_dt: np.ndarray | None = None,
        collision_floor: float = DEFAULT_COLLISION_FLOOR,
    ) -> "AleMap":
        x = np.asarray(x, dtype=float)
        w = np.broadcast_to(np.asarray(w, dtype=float), x.shape).copy()
        dw_dx = np.zeros_like(x) if dw_dx is None else np.broadcast_to(np.asarray(dw_dx, float), x.shape).copy()
        dw_dt = np.zeros_like(x) if dw_dt is None else np.broadcast_to(np.asarray(dw_dt, float), x.shape).copy()
        return cls(x=x, w=w, dw_dx=dw_dx, dw_dt=dw_dt, collision_floor=float(collision_floor))

    @classmethod
    def from_modal(
        cls,
        x: np.ndarray,
        beta: np.ndarray,
        beta_dot: np.ndarray,
        s_vals: np.ndarray,
        s_dx: np.ndarray,
        collision_floor: float = DEFAULT_COLLISION_FLOOR,
    ) -> "AleMap":
        """w = Σ β_i s_i; производные спектрально (s_vals, s_dx: (k, Nx))"""
        return cls(
            x=np.asarray(x, float),
            w=beta @ s_vals,
            dw_dx=beta @ s_dx,
            dw_dt=beta_dot @ s_vals,
            collision_floor=float(collision_floor),
        )

    @property
    def J(self) -> np.ndarray:
        return 1.0 + self.w

    @property
    def surface_jacobian(self) -> np.ndarray:
        return np.sqrt(1.0 + self.dw_dx**2)

    @property
    def min_J(self) -> float:
        return float(np.min(self.J)) if self.J.size else 1.0

    @property
    def degenerate(self) -> bool:
        return not self.min_J > self.collision_floor

    def require_regular(self) -> "AleMap":
        if self.degenerate:
            i = int(np.argmin(self.J))
            raise DegenerateMapError(
                "ALE map is degenerate (J below collision floor)",
                min_J=self.min_J,
                at_x=float(self.x[i]),
                collision_floor=self.collision_floor,
            )
        return self


def ale_map_point(w_at_X: float, X: float, z: float) -> tuple[float, float]:
    if not -1.0 <= z <= 0.0:
        raise ValueError(f"z must lie in [-1, 0], got {z}")
    if w_at_X <= -1.0:
        raise DegenerateMapError("displacement reaches the cavity bottom", w=float(w_at_X), X=float(X))
    return X, (z + 1.0) * w_at_X + z


def ale_inverse_point(w_at_X: float, X: float, z_phys: float) -> tuple[float, float]:
    """Обратное к ale_map_point: z = (z_phys − w) / (1 + w)"""
    if w_at_X <= -1.0:
        raise DegenerateMapError("displacement reaches the cavity bottom", w=float(w_at_X), X=float(X))
    return X, (z_phys - w_at_X) / (1.0 + w_at_X)


def jacobian(ale: AleMap) -> np.ndarray:
    ale.require_regular()
    return ale.J


def push_forward_z(ale: AleMap, z: np.ndarray) -> np.ndarray:
    """Физическая вертикальная координата на тензорной сетке (Nx, Nz)"""
    z = np.asarray(z, float)
    return (z[None, :] + 1.0) * ale.w[:, None] + z[None, :]


def push_forward_samples(ale: AleMap, z: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Отсчёты поля на опорной сетке x × z -> (X, z_phys, values) на физической области.
    Значения переносятся без изменений: u(A_w(X, z)) = U(X, z).
    """
    ale.require_regular()
    zp = push_forward_z(ale, z)
    X = np.broadcast_to(ale.x[:, None], zp.shape)
    return X, zp, np.asarray(values, float)


def transform_gradient_components(
    fx: np.ndarray, fz: np.ndarray, ale: AleMap, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(∂x f, ∂z f) на сетке (..., Nx, Nz) -> компоненты ∇^w f"""
    J = ale.J[:, None]
    shear = (np.asarray(z, float)[None, :] + 1.0) * ale.dw_dx[:, None] / J
    return fx - shear * fz, fz / J


def _grid_gradient(f: np.ndarray, x: np.ndarray, z: np.ndarray, fd_order: int) -> tuple[np.ndarray, np.ndarray]:
    if fd_order != 2:
        raise ValueError(f"unsupported finite-difference order: {fd_order}")
    fx = np.gradient(f, x, axis=-2, edge_order=2)
    fz = np.gradient(f, z, axis=-1, edge_order=2)
    return fx, fz


def transformed_gradient(
    f: np.ndarray, ale: AleMap, x: np.ndarray, z: np.ndarray, fd_order: int = 2
) -> np.ndarray:
    """∇^w f для поля на тензорной сетке x × z; результат (2, Nx, Nz)"""
    ale.require_regular()
    fx, fz = _grid_gradient(np.asarray(f, float), x, z, fd_order)
    gx, gz = transform_gradient_components(fx, fz, ale, z)
    return np.stack([gx, gz])


def transformed_divergence(
    U: np.ndarray, ale: AleMap, x: np.ndarray, z: np.ndarray, fd_order: int = 2
) -> np.ndarray:
    """∇^w·U = Tr(∇^w U) для U формы (2, Nx, Nz)"""
    ale.require_regular()
    ux_x, ux_z = _grid_gradient(U[0], x, z, fd_order)
    uz_x, uz_z = _grid_gradient(U[1], x, z, fd_order)
    dx_ux, _ = transform_gradient_components(ux_x, ux_z, ale, z)
    _, dz_uz = transform_gradient_components(uz_x, uz_z, ale, z)
    return dx_ux + dz_uz


def ale_velocity(dw_dt: np.ndarray, z: np.ndarray) -> np.ndarray:
    """ALE-скорость (0, (z+1)∂t w) на сетке (2, Nx, Nz)"""
    dw_dt = np.asarray(dw_dt, float)
    z = np.asarray(z, float)
    vz = (z[None, :] + 1.0) * dw_dt[:, None]
    return np.stack([np.zeros_like(vz), vz])
