"""
Иерархия ошибок солвера.

Каждая ошибка несёт машинно-читаемый code и структурированный detail,
как единый формат ответа {"status": "error", "code": ..., "detail": ...}.
"""
from __future__ import annotations
from typing import Any, Dict


class FsiError(Exception):
    code: str = "fsi.error"
    exit_code: int = 1

    def __init__(self, message: str, **detail: Any):
        super().__init__(message)
        self.message = message
        self.detail: Dict[str, Any] = dict(detail)

    def to_dict(self) -> dict:
        """Единый способ отдавать ошибки наружу (CLI печатает это как JSON)"""
        return {"status": "error", "code": self.code, "detail": {"message": self.message, **self.detail}}

    def annotate(self, **extra: Any) -> "FsiError":
        """Дописывает контекст (например номер окна) и возвращает себя для re-raise"""
        self.detail.update(extra)
        return self


class ConfigError(FsiError):
    code = "config.invalid"
    exit_code = 2


class DegenerateMapError(FsiError):
    code = "geometry.degenerate"


class RootBracketError(FsiError):
    code = "bases.root_bracket"


class BasisError(FsiError):
    code = "bases.not_orthonormal"


class DimensionMismatchError(FsiError):
    code = "solver.dimension"


class UnknownNonlinearityError(FsiError):
    code = "ssp.unknown_nonlinearity"


class BlowUpError(FsiError):
    code = "ssp.blow_up"


class DensityPositivityError(FsiError):
    code = "fsp.density_positivity"


class MassMatrixError(FsiError):
    code = "fsp.mass_matrix"


class LinearSolveError(FsiError):
    code = "solver.linear_solve"


class FixedPointError(FsiError):
    code = "fsp.fixed_point"


class HandoffError(FsiError):
    code = "driver.handoff"


class OutputExistsError(FsiError):
    code = "cli.output_exists"
    exit_code = 2


class InvariantFailure(FsiError):
    code = "check.failed"
    exit_code = 3


class InternalError(FsiError):
    """Непредвиденное исключение вне иерархии (ошибка ввода-вывода, баг)"""

    code = "internal.error"

    @classmethod
    def wrap(cls, error: BaseException) -> "InternalError":
        return cls(str(error) or type(error).__name__, type=type(error).__name__)
