from typing import Any

from pydantic import BaseModel, Field, computed_field


class CheckResult(BaseModel):
    name: str = Field(..., description="e.g. 'continuity', 'unitarity_boundary'")
    residual: float = Field(..., ge=0)
    tolerance: float = Field(..., ge=0)
    detail: dict[str, Any] = Field(default_factory=dict)

    @computed_field
    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


class PhysicsReport(BaseModel):
    """Named residuals with pass/fail against their thresholds."""
    checks: list[CheckResult] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, name: str, residual: float, tolerance: float, **detail: Any) -> CheckResult:
        check = CheckResult(name=name, residual=float(residual), tolerance=float(tolerance), detail=detail)
        self.checks.append(check)
        return check

    def merge(self, other: "PhysicsReport") -> "PhysicsReport":
        return PhysicsReport(checks=[*self.checks, *other.checks])

    def get(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed]
