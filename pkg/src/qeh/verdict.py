"""Per-level pass/fail records shared by the classical and quantum tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

LEVELS = ("ergodic", "mixing", "kolmogorov", "bernoulli")


@dataclass(frozen=True)
class LevelResult:
    name: str
    passed: bool
    residual: float
    epsilon: float
    parameters: dict[str, Any] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @classmethod
    def from_residual(cls, name, residual, epsilon, parameters=None, notes=()):
        residual = float(residual)
        return cls(name, residual < epsilon, residual, float(epsilon), dict(parameters or {}), tuple(notes))

    def as_record(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "residual": self.residual,
            "epsilon": self.epsilon,
            "parameters": dict(self.parameters),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class HierarchyVerdict:
    """One :class:`LevelResult` per hierarchy level, in ``LEVELS`` order."""

    levels: tuple[LevelResult, ...]
    epsilon: float
    notes: tuple[str, ...] = ()

    def __getitem__(self, name: str) -> LevelResult:
        for lv in self.levels:
            if lv.name == name:
                return lv
        raise KeyError(name)

    def passed(self, name: str) -> bool:
        return self[name].passed

    def flags(self) -> dict[str, bool]:
        return {lv.name: lv.passed for lv in self.levels}

    def inclusions_hold(self) -> bool:
        """bernoulli => kolmogorov => mixing => ergodic on the emitted booleans."""
        f = self.flags()
        chain = [f[name] for name in reversed(LEVELS) if name in f]
        return all(not hi or lo for hi, lo in zip(chain, chain[1:]))

    def as_records(self) -> list[dict[str, Any]]:
        return [lv.as_record() for lv in self.levels]
