"""Report-valued results shared by the validators."""

from dataclasses import dataclass, field
from typing import Any, List, Optional


@dataclass(frozen=True)
class ClauseResult:
    clause: str
    passed: bool
    detail: str = ""
    value: Optional[float] = None
    borderline: bool = False

    def to_dict(self) -> dict:
        out = {"clause": self.clause, "passed": self.passed, "detail": self.detail}
        if self.value is not None:
            out["value"] = float(self.value)
        if self.borderline:
            out["borderline"] = True
        return out


@dataclass
class ValidationReport:
    subject: str
    clauses: List[ClauseResult] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add(self, clause: str, passed: bool, detail: str = "", value: Any = None,
            borderline: bool = False) -> ClauseResult:
        result = ClauseResult(clause, bool(passed), detail,
                              None if value is None else float(value), borderline)
        self.clauses.append(result)
        return result

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failed(self) -> List[ClauseResult]:
        return [c for c in self.clauses if not c.passed]

    def borderline(self) -> List[ClauseResult]:
        return [c for c in self.clauses if c.borderline]

    def clause(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.clause == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "passed": self.passed,
            "clauses": [c.to_dict() for c in self.clauses],
            "notes": self.notes,
        }
