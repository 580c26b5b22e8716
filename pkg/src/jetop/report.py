"""Check results and run reports with a fixed JSON layout."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

PASS, FAIL, INFO = "pass", "fail", "info"


@dataclass
class Check:
    name: str
    status: str
    residual: str = "0"
    value: str | None = None

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def as_dict(self) -> dict:
        d = {"name": self.name, "status": self.status, "residual": self.residual}
        if self.value is not None:
            d["value"] = self.value
        return d


def check(name: str, ok: bool, residual: str = "0", value=None) -> Check:
    return Check(name, PASS if ok else FAIL, "0" if ok else (residual or "?"), value)


def info(name: str, value: str) -> Check:
    return Check(name, INFO, "0", value)


@dataclass
class Report:
    command: str
    file: str | None = None
    checks: list = field(default_factory=list)
    seed: int | None = None
    elapsed_ms: float = 0.0
    json: bool = False

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, c: Check) -> Check:
        self.checks.append(c)
        return c

    def extend(self, cs) -> None:
        self.checks.extend(cs)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "file": self.file,
            "checks": [c.as_dict() for c in self.checks],
            "seed": self.seed,
            "elapsed_ms": round(self.elapsed_ms, 3),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"{self.command}: {'PASS' if self.passed else 'FAIL'}" + (f"  ({self.file})" if self.file else "")]
        for c in self.checks:
            tag = {PASS: "ok  ", FAIL: "FAIL", INFO: "    "}[c.status]
            line = f"  [{tag}] {c.name}"
            if c.value is not None:
                line += f": {c.value}"
            if c.status == FAIL:
                line += f"\n         residual: {c.residual}"
            lines.append(line)
        lines.append(f"  ({self.elapsed_ms:.0f} ms)")
        return "\n".join(lines)


SCHEMA = {
    "type": "object",
    "required": ["command", "file", "checks", "seed", "elapsed_ms"],
    "properties": {
        "command": {"type": "string"},
        "file": {"type": ["string", "null"]},
        "seed": {"type": ["integer", "null"]},
        "elapsed_ms": {"type": "number"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "status", "residual"],
                "properties": {
                    "name": {"type": "string"},
                    "status": {"enum": [PASS, FAIL, INFO]},
                    "residual": {"type": "string"},
                    "value": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}
