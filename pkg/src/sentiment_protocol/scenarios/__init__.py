"""Scripted end-to-end scenarios with golden reports.

A scenario file is JSON::

    {"name": ..., "description": ..., "epoch": "2017-12-01",
     "reports": ["ref", ...], "commands": [...]}

``commands`` are :class:`~sentiment_protocol.sim.Simulation` commands. A
command may carry ``"expect_error": "<category>"``; the runner then requires
that exact failure and moves on (failed commands never touch state or log).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from ..engine import SettlementReport
from ..errors import GoldenMismatch, ProtocolError, UnknownScenario
from ..events import canonical_json
from ..sim import Simulation

SCENARIO_DIR = Path(str(resources.files(__package__)))
GOLDEN_DIR = SCENARIO_DIR / "golden"


@dataclass
class ScenarioResult:
    name: str
    sim: Simulation
    reports: dict[str, SettlementReport]
    expected_errors: list[dict] = field(default_factory=list)

    @property
    def log(self):
        return self.sim.log

    @property
    def digest(self) -> str:
        return self.sim.log.digest()

    def to_golden(self) -> dict:
        return {
            "scenario": self.name,
            "event_log_digest": self.digest,
            "events": len(self.sim.log),
            "reports": {ref: r.to_json() for ref, r in self.reports.items()},
            "ledger": self.sim.ledger.snapshot(),
            "conserved": self.sim.ledger.is_conserved(),
            "decisions": self.sim.decisions,
            "expected_errors": self.expected_errors,
        }


def list_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))


def load_scenario(name_or_path: Union[str, Path]) -> dict:
    path = Path(name_or_path)
    if not path.suffix == ".json" or not path.exists():
        path = SCENARIO_DIR / f"{name_or_path}.json"
    if not path.exists():
        raise UnknownScenario(f"no scenario {str(name_or_path)!r}; known: {', '.join(list_scenarios())}")
    return json.loads(path.read_text(encoding="utf-8"))


def execute(scenario: dict) -> ScenarioResult:
    sim = Simulation()
    expected = []
    for i, cmd in enumerate(scenario["commands"]):
        want = cmd.get("expect_error")
        if want is None:
            sim.apply(cmd)
            continue
        body = {k: v for k, v in cmd.items() if k != "expect_error"}
        try:
            sim.apply(body)
        except ProtocolError as exc:
            if exc.category != want:
                raise
            expected.append({"command": i, "op": cmd["op"], "error": exc.category, "exit_code": exc.exit_code})
        else:
            raise AssertionError(f"command {i} ({cmd['op']}) should have failed with {want}")
    reports = {ref: sim.engine.report(sim.poll_id(ref)) for ref in scenario.get("reports", [])}
    return ScenarioResult(scenario["name"], sim, reports, expected)


def golden_path(name: str) -> Path:
    return GOLDEN_DIR / f"{name}.json"


def diff(expected, actual, path: str = "$") -> list[dict]:
    """Structured difference between two JSON values."""
    if isinstance(expected, dict) and isinstance(actual, dict):
        out = []
        for key in sorted(set(expected) | set(actual)):
            sub = f"{path}.{key}"
            if key not in actual:
                out.append({"path": sub, "expected": expected[key], "actual": "<missing>"})
            elif key not in expected:
                out.append({"path": sub, "expected": "<missing>", "actual": actual[key]})
            else:
                out.extend(diff(expected[key], actual[key], sub))
        return out
    if isinstance(expected, list) and isinstance(actual, list) and len(expected) == len(actual):
        out = []
        for i, (a, b) in enumerate(zip(expected, actual)):
            out.extend(diff(a, b, f"{path}[{i}]"))
        return out
    if expected != actual:
        return [{"path": path, "expected": expected, "actual": actual}]
    return []


def run_scenario(name_or_path: Union[str, Path], check_golden: bool = True,
                 golden: Optional[Path] = None) -> ScenarioResult:
    """Run a scenario and compare it with its golden file.

    Raises ``GoldenMismatch`` with a per-path diff when anything differs.
    """
    scenario = load_scenario(name_or_path)
    result = execute(scenario)
    if check_golden:
        path = golden or golden_path(scenario["name"])
        if not path.exists():
            raise GoldenMismatch(f"no golden file at {path}", [])
        expected = json.loads(path.read_text(encoding="utf-8"))
        actual = json.loads(canonical_json(result.to_golden()))
        changes = diff(expected, actual)
        if changes:
            raise GoldenMismatch(f"scenario {scenario['name']!r} differs from its golden file", changes)
    return result


def write_golden(name_or_path: Union[str, Path], golden: Optional[Path] = None) -> Path:
    result = run_scenario(name_or_path, check_golden=False)
    path = golden or golden_path(result.name)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.to_golden(), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


__all__ = [
    "ScenarioResult",
    "diff",
    "execute",
    "golden_path",
    "list_scenarios",
    "load_scenario",
    "run_scenario",
    "write_golden",
]
