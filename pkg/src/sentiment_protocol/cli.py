"""Command line front end.

State lives in one directory (``--state-dir``)::

    journal.jsonl   every state-changing command, in order
    events.jsonl    the event log those commands produced
    ledger.json     ledger snapshot after the last command
    digest          sha256 of events.jsonl

Each invocation replays the journal, checks the result against ``digest`` and
``ledger.json``, applies its own command and rewrites all four files. Failed
commands leave the directory untouched. Protocol errors exit with the code
listed by ``sentiment-protocol codes``.
"""

from __future__ import annotations

import fcntl
import json
import os
import re
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import click

from .core import DAY, QUARTER, Continuous, from_base_units, parse_choice, to_base_units
from .engine import SettlementReport
from .errors import (
    BadGrid,
    ProtocolError,
    StateCorrupted,
    StateLocked,
    all_errors,
)
from .events import EventLog, canonical_json
from .pef import (
    EvaluationSchedule,
    curve_samples,
    detect_arbitrage,
    geometric_pool,
    parse_grid,
    pef_from_json,
    required_pool,
    samples_to_csv,
)
from .pef.functions import log_grid
from .scenarios import list_scenarios, run_scenario, write_golden
from .sealing import PollKeyPair, SealedChoice, random_nonce
from .sim import Simulation

JOURNAL = "journal.jsonl"
EVENTS = "events.jsonl"
LEDGER = "ledger.json"
DIGEST = "digest"
LOCK = ".lock"

_UNITS = {"": 1, "s": 1, "m": 60, "h": 3600, "d": DAY, "q": QUARTER}


def parse_duration(text: str) -> int:
    """Seconds from ``"90"``, ``"24h"``, ``"1071d"`` or ``"1q"`` (90 days)."""
    m = re.fullmatch(r"\s*(\d+)\s*([smhdq]?)\s*", str(text))
    if not m:
        raise click.BadParameter(f"not a duration: {text!r}")
    return int(m.group(1)) * _UNITS[m.group(2)]


def read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise click.BadParameter(f"cannot read JSON from {path}: {exc}") from exc


# --------------------------------------------------------------------------
# persisted state

def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class StateDir:
    def __init__(self, path: Path):
        self.path = path
        self.journal: list[dict] = []
        self.sim = Simulation()

    def load(self) -> None:
        journal = self.path / JOURNAL
        if not journal.exists():
            return
        lines = journal.read_text(encoding="utf-8").splitlines()
        self.journal = [json.loads(line) for line in lines if line.strip()]
        try:
            self.sim.run(self.journal)
        except ProtocolError as exc:
            raise StateCorrupted(f"journal no longer replays: {exc}") from exc
        stored = (self.path / DIGEST).read_text().strip() if (self.path / DIGEST).exists() else None
        if stored != self.sim.log.digest():
            raise StateCorrupted("event log digest does not match the replayed journal")
        events = self.path / EVENTS
        if not events.exists() or EventLog.read(events).digest() != stored:
            raise StateCorrupted("events.jsonl does not match the recorded digest")
        ledger = self.path / LEDGER
        if not ledger.exists() or json.loads(ledger.read_text()) != self.sim.ledger.snapshot():
            raise StateCorrupted("ledger.json does not match the replayed ledger")

    def apply(self, cmd: dict):
        result = self.sim.apply(cmd)
        self.journal.append(cmd)
        self.save()
        return result

    def save(self) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        _write_atomic(self.path / EVENTS, self.sim.log.to_jsonl())
        _write_atomic(self.path / LEDGER, json.dumps(self.sim.ledger.snapshot(), indent=2, sort_keys=True) + "\n")
        _write_atomic(self.path / DIGEST, self.sim.log.digest() + "\n")
        # the journal goes last: an interrupted save shows up as a digest mismatch
        _write_atomic(self.path / JOURNAL, "".join(canonical_json(c) + "\n" for c in self.journal))


@contextmanager
def open_state(path: Path):
    path.mkdir(parents=True, exist_ok=True)
    with open(path / LOCK, "w") as lock:
        try:
            fcntl.flock(lock, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise StateLocked(f"another invocation holds {path / LOCK}") from None
        try:
            state = StateDir(path)
            state.load()
            yield state
        finally:
            fcntl.flock(lock, fcntl.LOCK_UN)


# --------------------------------------------------------------------------
# output

def _cell(v) -> str:
    if isinstance(v, (dict, list)):
        return canonical_json(v)
    return "" if v is None else str(v)


def _table(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    cells = [[_cell(r.get(c)) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(line.rstrip() for line in lines)


def _csv(obj) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = obj if isinstance(obj, list) else [obj]
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def emit(ctx: click.Context, obj, report: Optional[SettlementReport] = None) -> None:
    cfg = ctx.find_root().obj
    if cfg["quiet"]:
        return
    fmt = cfg["format"]
    if fmt == "json":
        click.echo(json.dumps(obj, indent=2, ensure_ascii=False))
    elif fmt == "csv":
        click.echo(report.to_csv() if report is not None else _csv(obj), nl=False)
    elif report is not None:
        rows = [
            {k: v for k, v in r.items() if k != "evaluations"}
            | {"payouts": len(r["evaluations"])}
            for r in obj["submissions"]
        ]
        click.echo(f"{obj['poll']}  {obj['phase']}")
        click.echo(_table(rows) if rows else "(no submissions)")
        click.echo(_table([obj["totals"]]))
    elif isinstance(obj, list):
        click.echo(_table(obj) if obj else "(empty)")
    else:
        click.echo(_table([{"key": k, "value": _cell(v)} for k, v in obj.items()]))


# --------------------------------------------------------------------------
# command tree

class ProtocolGroup(click.Group):
    """Maps protocol errors to their exit codes with a JSON diagnostic on stderr."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ProtocolError as exc:
            err = {"error": type(exc).__name__, "category": exc.category,
                   "exit_code": exc.exit_code, "message": str(exc)}
            diff = getattr(exc, "diff", None)
            if diff:
                err["diff"] = diff
            click.echo(json.dumps(err, ensure_ascii=False), err=True)
            ctx.exit(exc.exit_code)


@click.group(cls=ProtocolGroup)
@click.option("--state-dir", type=click.Path(file_okay=False, path_type=Path),
              default=lambda: os.environ.get("SENTIMENT_STATE_DIR", ".sentiment-state"),
              show_default=".sentiment-state", help="Directory holding persisted state.")
@click.option("--format", "fmt", type=click.Choice(["json", "table", "csv"]), default="json", show_default=True)
@click.option("--quiet", is_flag=True, help="Suppress normal output.")
@click.pass_context
def cli(ctx, state_dir, fmt, quiet):
    """Deterministic engine and simulator for staked sentiment polls."""
    ctx.obj = {"state_dir": Path(state_dir), "format": fmt, "quiet": quiet}


def _run(ctx: click.Context, cmd: dict, report: bool = False):
    with open_state(ctx.find_root().obj["state_dir"]) as state:
        result = state.apply(cmd)
        rep = None
        if report and isinstance(result, dict) and "poll" in result:
            rep = state.sim.engine.report(result["poll"])
    emit(ctx, result, rep)
    return result


@cli.command("codes")
@click.pass_context
def codes(ctx):
    """List error categories and their exit codes."""
    emit(ctx, [{"exit_code": c.exit_code, "error": c.__name__, "category": c.category} for c in all_errors()])


# ---- ledger

@cli.group()
def ledger():
    """Tokens, balances and transfers."""


@ledger.command("create-token")
@click.argument("token_id")
@click.option("--decimals", default=9, show_default=True, type=int)
@click.option("--rule", default="free", show_default=True,
              help="free, non_transferable_between_users or quarterly_allowance:FRACTION")
@click.option("--restrict-rewards", is_flag=True, help="Apply the transfer rule to earned tokens too.")
@click.pass_context
def ledger_create_token(ctx, token_id, decimals, rule, restrict_rewards):
    kind, _, fraction = rule.partition(":")
    rule_obj = {"kind": kind}
    if fraction:
        rule_obj["fraction"] = fraction
    _run(ctx, {"op": "create_token", "id": token_id, "decimals": decimals, "rule": rule_obj,
               "reward_lots_free": not restrict_rewards})


@ledger.command("mint")
@click.argument("token_id")
@click.argument("account")
@click.argument("amount")
@click.option("--lot", type=click.Choice(["originated", "earned"]), default="originated", show_default=True)
@click.pass_context
def ledger_mint(ctx, token_id, account, amount, lot):
    _run(ctx, {"op": "mint", "token": token_id, "account": account, "amount": amount, "lot": lot})


@ledger.command("transfer")
@click.argument("token_id")
@click.argument("src")
@click.argument("dst")
@click.argument("amount")
@click.pass_context
def ledger_transfer(ctx, token_id, src, dst, amount):
    _run(ctx, {"op": "transfer", "token": token_id, "from": src, "to": dst, "amount": amount})


@ledger.command("show")
@click.option("--token", "token_id", default=None, help="Only this token.")
@click.pass_context
def ledger_show(ctx, token_id):
    """Balances per account and token."""
    with open_state(ctx.find_root().obj["state_dir"]) as state:
        lg = state.sim.ledger
        rows = []
        for account in lg.accounts():
            for tid in sorted(lg.tokens):
                if token_id and tid != token_id:
                    continue
                lots = lg.lots(tid, account)
                if lots.total == 0:
                    continue
                rows.append({"account": account, "token": tid, "balance": lg.display(tid, lots.total),
                             "originated": lg.display(tid, lots.originated), "earned": lg.display(tid, lots.earned)})
    emit(ctx, rows)


@ledger.command("export")
@click.argument("out", type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
def ledger_export(ctx, out):
    """Write the full ledger snapshot as JSON."""
    with open_state(ctx.find_root().obj["state_dir"]) as state:
        out.write_text(json.dumps(state.sim.ledger.snapshot(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        conserved = state.sim.ledger.is_conserved()
    emit(ctx, {"written": str(out), "conserved": conserved})


# ---- oracle

@cli.group()
def oracle():
    """Outcome feeds."""


@oracle.command("register")
@click.argument("feed_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--outcomes", default=None, help='Outcome set to check against, e.g. \'{"discrete": ["R", "D"]}\'.')
@click.pass_context
def oracle_register(ctx, feed_file, outcomes):
    cmd = {"op": "register_feed", "feed": read_json(feed_file)}
    if outcomes:
        cmd["outcomes"] = json.loads(outcomes)
    _run(ctx, cmd)


# ---- clock

@cli.group()
def clock():
    """The manual logical clock (seconds)."""


@clock.command("advance")
@click.argument("delta", required=False)
@click.option("--to", "to", type=int, default=None, help="Absolute time instead of a delta.")
@click.pass_context
def clock_advance(ctx, delta, to):
    """Move time forward by DELTA (e.g. 3600, 24h, 1071d, 1q) or to an absolute time."""
    if (delta is None) == (to is None):
        raise click.UsageError("give either DELTA or --to")
    cmd = {"op": "advance", "to": to} if to is not None else {"op": "advance", "by": parse_duration(delta)}
    _run(ctx, cmd)


@clock.command("show")
@click.pass_context
def clock_show(ctx):
    with open_state(ctx.find_root().obj["state_dir"]) as state:
        now = state.sim.clock.now
    emit(ctx, {"now": now, "days": now // DAY})


# ---- polls

@cli.group()
def poll():
    """Create, run and settle polls."""


@poll.command("keygen")
@click.option("--seed", default=None, help="Derive the key pair from this text (reproducible).")
@click.pass_context
def poll_keygen(ctx, seed):
    """Print a seal key for a sealed poll spec and the matching reveal key."""
    pair = PollKeyPair.generate(seed.encode() if seed is not None else None)
    emit(ctx, {"seal_key": pair.public.hex(), "reveal_key": pair.private.hex()})


@poll.command("create")
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--deposit", default=None, help="Reward pool deposit; defaults to the required minimum.")
@click.option("--ref", default=None, help="Alias usable in place of the poll id.")
@click.pass_context
def poll_create(ctx, spec_file, deposit, ref):
    cmd = {"op": "create_poll", "spec": read_json(spec_file), "deposit": deposit}
    if ref:
        cmd["ref"] = ref
    _run(ctx, cmd)


@poll.command("submit")
@click.argument("poll_id")
@click.argument("account")
@click.argument("choice")
@click.argument("stake")
@click.option("--nonce", default=None, help="Hex nonce for sealing (random if omitted).")
@click.option("--sealed", "sealed_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Submit an already sealed choice from this JSON file; CHOICE is ignored.")
@click.pass_context
def poll_submit(ctx, poll_id, account, choice, stake, nonce, sealed_file):
    """Stake STAKE tokens on CHOICE (a label such as D, or an interval such as "(1,inf)")."""
    cmd = {"op": "submit", "poll": poll_id, "account": account, "stake": stake}
    if sealed_file:
        cmd["sealed"] = SealedChoice.from_json(read_json(sealed_file)).to_json()
    else:
        cmd["choice"] = choice
        with open_state(ctx.find_root().obj["state_dir"]) as state:
            sealed = state.sim.engine.poll(state.sim.poll_id(poll_id)).spec.sealed
        if sealed:
            cmd["nonce"] = nonce or random_nonce().hex()
    _run(ctx, cmd)


@poll.command("tally")
@click.argument("poll_id")
@click.option("--reveal-key", default=None, help="Pollster's reveal key (hex) for sealed polls.")
@click.pass_context
def poll_tally(ctx, poll_id, reveal_key):
    cmd = {"op": "tally", "poll": poll_id}
    if reveal_key:
        cmd["reveal_key"] = reveal_key
    _run(ctx, cmd)


@poll.command("evaluate")
@click.argument("poll_id")
@click.option("--k", type=int, default=None, help="Evaluation index (next one by default).")
@click.pass_context
def poll_evaluate(ctx, poll_id, k):
    cmd = {"op": "evaluate", "poll": poll_id}
    if k is not None:
        cmd["k"] = k
    _run(ctx, cmd, report=True)


@poll.command("close")
@click.argument("poll_id")
@click.pass_context
def poll_close(ctx, poll_id):
    _run(ctx, {"op": "close", "poll": poll_id}, report=True)


@poll.command("report")
@click.argument("poll_id")
@click.pass_context
def poll_report(ctx, poll_id):
    with open_state(ctx.find_root().obj["state_dir"]) as state:
        rep = state.sim.engine.report(state.sim.poll_id(poll_id))
    emit(ctx, rep.to_json(), rep)


@poll.command("status")
@click.argument("poll_id")
@click.pass_context
def poll_status(ctx, poll_id):
    """Phase as of the current clock, plus the key times."""
    with open_state(ctx.find_root().obj["state_dir"]) as state:
        sim = state.sim
        pid = sim.poll_id(poll_id)
        p = sim.engine.poll(pid)
        spec = p.spec
        out = {
            "poll": pid,
            "phase": sim.engine.phase(pid, sim.clock.now).value,
            "now": sim.clock.now,
            "window": [spec.staking.start, spec.staking.end],
            "tally_at": spec.tally_at,
            "evaluations_at": [spec.evaluation_at(k) for k in range(1, len(spec.schedule) + 1)],
            "evaluations_done": p.evaluations_done,
        }
    emit(ctx, out)


@poll.command("governance-round")
@click.argument("token_id")
@click.argument("round_index", type=int)
@click.argument("template_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--reserve", required=True, help="Total tokens set aside for all rounds.")
@click.option("--x", "ratio", default="0.99", show_default=True, help="Ratio between consecutive pools.")
@click.option("--ref", default=None)
@click.pass_context
def poll_governance_round(ctx, token_id, round_index, template_file, reserve, ratio, ref):
    """Open a flat-reward poll funded by round ROUND_INDEX of a geometric reserve."""
    cmd = {"op": "governance_round", "token": token_id, "round": round_index,
           "template": read_json(template_file), "total_reserve": reserve, "x": ratio}
    if ref:
        cmd["ref"] = ref
    _run(ctx, cmd)


# ---- simulation

@cli.group()
def sim():
    """Bundled end-to-end scenarios."""


@sim.command("list")
@click.pass_context
def sim_list(ctx):
    emit(ctx, [{"scenario": name} for name in list_scenarios()])


@sim.command("run")
@click.argument("scenario")
@click.option("--update-golden", is_flag=True, help="Rewrite the golden file instead of checking it.")
@click.option("--no-golden", is_flag=True, help="Skip the golden comparison.")
@click.option("--events-out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Also write the event log here.")
@click.pass_context
def sim_run(ctx, scenario, update_golden, no_golden, events_out):
    """Run SCENARIO (a bundled name or a JSON path) and compare it with its golden file."""
    if update_golden:
        write_golden(scenario)
    result = run_scenario(scenario, check_golden=not no_golden)
    if events_out:
        result.log.write(events_out)
    emit(ctx, {
        "scenario": result.name,
        "golden": "skipped" if no_golden else "match",
        "event_log_digest": result.digest,
        "events": len(result.log),
        "conserved": result.sim.ledger.is_conserved(),
        "reports": {ref: r.to_json() for ref, r in result.reports.items()},
    })


# ---- performance-evaluation functions

@cli.group()
def pef():
    """Inspect performance-evaluation functions."""


def _load_pef(path: str):
    obj = read_json(path)
    return pef_from_json(obj.get("pef", obj))


@pef.command("curve")
@click.argument("pef_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("sentiment")
@click.argument("grid")
@click.argument("out_csv", type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
def pef_curve(ctx, pef_file, sentiment, grid, out_csv):
    """Sample f(o, SENTIMENT)/c over GRID (start:stop:steps) into OUT_CSV."""
    f = _load_pef(pef_file)
    samples = curve_samples(f, parse_choice(sentiment), parse_grid(grid))
    out_csv.write_text(samples_to_csv(samples), encoding="utf-8")
    emit(ctx, {"written": str(out_csv), "points": len(samples)})


@pef.command("arbitrage")
@click.argument("pef_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", default=None, help="Outcome grid start:stop:steps for continuous functions.")
@click.option("--sentiments", default=None, help="Comma-separated sentiments to mix (defaults to the function's own).")
@click.pass_context
def pef_arbitrage(ctx, pef_file, grid, sentiments):
    """Print NONE, or the stake mix with a guaranteed profit."""
    f = _load_pef(pef_file)
    outcomes = None
    if grid is not None:
        if not f.continuous:
            raise BadGrid("a grid only applies to functions of a continuous outcome")
        outcomes = [Continuous(o) for o in parse_grid(grid)]
    elif f.continuous:
        outcomes = log_grid()
    choices = [parse_choice(s) for s in sentiments.split(",")] if sentiments else None
    found = detect_arbitrage(f, choices, outcomes)
    if found is None:
        cfg = ctx.find_root().obj
        if not cfg["quiet"]:
            click.echo("NONE" if cfg["format"] != "json" else json.dumps({"arbitrage": "NONE"}))
        return
    emit(ctx, {"arbitrage": found.to_json()})


@pef.command("pool")
@click.argument("pef_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("max_total")
@click.option("--schedule", "schedule_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON list of {dt, weight}; a single unit-weight evaluation by default.")
@click.option("--decimals", default=9, show_default=True)
@click.pass_context
def pef_pool(ctx, pef_file, max_total, schedule_file, decimals):
    """Smallest reward pool covering MAX_TOTAL staked tokens."""
    f = _load_pef(pef_file)
    schedule = EvaluationSchedule.from_json(read_json(schedule_file)) if schedule_file else EvaluationSchedule.single(0)
    units = required_pool(schedule, f, to_base_units(max_total, decimals))
    emit(ctx, {"required_pool": from_base_units(units, decimals), "base_units": units})


@pef.command("reserve")
@click.argument("total")
@click.argument("ratio")
@click.option("--rounds", default=1, show_default=True, help="How many rounds to list.")
@click.option("--decimals", default=9, show_default=True)
@click.pass_context
def pef_reserve(ctx, total, ratio, rounds, decimals):
    """Per-round pools of a geometric reserve TOTAL with ratio RATIO."""
    units = to_base_units(total, decimals)
    rows, spent = [], 0
    for i in range(1, rounds + 1):
        r = geometric_pool(units, ratio, i)
        spent += r
        rows.append({"round": i, "pool": from_base_units(r, decimals), "cumulative": from_base_units(spent, decimals)})
    emit(ctx, rows)


def main(argv: Optional[list[str]] = None) -> None:
    cli.main(args=argv, prog_name="sentiment-protocol")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
