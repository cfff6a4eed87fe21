from __future__ import annotations

import csv
import fcntl
import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from sentiment_protocol.cli import cli, parse_duration
from sentiment_protocol.errors import all_errors
from sentiment_protocol.scenarios import golden_path, load_scenario, run_scenario

from support import TALLY, WINDOW_END, spec_json


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()
    state = tmp_path / "state"

    def invoke(*args, expect=0, fmt="json"):
        result = runner.invoke(cli, ["--state-dir", str(state), "--format", fmt, *map(str, args)])
        assert result.exit_code == expect, (result.output, result.stderr if hasattr(result, "stderr") else "")
        return result

    invoke.state = state
    invoke.tmp = tmp_path
    return invoke


def write(tmp, name, obj):
    path = tmp / name
    path.write_text(json.dumps(obj))
    return path


def scenario_to_cli(run, scenario):
    """Drive a scenario through the command line, one invocation per step."""
    for i, cmd in enumerate(scenario["commands"]):
        if "at" in cmd:
            run("clock", "advance", "--to", cmd["at"])
        want = cmd.get("expect_error")
        code = next((e.exit_code for e in all_errors() if e.category == want), 0) if want else 0
        op = cmd["op"]
        if op == "create_token":
            run("ledger", "create-token", cmd["id"], "--decimals", cmd["decimals"], "--rule", cmd["rule"]["kind"])
        elif op == "mint":
            run("ledger", "mint", cmd["token"], cmd["account"], cmd["amount"], expect=code)
        elif op == "register_feed":
            path = write(run.tmp, f"feed{i}.json", cmd["feed"])
            run("oracle", "register", path, "--outcomes", json.dumps(cmd["outcomes"]), expect=code)
        elif op == "create_poll":
            path = write(run.tmp, f"spec{i}.json", cmd["spec"])
            run("poll", "create", path, "--deposit", cmd["deposit"], "--ref", cmd["ref"], expect=code)
        elif op == "submit":
            if "sealed" in cmd:
                path = write(run.tmp, f"sealed{i}.json", cmd["sealed"])
                run("poll", "submit", cmd["poll"], cmd["account"], "-", cmd["stake"], "--sealed", path, expect=code)
            else:
                run("poll", "submit", cmd["poll"], cmd["account"], cmd["choice"], cmd["stake"],
                    "--nonce", cmd["nonce"], expect=code)
        elif op == "tally":
            run("poll", "tally", cmd["poll"], "--reveal-key", cmd["reveal_key"], expect=code)
        elif op == "evaluate":
            run("poll", "evaluate", cmd["poll"], "--k", cmd["k"], expect=code)
        elif op == "close":
            run("poll", "close", cmd["poll"], expect=code)
        else:
            raise AssertionError(op)


def test_election_through_the_cli_matches_the_scenario(run):
    scenario = load_scenario("election2020")
    scenario_to_cli(run, scenario)
    digest = (run.state / "digest").read_text().strip()
    assert digest == run_scenario("election2020").digest
    assert digest == json.loads(golden_path("election2020").read_text())["event_log_digest"]
    report = json.loads(run("poll", "report", "election").output)
    nets = {r["account"]: r["net"] for r in report["submissions"]}
    assert nets == {"alice": "300", "bob": "0", "carol": "150", "dave": "0", "eve": "0"}


def test_error_exit_codes_and_diagnostic(run):
    run("ledger", "create-token", "ETH")
    run("ledger", "mint", "ETH", "a", "1")
    result = run("ledger", "transfer", "ETH", "a", "b", "2", expect=22)
    err = json.loads(result.stderr)
    assert err["category"] == "insufficient_balance" and err["exit_code"] == 22
    run("ledger", "mint", "ETH", "a", "0.0000000001", expect=10)
    run("ledger", "create-token", "ETH", expect=20)
    run("poll", "tally", "nope", expect=69)


def test_codes_are_distinct(run):
    rows = json.loads(run("codes").output)
    codes = [r["exit_code"] for r in rows]
    assert len(codes) == len(set(codes))
    assert 0 not in codes and 2 not in codes


def test_poll_flow_with_formats(run):
    run("ledger", "create-token", "ETH")
    run("ledger", "mint", "ETH", "pollster", "1000")
    run("ledger", "mint", "ETH", "a", "100")
    spec = write(run.tmp, "spec.json", spec_json({"variant": "constant", "c": "0.1"}, min_total="0"))
    run("poll", "create", spec, "--ref", "p")
    run("poll", "submit", "p", "a", "D", "100")
    status = json.loads(run("poll", "status", "p").output)
    assert status["phase"] == "contributing" and status["tally_at"] == TALLY
    run("clock", "advance", "--to", WINDOW_END)
    run("clock", "advance", "24h")
    assert json.loads(run("clock", "show").output)["now"] == TALLY
    run("poll", "tally", "p")
    out = run("poll", "evaluate", "p", fmt="csv").output
    assert out.splitlines()[1] == "poll-1/1,a,D,100,100,1,10,10"
    run("poll", "close", "p", fmt="table")
    shown = json.loads(run("ledger", "show", "--token", "ETH").output)
    assert {r["account"]: r["balance"] for r in shown} == {"a": "110", "pollster": "990"}
    out = run.tmp / "ledger.json"
    assert json.loads(run("ledger", "export", out).output)["conserved"]
    assert [t["id"] for t in json.loads(out.read_text())["tokens"]] == ["ETH"]


def test_quarterly_allowance_rule(run):
    run("ledger", "create-token", "RATE", "--rule", "quarterly_allowance:1/10")
    run("ledger", "mint", "RATE", "u1", "1000")
    run("ledger", "transfer", "RATE", "u1", "u2", "100")
    run("ledger", "transfer", "RATE", "u1", "u2", "1", expect=24)
    run("clock", "advance", "1q")
    run("ledger", "transfer", "RATE", "u1", "u2", "90")


def test_clock_needs_one_argument(run):
    run("clock", "advance", expect=2)
    run("clock", "advance", "5", "--to", "9", expect=2)
    run("clock", "advance", "soon", expect=2)
    assert parse_duration("1071d") == 1071 * 86400


def test_sealed_poll(run):
    keys = json.loads(run("poll", "keygen", "--seed", "x").output)
    assert keys == json.loads(run("poll", "keygen", "--seed", "x").output)
    run("ledger", "create-token", "ETH")
    run("ledger", "mint", "ETH", "pollster", "1000")
    run("ledger", "mint", "ETH", "a", "2000")
    feed = write(run.tmp, "feed.json", {"topic": "topic", "finalized_at": TALLY, "entries": [[TALLY, {"discrete": "D"}]]})
    run("oracle", "register", feed)
    spec = write(run.tmp, "spec.json", spec_json(
        {"variant": "discrete_match", "c": "0.1", "labels": ["R", "D"]}, sealed=True, seal_key=keys["seal_key"]))
    run("poll", "create", spec, "--ref", "p")
    run("poll", "submit", "p", "a", "D", "1500")
    run("clock", "advance", "--to", TALLY)
    run("poll", "tally", "p", expect=67)
    tallied = json.loads(run("poll", "tally", "p", "--reveal-key", keys["reveal_key"]).output)
    assert tallied["winner"] == "D"


def test_sim_commands(run, tmp_path):
    names = [r["scenario"] for r in json.loads(run("sim", "list").output)]
    assert "governance_dao" in names
    events = tmp_path / "events.jsonl"
    out = json.loads(run("sim", "run", "tesla_buy_sell", "--events-out", events).output)
    assert out["golden"] == "match" and out["conserved"]
    assert events.read_text().count("\n") == out["events"]
    run("sim", "run", "nope", expect=80)

    scenario = load_scenario("multi_pe")
    scenario["commands"][-1]["op"] = "close"
    scenario["commands"].pop()
    path = write(tmp_path, "multi_pe.json", scenario)
    result = run("sim", "run", path, expect=81)
    assert json.loads(result.stderr)["diff"]
    assert json.loads(run("sim", "run", path, "--no-golden").output)["golden"] == "skipped"


def test_pef_tools(run, tmp_path):
    rating = write(tmp_path, "rating.json", {"variant": "rating_triple", "c": "0.1"})
    out = tmp_path / "up.csv"
    assert json.loads(run("pef", "curve", rating, "up", "0.5:2:4", out).output)["points"] == 4
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["outcome", "normalized_value"] and float(rows[-1][1]) == 1.0
    run("pef", "curve", rating, "up", "2:1:4", out, expect=36)

    arctan = write(tmp_path, "arctan.json", {"pef": {"variant": "arctan_buy_sell", "c": "0.1"}})
    assert run("pef", "arbitrage", arctan, fmt="table").output.strip() == "NONE"
    assert json.loads(run("pef", "arbitrage", arctan).output) == {"arbitrage": "NONE"}
    match = write(tmp_path, "match.json", {"variant": "discrete_match", "c": "0.1", "labels": ["R", "D"]})
    found = json.loads(run("pef", "arbitrage", match).output)["arbitrage"]
    assert found["profit"] == pytest.approx(0.05)
    run("pef", "arbitrage", match, "--grid", "1:2:3", expect=36)

    const = write(tmp_path, "const.json", {"variant": "constant", "c": "0.1"})
    assert json.loads(run("pef", "pool", const, "10000").output)["required_pool"] == "1000"
    sched = write(tmp_path, "sched.json", [{"dt": 0, "weight": "1/2"}, {"dt": 0, "weight": "1/4"}])
    assert json.loads(run("pef", "pool", const, "10000", "--schedule", sched).output)["required_pool"] == "750"
    rows = json.loads(run("pef", "reserve", "100000", "0.99", "--rounds", "2").output)
    assert rows == [{"round": 1, "pool": "1000", "cumulative": "1000"},
                    {"round": 2, "pool": "990", "cumulative": "1990"}]
    run("pef", "reserve", "100000", "1.5", expect=34)


def test_lock_blocks_a_second_writer(run):
    run("ledger", "create-token", "ETH")
    with open(run.state / ".lock", "w") as held:
        fcntl.flock(held, fcntl.LOCK_EX | fcntl.LOCK_NB)
        run("ledger", "mint", "ETH", "a", "1", expect=83)
    run("ledger", "mint", "ETH", "a", "1")


@pytest.mark.parametrize("target", ["ledger.json", "events.jsonl", "digest", "journal.jsonl"])
def test_tampering_is_detected(run, target):
    run("ledger", "create-token", "ETH")
    run("ledger", "mint", "ETH", "a", "5")
    path = run.state / target
    text = path.read_text()
    if target in ("journal.jsonl", "ledger.json"):
        text = text.replace('"5"', '"6"')
    elif target == "digest":
        text = "0" * 64 + "\n"
    else:
        text = text.replace("5000000000", "6000000000")
    path.write_text(text)
    run("ledger", "show", expect=82)


def test_quiet(run):
    result = CliRunner().invoke(cli, ["--state-dir", str(run.state), "--quiet", "ledger", "create-token", "ETH"])
    assert result.exit_code == 0 and result.output == ""


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sentiment_protocol", "--state-dir", str(tmp_path), "codes"],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(proc.stdout)[0]["exit_code"] >= 1
