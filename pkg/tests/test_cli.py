import csv
import io
import json
import logging

import pytest

from echochamber.cli import EchoChamber, main, setup_logging
from echochamber.constants import ExitCode
from echochamber.errors import InvalidArgument

STAMP = "20240101T000000"

SMALL_RUN = """
trials = 3
chunk_size = 3

[network]
n = 4
p = 0.75
q = 0.5

[integrator]
epsilon = 0.05
step = 0.005
horizon = 30.0
"""


def run(*argv):
    out = io.StringIO()
    code = EchoChamber(stdout=out).run(["--stamp", STAMP, *argv])
    return code, out.getvalue()


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_RUN)
    return str(path)


def test_help_exits_cleanly(capsys) -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["--help"])
    assert excinfo.value.code == 0
    assert "two-agent" in capsys.readouterr().out


def test_missing_command_is_a_usage_error() -> None:
    assert run()[0] == ExitCode.usage
    assert run("two-agent")[0] == ExitCode.usage
    assert run("experiment", "nonsense")[0] == ExitCode.usage
    assert run("two-agent", "classify", "--b", "-1", "--x1", "0.1", "--x2", "0.2")[0] == ExitCode.usage


def test_classify_prints_json() -> None:
    code, out = run("two-agent", "classify", "--b", "0.5", "--x1", "-0.1", "--x2", "2.5")
    assert code == ExitCode.success
    data = json.loads(out)
    assert data["kind"] == "CO_Band"
    assert data["predicted_equilibrium"] == [1.0, 1.0]
    assert data["extrema"]["case"] == "3.2"


def test_classify_on_an_axis_is_rejected() -> None:
    assert run("two-agent", "classify", "--b", "1", "--x1", "0", "--x2", "0.5")[0] == ExitCode.usage


def test_region_writes_every_point(output_env) -> None:
    code, out = run("two-agent", "region", "--b", "1", "--min", "-1", "--max", "1", "--res", "5")
    assert code == ExitCode.success
    assert "CO_SameSign" in out
    with (output_env / f"two_agent_region_{STAMP}.csv").open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 25
    manifest = json.loads((output_env / f"two_agent_region_{STAMP}.json").read_text())
    assert manifest["notes"]["counts"]["Boundary"] == 9
    assert manifest["command"] == "two-agent region"


def test_region_with_simulation(output_env) -> None:
    argv = "two-agent region --ratio 0.5 --min -1 --max 1 --res 4 --simulate --epsilon 0.01 --horizon 80"
    code, out = run(*argv.split(), "--sample-every", "0.1")
    assert code == ExitCode.success
    manifest = json.loads((output_env / f"two_agent_region_{STAMP}.json").read_text())
    agreement = manifest["notes"]["agreement"]
    assert agreement["checked"] == 16
    assert agreement["ratio"] >= 0.75


def test_region_rejects_an_empty_square() -> None:
    assert run("two-agent", "region", "--b", "1", "--min", "1", "--max", "-1")[0] == ExitCode.usage
    assert run("two-agent", "region", "--b", "1", "--ratio", "1")[0] == ExitCode.usage


def test_band_prints_coefficients() -> None:
    code, out = run("two-agent", "band", "--b", "1", "--epsilon", "1e-5")
    assert code == ExitCode.success
    data = json.loads(out)
    assert data["x2_0"] == 1.5
    assert data["crossing_guaranteed"] is True


def test_two_agent_simulate(output_env) -> None:
    argv = "two-agent simulate --b 1 --x1 -0.4 --x2 0.4 --epsilon 0.01 --horizon 40 --sample-every 0.1"
    code, out = run(*argv.split(), "--stop-early")
    assert code == ExitCode.success
    assert json.loads(out)["kind"] == "PersistentDisagreement"
    lines = (output_env / f"two_agent_{STAMP}.csv").read_text().splitlines()
    assert lines[0] == "t,x1,x2"
    assert lines[1] == "0.0,-0.4,0.4"


def test_unstable_integration_exits_with_numerical_failure() -> None:
    argv = "two-agent simulate --a 1e6 --b 1e-3 --x1 -0.5 --x2 0.5 --epsilon 0.01 --step 0.5 --horizon 50"
    code, _ = run(*argv.split())
    assert code == ExitCode.numerical_failure


def test_sbm_generate_is_reproducible(tmp_path) -> None:
    first, second = tmp_path / "first", tmp_path / "second"
    args = ["sbm", "generate", "--n", "6", "--p", "0.5", "--q", "0.25", "--seed", "3"]
    assert run("--output-dir", str(first), *args)[0] == ExitCode.success
    assert run("--output-dir", str(second), *args)[0] == ExitCode.success
    name = f"sbm_{STAMP}_edges.txt"
    assert (first / name).read_text() == (second / name).read_text()
    labels = (first / f"sbm_{STAMP}_labels.txt").read_text().splitlines()
    assert labels[0] == "0 L" and labels[-1] == "11 R"


def test_sbm_check_complete_blocks() -> None:
    code, out = run("sbm", "check", "--n", "10", "--p", "1", "--q", "1", "--delta", "0.2")
    assert code == ExitCode.success
    data = json.loads(out)
    assert data["in_set"] is True
    assert data["union_bound"] == 1.0


def test_sbm_check_needs_both_files(path_graph_files) -> None:
    edges, _ = path_graph_files
    assert run("sbm", "check", "--delta", "0.2", "--edges", str(edges))[0] == ExitCode.usage


def test_sbm_simulate_with_envelopes(output_env) -> None:
    argv = "sbm simulate --n 5 --p 1 --q 1 --b 2 --epsilon 0.05 --step 0.0025 --horizon 20"
    code, out = run(*argv.split(), "--xL", "-0.5", "--xR", "0.5", "--envelope-delta", "0.2")
    assert code == ExitCode.success
    assert "PersistentDisagreement" in out
    stem = f"sbm_simulate_{STAMP}"
    manifest = json.loads((output_env / f"{stem}.json").read_text())
    assert manifest["notes"]["envelopes"]["contained"] is True
    assert manifest["notes"]["mean_field"]["kind"].startswith("PD")
    metrics = (output_env / f"{stem}_metrics.csv").read_text().splitlines()
    assert metrics[0] == "t,polarization,extremism"
    assert metrics[1].startswith("0.0,1.0,0.5")


def test_envelopes_need_block_constant_starts() -> None:
    assert run("sbm", "simulate", "--b", "1", "--envelope-delta", "0.2")[0] == ExitCode.usage
    assert run("sbm", "simulate", "--b", "1", "--xL", "-0.5")[0] == ExitCode.usage


def test_missing_config_file() -> None:
    assert run("experiment", "polarization", "--config", "missing.toml")[0] == ExitCode.usage


def test_experiment_writes_csv_and_manifest(output_env, small_config) -> None:
    code, out = run("experiment", "polarization", "--config", small_config, "--b-grid", "0.5,2", "--seed", "5")
    assert code == ExitCode.success
    assert "theory" in out
    with (output_env / f"polarization_{STAMP}.csv").open() as f:
        rows = list(csv.DictReader(f))
    assert [row["b"] for row in rows] == ["0.5", "2.0"]
    manifest = json.loads((output_env / f"polarization_{STAMP}.json").read_text())
    assert manifest["seed"] == 5
    assert manifest["trials"] == 6
    assert manifest["config"]["network"]["n"] == 4
    assert manifest["command"] == "experiment polarization"


def test_experiment_failures_set_the_exit_code(monkeypatch, small_config) -> None:
    def broken(*args, **kwargs):
        raise InvalidArgument("broken integrator")

    monkeypatch.setattr("echochamber.experiments.integrate_ensemble", broken)
    code, _ = run("experiment", "extremism", "--config", small_config, "--b", "1")
    assert code == ExitCode.trial_failures


def test_cycle_demo_prints_notes(output_env) -> None:
    code, out = run("experiment", "cycle-demo")
    assert code == ExitCode.success
    assert json.loads(out)["kind"] == "NonConvergent"
    header = (output_env / f"cycle_demo_{STAMP}.csv").read_text().splitlines()[0]
    assert header == "t,x1,x2,x3,x4"


def test_graph_simulate(output_env, path_graph_files, small_config) -> None:
    edges, labels = path_graph_files
    options = "--experiment consensus-prob --b 0.5 --h-grid 1,2".split()
    code, _ = run("graph", "simulate", str(edges), str(labels), "--config", small_config, *options)
    assert code == ExitCode.success
    manifest = json.loads((output_env / f"consensus_prob_{STAMP}.json").read_text())
    assert manifest["config"]["graph"]["edges"] == str(edges)
    assert manifest["command"] == "graph simulate consensus-prob"


def test_graph_with_an_unlabeled_node(tmp_path, small_config) -> None:
    edges = tmp_path / "edges.txt"
    labels = tmp_path / "labels.txt"
    edges.write_text("0 1\n1 2\n")
    labels.write_text("0 L\n1 R\n")
    assert run("graph", "simulate", str(edges), str(labels), "--config", small_config)[0] == ExitCode.usage


def test_verbosity_and_environment(monkeypatch) -> None:
    setup_logging(2)
    assert logging.getLogger("echochamber").level == logging.DEBUG
    monkeypatch.setenv("ECHOCHAMBER_LOG_LEVEL", "error")
    setup_logging(0)
    assert logging.getLogger("echochamber").level == logging.ERROR
    setup_logging(1)
    assert logging.getLogger("echochamber").level == logging.INFO


def test_sbm_simulate_help_documents_convergence_flags(capsys) -> None:
    with pytest.raises(SystemExit) as excinfo:
        main(["sbm", "simulate", "--help"])
    assert excinfo.value.code == 0
    text = capsys.readouterr().out
    assert "Convergence tolerance." in text
    assert "Convergence window." in text
