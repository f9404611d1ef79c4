"""CLI verbs exercised end to end through click's runner."""
from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from regkg import fixture_path
from regkg.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def _build(runner, tmp_path) -> str:
    store = str(tmp_path / "store")
    for args in (
        ["ingest", "--corpus", str(fixture_path()), "--out", store],
        ["extract", "--store", store],
        ["normalize", "--store", store],
        ["index", "--store", store],
    ):
        result = runner.invoke(main, args, catch_exceptions=False)
        assert result.exit_code == 0, result.output
    return store


def test_build_verbs_and_query(runner, tmp_path):
    store = _build(runner, tmp_path)
    result = runner.invoke(
        main,
        ["query", "--store", store, "How long to appeal the order?", "--k", "5",
         "--mode", "extractive"],
        catch_exceptions=False,
    )
    assert result.exit_code == 0
    body = json.loads(result.output)
    assert "15 days" in body["answer"]
    assert body["citations"]


def test_stats_verb(runner, tmp_path):
    store = _build(runner, tmp_path)
    with_out = runner.invoke(main, ["stats", "--store", store, "--mode", "with"],
                             catch_exceptions=False)
    without_out = runner.invoke(main, ["stats", "--store", store, "--mode", "without"],
                                catch_exceptions=False)
    with_stats = json.loads(with_out.output)
    without_stats = json.loads(without_out.output)
    assert with_stats["avg_degree"] >= without_stats["avg_degree"]


def test_subgraph_verb(runner, tmp_path):
    store = _build(runner, tmp_path)
    out_file = tmp_path / "sub.json"
    result = runner.invoke(
        main,
        ["subgraph", "--store", store, "--seed", "§117.257|references|§117.264",
         "--hops", "2", "--out", str(out_file)],
        catch_exceptions=False,
    )
    assert result.exit_code == 0
    payload = json.loads(out_file.read_text())
    assert {"§117.257", "§117.260", "§117.264", "§117.267"} <= {
        n["id"] for n in payload["nodes"]
    }


def test_eval_verb(runner, tmp_path):
    store = _build(runner, tmp_path)
    out_file = tmp_path / "report.json"
    result = runner.invoke(
        main,
        ["eval", "--store", store, "--sample-k", "2", "--seed", "1",
         "--thetas", "0.5,0.6,0.75", "--judge", "deterministic", "--out", str(out_file)],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    report = json.loads(out_file.read_text())
    assert report["failed_stages"] == {}
    assert report["aggregates"]["nav"] >= 0.0


def test_ingest_missing_args_fails_cleanly(runner):
    result = runner.invoke(main, ["ingest"])
    assert result.exit_code == 1
    assert "error:" in result.output


def test_query_on_unbuilt_store_reports_missing_index(runner, tmp_path):
    store = str(tmp_path / "store")
    result = runner.invoke(
        main, ["ingest", "--corpus", str(fixture_path()), "--out", store],
        catch_exceptions=False,
    )
    assert result.exit_code == 0
    result = runner.invoke(main, ["query", "--store", store, "anything"])
    assert result.exit_code == 1
    assert "index not built" in result.output


def test_normalize_with_aliases_after_build(runner, tmp_path):
    store = _build(runner, tmp_path)
    aliases = tmp_path / "aliases.txt"
    aliases.write_text("FDA: the agency\n")
    result = runner.invoke(
        main, ["normalize", "--store", store, "--aliases", str(aliases)],
        catch_exceptions=False,
    )
    assert result.exit_code == 0
    assert "merged" in result.output


def test_config_file_supplies_paths(runner, tmp_path):
    config = tmp_path / "regkg.yaml"
    store = tmp_path / "cfg-store"
    config.write_text(
        f"corpus:\n  path: {fixture_path()}\n  store: {store}\n"
    )
    result = runner.invoke(main, ["ingest", "--config", str(config)], catch_exceptions=False)
    assert result.exit_code == 0
    assert (store / "manifest.json").exists()
