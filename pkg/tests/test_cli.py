from __future__ import annotations

import json
from pathlib import Path

import pytest

from provio.cli import dispatch
from provio.store import load_turtle_file, merge_directory, write_turtle_file

from conftest import fig_checkpoint_graph, run_fig_minimal

DATA = Path(__file__).parent / "data"


def run_cli(*argv: str) -> int:
    return dispatch(list(argv))


@pytest.fixture
def merged_fig(tmp_path) -> Path:
    out_dir = run_fig_minimal(tmp_path)
    merged = tmp_path / "merged.ttl"
    assert run_cli("merge", str(out_dir), "-o", str(merged)) == 0
    return merged


@pytest.fixture
def checkpoint_ttl(tmp_path) -> Path:
    path = tmp_path / "ckpt.ttl"
    write_turtle_file(fig_checkpoint_graph(), path)
    return path


def test_run_writes_subgraph_files(tmp_path, capsys):
    rc = run_cli("run", "--workload", "topreco", "--epochs", "2",
                 "--config-fields", "2", "--out", str(tmp_path / "out"))
    assert rc == 0
    files = list((tmp_path / "out").glob("*.ttl"))
    assert len(files) == 1
    assert "triples:" in capsys.readouterr().out


def test_merge_empty_directory_prefix_only(tmp_path, capsys):
    empty = tmp_path / "emptydir"
    empty.mkdir()
    out = tmp_path / "merged.ttl"
    assert run_cli("merge", str(empty), "-o", str(out)) == 0
    text = out.read_text(encoding="utf-8")
    assert text.startswith("@prefix prov:")
    assert "0 triples" in capsys.readouterr().out


def test_merged_fig_matches_golden(merged_fig):
    golden = (DATA / "fig_snippet.ttl").read_bytes()
    assert merged_fig.read_bytes() == golden


def test_lineage_two_level_chain(tmp_path, capsys):
    rc = run_cli("run", "--workload", "dassa", "--input-files", "1",
                 "--out", str(tmp_path / "out"))
    assert rc == 0
    capsys.readouterr()
    merged = tmp_path / "merged.ttl"
    run_cli("merge", str(tmp_path / "out"), "-o", str(merged))
    capsys.readouterr()
    rc = run_cli("lineage", str(merged), "--object", "decimate.h5",
                 "--levels", "2")
    assert rc == 0
    out = capsys.readouterr().out
    assert "root: decimate.h5" in out
    assert "level 1: WestSac.h5 (via decimate" in out
    assert "level 2: WestSac.tdms (via tdms2h5" in out


def test_checkpoints_subcommand(checkpoint_ttl, capsys):
    rc = run_cli("checkpoints", str(checkpoint_ttl),
                 "--where", "batch_size=256")
    assert rc == 0
    assert capsys.readouterr().out.strip() == "Checkpoint_3"


def test_checkpoints_quality_filter(checkpoint_ttl, capsys):
    rc = run_cli("checkpoints", str(checkpoint_ttl),
                 "--where", "batch_size=128",
                 "--quality", "ns1:hasValue<4.0")
    assert rc == 0
    assert capsys.readouterr().out.split() == ["Checkpoint_2"]


def test_query_subcommand_tsv_and_json(checkpoint_ttl, tmp_path, capsys):
    rq = tmp_path / "q.rq"
    rq.write_text(
        "SELECT ?ckpt WHERE {\n"
        "  ?cfg ns1:hasValue 256 ;\n"
        "       prov:influenced ?ckpt .\n"
        "}", encoding="utf-8")
    assert run_cli("query", str(checkpoint_ttl), "--file", str(rq)) == 0
    out = capsys.readouterr().out
    assert out.splitlines() == ["?ckpt", "Checkpoint_3"]
    assert run_cli("query", str(checkpoint_ttl), "--file", str(rq),
                   "--json") == 0
    rows = [json.loads(line) for line in
            capsys.readouterr().out.splitlines()]
    assert rows == [{"?ckpt": "Checkpoint_3"}]


def test_stats_subcommand(merged_fig, capsys):
    assert run_cli("stats", str(merged_fig)) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "class\tcount"
    assert "Create\t1" in out


def test_stats_durations_error_when_untracked(merged_fig, capsys):
    rc = run_cli("stats", str(merged_fig), "--durations")
    assert rc == 1
    assert "durations not tracked" in capsys.readouterr().err


def test_modifiers_subcommand(merged_fig, capsys):
    rc = run_cli("modifiers", str(merged_fig), "--file", "/Timestep_0/x")
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "program\tthread\tuser"
    assert lines[1] == "vpicio_un_h5.exe\tMPI_rank_0\tBob"


def test_configs_subcommand(tmp_path, capsys):
    run_cli("run", "--workload", "topreco", "--epochs", "2",
            "--config-fields", "1", "--out", str(tmp_path / "out"))
    merged = tmp_path / "m.ttl"
    run_cli("merge", str(tmp_path / "out"), "-o", str(merged))
    capsys.readouterr()
    assert run_cli("configs", str(merged)) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "configuration\tversion\taccuracy"
    assert sum(1 for ln in out.splitlines() if ln.startswith("config_0")) == 2


def test_export_dot_with_lineage_highlight(tmp_path, capsys):
    from dot_grammar import validate_dot

    run_cli("run", "--workload", "dassa", "--input-files", "1",
            "--out", str(tmp_path / "out"))
    merged = tmp_path / "m.ttl"
    run_cli("merge", str(tmp_path / "out"), "-o", str(merged))
    dot_path = tmp_path / "g.dot"
    rc = run_cli("export-dot", str(merged), "-o", str(dot_path),
                 "--highlight-lineage", "decimate.h5:2")
    assert rc == 0
    text = dot_path.read_text(encoding="utf-8")
    validate_dot(text)
    assert "color=blue" in text


def test_bench_subcommand(tmp_path, capsys):
    rc = run_cli("bench", "--workload", "topreco", "--epochs", "2",
                 "--config-fields", "1", "--reps", "3",
                 "--out", str(tmp_path / "bench"))
    assert rc == 0
    assert "tracked/baseline" in capsys.readouterr().out


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        dispatch(["frobnicate"])
    assert exc.value.code == 2


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        dispatch(["stats", "x.ttl", "--no-such-flag"])
    assert exc.value.code == 2


def test_runtime_error_exits_1_with_diagnostic(capsys):
    rc = run_cli("stats", "does-not-exist.ttl")
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("provio: error:") and err.count("\n") == 1


def test_env_var_supplies_default_config(tmp_path, monkeypatch, capsys):
    ini = tmp_path / "cfg.ini"
    ini.write_text("[classes]\nwrite = false\n", encoding="utf-8")
    monkeypatch.setenv("PROVIO_CONFIG", str(ini))
    rc = run_cli("run", "--workload", "topreco", "--epochs", "2",
                 "--config-fields", "1", "--out", str(tmp_path / "out"))
    assert rc == 0
    merged = merge_directory(tmp_path / "out")
    text_has_write = any(
        n.sub_class.value == "Write" for n in merged.nodes.values())
    assert not text_has_write


def test_cli_outputs_byte_stable_for_deterministic_inputs(tmp_path, capsys):
    outputs = []
    for run in range(2):
        out_dir = run_fig_minimal(tmp_path / f"r{run}")
        merged = tmp_path / f"m{run}.ttl"
        run_cli("merge", str(out_dir), "-o", str(merged))
        capsys.readouterr()
        run_cli("stats", str(merged))
        outputs.append((merged.read_bytes(), capsys.readouterr().out))
    assert outputs[0] == outputs[1]


def test_query_file_with_unsupported_feature_exits_1(checkpoint_ttl,
                                                     tmp_path, capsys):
    rq = tmp_path / "bad.rq"
    rq.write_text("SELECT ?x WHERE { OPTIONAL { ?x ns1:hasValue 1 . } }",
                  encoding="utf-8")
    rc = run_cli("query", str(checkpoint_ttl), "--file", str(rq))
    assert rc == 1
    assert "OPTIONAL" in capsys.readouterr().err
