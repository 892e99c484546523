"""End-to-end command line behavior and the exit-code contract."""

import json
from pathlib import Path

import pytest

from mao.cli import main

FIXTURES = Path(__file__).parent / "fixtures"

GOOD = """<process name="order handling">
  <activity role="clerk" action="receive the order" id="a1"/>
  <activity role="warehouse" action="ship the order" id="a2"/>
</process>
"""

FAULTY = """<process name="order handling">
  <exclusiveGateway id="g1">
    <branch condition="in stock">
      <activity role="warehouse" action="ship the order" id="a2"/>
    </branch>
  </exclusiveGateway>
</process>
"""


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("MAO_API_BASE", "MAO_API_KEY", "MAO_MODEL"):
        monkeypatch.delenv(name, raising=False)


def write_replay(path, *contents):
    rows = [{"phase": "", "content": c} for c in contents]
    path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    return path


# -- generate -------------------------------------------------------------------


def test_generate_replay_writes_outputs(tmp_path, capsys):
    req = tmp_path / "req.txt"
    req.write_text("Handle an order.")
    replay = write_replay(tmp_path / "r.jsonl", GOOD, GOOD, "NO_ISSUES")
    out = tmp_path / "out"
    code = main(
        ["generate", "-r", str(req), "--replay", str(replay), "-o", str(out)]
    )
    assert code == 0
    assert (out / "model.bpmt").read_text() == GOOD
    assert (out / "model.bpmn").exists()
    assert (out / "transcript.jsonl").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["clean"] is True


def test_generate_verbose_echoes_config(tmp_path, capsys):
    req = tmp_path / "req.txt"
    req.write_text("Handle an order.")
    replay = write_replay(tmp_path / "r.jsonl", GOOD, GOOD, "NO_ISSUES")
    code = main(
        [
            "generate",
            "-r",
            str(req),
            "--replay",
            str(replay),
            "-o",
            str(tmp_path / "out"),
            "--verbose",
        ]
    )
    assert code == 0
    err = capsys.readouterr().err
    assert "resolved config:" in err
    assert "replay = " in err and "r.jsonl" in err


def test_generate_http_without_key_names_the_variable(tmp_path, capsys):
    req = tmp_path / "req.txt"
    req.write_text("Handle an order.")
    code = main(
        ["generate", "-r", str(req), "--backend", "http", "--api-base", "http://x"]
    )
    assert code == 3
    assert "MAO_API_KEY" in capsys.readouterr().err


def test_generate_http_without_base_names_the_variable(tmp_path, capsys):
    req = tmp_path / "req.txt"
    req.write_text("Handle an order.")
    code = main(["generate", "-r", str(req), "--backend", "http"])
    assert code == 3
    assert "MAO_API_BASE" in capsys.readouterr().err


def test_generate_needs_a_requirement(capsys):
    assert main(["generate", "--backend", "http"]) == 3


def test_generate_pipeline_failure_exits_2(tmp_path, capsys):
    req = tmp_path / "req.txt"
    req.write_text("Handle an order.")
    replay = write_replay(tmp_path / "r.jsonl", "nope", "nope", "nope")
    out = tmp_path / "out"
    code = main(
        ["generate", "-r", str(req), "--replay", str(replay), "-o", str(out)]
    )
    assert code == 2
    # the transcript of the failed run is preserved for post-mortems
    assert (out / "transcript.jsonl").exists()


def test_generate_unclean_result_exits_1(tmp_path, capsys):
    req = tmp_path / "req.txt"
    req.write_text("Handle an order.")
    # testing keeps finding C2, the expert never fixes it
    replay = write_replay(tmp_path / "r.jsonl", FAULTY, FAULTY, FAULTY)
    out = tmp_path / "out"
    code = main(
        [
            "generate",
            "-r",
            str(req),
            "--replay",
            str(replay),
            "-o",
            str(out),
            "--no-refinement",
            "--no-reviewing",
        ]
    )
    assert code == 1
    assert not (out / "model.bpmn").exists()  # defective model is not exported
    report = json.loads((out / "report.json").read_text())
    assert report["clean"] is False


def test_generate_no_testing_leaves_clean_null(tmp_path):
    req = tmp_path / "req.txt"
    req.write_text("Handle an order.")
    replay = write_replay(tmp_path / "r.jsonl", GOOD)
    out = tmp_path / "out"
    code = main(
        [
            "generate",
            "-r",
            str(req),
            "--replay",
            str(replay),
            "-o",
            str(out),
            "--no-refinement",
            "--no-reviewing",
            "--no-testing",
        ]
    )
    assert code == 0
    assert json.loads((out / "report.json").read_text())["clean"] is None


def test_config_precedence_flags_env_file(tmp_path, capsys, monkeypatch):
    cfg_file = tmp_path / "mao.cfg"
    cfg_file.write_text("model = from-file\napi_base = http://file\n")
    req = tmp_path / "req.txt"
    req.write_text("x")
    replay = write_replay(tmp_path / "r.jsonl", GOOD, GOOD, "NO_ISSUES")

    def run(extra):
        capsys.readouterr()
        code = main(
            [
                "generate",
                "-r",
                str(req),
                "--replay",
                str(replay),
                "-o",
                str(tmp_path / "out"),
                "--config",
                str(cfg_file),
                "--verbose",
            ]
            + extra
        )
        assert code == 0
        return capsys.readouterr().err

    err = run([])
    assert "model = from-file" in err
    monkeypatch.setenv("MAO_MODEL", "from-env")
    replay = write_replay(tmp_path / "r.jsonl", GOOD, GOOD, "NO_ISSUES")
    err = run([])
    assert "model = from-env" in err
    replay = write_replay(tmp_path / "r.jsonl", GOOD, GOOD, "NO_ISSUES")
    err = run(["--model", "from-flag"])
    assert "model = from-flag" in err


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg_file = tmp_path / "mao.cfg"
    cfg_file.write_text("api_bse = typo\n")
    code = main(["--config", str(cfg_file), "validate", "nofile"])
    assert code == 3
    assert "api_bse" in capsys.readouterr().err


# -- validate -------------------------------------------------------------------


def test_validate_clean(tmp_path, capsys):
    f = tmp_path / "m.bpmt"
    f.write_text(GOOD)
    assert main(["validate", str(f)]) == 0
    assert "OK: no format hallucinations found" in capsys.readouterr().out


def test_validate_findings(tmp_path, capsys):
    f = tmp_path / "m.bpmt"
    f.write_text(FAULTY)
    assert main(["validate", str(f)]) == 1
    assert "C2 at /nodes/0" in capsys.readouterr().out


def test_validate_json(tmp_path, capsys):
    f = tmp_path / "m.bpmt"
    f.write_text(FAULTY)
    assert main(["validate", str(f), "--json"]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["clean"] is False
    assert payload["violations"][0]["rule"] == "C2"


def test_validate_unreadable_file(capsys):
    assert main(["validate", "/does/not/exist.bpmt"]) == 3


# -- diff -----------------------------------------------------------------------


def test_diff_suite_default(tmp_path, capsys):
    f = tmp_path / "m.bpmt"
    f.write_text(GOOD)
    assert main(["diff", str(f), str(f), "--seed", "7"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["benchmark"] == 0.0
    assert payload["seed"] == 7
    assert set(payload["algorithms"]) == {
        "Greedy",
        "TabuSearch",
        "Ants",
        "SimulatedAnnealing",
    }


def test_diff_single_algorithm(tmp_path, capsys):
    a = tmp_path / "a.bpmt"
    a.write_text(GOOD)
    b = tmp_path / "b.bpmt"
    b.write_text(GOOD.replace("ship the order", "ship the orders"))
    assert main(["diff", str(a), str(b), "--algo", "tabu", "--seed", "1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["algorithm"] == "TabuSearch"
    assert payload["distance"] > 0


def test_diff_exact_size_cap(tmp_path, capsys):
    lines = ['<process name="big">']
    for i in range(12):
        lines.append(f'  <activity role="r" action="step {i}" id="a{i}"/>')
    lines.append("</process>")
    f = tmp_path / "big.bpmt"
    f.write_text("\n".join(lines))
    assert main(["diff", str(f), str(f), "--exact"]) == 2
    assert "exact" in capsys.readouterr().err.lower()


def test_diff_unparseable_input(tmp_path, capsys):
    f = tmp_path / "m.bpmt"
    f.write_text("<process name='p")
    assert main(["diff", str(f), str(f)]) == 3


# -- convert --------------------------------------------------------------------


def test_convert_bpmt_to_bpmn_and_back(tmp_path, capsys):
    src = tmp_path / "m.bpmt"
    src.write_text(GOOD)
    xml_out = tmp_path / "m.bpmn"
    assert main(["convert", str(src), "--to", "bpmn", "-o", str(xml_out)]) == 0
    assert "<startEvent" in xml_out.read_text()
    assert main(["convert", str(xml_out), "--to", "bpmt"]) == 0
    text = capsys.readouterr().out
    assert 'action="receive the order"' in text


def test_convert_reformats_to_canonical(tmp_path, capsys):
    src = tmp_path / "m.bpmt"
    src.write_text(
        '<process name="p"><activity id="a1" action="go" role="r"/></process>'
    )
    assert main(["convert", str(src), "--to", "bpmt"]) == 0
    out = capsys.readouterr().out
    assert '<activity role="r" action="go" id="a1"/>' in out
    assert out.startswith('<process name="p">\n')


def test_convert_non_block_structured_bpmn(tmp_path, capsys):
    xml = """<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL">
  <process id="p1">
    <startEvent id="s"/>
    <exclusiveGateway id="g"/>
    <task id="a" name="one"/>
    <task id="b" name="two"/>
    <endEvent id="e"/>
    <sequenceFlow id="f1" sourceRef="s" targetRef="g"/>
    <sequenceFlow id="f2" sourceRef="g" targetRef="a"/>
    <sequenceFlow id="f3" sourceRef="g" targetRef="b"/>
    <sequenceFlow id="f4" sourceRef="a" targetRef="b"/>
    <sequenceFlow id="f5" sourceRef="b" targetRef="e"/>
  </process>
</definitions>
"""
    f = tmp_path / "wild.bpmn"
    f.write_text(xml)
    assert main(["convert", str(f), "--to", "bpmt"]) == 1
    err = capsys.readouterr().err
    assert "not block structured" in err
    assert "diff" in err  # points at the graph-level comparison instead


def test_convert_requires_target(tmp_path, capsys):
    f = tmp_path / "m.bpmt"
    f.write_text(GOOD)
    assert main(["convert", str(f)]) == 3


# -- eval -----------------------------------------------------------------------


def test_eval_prints_table(capsys):
    case = FIXTURES / "evalcase" / "parcel_case"
    assert main(["eval", str(case), "--seed", "9"]) == 0
    out = capsys.readouterr().out
    assert "Case: parcel_case (seed 9)" in out
    assert "c_same" in out


def test_eval_json_and_report_files(tmp_path, capsys):
    case = FIXTURES / "evalcase" / "parcel_case"
    out_dir = tmp_path / "report"
    assert main(["eval", str(case), "--seed", "9", "--json", "-o", str(out_dir)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["seed"] == 9
    assert (out_dir / "report.json").exists()
    assert "Candidate" in (out_dir / "report.txt").read_text()


def test_eval_missing_case(capsys):
    assert main(["eval", "/no/such/case"]) == 3


# -- usage ----------------------------------------------------------------------


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 3


def test_unknown_flag_is_usage_error(capsys):
    assert main(["validate", "x", "--wat"]) == 3
