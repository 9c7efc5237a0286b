from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from langweave.cli import main


def lw(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def fam(ws):
    return ws / "clarcfamily.family"


def arc(ws):
    return ws / "models" / "SensorDataSubmissionHandler.arc"


def cd(ws):
    return ws / "models" / "SensorData.cd"


# --- grammar-check ----------------------------------------------------------


def test_grammar_check_fixtures(capsys, workspace):
    grammars = sorted((workspace / "grammars").glob("*/*.mcg"))
    code, out, err = lw(capsys, "grammar-check", *grammars)
    assert (code, out, err) == (0, "", "")


def test_grammar_check_reports_findings(capsys, tmp_path):
    bad = tmp_path / "x" / "G.mcg"
    bad.parent.mkdir()
    bad.write_text('grammar x.G {\n  A = Missing ;\n}\n')
    code, out, err = lw(capsys, "grammar-check", bad)
    assert code == 1 and out == ""
    assert err == (f"{bad}:2:7: Error [UndefinedNonterminal] "
                   "A references undefined nonterminal Missing\n")


def test_grammar_check_syntax_error(capsys, tmp_path):
    bad = tmp_path / "G.mcg"
    bad.write_text("grammar G { A = ; ")
    code, _, err = lw(capsys, "grammar-check", bad)
    assert code == 1 and "[SyntaxError]" in err


def test_grammar_check_uses_grammar_path(capsys, tmp_path, workspace, monkeypatch):
    child = tmp_path / "ext" / "Ext.mcg"
    child.parent.mkdir()
    child.write_text('grammar ext.Ext extends montiarc.MontiArc { X extends ArcPort = "x" ; }')
    code, _, err = lw(capsys, "grammar-check", child)
    assert code == 1 and "MissingParentGrammar" in err
    code, _, err = lw(capsys, "grammar-check", "--grammar-path", workspace / "grammars", child)
    assert (code, err) == (0, "")
    monkeypatch.setenv("LANGWEAVE_GRAMMAR_PATH", str(workspace / "grammars"))
    assert lw(capsys, "grammar-check", child)[0] == 0


def test_missing_input_file(capsys, tmp_path):
    code, _, err = lw(capsys, "grammar-check", tmp_path / "nope.mcg")
    assert code == 1 and "[ModelUnreadable]" in err


# --- parse / print-ast / symbols --------------------------------------------


def test_parse_json(capsys, workspace):
    code, out, err = lw(capsys, "parse", cd(workspace), "--language",
                        workspace / "cdhql.lcfg", "--json")
    assert (code, err) == (0, "")
    doc = json.loads(out)
    assert (doc["production"], doc["grammar"]) == ("CDDefinition", "cd.CD")


def test_parse_quiet_without_json(capsys, workspace):
    assert lw(capsys, "parse", arc(workspace), "--language", workspace / "clarc.lcfg") == (
        0, "", "")


def test_parse_error_exit_code(capsys, workspace):
    code, out, err = lw(capsys, "parse", arc(workspace), "--language",
                        workspace / "montiarc.lcfg")
    assert code == 1 and out == ""
    assert f"{arc(workspace)}:" in err and "[SyntaxError]" in err


def test_print_ast(capsys, workspace):
    code, out, _ = lw(capsys, "print-ast", cd(workspace), "--language",
                      workspace / "cdhql.lcfg")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "CDDefinition (cd.CD)"
    assert any(l.strip() == "HQLBlock (hql.HQL)" for l in lines)
    assert "    Name = 'SensorData'" not in lines and "  Name = 'SensorData'" in lines


def test_symbols(capsys, workspace):
    code, out, err = lw(capsys, "symbols", cd(workspace), "--language",
                        workspace / "cdhql.lcfg", "--emit-sym")
    assert (code, err) == (0, "")
    assert "cd.Type SensorValue [de.se.SensorValue, QUALIFIED]" in out
    sym = json.loads((workspace / "models" / "SensorData.cd.sym").read_text())
    assert sym["modelId"] == "SensorData.cd" and sym["languageId"] == "cdhql"


def test_unknown_language_config(capsys, workspace):
    code, _, err = lw(capsys, "parse", cd(workspace), "--language", workspace / "none.lcfg")
    assert code == 1 and "cannot read" in err


# --- check ------------------------------------------------------------------


def test_check_clean(capsys, workspace):
    code, out, err = lw(capsys, "check", fam(workspace), cd(workspace), arc(workspace))
    assert (code, out, err) == (0, "", "")
    assert (workspace / "family.symindex").is_file()


def test_check_reports_typo(capsys, workspace):
    text = arc(workspace).read_text().replace("port in SensorValue values;",
                                              "port in SensorValu values;")
    arc(workspace).write_text(text)
    code, out, err = lw(capsys, "check", fam(workspace), cd(workspace), arc(workspace))
    assert code == 1 and out == ""
    line, = err.splitlines()
    assert "Error [CC-FAM-001]" in line and "did you mean SensorValue?" in line


def test_check_json(capsys, workspace):
    code, out, _ = lw(capsys, "check", fam(workspace), cd(workspace), arc(workspace), "--json")
    doc = json.loads(out)
    assert code == 0 and doc["exitStatus"] == "Ok" and doc["findings"] == []
    assert len(doc["symbolFiles"]) == 2


def test_check_fail_on_warning(capsys, workspace):
    copy = workspace / "models" / "Copy.cd"
    copy.write_text(cd(workspace).read_text())
    args = ["check", fam(workspace), cd(workspace), arc(workspace), copy]
    code, _, err = lw(capsys, *args)
    assert code == 0 and "Warning [DuplicateExport]" in err
    assert lw(capsys, *args, "--fail-on-warning")[0] == 1


def test_check_bad_family(capsys, tmp_path):
    bad = tmp_path / "bad.family"
    bad.write_text("family { }")
    code, _, err = lw(capsys, "check", bad)
    assert code == 1 and "[SyntaxError]" in err


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["parse"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_console_script(workspace):
    exe = shutil.which("lw")
    cmd = [exe] if exe else [sys.executable, "-m", "langweave.cli"]
    proc = subprocess.run([*cmd, "check", str(fam(workspace)), str(cd(workspace)),
                           str(arc(workspace))], capture_output=True, text=True)
    assert (proc.returncode, proc.stderr) == (0, "")


def test_grammar_check_abstract_without_extender(capsys, tmp_path):
    g = tmp_path / "a" / "G.mcg"
    g.parent.mkdir()
    g.write_text('grammar a.G { X = A ; abstract A = "a" ; }')
    code, _, err = lw(capsys, "grammar-check", g)
    assert code == 1 and len(err.splitlines()) == 1 and "[AbstractWithoutExtender]" in err


def test_parse_port_text_under_clarc(capsys, tmp_path, workspace):
    model = tmp_path / "P.arc"
    model.write_text("component P { port in String[*] signals; port in Integer wattage; }")
    code, out, _ = lw(capsys, "parse", model, "--language", workspace / "clarc.lcfg", "--json")
    assert code == 0 and json.loads(out)["production"] == "Component"


def empty_language(tmp_path):
    (tmp_path / "m").mkdir()
    (tmp_path / "m" / "M.mcg").write_text('grammar m.M { Model = Def* ; Def = "def" Name:ID ; }')
    cfg = tmp_path / "m.lcfg"
    cfg.write_text('language m { file-extension ".m" ; grammar m.M ; }')
    model = tmp_path / "empty.m"
    model.write_text("")
    return cfg, model


def test_empty_model(capsys, tmp_path):
    cfg, model = empty_language(tmp_path)
    assert lw(capsys, "parse", model, "--language", cfg) == (0, "", "")
    assert lw(capsys, "symbols", model, "--language", cfg) == (0, "", "")


def test_emit_sym_is_idempotent(capsys, workspace):
    args = ["symbols", cd(workspace), "--language", workspace / "cdhql.lcfg", "--emit-sym"]
    lw(capsys, *args)
    first = (workspace / "models" / "SensorData.cd.sym").read_bytes()
    lw(capsys, *args)
    assert (workspace / "models" / "SensorData.cd.sym").read_bytes() == first


def test_check_without_models(capsys, workspace):
    code, out, err = lw(capsys, "check", fam(workspace), "--json")
    doc = json.loads(out)
    assert (code, err) == (0, "")
    assert doc == {"models": [], "findings": [], "symbolFiles": [], "exitStatus": "Ok"}


GOLDEN = Path(__file__).parent / "golden" / "check_typo.json"


def test_check_json_golden(capsys, workspace):
    text = arc(workspace).read_text().replace("port in SensorValue values;",
                                              "port in SensorValu values;")
    arc(workspace).write_text(text)
    code, out, _ = lw(capsys, "check", fam(workspace), arc(workspace), cd(workspace), "--json")
    assert code == 1
    assert out.replace(str(workspace), "<workspace>") == GOLDEN.read_text(encoding="utf-8")
