import json

import pytest

from arspi import repository
from arspi.cli import main, run
from arspi.metamodel import Artefact, ContentItem, ItemKind, Section
from arspi.model import ChangeRequest, Release, TraceLink
from arspi.validation import Finding


def files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in root.rglob("*") if p.is_file() and p.name != ".arspi.lock"}


def ok(*argv):
    result = run(list(argv))
    assert result.exit_code == 0, (argv, result.message, result.stdout_payload)
    return result


def js(*argv):
    return json.loads(ok(*argv, "--json").stdout_payload)


@pytest.fixture
def project(tmp_path):
    root = tmp_path / "proj"
    ok("-p", str(root), "init", "--name", "demo", "--merge")
    return root


def populate(root):
    """Merged project with a complete PRQ, PD and PLC; returns requirement and design ids."""
    p = str(root)
    prq = js("-p", p, "artefact", "new", "--kind", "PRQ", "--name", "Requirements")["id"]
    for key in ("Goals", "StakeholdersAndRoles", "OverallProcessDraft", "TechnicalInfrastructure", "BasicConditions"):
        ok("-p", p, "artefact", "set", prq, key, "--add-item", f"{key} text")
    req = js("-p", p, "artefact", "set", prq, "Requirements", "--item-kind", "requirement", "--add-item", "R1")["added"][0]["id"]
    pd = js("-p", p, "artefact", "new", "--kind", "PD", "--name", "Design")["id"]
    for key in ("Principles", "OrganisationAndRoles", "Artefacts", "Tailoring", "ProcessDocumentation", "SupportingMaterial"):
        ok("-p", p, "artefact", "set", pd, key, "--add-item", f"{key} text")
    design = js("-p", p, "artefact", "set", pd, "Processes", "--item-kind", "design_element", "--add-item", "D1")["added"][0]["id"]
    real = js(
        "-p", p, "artefact", "set", pd, "LogicalAndPhysicalModelOrganisation", "--item-kind", "realisation_element", "--add-item", "T1"
    )["added"][0]["id"]
    ok("-p", p, "trace", "add", req, design, "--kind", "addresses")
    ok("-p", p, "trace", "add", design, real, "--kind", "realises")
    plc = js("-p", p, "artefact", "new", "--kind", "PLC", "--name", "Life cycle")["id"]
    for key in ("Training", "DeploymentAndFurtherDevelopment", "MeasurementAndEvaluation", "ChangeManagement"):
        ok("-p", p, "artefact", "set", plc, key, "--add-item", f"{key} text")
    return req, design


def test_init_then_report(tmp_path):
    root = tmp_path / "p"
    ok("--project", str(root), "init", "--name", "demo")
    result = ok("--project", str(root), "report")
    assert "artefacts: 0" in result.stdout_payload
    assert "iteration: none" in result.stdout_payload
    data = js("--project", str(root), "report")
    assert data["artefacts"] == [] and data["iteration"] is None


def test_project_option_on_leaf_and_env(tmp_path, monkeypatch):
    root = tmp_path / "p"
    ok("init", "--name", "demo", "--project", str(root))
    monkeypatch.setenv("ARSPI_PROJECT", str(root))
    assert js("report")["project"] == "demo"


def test_cpd_in_merged_store(project):
    before = files(project)
    result = run(["-p", str(project), "artefact", "new", "--kind", "CPD", "--name", "c"])
    assert result.exit_code == 3
    assert "KindNotPermitted" in result.message
    assert files(project) == before


def test_usage_error(project):
    result = run(["-p", str(project), "artefact", "new", "--name", "x"])
    assert result.exit_code == 3
    assert "Usage" in result.message
    assert run(["no-such-command"]).exit_code == 3


def test_store_error(tmp_path):
    assert run(["-p", str(tmp_path / "missing"), "report"]).exit_code == 4
    root = tmp_path / "p"
    ok("-p", str(root), "init", "--name", "x")
    assert run(["-p", str(root), "init", "--name", "x"]).exit_code == 4


def test_failed_commands_do_not_mutate(project):
    populate(project)
    before = files(project)
    failing = [
        ["phase", "advance"],
        ["iteration", "close"],
        ["release", "package", "--label", "1"],
        ["release", "promote", "REL-1"],
        ["change", "triage", "CR-9", "accept"],
        ["trace", "add", "I-1", "I-1", "--kind", "realises"],
        ["artefact", "set", "PD-1", "Requirements", "--item-kind", "requirement", "--add-item", "x"],
        ["iteration", "plan", "--count", "2", "--shortened", "true"],
        ["change", "submit", "--title", "u", "--origin", "external_update_trigger"],
    ]
    for argv in failing:
        result = run(["-p", str(project), *argv])
        assert result.exit_code != 0, argv
        assert files(project) == before, argv


def test_json_round_trips(project):
    req, design = populate(project)
    p = str(project)
    for entry in js("-p", p, "trace", "list"):
        assert TraceLink.from_dict(entry).to_dict() == entry
    store = repository.load(project)
    shown = js("-p", p, "artefact", "show", "PD-1")
    assert Artefact.from_dict(shown) == store.artefacts["PD-1"]
    cr = js("-p", p, "change", "submit", "--title", "t")
    assert ChangeRequest.from_dict(cr) == repository.load(project).change(cr["id"])
    for entry in js("-p", p, "change", "list"):
        assert ChangeRequest.from_dict(entry).to_dict() == entry
    listed = js("-p", p, "artefact", "list", "--kind", "PRQ")
    assert [a["kind"] for a in listed] == ["PRQ"]


def test_validate_exit_codes(project):
    p = str(project)
    assert run(["-p", p, "validate"]).exit_code == 0
    ok("-p", p, "artefact", "new", "--kind", "PRQ", "--name", "r")
    result = run(["-p", p, "validate", "--json"])
    assert result.exit_code == 2
    parsed = [Finding.from_dict(json.loads(line)) for line in result.stdout_payload.splitlines()]
    assert parsed == result.findings
    assert {f.rule_id for f in parsed} == {"EmptySection"}


def test_validate_warnings_only(tmp_path):
    root = tmp_path / "p"
    p = str(root)
    ok("-p", p, "init", "--name", "demo")
    ok("-p", p, "tailor", "--scale", "small", "--no-preexisting", "--training", "--no-process-line", "--iterations", "3")
    populate(root)
    ok("-p", p, "iteration", "start")
    result = run(["-p", p, "validate"])
    assert result.exit_code == 0
    # remove the support artefact: only a warning remains
    store = repository.load(root)
    del store.artefacts["SUP-1"]
    repository.save(store)
    result = run(["-p", p, "validate"])
    assert result.exit_code == 1
    assert [f.rule_id for f in result.findings] == ["SelectedSupportMissing"]


def test_tailor_dry_run_changes_nothing(project):
    before = files(project)
    out = js(
        "-p", str(project), "tailor", "--scale", "large", "--preexisting", "--no-training", "--process-line", "--iterations", "2", "--dry-run"
    )
    assert out["applied"] is False
    assert out["profile"]["selected_supports"] == ["SPLDeltaReport"]
    assert files(project) == before


def test_catalog_dump(tmp_path):
    text = ok("catalog", "dump").stdout_payload
    assert "LogicalAndPhysicalModelOrganisation" in text
    assert [entry["kind"] for entry in js("catalog", "dump")] == ["PRQ", "CPD", "TPD", "PD", "PLC", "PR"]


def test_full_iteration_via_cli(project):
    populate(project)
    p = str(project)
    ok("-p", p, "iteration", "plan", "--count", "1")
    ok("-p", p, "iteration", "start")
    for phase in ("Conceptualisation", "Realisation", "Deployment"):
        assert phase in ok("-p", p, "phase", "advance").stdout_payload
    assert run(["-p", p, "phase", "advance"]).exit_code == 3
    rel = js("-p", p, "release", "package", "--label", "2024")
    assert Release.from_dict(rel).status.value == "review"
    for _ in range(3):
        ok("-p", p, "release", "promote", rel["id"])
    assert js("-p", p, "release", "list")[0]["status"] == "released"
    ok("-p", p, "iteration", "close")
    status = js("-p", p, "phase", "status")
    assert status["running"] is None
    assert js("-p", p, "report")["actual_process"] == rel["id"]


def test_gate_failure_exit_code(project):
    p = str(project)
    ok("-p", p, "artefact", "new", "--kind", "PRQ", "--name", "r")
    ok("-p", p, "iteration", "start")
    result = run(["-p", p, "phase", "advance"])
    assert result.exit_code == 2
    assert result.findings


def test_delta_command(tmp_path):
    root = tmp_path / "p"
    p = str(root)
    ok("-p", p, "init", "--name", "line")
    ok("-p", p, "tailor", "--scale", "large", "--no-preexisting", "--no-training", "--process-line", "--iterations", "1")
    store = repository.load(root)
    # upstream assets mirrored as items of the delta report artefact
    art = repository.get_artefact(store, "SUP-1")
    art.sections = [Section("Upstream", [ContentItem(n, ItemKind.ASSET, n) for n in "ABC"])]
    repository.put_artefact(store, art)
    repository.save(store)
    cpd = js("-p", p, "artefact", "new", "--kind", "CPD", "--name", "c")["id"]
    ok("-p", p, "trace", "add", cpd, "B", "--kind", "derives_from")
    old, new = tmp_path / "old.json", tmp_path / "new.json"
    old.write_text(json.dumps({"label": "vmxt", "assets": {"A": "1", "B": "1", "C": "1"}}))
    new.write_text(json.dumps({"label": "vmxt", "version": "2", "assets": {"A": "1", "B": "2", "C": "1"}}))
    out = js("-p", p, "delta", str(old), str(new), "--ingest")
    assert out["report"]["affected_local"] == [cpd]
    assert out["recorded"] == "SUP-1"
    assert [c["linked_assets"] for c in out["changes"]] == [["B"]]
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"label": "other", "assets": {}}))
    assert run(["-p", p, "delta", str(old), str(other)]).exit_code == 3


def test_main_exit_status(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["-p", str(tmp_path / "nope"), "report"])
    assert info.value.code == 4
    assert "ProjectNotFound" in capsys.readouterr().err
