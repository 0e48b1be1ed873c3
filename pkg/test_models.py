import json

from app.models.enums import AGE_FAMILIES, BIN_LABELS, AaaState, GridKind, ParameterFamily
from app.models.grid import CompareSummary, GridReport, Provenance
from app.models.manifest import RunManifest
from app.models.parameters import PerturbationSpec
from app.models.report import ValidationReport


def test_bin_labels_follow_state_order():
    assert len(BIN_LABELS) == 12
    assert BIN_LABELS[0] == AaaState.LT_30.value
    assert BIN_LABELS[-1] == AaaState.GT_80.value
    assert ParameterFamily.GROWTH not in AGE_FAMILIES


def test_validation_report():
    report = ValidationReport()
    assert report.ok and len(report) == 0
    assert report.summary() == "no violations"

    report.add("row_sum", "growth.45-50mm", 0.98)
    report.add("missing_entry", "background_mortality.119")
    assert not report.ok
    assert report.rules() == ["row_sum", "missing_entry"]
    assert str(report.violations[0]) == "row_sum at growth.45-50mm (value=0.98)"
    assert report.summary().splitlines()[1] == "  - missing_entry at background_mortality.119"


def test_perturbation_spec_defaults():
    spec = PerturbationSpec()
    assert spec.replicates == 1000
    assert spec.seed == 0
    assert spec.active_families() == [ParameterFamily.RUPTURE_PROB]
    assert spec.width(ParameterFamily.GROWTH) == 0.0


def test_perturbation_spec_orders_families():
    spec = PerturbationSpec(widths={"reach_hospital_prob": 0.1, "growth": 0.2, "rupture_prob": 0.0})
    assert spec.active_families() == [ParameterFamily.GROWTH, ParameterFamily.REACH_HOSPITAL_PROB]


def test_grid_report_frame_and_json():
    grid = GridReport(
        kind=GridKind.POLICY,
        ages=[65, 66],
        columns=["<30mm", "30-35mm"],
        cells=[[0, 1], [1, 1]],
        provenance=Provenance(parameter_digest="abc", terminal="qaly"),
    )
    assert grid.to_csv() == "age,<30mm,30-35mm\n65,0,1\n66,1,1\n"
    assert grid.cell(66, "<30mm") == 1.0

    data = json.loads(grid.to_json())
    assert data["kind"] == "policy"
    assert data["provenance"]["parameter_digest"] == "abc"
    assert GridReport.model_validate_json(grid.to_json()) == grid


def test_compare_summary_line():
    summary = CompareSummary(max_gain=0.5, argmax_age=70, argmax_bin="50-55mm", differing_cells=3)
    assert summary.line() == "max gain 0.500000 QALY at age 70, 50-55mm; policies differ on 3 cells"
    empty = CompareSummary(max_gain=0.0, differing_cells=0)
    assert "at n/a" in empty.line()


def test_run_manifest_defaults():
    manifest = RunManifest(
        command="solve",
        tool_version="0.1.0",
        parameter_path="p.json",
        parameter_digest="ff",
        start_age=65,
        max_age=120,
        terminal="qaly",
    )
    assert manifest.outputs == []
    assert manifest.seed is None
    assert json.loads(manifest.model_dump_json())["command"] == "solve"
