import json

import pytest

from loceval_client import ClientReport, ReportParseError


def canonical(data) -> bytes:
    return (json.dumps(data, indent=2, sort_keys=True) + "\n").encode("utf-8")


SAMPLE = {
    "schema_version": 1,
    "toolkit_version": "0.1.0",
    "task": "boxes",
    "config": {
        "normalization": "minmax",
        "taus": {"mode": "grid", "count": 1000},
        "order": "normalize-resize",
        "deltas": [0.3, 0.5, 0.7],
    },
    "results": {
        "primary": 0.625,
        "max_box_acc_v2": 0.625,
        "max_box_acc_v1": 0.5,
        "per_delta": {"0.3": {"best_tau": 0.25, "best_acc": 1.0}},
    },
    "counts": {"n_images": 4, "degenerate_maps": 0},
}


def test_fields_parse_to_native_values():
    report = ClientReport.from_bytes(canonical(SAMPLE))
    assert report.task == "boxes"
    assert report.toolkit_version == "0.1.0"
    assert report.primary == 0.625
    assert isinstance(report.counts["n_images"], int)
    assert report.results["per_delta"]["0.3"]["best_acc"] == 1.0
    assert report.provenance is None


def test_round_trip_reproduces_file_bytes(tmp_path):
    path = tmp_path / "report.json"
    path.write_bytes(canonical(SAMPLE))
    assert ClientReport.from_file(path).to_json_bytes() == path.read_bytes()


def test_round_trip_keeps_provenance(tmp_path):
    data = dict(SAMPLE, provenance={"argv": ["loceval", "evaluate"], "when": "x"})
    path = tmp_path / "report.json"
    path.write_bytes(canonical(data))
    report = ClientReport.from_file(path)
    assert report.provenance == data["provenance"]
    assert report.to_json_bytes() == path.read_bytes()


def test_save_then_load_is_stable(tmp_path):
    report = ClientReport.from_bytes(canonical(SAMPLE))
    path = tmp_path / "saved.json"
    report.save(path)
    assert ClientReport.from_file(path) == report


def test_missing_field_rejected():
    data = {k: v for k, v in SAMPLE.items() if k != "results"}
    with pytest.raises(ReportParseError, match="missing.*results"):
        ClientReport.from_dict(data)


def test_unknown_field_rejected():
    with pytest.raises(ReportParseError, match="unrecognized.*surprise"):
        ClientReport.from_dict(dict(SAMPLE, surprise=1))


def test_future_schema_version_rejected():
    with pytest.raises(ReportParseError, match="schema_version"):
        ClientReport.from_dict(dict(SAMPLE, schema_version=2))


def test_invalid_json_rejected():
    with pytest.raises(ReportParseError, match="not valid JSON"):
        ClientReport.from_bytes(b"{nope")


def test_non_object_rejected():
    with pytest.raises(ReportParseError, match="JSON object"):
        ClientReport.from_bytes(b"[1, 2]")
