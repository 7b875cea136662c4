"""Smoke test for the `pvtwin` Python extension.

Run from the repository root after installing the extension:

    pip install --no-build-isolation crates/py
    python python/smoke_test.py
"""

import math
from pathlib import Path

import pvtwin

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def check_geometry():
    pos = pvtwin.solar_position(31.6929, -106.4245, 1140.0, -7.0, "2024-05-09T12:00:00")
    assert 0.0 < pos["apparent_zenith"] < 30.0, pos
    assert math.isclose(pvtwin.relative_airmass(0.0), 1.0, abs_tol=1e-3)
    assert pvtwin.relative_airmass(95.0) is None
    assert 0.0 <= pvtwin.disc_dni(800.0, 30.0, 1.15) <= 1366.1


def check_metrics():
    m = pvtwin.metrics([100.0, 200.0], [110.0, 180.0])
    assert math.isclose(m["mae"], 15.0) and math.isclose(m["mbe"], -5.0), m
    assert math.isclose(m["mape"], 10.0), m
    try:
        pvtwin.metrics([1.0], [1.0, 2.0])
    except pvtwin.PvtwinError as e:
        assert str(e).startswith("LengthMismatch"), e
    else:
        raise AssertionError("length mismatch accepted")


def check_ingest():
    report = pvtwin.ingest(str(FIXTURES / "measurements" / "elpaso_holes.csv"))
    assert report["rows"] == 14 * 144, report["rows"]
    for column in report["columns"]:
        assert abs(column["missing_percent"] - 8.0) < 0.05, column
    assert report["csv"].startswith("Fecha,")


def check_offer():
    artifact = pvtwin.offer(
        str(FIXTURES / "architecture_elpaso.json"),
        str(FIXTURES / "gfs" / "gfs_20240509.csv"),
        str(FIXTURES / "historical" / "elpaso_2020.csv"),
        69.0,
        today="2024-05-08",
    )
    assert artifact["date"] == "2024-05-09", artifact["date"]
    values = artifact["offer"]["values"]
    assert len(values) == 24 and all(0.0 <= v <= 69.0 for v in values), values
    decision = pvtwin.redispatch_check("2024-05-09", values, [v * 0.5 for v in values])
    assert decision["redispatch_required"] == any(v > 0.0 for v in values)


def main():
    for check in (check_geometry, check_metrics, check_ingest, check_offer):
        check()
        print(f"ok  {check.__name__}")
    print(f"pvtwin smoke test passed (schema {pvtwin.SCHEMA_VERSION})")


if __name__ == "__main__":
    main()
