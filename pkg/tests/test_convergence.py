"""Refinement-study harness: orders, CSV/JSON serialization."""

import csv
import io
import json

import numpy as np
import pytest

from peerctrl.catalog import load_triplet
from peerctrl.convergence import (
    CSV_COLUMNS,
    ConvergenceRecord,
    _eoc,
    records_to_csv,
    records_to_json,
    run_study,
)
from peerctrl.problems import make_problem


def test_eoc_formula():
    # halving the error when doubling the grid is order 1
    assert _eoc(2.0, 1.0, 2.0) == pytest.approx(1.0)
    # order follows the exact ratio, not an assumed factor of two
    assert _eoc(1.0, 1.0 / 27.0, 3.0) == pytest.approx(3.0)
    assert _eoc(0.0, 1.0, 2.0) is None
    assert _eoc(1.0, 0.0, 2.0) is None
    assert _eoc(1.0, 0.5, 1.0) is None


def sample_records():
    r1 = ConvergenceRecord("AP4o43p", "quadratic", 5, 1e-2, 2e-2, 1e-3, 3e-3)
    r2 = ConvergenceRecord("AP4o43p", "quadratic", 10, 1.25e-3, 2.5e-3, 6.25e-5, 3.75e-4,
                           eoc_u=3.0, eoc_upp=3.0, eoc_y=4.0, eoc_p=3.0)
    return [r1, r2]


def test_csv_schema_and_determinism():
    text = records_to_csv(sample_records())
    assert text == records_to_csv(sample_records())  # byte-identical repeat
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == CSV_COLUMNS
    assert rows[1][0] == "AP4o43p"
    assert rows[1][7] == ""  # no order on the first grid
    assert float(rows[2][3]) == pytest.approx(1.25e-3)
    assert rows[2][7] == "3"


def test_csv_golden():
    expected = (
        "triplet,problem,Nplus1,errU,errUpp,errY,errP,eocU,eocUpp,eocY,eocP\n"
        "AP4o43p,quadratic,5,1.0000000000e-02,2.0000000000e-02,"
        "1.0000000000e-03,3.0000000000e-03,,,,\n"
        "AP4o43p,quadratic,10,1.2500000000e-03,2.5000000000e-03,"
        "6.2500000000e-05,3.7500000000e-04,3,3,4,3\n"
    )
    assert records_to_csv(sample_records()) == expected


def test_json_roundtrip():
    data = json.loads(records_to_json(sample_records()))
    assert len(data) == 2
    assert data[0]["Nplus1"] == 5
    assert data[0]["eocU"] is None
    assert data[1]["eocY"] == pytest.approx(4.0)


def test_run_study_validation():
    prob = make_problem("quadratic")
    t = load_triplet("AP4o43p")
    with pytest.raises(ValueError):
        run_study(prob, t, [5, 10], mode="bogus")
    with pytest.raises(ValueError):
        run_study(make_problem("schlogl", m=10), t, [5, 10])  # no analytic reference


def test_run_study_exact_mode_orders():
    """Solving with the analytic control shows at least the stage order."""
    prob = make_problem("quadratic")
    t = load_triplet("AP4o43p")
    records = run_study(prob, t, [40, 10, 20], mode="exact")
    assert [r.nplus1 for r in records] == [10, 20, 40]  # sorted regardless of input
    assert records[0].eoc_y is None
    for rec in records[1:]:
        assert rec.eoc_y >= 2.7
        assert rec.eoc_p >= 2.5


def test_run_study_optimized_mode_smoke():
    prob = make_problem("quadratic")
    t = load_triplet("AP4o33pa")
    records = run_study(prob, t, [5, 10])
    assert len(records) == 2
    assert records[1].eoc_u is not None and records[1].eoc_u > 1.5
    assert all(np.isfinite(r.err_u) for r in records)
