import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rdmgeom import __version__
from rdmgeom.core import ExpectationPoint
from rdmgeom.geometry import convex_hull
from rdmgeom.io import (DatasetManifest, DatasetParseError, IntegrityError, SchemaError, read_cloud, read_hull,
                        read_table, write_cloud, write_hull, write_table)

TETRA = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)


def manifest(**kw):
    return DatasetManifest(model_tag="spin1d", axes=["XX", "Z", "X"], params=kw)


def test_cloud_round_trip(tmp_path, rng):
    pts = rng.normal(size=(1000, 4)) * 10 ** rng.uniform(-300, 300, size=(1000, 4))
    write_cloud(pts, manifest(seed=1), tmp_path / "c.csv")
    t = read_cloud(tmp_path / "c.csv")
    assert np.array_equal(t.data, pts)
    assert t.columns == ["a", "b", "c", "y"] and t.sources == ["random"] * 1000
    assert t.manifest.params == {"seed": 1} and t.manifest.tool_version == __version__


def test_cloud_from_points(tmp_path):
    pts = [ExpectationPoint(0.1, 0.2, 0.3), ExpectationPoint(-1, 0, 1)]
    write_cloud(pts, manifest(), tmp_path / "c.csv", sources=["oracle", "sweep"])
    t = read_cloud(tmp_path / "c.csv")
    assert t.data.tolist() == [[0.1, 0.2, 0.3], [-1, 0, 1]]
    assert t.sources == ["oracle", "sweep"]


@given(arrays(float, st.tuples(st.integers(0, 20), st.just(3)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
@settings(max_examples=50)
def test_round_trip_is_exact(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("rt") / "c.csv"
    write_cloud(data, manifest(), path)
    assert np.array_equal(read_cloud(path).data, data.reshape(-1, 3))


def test_integrity_error_after_edit(tmp_path):
    path = tmp_path / "c.csv"
    write_cloud(np.ones((3, 3)), manifest(), path)
    text = path.read_text().replace("1.0,1.0,1.0,random\n", "1.0,1.0,1.5,random\n", 1)
    path.write_text(text)
    with pytest.raises(IntegrityError):
        read_cloud(path)
    assert read_cloud(path, verify=False).data[0, 2] == 1.5


def test_empty_cloud(tmp_path):
    path = tmp_path / "e.csv"
    write_cloud(np.empty((0, 3)), manifest(), path)
    body = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    assert body == ["a,b,c,source"]
    assert read_cloud(path).data.shape == (0, 3)


def test_parse_errors_report_line_numbers(tmp_path):
    path = tmp_path / "c.csv"
    write_cloud(np.ones((3, 3)), manifest(), path)
    lines = path.read_text().split("\n")
    n_header = sum(ln.startswith("#") for ln in lines)
    bad = lines.copy()
    bad[n_header + 2] = "1.0,oops,1.0,random"
    path.write_text("\n".join(bad))
    with pytest.raises(DatasetParseError, match=f"line {n_header + 3}"):
        read_table(path, verify=False)
    bad[n_header + 2] = "1.0,1.0,random"
    path.write_text("\n".join(bad))
    with pytest.raises(DatasetParseError, match="expected 4 fields"):
        read_table(path, verify=False)
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(DatasetParseError, match="line 1"):
        read_table(path)


def test_schema_checks(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, ["theta", "d_max"], [[0, 1]], manifest())
    with pytest.raises(SchemaError):
        read_cloud(path)
    with pytest.raises(SchemaError):
        read_table(path).column("y")
    with pytest.raises(ValueError):
        write_cloud(np.ones((2, 3)), manifest(), path, sources="made-up")
    with pytest.raises(ValueError):
        write_cloud(np.full((2, 3), np.nan), manifest(), path)
    with pytest.raises(ValueError):
        write_cloud(np.ones((2, 5)), manifest(), path)


def test_byte_identical_output(tmp_path, rng):
    pts = rng.normal(size=(50, 3))
    write_cloud(pts, manifest(a=1, b=2), tmp_path / "1.csv")
    write_cloud(pts.copy(), manifest(b=2, a=1), tmp_path / "2.csv")
    assert (tmp_path / "1.csv").read_bytes() == (tmp_path / "2.csv").read_bytes()
    assert b"\r" not in (tmp_path / "1.csv").read_bytes()


def test_timestamp_is_opt_in(monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    assert DatasetManifest.timestamp() is None
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert DatasetManifest.timestamp() == "1970-01-01T00:00:00+00:00"
    assert DatasetManifest.timestamp("2020") == "2020"


def test_timestamp_excluded_from_hash(tmp_path):
    m1, m2 = manifest(), manifest()
    m2.created = "2024-01-01"
    h1 = write_cloud(np.ones((2, 3)), m1, tmp_path / "1.csv")
    h2 = write_cloud(np.ones((2, 3)), m2, tmp_path / "2.csv")
    assert h1 == h2


def test_hull_files(tmp_path):
    h = convex_hull(np.vstack([TETRA, [[0.1, 0.1, 0.1]]]))
    write_hull(h, tmp_path / "h.json", manifest())
    doc = json.loads((tmp_path / "h.json").read_text())
    assert len(doc["vertices"]) == 4 and len(doc["facets"]) == 4 and doc["degenerate"] is False
    assert doc["manifest"]["kind"] == "hull"
    back = read_hull(tmp_path / "h.json")
    assert {tuple(sorted(e)) for e in back["edges"].tolist()} == {tuple(sorted(e)) for e in h.edges.tolist()}
    assert np.array_equal(back["vertices"], h.vertices)


def test_degenerate_hull_file(tmp_path):
    h = convex_hull(TETRA[:3])
    write_hull(h, tmp_path / "d.json")
    doc = read_hull(tmp_path / "d.json")
    assert doc["degenerate"] is True and doc["dim"] == 2
