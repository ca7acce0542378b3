"""
Unit tests for exports.py
"""

import io
import json
import math

import numpy as np

from src.exports import (
    PROPAGATOR_COLUMNS,
    jsonable,
    render_csv,
    render_json,
    with_metadata,
    write_csv,
    write_json,
)


class TestCsv:
    """CSV rendering."""

    def test_header_and_cells(self):
        rows = [{"u": 0.5, "r": 1.0, "t": 0.0, "re": 0.1, "im": -0.0, "delta": None}]
        text = render_csv(rows, PROPAGATOR_COLUMNS)
        assert text.splitlines() == ["u,r,t,re,im,delta", "0.5,1.0,0.0,0.1,-0.0,"]

    def test_numpy_and_sequences(self):
        """numpy scalars render like floats and tuples are space separated."""
        text = render_csv([{"a": np.float64(0.25), "b": (2, 2), "c": True}], ["a", "b", "c"])
        assert text.splitlines()[1] == "0.25,2 2,true"

    def test_non_finite(self):
        text = render_csv([{"a": math.inf}], ["a"])
        assert text.splitlines()[1] == "inf"

    def test_unknown_keys_ignored(self):
        text = render_csv([{"a": 1, "zzz": 2}], ["a"])
        assert text == "a\n1\n"


class TestJson:
    """JSON rendering and metadata."""

    def test_jsonable(self):
        converted = jsonable({"z": 1 + 2j, "beta": math.inf, "pair": (1, 2), 3: np.int64(4)})
        assert converted == {"z": {"re": 1.0, "im": 2.0}, "beta": "inf", "pair": [1, 2], "3": 4}

    def test_render_json_roundtrips(self):
        assert json.loads(render_json({"value": 1.5})) == {"value": 1.5}

    def test_reproducible_has_no_stamp(self):
        document = {"value": 1}
        assert with_metadata(document, True) is document
        stamped = with_metadata(document, False)
        assert "generated_at" in stamped["metadata"]
        assert "metadata" not in document


class TestWriters:
    """Destinations: paths, streams and '-'."""

    def test_write_to_path(self, tmp_path):
        target = tmp_path / "nested" / "out.csv"
        write_csv([{"a": 1}], ["a"], target)
        assert target.read_text(encoding="utf-8") == "a\n1\n"

    def test_dash_uses_stream(self):
        stream = io.StringIO()
        write_json({"ok": True}, "-", stream)
        assert json.loads(stream.getvalue()) == {"ok": True}

    def test_stream_destination(self):
        stream = io.StringIO()
        write_csv([{"a": 1}], ["a"], stream)
        assert stream.getvalue() == "a\n1\n"
