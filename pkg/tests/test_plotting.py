import xml.etree.ElementTree as ET

import numpy as np
import pytest

from genmetric import IoError, ValidationError, emit_plot


def parse_csv_twin(path):
    lines = path.read_text().strip().splitlines()
    rows = [tuple(float(c) for c in ln.split(",")) for ln in lines[1:]]
    return lines[0], rows


class TestEmitPlot:
    def test_single_point_valid_svg_with_marker(self, tmp_path):
        svg = tmp_path / "one.svg"
        emit_plot([(1.0, 2.5)], svg)
        root = ET.parse(svg).getroot()
        assert root.tag.endswith("svg")
        body = svg.read_text()
        assert "marker" in body or "use" in body or "path" in body

    def test_csv_twin_matches_input_exactly(self, tmp_path):
        series = [(1.0, 100.0), (2.0, 50.25), (3.0, 0.1), (4.0, 2**-30)]
        svg = tmp_path / "curve.svg"
        csv_path = emit_plot(series, svg, xlabel="epoch", ylabel="lfid")
        assert csv_path == tmp_path / "curve.csv"
        header, rows = parse_csv_twin(csv_path)
        assert header == "epoch,lfid"
        assert rows == series

    def test_monotone_series_renders(self, tmp_path):
        series = [(float(i), 100.0 / (i + 1)) for i in range(10)]
        svg = tmp_path / "mono.svg"
        emit_plot(series, svg)
        assert svg.stat().st_size > 1000
        ET.parse(svg)  # well-formed XML

    def test_empty_series_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            emit_plot([], tmp_path / "x.svg")

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(IoError):
            emit_plot([(0.0, 0.0)], tmp_path / "no-such-dir" / "x.svg")

    def test_repeated_render_same_bytes(self, tmp_path):
        series = [(float(i), float(i * i)) for i in range(5)]
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_plot(series, a)
        emit_plot(series, b)
        assert a.read_bytes() == b.read_bytes()
