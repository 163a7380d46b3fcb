"""Text report layout and figure rendering."""

import numpy as np
import pytest

from mlse.report import (
    format_error_matrix,
    format_topk,
    save_error_heatmap,
    save_training_curves,
)
from mlse.seq2seq import EpochRecord
from mlse.simsearch import ErrorMatrix


def _matrix():
    errors = np.array([
        [np.nan, 0.10, 0.20],
        [0.30, np.nan, 0.50],
        [0.40, 0.60, np.nan],
    ])
    return ErrorMatrix(("f1", "f2", "f3"), errors)


class TestFormatErrorMatrix:
    def test_grid_layout(self):
        text = format_error_matrix(_matrix())
        lines = text.splitlines()
        assert lines[0] == "src/tgt\tf1\tf2\tf3\tAll"
        assert lines[1] == "f1\t-\t10.00\t20.00\t15.00"
        assert lines[2] == "f2\t30.00\t-\t50.00\t40.00"
        assert lines[3] == "f3\t40.00\t60.00\t-\t50.00"
        assert text.endswith("\n")

    def test_column_means_and_corner(self):
        lines = format_error_matrix(_matrix()).splitlines()
        assert lines[4] == "All\t35.00\t35.00\t35.00\t35.00"

    def test_fraction_mode(self):
        lines = format_error_matrix(_matrix(), percent=False).splitlines()
        assert lines[1] == "f1\t-\t0.1000\t0.2000\t0.1500"

    def test_two_language_grid(self):
        matrix = ErrorMatrix(("f1", "f2"), np.array([[np.nan, 0.0], [1.0, np.nan]]))
        lines = format_error_matrix(matrix).splitlines()
        assert lines[1] == "f1\t-\t0.00\t0.00"
        assert lines[2] == "f2\t100.00\t-\t100.00"
        assert lines[3] == "All\t100.00\t0.00\t50.00"


class TestFormatTopk:
    def test_numbering_and_rounding(self):
        text = format_topk([(4, 0.987654), (0, -0.25)])
        assert text == "1\t4\t0.9877\n2\t0\t-0.2500\n"

    def test_text_column(self):
        text = format_topk([(1, 1.0)], texts=["zero", "one"])
        assert text == "1\t1\t1.0000\tone\n"


class TestFigures:
    def test_heatmap_written(self, tmp_path):
        path = tmp_path / "errors.png"
        save_error_heatmap(_matrix(), path)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_heatmap_bytes_deterministic(self, tmp_path):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        save_error_heatmap(_matrix(), a)
        save_error_heatmap(_matrix(), b)
        assert a.read_bytes() == b.read_bytes()

    def _records(self):
        return [
            EpochRecord(1, 0.01, 3.0, {"f1": 20.0, "f2": 25.0}, 0.5),
            EpochRecord(2, 0.01, 2.0, {"f1": 10.0, "f2": 12.0}, 0.25),
        ]

    def test_curves_written(self, tmp_path):
        path = tmp_path / "curves.png"
        save_training_curves(self._records(), path)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_curves_without_sim_error(self, tmp_path):
        records = [EpochRecord(1, 0.01, 3.0, {"f1": 20.0}, None)]
        path = tmp_path / "curves.png"
        save_training_curves(records, path)
        assert path.exists()
