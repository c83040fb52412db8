import os
import tempfile

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eivlof.data import (PrimarySample, ValidationSample, load_primary, load_validation, save_primary,
                         save_validation)
from eivlof.errors import DimensionMismatch, InputError, NonFiniteValue, ParseError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadPrimary:
    def test_well_formed(self, tmp_path):
        f = write(tmp_path / "p.csv", "y,w1,w2\n1,2,3\n4,5,6\n7,8,9\n")
        s = load_primary(f)
        assert s.n == 3 and s.p == 2
        np.testing.assert_array_equal(s.y, [1, 4, 7])
        np.testing.assert_array_equal(s.w, [[2, 3], [5, 6], [8, 9]])

    def test_wrong_field_count_reports_row(self, tmp_path):
        f = write(tmp_path / "p.csv", "y,w1\n1,2\n3,4,5\n")
        with pytest.raises(ParseError) as info:
            load_primary(f)
        assert info.value.row == 3
        assert "row 3" in str(info.value)

    def test_nan_cell(self, tmp_path):
        f = write(tmp_path / "p.csv", "y,w1\n1,2\nNaN,4\n")
        with pytest.raises(NonFiniteValue) as info:
            load_primary(f)
        assert info.value.column == "y"

    def test_unparseable_cell_reports_column(self, tmp_path):
        f = write(tmp_path / "p.csv", "y,w1\n1,abc\n2,3\n")
        with pytest.raises(ParseError) as info:
            load_primary(f)
        assert (info.value.row, info.value.column) == (2, "w1")

    def test_comments_skipped(self, tmp_path):
        f = write(tmp_path / "p.csv", "# generated\ny,w1\n# mid\n1,2\n3,4\n")
        assert load_primary(f).n == 2

    def test_bad_header(self, tmp_path):
        f = write(tmp_path / "p.csv", "y,x1\n1,2\n3,4\n")
        with pytest.raises(ParseError):
            load_primary(f)

    def test_single_row_rejected(self, tmp_path):
        f = write(tmp_path / "p.csv", "y,w1\n1,2\n")
        with pytest.raises(InputError):
            load_primary(f)


class TestLoadValidation:
    def test_four_columns(self, tmp_path):
        f = write(tmp_path / "v.csv", "w1,w2,x1,x2\n1,2,3,4\n5,6,7,8\n")
        v = load_validation(f)
        assert v.p == 2 and v.N == 2
        np.testing.assert_array_equal(v.x_tilde, [[3, 4], [7, 8]])

    def test_dimension_conflict(self, tmp_path):
        f = write(tmp_path / "v.csv", "w1,w2,x1,x2\n1,2,3,4\n5,6,7,8\n")
        with pytest.raises(DimensionMismatch):
            load_validation(f, expected_p=3)

    def test_empty_file(self, tmp_path):
        f = write(tmp_path / "v.csv", "")
        with pytest.raises(ParseError):
            load_validation(f)

    def test_odd_column_count(self, tmp_path):
        f = write(tmp_path / "v.csv", "w1,w2,x1\n1,2,3\n4,5,6\n")
        with pytest.raises(ParseError):
            load_validation(f)


class TestSamples:
    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteValue):
            PrimarySample(np.array([1.0, np.inf]), np.ones((2, 1)))

    def test_rejects_mismatched_shapes(self):
        with pytest.raises(InputError):
            ValidationSample(np.ones((3, 2)), np.ones((3, 3)))


@pytest.mark.invariant
class TestRoundTrip:
    @given(arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(2, 4)),
                  elements=st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False)))
    def test_primary(self, table):
        s = PrimarySample(table[:, 0], table[:, 1:])
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "p.csv")
            save_primary(s, path)
            back = load_primary(path)
        np.testing.assert_array_equal(back.y, s.y)
        np.testing.assert_array_equal(back.w, s.w)

    def test_validation(self, tmp_path, rng):
        v = ValidationSample(rng.normal(size=(7, 3)) * 1e-7, rng.normal(size=(7, 3)) * 1e9)
        save_validation(v, tmp_path / "v.csv")
        back = load_validation(tmp_path / "v.csv", expected_p=3)
        np.testing.assert_array_equal(back.w_tilde, v.w_tilde)
        np.testing.assert_array_equal(back.x_tilde, v.x_tilde)
