"""
Unit tests for CSV ingestion
"""
import tempfile
from pathlib import Path

import numpy as np
import pytest

from missregress.core import Provenance
from missregress.errors import InvalidData
from missregress.ingest import ColumnScaling, ingest_csv, load_test_csv


class TestIngestCsv:
    """Test reading training files"""

    def setup_method(self):
        """Setup test fixtures"""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def teardown_method(self):
        """Clean up"""
        self.tmp.cleanup()

    def write(self, text: str, name: str = 'data.csv') -> Path:
        path = self.dir / name
        path.write_text(text)
        return path

    def test_default_na_tokens(self):
        """NA, NaN, empty and null all mark missing entries"""
        path = self.write("x1,x2,y\n1.5,NA,2\n,3,1\nnull,NaN,0\n")
        result = ingest_csv(path, 'y')
        assert result.data.mask.tolist() == [[True, False], [False, True], [False, False]]
        assert result.data.values.tolist() == [[1.5, 0.0], [0.0, 3.0], [0.0, 0.0]]
        assert result.data.y.tolist() == [2.0, 1.0, 0.0]
        assert result.columns == ('x1', 'x2')

    def test_target_column_anywhere(self):
        """The target is removed from the covariates wherever it sits"""
        path = self.write("y,a,b\n1,2,3\n4,5,6\n")
        result = ingest_csv(path, 'y')
        assert result.columns == ('a', 'b')
        assert result.data.values.tolist() == [[2.0, 3.0], [5.0, 6.0]]

    def test_custom_na_tokens(self):
        """Only the given tokens are missing"""
        path = self.write("x1,y\n?,1\n2,2\n")
        result = ingest_csv(path, 'y', na_tokens={'?'})
        assert result.data.mask[:, 0].tolist() == [False, True]
        with pytest.raises(InvalidData):
            ingest_csv(path, 'y')

    def test_estimated_probabilities(self):
        """A column with 16% NA gives p^ = 0.84"""
        rows = ["x1,x2,y"] + [f"{'NA' if i < 16 else i},{i},{i}" for i in range(100)]
        result = ingest_csv(self.write("\n".join(rows) + "\n"), 'y')
        assert result.miss.p[0] == pytest.approx(0.84)
        assert result.miss.p[1] == 1.0
        assert result.miss.provenance == Provenance.ESTIMATED

    def test_exact_float_round_trip(self):
        """17 significant digits parse back to the same double"""
        value = 0.1 + 0.2
        result = ingest_csv(self.write(f"x1,y\n{value!r},{value!r}\n"), 'y')
        assert result.data.values[0, 0] == value
        assert result.data.y[0] == value

    def test_unparseable_cell_reports_position(self):
        """The message names row and column"""
        path = self.write("x1,x2,y\n1,2,3\n4,abc,6\n")
        with pytest.raises(InvalidData, match=r"row 3, column 'x2'"):
            ingest_csv(path, 'y')

    def test_position_after_rejected_rows(self):
        """Rows dropped for a missing target do not shift reported rows"""
        path = self.write("x1,y\n1,NA\n2,2\nbad,3\n")
        with pytest.raises(InvalidData, match=r"row 4, column 'x1'"):
            ingest_csv(path, 'y')

    def test_infinite_cell_rejected(self):
        """inf is not a finite number"""
        with pytest.raises(InvalidData):
            ingest_csv(self.write("x1,y\ninf,1\n"), 'y')

    def test_missing_target_rows_rejected(self):
        """Rows with a missing response are dropped and counted"""
        result = ingest_csv(self.write("x1,y\n1,NA\n2,2\n3,\n4,4\n"), 'y')
        assert result.rejected_rows == 2
        assert result.data.y.tolist() == [2.0, 4.0]
        assert result.data.values[:, 0].tolist() == [2.0, 4.0]

    def test_every_target_missing(self):
        """No usable row is a data error"""
        with pytest.raises(InvalidData):
            ingest_csv(self.write("x1,y\n1,NA\n"), 'y')

    def test_empty_file(self):
        """An empty file is rejected"""
        with pytest.raises(InvalidData):
            ingest_csv(self.write(""), 'y')

    def test_header_only(self):
        """A header without rows is rejected"""
        with pytest.raises(InvalidData):
            ingest_csv(self.write("x1,y\n"), 'y')

    def test_missing_file(self):
        """A nonexistent path is a data error"""
        with pytest.raises(InvalidData):
            ingest_csv(self.dir / 'absent.csv', 'y')

    def test_unknown_target(self):
        """The target must be a header column"""
        with pytest.raises(InvalidData):
            ingest_csv(self.write("x1,x2\n1,2\n"), 'y')

    def test_target_only(self):
        """At least one covariate column is needed"""
        with pytest.raises(InvalidData):
            ingest_csv(self.write("y\n1\n"), 'y')

    def test_unpacks_as_tuple(self):
        """IngestResult unpacks as (observations, miss, scaling)"""
        observations, miss, scaling = ingest_csv(self.write("x1,y\n1,2\nNA,3\n"), 'y')
        assert len(observations) == 2
        assert miss.p.tolist() == [0.5]
        assert not scaling.enabled


class TestScaling:
    """Test observed-only standardization"""

    def setup_method(self):
        """Setup test fixtures"""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'data.csv'

    def teardown_method(self):
        """Clean up"""
        self.tmp.cleanup()

    def test_statistics_ignore_missing(self):
        """Mean and std come from observed entries; masked slots stay 0"""
        self.path.write_text("x1,x2,y\n1,5,1\n3,5,2\nNA,5,3\n")
        result = ingest_csv(self.path, 'y', scale=True)
        scaling = result.scaling
        assert scaling.enabled
        assert scaling.mean.tolist() == [2.0, 5.0]
        assert scaling.std.tolist() == [1.0, 1.0]
        assert result.data.values[:, 0].tolist() == [-1.0, 1.0, 0.0]
        # constant column: centered, divided by 1
        assert result.data.values[:, 1].tolist() == [0.0, 0.0, 0.0]
        assert scaling.target_mean == 2.0
        np.testing.assert_allclose(result.data.y, (np.array([1.0, 2.0, 3.0]) - 2.0) / np.std([1.0, 2.0, 3.0]))

    def test_invert_target(self):
        """invert_target undoes apply_target"""
        scaling = ColumnScaling(('a',), [0.0], [1.0], 'y', target_mean=3.0, target_std=2.0, enabled=True)
        y = np.array([1.0, 5.0])
        np.testing.assert_allclose(scaling.invert_target(scaling.apply_target(y)), y)

    def test_dict_round_trip(self):
        """to_dict/from_dict preserve every field"""
        scaling = ColumnScaling(('a', 'b'), [1.0, 2.0], [0.5, 4.0], 'y', 1.5, 2.5, True)
        back = ColumnScaling.from_dict(scaling.to_dict())
        assert back.to_dict() == scaling.to_dict()

    def test_nonpositive_std(self):
        """std must be positive"""
        with pytest.raises(InvalidData):
            ColumnScaling(('a',), [0.0], [0.0], 'y')


class TestLoadTestCsv:
    """Test reading complete test files"""

    def setup_method(self):
        """Setup test fixtures"""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'test.csv'

    def teardown_method(self):
        """Clean up"""
        self.tmp.cleanup()

    def test_reorders_to_model_columns(self):
        """Columns come back in model order"""
        self.path.write_text("b,y,a\n2,9,1\n4,8,3\n")
        X, y = load_test_csv(self.path, ['a', 'b'], target_column='y')
        assert X.tolist() == [[1.0, 2.0], [3.0, 4.0]]
        assert y.tolist() == [9.0, 8.0]

    def test_without_target(self):
        """y is None when the file has no target column"""
        self.path.write_text("a\n1\n")
        X, y = load_test_csv(self.path, ['a'], target_column='y')
        assert y is None

    def test_na_rejected(self):
        """Test rows must be complete"""
        self.path.write_text("a,b\n1,2\n3,NA\n")
        with pytest.raises(InvalidData, match=r"row 3, column 'b'"):
            load_test_csv(self.path, ['a', 'b'])

    def test_missing_model_column(self):
        """Every model column must be present"""
        self.path.write_text("a\n1\n")
        with pytest.raises(InvalidData):
            load_test_csv(self.path, ['a', 'b'])
