"""
Unit tests for the model file
"""
import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from missregress.core import MissingnessModel, Provenance
from missregress.errors import InvalidData
from missregress.ingest import ColumnScaling
from missregress.lipschitz import LipschitzEstimate, LipschitzMethod
from missregress.modelfile import SCHEMA_VERSION, ModelFile
from missregress.polyfeat import FeatureMap


def make_model(**overrides) -> ModelFile:
    values = dict(
        d_raw=2,
        miss=MissingnessModel(p=np.array([0.7, 0.9]), provenance=Provenance.ESTIMATED),
        beta_avg=np.array([0.1 + 0.2, -1.0 / 3.0]),
        beta=np.array([0.25, -0.5]),
        algorithm='avsgd',
        gradient='plain_debiased',
        alpha=0.0123,
        lam=0.0,
        seed=7,
        scaling=ColumnScaling.identity(['a', 'b'], 'y'),
        lipschitz=LipschitzEstimate(40.5, LipschitzMethod.FROM_NA),
        extra={'n_rows': 10},
    )
    values.update(overrides)
    return ModelFile(**values)


class TestSerialization:
    """Test canonical JSON"""

    def test_file_round_trip_is_byte_identical(self):
        """load then save reproduces the file exactly"""
        model = make_model()
        with tempfile.TemporaryDirectory() as tmp:
            first = model.save(Path(tmp) / 'a.json')
            second = ModelFile.load(first).save(Path(tmp) / 'b.json')
            assert first.read_bytes() == second.read_bytes()

    def test_poly_round_trip(self):
        """FeatureMap and scaling survive serialization"""
        fm = FeatureMap.degree2(2)
        scaling = ColumnScaling(('a', 'b'), [1.0, 2.0], [0.5, 4.0], 'y', 1.5, 2.5, True)
        model = make_model(feature_map=fm, beta_avg=np.arange(5.0), beta=np.ones(5), scaling=scaling, lam=0.1)
        back = ModelFile.loads(model.dumps())
        assert back.feature_map == fm
        assert back.scaling.to_dict() == scaling.to_dict()
        assert back.lam == 0.1
        assert back.dumps() == model.dumps()

    def test_lambda_key(self):
        """The ridge weight is stored under 'lambda'"""
        raw = json.loads(make_model(lam=0.5).dumps())
        assert raw['lambda'] == 0.5
        assert raw['schema_version'] == SCHEMA_VERSION
        assert raw['missingness'] == {'p': [0.7, 0.9], 'provenance': 'estimated'}

    def test_invalid_json(self):
        """Non-JSON text is a data error"""
        with pytest.raises(InvalidData):
            ModelFile.loads("{not json")

    def test_missing_key(self):
        """Incomplete files are a data error"""
        raw = make_model().to_dict()
        del raw['beta_avg']
        with pytest.raises(InvalidData):
            ModelFile.from_dict(raw)

    def test_schema_version(self):
        """Unknown schema versions are rejected"""
        raw = make_model().to_dict()
        raw['schema_version'] = SCHEMA_VERSION + 1
        with pytest.raises(InvalidData):
            ModelFile.from_dict(raw)

    def test_missing_file(self):
        """Loading a nonexistent file is a data error"""
        with pytest.raises(InvalidData):
            ModelFile.load('/nonexistent/model.json')


class TestPredict:
    """Test predictions in original units"""

    def test_identity_scaling(self):
        """Unscaled models predict X beta_bar"""
        model = make_model(beta_avg=np.array([1.0, 2.0]))
        assert model.predict(np.array([[1.0, 1.0], [2.0, 0.0]])).tolist() == [3.0, 2.0]

    def test_scaling_applied_and_inverted(self):
        """((x - m) / s) beta * target_std + target_mean"""
        scaling = ColumnScaling(('a', 'b'), [1.0, 0.0], [2.0, 1.0], 'y', target_mean=10.0, target_std=3.0,
                                enabled=True)
        model = make_model(beta_avg=np.array([1.0, 1.0]), scaling=scaling)
        # ((5 - 1) / 2 + 1) * 3 + 10
        assert model.predict(np.array([[5.0, 1.0]])).tolist() == [19.0]

    def test_poly_expansion(self):
        """Predictions use the expanded features"""
        fm = FeatureMap.degree2(2)
        model = make_model(feature_map=fm, beta_avg=np.array([0.0, 0.0, 1.0, 0.0, 0.0]), beta=np.zeros(5))
        assert model.predict(np.array([[2.0, 3.0]])).tolist() == [6.0]

    def test_width_checked(self):
        """Test rows must have d_raw columns"""
        with pytest.raises(InvalidData):
            make_model().predict(np.ones((1, 3)))

    def test_coefficient_length_checked(self):
        """Coefficients must match the feature count"""
        with pytest.raises(InvalidData):
            make_model(beta_avg=np.ones(3))
        with pytest.raises(InvalidData):
            make_model(feature_map=FeatureMap.degree2(2))
