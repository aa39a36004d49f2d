import numpy as np
import pytest

from dge.classifiers import ClassifierSpec
from dge.classifiers.base import ClassifierModel, Encoder
from dge.tabular import Column, Schema, TabularDataset


@pytest.fixture
def xy_schema():
    return Schema.build([Column("x1"), Column("x2")])


def make_dataset(X, y, schema=None):
    X = np.asarray(X, dtype=float)
    if schema is None:
        schema = Schema.build([Column(f"x{j + 1}") for j in range(X.shape[1])])
    return TabularDataset(schema, X, np.asarray(y))


def blobs(n=200, seed=0, shift=1.5):
    """Two Gaussian blobs in 2-D with a balanced label."""
    gen = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = gen.standard_normal((n, 2)) + shift * y[:, None]
    return make_dataset(X, y)


def const_model(p, schema):
    """A logistic model with zero weights whose output is the constant ``p``."""
    d = len(schema.feature_columns)
    enc = Encoder(schema, np.zeros(d), np.ones(d))
    return ClassifierModel(ClassifierSpec("logreg"), enc, (np.zeros(d), float(np.log(p / (1 - p)))))


def linear_model(w, b, schema):
    """A fixed logistic model on unstandardised features."""
    d = len(schema.feature_columns)
    enc = Encoder(schema, np.zeros(d), np.ones(d))
    return ClassifierModel(ClassifierSpec("logreg"), enc, (np.asarray(w, float), float(b)))
