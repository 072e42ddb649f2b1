"""scikit-learn style wrappers around the functional API."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .function_model import additive_value


class AdditiveFunctionTransformer(TransformerMixin, BaseEstimator):
    """Map a column of positive integers ``n`` to ``[f(n), omega(n)]``.

    Stateless: ``fit`` only validates the input.  Uses factorization, so it
    suits scattered ``n``; for all ``n <= x`` use :func:`ewlab.build_sieve`.
    """

    def __init__(self, spec=None):
        self.spec = spec

    def fit(self, X, y=None):
        self._check(X)
        self.n_features_in_ = 1
        return self

    @staticmethod
    def _check(X):
        X = check_array(X, dtype=np.int64, ensure_2d=False).reshape(-1)
        if X.size and X.min() < 1:
            raise ValueError("n must be positive")
        return X

    def transform(self, X):
        from sympy import factorint

        n = self._check(X)
        out = np.empty((n.size, 2))
        for i, v in enumerate(n.tolist()):
            out[i, 0] = additive_value(self.spec, v)
            out[i, 1] = len(factorint(v))
        return out
