"""scikit-learn style wrappers around the engine.

These exist so the trainer composes with the wider ecosystem: get_params /
set_params / clone work, fit returns self, and predictions follow the usual
conventions. The functional engine API remains the primary surface; the
wrappers only translate.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from .engine import RunConfig, run
from .exceptions import DddoptError
from .grid import DataGrid
from .losses import LossModel
from .theory import Schedule
from .validation import check_binary_labels, check_matrix, check_vector


class _SoddaBase(BaseEstimator):
    def __init__(
        self,
        P=1,
        Q=1,
        L=4,
        T=20,
        schedule="experiment",
        gamma0=0.1,
        b_frac=1.0,
        c_frac=1.0,
        d_frac=1.0,
        pi_policy="uniform",
        l2_reg=0.0,
        eval_every=1,
        random_state=0,
    ):
        self.P = P
        self.Q = Q
        self.L = L
        self.T = T
        self.schedule = schedule
        self.gamma0 = gamma0
        self.b_frac = b_frac
        self.c_frac = c_frac
        self.d_frac = d_frac
        self.pi_policy = pi_policy
        self.l2_reg = l2_reg
        self.eval_every = eval_every
        self.random_state = random_state

    def _run(self, X, y, loss_kind):
        grid = DataGrid(X, y)
        config = RunConfig(
            P=self.P,
            Q=self.Q,
            L=self.L,
            T=self.T,
            schedule=Schedule(self.schedule, self.gamma0),
            b_frac=self.b_frac,
            c_frac=self.c_frac,
            d_frac=self.d_frac,
            pi_policy=self.pi_policy,
            seed=self.random_state if self.random_state is not None else 0,
            loss=LossModel(loss_kind, l2_reg=self.l2_reg),
            eval_every=self.eval_every,
        )
        state = run(config, grid)
        self.coef_ = state.w.values.copy()
        self.trace_ = state.trace
        self.n_features_in_ = X.shape[1]
        return self

    def _margins(self, X):
        if not hasattr(self, "coef_"):
            raise DddoptError("estimator is not fitted yet; call fit first")
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DddoptError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_


class SoddaClassifier(_SoddaBase, ClassifierMixin):
    """Linear classifier trained by the doubly distributed engine.

    Parameters mirror RunConfig; ``loss`` picks any of the classification
    losses. Labels may be any two values; they are mapped onto -1/+1 for
    training and mapped back for predict.
    """

    def __init__(
        self,
        P=1,
        Q=1,
        L=4,
        T=20,
        schedule="experiment",
        gamma0=0.1,
        b_frac=1.0,
        c_frac=1.0,
        d_frac=1.0,
        pi_policy="uniform",
        loss="hinge",
        l2_reg=0.0,
        eval_every=1,
        random_state=0,
    ):
        super().__init__(
            P=P, Q=Q, L=L, T=T, schedule=schedule, gamma0=gamma0,
            b_frac=b_frac, c_frac=c_frac, d_frac=d_frac, pi_policy=pi_policy,
            l2_reg=l2_reg, eval_every=eval_every, random_state=random_state,
        )
        self.loss = loss

    def fit(self, X, y):
        X = check_matrix(X)
        mapped, classes = check_binary_labels(check_vector(y, X.shape[0]))
        self.classes_ = classes
        return self._run(X, mapped, self.loss)

    def decision_function(self, X):
        return self._margins(X)

    def predict(self, X):
        margins = self._margins(X)
        return np.where(margins >= 0.0, self.classes_[1], self.classes_[0])


class SoddaRegressor(_SoddaBase, RegressorMixin):
    """Linear least-squares regressor trained by the doubly distributed engine."""

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_vector(y, X.shape[0])
        return self._run(X, y, "least_squares")

    def predict(self, X):
        return self._margins(X)
