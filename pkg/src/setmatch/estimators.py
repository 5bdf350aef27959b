"""Scikit-learn-style estimator wrappers around the functional classifiers."""
from __future__ import annotations

from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .cache import FusionConfig, build_cache, classify_fused, empty_caches
from .ot import SinkhornConfig
from .zeroshot import classify_dnd


class SetMatchClassifier(BaseEstimator, ClassifierMixin):
    """Zero-shot set-matching classifier (minimal-EMD over descriptor sets).

    X in predict() is a list of FeatureSets; the class descriptor sets are
    fixed at construction, so fit() is a no-op kept for pipeline compatibility.
    """

    def __init__(self, descriptor_sets=None, epsilon=0.05, max_iters=200,
                 marginal_tol=1e-6):
        self.descriptor_sets = descriptor_sets
        self.epsilon = epsilon
        self.max_iters = max_iters
        self.marginal_tol = marginal_tol

    def _sinkhorn(self):
        return SinkhornConfig(self.epsilon, self.max_iters, self.marginal_tol)

    def fit(self, X=None, y=None):
        if not self.descriptor_sets:
            raise ValueError("descriptor_sets must be provided")
        return self

    def predict(self, X):
        self.fit()
        cfg = self._sinkhorn()
        return [
            classify_dnd(q, self.descriptor_sets, cfg).predicted_class for q in X
        ]

    def decision_function(self, X):
        self.fit()
        cfg = self._sinkhorn()
        return [classify_dnd(q, self.descriptor_sets, cfg).per_class_scores for q in X]


class FusedCacheClassifier(BaseEstimator, ClassifierMixin):
    """Few-shot classifier: local-aware cache affinity fused with the text term.

    fit(X, y) builds the per-class cache from training FeatureSets and labels;
    predict(X) scores alpha * A_c - EMD(X, D_c).
    """

    def __init__(self, prompts=None, descriptor_sets=None, alpha=1.0, beta=1.0,
                 epsilon=0.05, max_iters=200, marginal_tol=1e-6):
        self.prompts = prompts
        self.descriptor_sets = descriptor_sets
        self.alpha = alpha
        self.beta = beta
        self.epsilon = epsilon
        self.max_iters = max_iters
        self.marginal_tol = marginal_tol

    def fit(self, X, y):
        if not self.prompts or not self.descriptor_sets:
            raise ValueError("prompts and descriptor_sets must be provided")
        caches = empty_caches(self.descriptor_sets)
        caches.update(build_cache(list(zip(X, y)), self.prompts))
        self.caches_ = caches
        return self

    def predict(self, X):
        if not hasattr(self, "caches_"):
            raise NotFittedError("call fit() before predict()")
        fusion = FusionConfig(self.alpha, self.beta)
        cfg = SinkhornConfig(self.epsilon, self.max_iters, self.marginal_tol)
        return [
            classify_fused(q, self.caches_, self.descriptor_sets, fusion, cfg)
            .predicted_class
            for q in X
        ]
