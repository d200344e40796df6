"""scikit-learn style recommenders.

Every estimator is inductive: ``fit`` learns from a user x item interaction
matrix and ``predict`` scores any matrix of interaction (condition) vectors
over the same items.

>>> model = CFWGANGP(max_epochs=50).fit(X_train, X_valid)   # doctest: +SKIP
>>> model.recommend(X_train, k=5)                            # doctest: +SKIP
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .adversarial import GanHyperParams, LossVariant, train_gan
from .autodiff import ParamSet
from .baselines import MlcHyperParams, itempop_scores, train_mlc_matrix
from .evaluation import MetricsReport, evaluate_scores, rank_matrix
from .models import MlpSpec, Network
from .validation import check_interactions, check_k, check_same_users


class BaseRecommender(BaseEstimator):
    """Shared ranking, evaluation and scoring on top of ``_scores``."""

    def _scores(self, dense: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        """Score every item for every row of ``X``."""
        check_is_fitted(self)
        ix = check_interactions(X, self.n_items_)
        return self._scores(ix.to_dense())

    def recommend(self, X, k: int = 20) -> list[np.ndarray]:
        """Top-k unseen items per user (ties broken by item index)."""
        check_is_fitted(self)
        k = check_k(k)
        ix = check_interactions(X, self.n_items_)
        return rank_matrix(self._scores(ix.to_dense()), list(ix.rows), k)

    def evaluate(self, X, X_target) -> MetricsReport:
        """P/R/N@{5,20} of recommendations from ``X`` against held-out ``X_target``."""
        check_is_fitted(self)
        ix = check_interactions(X, self.n_items_)
        target = check_interactions(X_target, self.n_items_, "X_target")
        return evaluate_scores(self._scores, ix, target)

    def score(self, X, X_target) -> float:
        """NDCG@20 (greater is better)."""
        return self.evaluate(X, X_target).N20


def _validation_hook(X, X_valid):
    if X_valid is None:
        return None
    valid = check_interactions(X_valid, X.n, "X_valid")
    check_same_users(X, valid)

    def hook(net: Network, epoch: int) -> MetricsReport:
        return evaluate_scores(net.predict, X, valid)

    return hook


class CFWGANGP(BaseRecommender):
    """Conditional WGAN-GP recommender with zero reconstruction and partial masking.

    Setting ``loss="VANILLA_GAN"`` gives the original CFGAN objective.
    ``n_epochs`` trains for a fixed number of epochs without early stopping.
    """

    def __init__(
        self,
        *,
        g_hidden: int = 512,
        g_layers: int = 1,
        d_hidden: int = 512,
        d_layers: int = 1,
        lr: float = 1e-4,
        d_iter: int = 5,
        gp_weight: float = 10.0,
        alpha: float = 0.04,
        p_zr: float = 0.7,
        p_pm: float = 0.6,
        beta1: float = 0.0,
        beta2: float = 0.9,
        batch_size: int = 64,
        max_epochs: int = 1000,
        eval_every: int = 5,
        patience: int = 10,
        loss: str = "WGAN_GP",
        zr: bool = True,
        pm: bool = True,
        n_epochs: int | None = None,
        random_state: int = 0,
    ):
        self.g_hidden = g_hidden
        self.g_layers = g_layers
        self.d_hidden = d_hidden
        self.d_layers = d_layers
        self.lr = lr
        self.d_iter = d_iter
        self.gp_weight = gp_weight
        self.alpha = alpha
        self.p_zr = p_zr
        self.p_pm = p_pm
        self.beta1 = beta1
        self.beta2 = beta2
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.eval_every = eval_every
        self.patience = patience
        self.loss = loss
        self.zr = zr
        self.pm = pm
        self.n_epochs = n_epochs
        self.random_state = random_state

    def hyperparams(self) -> GanHyperParams:
        params = self.get_params()
        params.pop("n_epochs")
        params["seed"] = params.pop("random_state")
        params["loss"] = LossVariant(params["loss"])
        return GanHyperParams(**params)

    def fit(self, X, X_valid=None):
        ix = check_interactions(X)
        result = train_gan(ix, self.hyperparams(), _validation_hook(ix, X_valid), self.n_epochs)
        self.generator_ = result.generator
        self.discriminator_ = result.discriminator
        self.curve_ = result.curve
        self.best_epoch_ = result.best_epoch
        self.epochs_run_ = result.epochs_run
        self.losses_ = result.losses
        self.n_items_ = ix.n
        return self

    def _scores(self, dense):
        return self.generator_.predict(dense)


class MLCRecommender(BaseRecommender):
    """One-hidden-layer multi-label classifier trained with binary cross-entropy."""

    def __init__(
        self,
        *,
        hidden: int = 256,
        lr: float = 1e-4,
        l2: float = 1e-5,
        dropout: float = 0.8,
        beta1: float = 0.9,
        beta2: float = 0.999,
        batch_size: int = 64,
        max_epochs: int = 1000,
        eval_every: int = 5,
        patience: int = 10,
        n_epochs: int | None = None,
        random_state: int = 0,
    ):
        self.hidden = hidden
        self.lr = lr
        self.l2 = l2
        self.dropout = dropout
        self.beta1 = beta1
        self.beta2 = beta2
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.eval_every = eval_every
        self.patience = patience
        self.n_epochs = n_epochs
        self.random_state = random_state

    def hyperparams(self) -> MlcHyperParams:
        params = self.get_params()
        params.pop("n_epochs")
        params["seed"] = params.pop("random_state")
        return MlcHyperParams(**params)

    def fit(self, X, X_valid=None):
        ix = check_interactions(X)
        result = train_mlc_matrix(ix, self.hyperparams(), _validation_hook(ix, X_valid), self.n_epochs)
        self.model_ = result.model
        self.curve_ = result.curve
        self.best_epoch_ = result.best_epoch
        self.epochs_run_ = result.epochs_run
        self.losses_ = result.losses
        self.n_items_ = ix.n
        return self

    def _scores(self, dense):
        return self.model_.predict(dense)


class ItemPop(BaseRecommender):
    """Recommend the items with the most training interactions."""

    def fit(self, X, X_valid=None):
        ix = check_interactions(X)
        self.popularity_ = itempop_scores(ix)
        self.n_items_ = ix.n
        return self

    def _scores(self, dense):
        return np.tile(self.popularity_, (dense.shape[0], 1))

    def as_network(self) -> Network:
        """The popularity vector as a single linear layer applied to a constant 1."""
        spec = MlpSpec((1, self.n_items_), output="identity")
        return Network(spec, ParamSet({"l00.W": self.popularity_[None, :], "l00.b": np.zeros(self.n_items_)}))

    @classmethod
    def from_network(cls, net: Network) -> ItemPop:
        est = cls()
        est.popularity_ = net.params["l00.W"][0] + net.params["l00.b"]
        est.n_items_ = len(est.popularity_)
        return est
