"""Shared helpers for tests: a small model configuration and random score tables."""
import numpy as np

from clusterrank.config import TrainConfig


def tiny_config(**over):
    base = dict(bilstm_layers=1, bilstm_size=8, ffnn_layers=1, ffnn_size=12, cnn_filters=3,
                cnn_widths=(2, 3), char_emb_size=4, num_char_buckets=32, word_emb_dim=8,
                max_span_width=4, feature_size=4, bilstm_dropout=0.0, embedding_dropout=0.0,
                ffnn_dropout=0.0, max_clusters=50, genres=["nw"], log_frequency=1, eval_frequency=10**9)
    base.update(over)
    return TrainConfig(**base)


def small_config(**over):
    """The configuration used by the overfit experiments."""
    base = dict(bilstm_layers=1, bilstm_size=32, ffnn_layers=1, ffnn_size=64, cnn_filters=8,
                word_emb_dim=32, max_span_width=4, feature_size=8, bilstm_dropout=0.2,
                embedding_dropout=0.2, ffnn_dropout=0.1, max_clusters=50, genres=["nw"],
                log_frequency=10**9, eval_frequency=10**9)
    base.update(over)
    return TrainConfig(**base)


def random_table(rng, n, fine, tie_prone=True):
    """Random epsilon table and a pairwise score dict keyed by (i, members)."""
    width = 7 if fine else 3
    if tie_prone:
        eps = rng.integers(-2, 3, size=(n, width)).astype(float)
    else:
        eps = rng.normal(size=(n, width)) * 2
    salt = int(rng.integers(2**31))

    def pair(i, members):
        # a pure function of (i, members) so call order never matters
        r = np.random.default_rng([salt, i, len(members), *members])
        return float(r.integers(-2, 4)) if tie_prone else float(r.normal() * 2)

    return eps, pair
