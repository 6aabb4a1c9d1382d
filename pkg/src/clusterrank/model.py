"""The full network: encoder, scoring nets, and the inference entry point."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .config import TrainConfig
from .corpus import Document, load_embeddings
from .decoder import ClusterScorerNet, ModelScorer, Resolution, cluster_rank
from .encoder import EncodedDoc, Encoder
from .numcore import ParamStore, no_grad


def build_embeddings(config: TrainConfig):
    """Word and contextual embedding sources named by ``config``."""
    if config.word_emb_kind == "hashed":
        words = load_embeddings(None, "hashed", dim=config.word_emb_dim, seed=config.seed)
    else:
        words = load_embeddings(config.word_emb_path, "static")
    contextual = None
    if config.contextual_emb_path:
        contextual = load_embeddings(config.contextual_emb_path, "contextual",
                                     reducer=config.contextual_reducer,
                                     num_layers=config.contextual_layers)
    return words, contextual


class CorefModel:
    def __init__(self, config: TrainConfig, word_embeddings=None, contextual=None,
                 seed: Optional[int] = None):
        self.config = config
        if word_embeddings is None and contextual is None:
            word_embeddings, contextual = build_embeddings(config)
        self.store = ParamStore(np.random.default_rng(config.seed if seed is None else seed))
        self.encoder = Encoder(config, self.store, word_embeddings, contextual)
        self.scorer = ClusterScorerNet(self.store, self.encoder.span_dim, config, len(config.genres))

    @property
    def fine(self) -> bool:
        return self.scorer.fine

    def genre_id(self, genre: str) -> int:
        try:
            return self.config.genres.index(genre) + 1
        except ValueError:
            return 0

    def mention_speakers(self, encoded: EncodedDoc) -> list:
        spk = encoded.doc.token_speakers
        return [spk[s] for s, _ in encoded.kept_spans]

    def model_scorer(self, encoded: EncodedDoc, rng=None) -> ModelScorer:
        return ModelScorer(self.scorer, encoded.reprs, encoded.scores, self.mention_speakers(encoded),
                           self.genre_id(encoded.doc.genre), rng)

    def resolve(self, doc: Document, mode: Optional[str] = None, threshold: Optional[float] = None,
                history: Optional[bool] = None) -> Resolution:
        """Inference: returns a :class:`Resolution` over token spans."""
        c = self.config
        mode = mode or c.nr_mode
        threshold = c.threshold if threshold is None else threshold
        history = c.use_history if history is None else history
        with no_grad():
            encoded = self.encoder.encode(doc)
            spans = encoded.kept_spans
            if not spans:
                return Resolution()
            scorer = self.model_scorer(encoded)
            res = cluster_rank(len(spans), scorer, mode=mode, threshold=threshold, history=history,
                               max_clusters=c.max_clusters)
        return res.map_spans(spans)

    def predict(self, doc: Document, **kwargs) -> Document:
        res = self.resolve(doc, **kwargs)
        return doc.with_annotations(res.clusters, res.nonreferring)
