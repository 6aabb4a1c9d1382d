"""Cluster-ranking anaphora resolution: joint mention detection, cluster ranking with
cluster history, and non-referring expression identification."""
from .config import RunConfig, TrainConfig
from .corpus import Document, NRType
from .model import CorefModel

__version__ = "0.1.0"

__all__ = ["CorefModel", "Document", "NRType", "RunConfig", "TrainConfig", "__version__"]
