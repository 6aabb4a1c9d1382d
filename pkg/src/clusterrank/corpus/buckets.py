"""Integer feature bucketing."""
from __future__ import annotations

import bisect

# lower bounds of [1, 2, 3, 4, 5-7, 8-11, 12-19, 20+]
SIZE_BUCKET_LOWER = (1, 2, 3, 4, 5, 8, 12, 20)
# lower bounds of [0, 1, 2, 3, 4, 5-7, 8-15, 16-31, 32-63, 64+]
DISTANCE_BUCKET_LOWER = (0, 1, 2, 3, 4, 5, 8, 16, 32, 64)

NUM_SIZE_BUCKETS = len(SIZE_BUCKET_LOWER)
NUM_DISTANCE_BUCKETS = len(DISTANCE_BUCKET_LOWER)


def bucket_cluster_size(n: int) -> int:
    """Cluster size (or position in cluster), 1-based, to a bucket in 0..7."""
    if n < 1:
        raise ValueError(f"cluster size must be >= 1, got {n}")
    return bisect.bisect_right(SIZE_BUCKET_LOWER, n) - 1


def bucket_distance(d: int) -> int:
    """Mention-index distance to a bucket in 0..9."""
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}")
    return bisect.bisect_right(DISTANCE_BUCKET_LOWER, d) - 1
