"""Pair-set constructors: how same/different supervision gets built.

Four regimes with very different privacy/coverage trade-offs:

* exhaustive: every unordered pair once, N(N-1)/2 records.
* disjoint: each record appears in at most one pair, anchors walk the
  remaining records in id order and partners are drawn uniformly at random
  from what is left; both are removed after pairing.
* sampled: a target number of distinct pairs drawn batch-wise, where each
  batch first picks M unique classes and then pairs records only inside
  that class pool (M controls the same-class fraction).
* online: the full pair expansion of one minibatch, built per step so the
  quadratic pair set never has to be materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FullyLabeledDataset, PairDataset, sufficient_label
from .rng import substream

__all__ = [
    "PairingConfig",
    "pair_exhaustive",
    "pair_disjoint",
    "pair_sampled",
    "online_epoch_pairs",
    "coverage_fraction",
    "max_disjoint_pairs",
]

BATCH_GRANULARITY = 1024


@dataclass(frozen=True)
class PairingConfig:
    """Settings for pair-set construction.

    ``class_batch_size`` is the M of the sampled regime; None means the
    default min(10, class_count).  ``n_pairs`` is ignored by the exhaustive
    and online regimes.
    """

    mode: str = "sampled"
    n_pairs: int = 0
    class_batch_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exhaustive", "disjoint", "sampled", "online"):
            raise ValueError(f"unknown pairing mode {self.mode!r}")


def coverage_fraction(n_pairs: int, n_examples: int) -> float:
    """Fraction of all distinct pairs covered by n_pairs draws."""
    cap = n_examples * (n_examples - 1) // 2
    if cap == 0:
        raise ValueError("coverage undefined for fewer than 2 examples")
    return n_pairs / cap


def max_disjoint_pairs(n_examples: int) -> int:
    """Largest n accepted by the disjoint constructor (strict N > 2n)."""
    return (n_examples - 1) // 2


def pair_exhaustive(ds: FullyLabeledDataset) -> PairDataset:
    """Every unordered pair of distinct records, labeled by class agreement."""
    n = len(ds)
    if n < 2:
        raise ValueError("insufficient examples: exhaustive pairing needs at least 2")
    ii, jj = np.triu_indices(n, k=1)
    t = (ds.y[ii] == ds.y[jj]).astype(np.uint8)
    return PairDataset.build(ds.ids[ii], ds.ids[jj], t, source=ds)


def pair_disjoint(
    ds: FullyLabeledDataset, n_pairs: int, seed: int = 0
) -> tuple[PairDataset, FullyLabeledDataset]:
    """Record-disjoint pairing; returns the pairs and the untouched remainder.

    The anchor is always the smallest remaining id; its partner is drawn
    uniformly from the other remaining records, and both leave the pool.
    Requires strictly more than 2 * n_pairs records so the remainder is
    never empty.
    """
    n = len(ds)
    if n_pairs < 1:
        raise ValueError("disjoint pairing needs n_pairs >= 1")
    if n <= 2 * n_pairs:
        raise ValueError(
            f"insufficient examples for disjoint pairing: need more than {2 * n_pairs}, have {n}"
        )
    rng = substream(seed, "pairing", "disjoint")
    order = np.argsort(ds.ids, kind="stable")   # positions sorted by id
    alive = np.ones(n, dtype=bool)              # indexed in id order
    anchor_cursor = 0
    a_out = np.empty(n_pairs, dtype=np.int64)
    b_out = np.empty(n_pairs, dtype=np.int64)
    t_out = np.empty(n_pairs, dtype=np.uint8)
    for k in range(n_pairs):
        while not alive[anchor_cursor]:
            anchor_cursor += 1
        anchor = anchor_cursor
        alive[anchor] = False
        remaining = np.flatnonzero(alive)
        partner = int(remaining[rng.integers(len(remaining))])
        alive[partner] = False
        pa, pb = order[anchor], order[partner]
        ya, yb = int(ds.y[pa]), int(ds.y[pb])
        ida, idb = int(ds.ids[pa]), int(ds.ids[pb])
        a_out[k], b_out[k] = min(ida, idb), max(ida, idb)
        t_out[k] = sufficient_label(ya, yb)
    survivors = order[np.flatnonzero(alive)]
    remainder = ds.subset(np.sort(survivors))
    return PairDataset(a_ids=a_out, b_ids=b_out, t=t_out, source=ds), remainder


def pair_sampled(ds: FullyLabeledDataset, cfg: PairingConfig) -> PairDataset:
    """Distinct random pairs drawn through M-unique-class batches.

    Each batch of up to 1024 pairs first selects M distinct classes and then
    draws unordered record pairs without replacement from the pooled
    examples of those classes.  No self-pairs, no duplicates across the
    whole output.
    """
    n = len(ds)
    cap = n * (n - 1) // 2
    if cfg.n_pairs < 1:
        raise ValueError("sampled pairing needs n_pairs >= 1")
    if cfg.n_pairs > cap:
        raise ValueError(
            f"insufficient examples: {cfg.n_pairs} pairs requested, only {cap} distinct pairs exist"
        )
    rng = substream(cfg.seed, "pairing", "sampled")
    present = np.unique(ds.y)
    m_default = min(10, ds.class_count)
    m = cfg.class_batch_size if cfg.class_batch_size is not None else m_default
    if m < 1:
        raise ValueError("class_batch_size must be at least 1")
    m = min(m, len(present))

    taken: set[tuple[int, int]] = set()
    a_out: list[int] = []
    b_out: list[int] = []
    t_out: list[int] = []
    stalled = 0
    while len(a_out) < cfg.n_pairs:
        chosen = rng.choice(present, size=m, replace=False)
        pool = np.flatnonzero(np.isin(ds.y, chosen))
        # after many fruitless batches widen to the full dataset so the
        # end-game (nearly every pair requested) still terminates
        if stalled >= 50:
            pool = np.arange(n)
        p = len(pool)
        pool_cap = p * (p - 1) // 2
        if pool_cap == 0:
            stalled += 1
            continue
        quota = min(BATCH_GRANULARITY, cfg.n_pairs - len(a_out))
        got = 0
        if quota * 2 >= pool_cap or pool_cap <= 4096:
            ii, jj = np.triu_indices(p, k=1)
            ids_lo = np.minimum(ds.ids[pool[ii]], ds.ids[pool[jj]])
            ids_hi = np.maximum(ds.ids[pool[ii]], ds.ids[pool[jj]])
            free = [
                k for k in range(pool_cap)
                if (int(ids_lo[k]), int(ids_hi[k])) not in taken
            ]
            if free:
                pick = rng.choice(len(free), size=min(quota, len(free)), replace=False)
                for k in pick:
                    key = (int(ids_lo[free[k]]), int(ids_hi[free[k]]))
                    taken.add(key)
                    a_out.append(key[0])
                    b_out.append(key[1])
                    got += 1
        else:
            attempts = 0
            while got < quota and attempts < 20 * quota:
                attempts += 1
                i, j = rng.integers(p), rng.integers(p)
                if i == j:
                    continue
                pa, pb = int(pool[i]), int(pool[j])
                key = (min(int(ds.ids[pa]), int(ds.ids[pb])),
                       max(int(ds.ids[pa]), int(ds.ids[pb])))
                if key in taken:
                    continue
                taken.add(key)
                a_out.append(key[0])
                b_out.append(key[1])
                got += 1
        stalled = 0 if got else stalled + 1

    a_ids = np.array(a_out, dtype=np.int64)
    b_ids = np.array(b_out, dtype=np.int64)
    t = (ds.labels_for(a_ids) == ds.labels_for(b_ids)).astype(np.uint8)
    return PairDataset(a_ids=a_ids, b_ids=b_ids, t=t, source=ds)


def online_epoch_pairs(batch: FullyLabeledDataset) -> PairDataset:
    """Full pair expansion of one minibatch (B(B-1)/2 records).

    A batch with fewer than 2 examples expands to an empty pair set.
    """
    n = len(batch)
    if n < 2:
        empty = np.empty(0, dtype=np.int64)
        return PairDataset(a_ids=empty, b_ids=empty,
                           t=np.empty(0, dtype=np.uint8), source=batch)
    ii, jj = np.triu_indices(n, k=1)
    t = (batch.y[ii] == batch.y[jj]).astype(np.uint8)
    return PairDataset.build(batch.ids[ii], batch.ids[jj], t, source=batch)
