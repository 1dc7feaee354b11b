"""Evaluation harness: accuracy, label-budget sweeps, regime comparisons.

The sweep varies the pair budget n1 and the labeled-set size n2 on a grid
with repeated trials; every cell draws fresh pairs, fresh labels and a
fresh model from its own seed stream, and per-run accuracies are kept so
any summary can be recomputed from the rows.

The comparison protocol pits three regimes against each other under a
paired design (same per-trial seed, same test set): the fully-supervised
baseline on all labels, two-stage training on a sampled pair budget plus a
few labels per class, and online two-stage training on the same few labels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import FullyLabeledDataset
from .model import TwoPartClassifier
from .pairing import PairingConfig, pair_sampled
from .rng import substream
from .trainer import TrainConfig, train_baseline_full, train_online, train_two_stage

__all__ = [
    "accuracy",
    "stratified_subset",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "run_sweep",
    "CompareResult",
    "comparison_protocol",
]

ModelFactory = Callable[[int], TwoPartClassifier]


def accuracy(model: TwoPartClassifier, ds: FullyLabeledDataset) -> float:
    """Fraction of correct predictions; undefined on an empty set."""
    if len(ds) == 0:
        raise ValueError("accuracy undefined on an empty dataset")
    return float(np.mean(model.predict(ds.x) == ds.y))


def stratified_subset(ds: FullyLabeledDataset, n: int, seed: int) -> FullyLabeledDataset:
    """Random subset of size n spread as evenly as possible over classes.

    Classes are visited round-robin in shuffled order, drawing one shuffled
    example at a time, so n = class_count yields exactly one per class.
    """
    if not 1 <= n <= len(ds):
        raise ValueError(f"subset size {n} outside [1, {len(ds)}]")
    rng = substream(seed, "labels")
    classes = [c for c in range(ds.class_count) if np.any(ds.y == c)]
    rng.shuffle(classes)
    queues = {c: list(rng.permutation(np.flatnonzero(ds.y == c))) for c in classes}
    picked: list[int] = []
    while len(picked) < n:
        progressed = False
        for c in classes:
            if queues[c] and len(picked) < n:
                picked.append(int(queues[c].pop()))
                progressed = True
        if not progressed:
            break
    return ds.subset(np.array(sorted(picked), dtype=np.int64))


@dataclass(frozen=True)
class SweepSpec:
    """Grid of pair budgets and label budgets with repetitions."""

    n1_values: tuple[int, ...]
    n2_values: tuple[int, ...]
    reps: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.n1_values or not self.n2_values:
            raise ValueError("sweep grid must be nonempty")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")


@dataclass(frozen=True)
class SweepRow:
    n1: int
    n2: int
    rep: int
    seed: int
    accuracy: float
    wall_seconds: float


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow] = field(default_factory=list)

    def cell(self, n1: int, n2: int) -> list[SweepRow]:
        return [r for r in self.rows if r.n1 == n1 and r.n2 == n2]

    def cell_stats(self, n1: int, n2: int) -> tuple[float, float]:
        """(mean, sample std) recomputed from the stored per-run accuracies."""
        acc = np.array([r.accuracy for r in self.cell(n1, n2)])
        if len(acc) == 0:
            raise ValueError(f"no rows for cell ({n1}, {n2})")
        std = float(np.std(acc, ddof=1)) if len(acc) > 1 else 0.0
        return float(np.mean(acc)), std

    def to_csv(self, path: str) -> None:
        """Result rows; wall times stay out of the file (they go to the run
        manifest instead) so identical reruns are byte-identical."""
        with open(path, "w", encoding="utf-8") as f:
            f.write("n1,n2,rep,seed,accuracy\n")
            for r in self.rows:
                f.write(f"{r.n1},{r.n2},{r.rep},{r.seed},{repr(r.accuracy)}\n")


def run_sweep(
    train_ds: FullyLabeledDataset,
    test_ds: FullyLabeledDataset,
    spec: SweepSpec,
    model_factory: ModelFactory,
    train_cfg: TrainConfig,
    pairing: PairingConfig | None = None,
) -> SweepResult:
    """Two-stage training over the (n1, n2) grid.

    Every (n1, n2, rep) cell derives one seed from the spec seed and uses
    it for pair sampling, label subsetting, model init and training, so a
    rerun reproduces every row exactly.
    """
    if pairing is None:
        pairing = PairingConfig(mode="sampled")
    result = SweepResult(spec=spec)
    for n1 in spec.n1_values:
        for n2 in spec.n2_values:
            for rep in range(spec.reps):
                cell_seed = int(substream(spec.seed, "sweep", n1, n2, rep).integers(2**62))
                t0 = time.perf_counter()
                pairs = pair_sampled(
                    train_ds, replace(pairing, mode="sampled", n_pairs=n1, seed=cell_seed)
                )
                labeled = stratified_subset(train_ds, n2, cell_seed)
                model = model_factory(cell_seed)
                cfg = replace(train_cfg, seed=cell_seed)
                train_two_stage(model, pairs, labeled, cfg)
                acc = accuracy(model, test_ds)
                result.rows.append(
                    SweepRow(
                        n1=n1, n2=n2, rep=rep, seed=cell_seed, accuracy=acc,
                        wall_seconds=time.perf_counter() - t0,
                    )
                )
    return result


@dataclass
class CompareResult:
    """Per-regime accuracies under the paired multi-trial design."""

    trials: int
    regimes: dict[str, list[float]] = field(default_factory=dict)

    def stats(self, regime: str) -> tuple[float, float]:
        acc = np.array(self.regimes[regime])
        std = float(np.std(acc, ddof=1)) if len(acc) > 1 else 0.0
        return float(np.mean(acc)), std

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "regimes": {
                name: {
                    "accuracies": list(map(float, vals)),
                    "mean": self.stats(name)[0],
                    "std": self.stats(name)[1],
                }
                for name, vals in self.regimes.items()
            },
        }


def comparison_protocol(
    train_ds: FullyLabeledDataset,
    test_ds: FullyLabeledDataset,
    model_factory: ModelFactory,
    train_cfg: TrainConfig,
    n_pairs: int,
    labels_per_class: int = 1,
    trials: int = 5,
    pairing: PairingConfig | None = None,
    regimes: tuple[str, ...] = ("full", "sampled", "online"),
) -> CompareResult:
    """Compare supervision regimes with shared per-trial seeds.

    * full:    joint training on every label in the training set.
    * sampled: two-stage training on n_pairs sampled pairs plus
               labels_per_class labeled examples per class.
    * online:  online two-stage training on the same labeled budget.
    """
    if pairing is None:
        pairing = PairingConfig(mode="sampled")
    result = CompareResult(trials=trials, regimes={name: [] for name in regimes})
    n_labels = labels_per_class * train_ds.class_count
    for trial in range(trials):
        seed = int(substream(train_cfg.seed, "compare", trial).integers(2**62))
        cfg = replace(train_cfg, seed=seed)
        labeled = stratified_subset(train_ds, n_labels, seed)
        for name in regimes:
            model = model_factory(seed)
            if name == "full":
                train_baseline_full(model, train_ds, cfg)
            elif name == "sampled":
                pairs = pair_sampled(
                    train_ds, replace(pairing, mode="sampled", n_pairs=n_pairs, seed=seed)
                )
                train_two_stage(model, pairs, labeled, cfg)
            elif name == "online":
                train_online(model, train_ds, labeled, cfg)
            else:
                raise ValueError(f"unknown regime {name!r}")
            result.regimes[name].append(accuracy(model, test_ds))
    return result
