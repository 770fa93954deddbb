"""Stimulus universe: feature spaces, object natures, input encodings, schedules.

An object nature is one feature per characteristic.  Input neurons fire as
Bernoulli processes whose probability depends only on the nature shown, so an
``Encoding`` is a fixed (neuron, nature) -> probability table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "FeatureSpace",
    "ObjectNature",
    "Encoding",
    "Schedule",
    "StimulusSet",
    "build_concrete_example",
    "class_map",
    "make_schedule",
    "stimulus_to_json",
    "stimulus_from_json",
]

SCHEDULE_MODES = ("epoch-shuffle", "iid-replacement", "explicit")

# Display names used for the two-characteristic reference task; larger spaces
# fall back to generic "f{k}_{l}" ids.
_REFERENCE_NAMES = (
    ("Circle", "Square", "Triangle"),
    ("Blue", "Gray", "Red"),
)


@dataclass(frozen=True)
class FeatureSpace:
    """``characteristics`` traits, each taking one of ``features_per_characteristic`` values."""

    characteristics: int
    features_per_characteristic: int
    feature_names: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        c, n = self.characteristics, self.features_per_characteristic
        if c < 1 or n < 1:
            raise ValueError(f"feature space needs c >= 1 and n >= 1, got c={c}, n={n}")
        names = self.feature_names
        if not names:
            if c <= len(_REFERENCE_NAMES) and n <= min(len(r) for r in _REFERENCE_NAMES[:c]):
                names = tuple(r[:n] for r in _REFERENCE_NAMES[:c])
            else:
                names = tuple(tuple(f"f{k + 1}_{l + 1}" for l in range(n)) for k in range(c))
            object.__setattr__(self, "feature_names", names)
        if len(names) != c or any(len(row) != n for row in names):
            raise ValueError("feature_names must have one row of n names per characteristic")
        flat = [x for row in names for x in row]
        if len(set(flat)) != len(flat):
            raise ValueError("feature names must be unique across characteristics")

    @property
    def n_natures(self) -> int:
        return self.features_per_characteristic**self.characteristics

    def feature_name(self, k: int, l: int) -> str:
        """Name of feature value ``l`` of characteristic ``k`` (0-based)."""
        return self.feature_names[k][l]

    def all_natures(self, classify) -> tuple["ObjectNature", ...]:
        """Enumerate every nature, labelling each with ``classify(features)``."""
        c, n = self.characteristics, self.features_per_characteristic
        natures = []
        for flat in range(self.n_natures):
            feats = []
            rem = flat
            for _ in range(c):
                feats.append(rem % n)
                rem //= n
            feats = tuple(feats)
            label = "-".join(self.feature_name(k, l) for k, l in enumerate(feats))
            natures.append(ObjectNature(label, feats, classify(feats)))
        return tuple(natures)


@dataclass(frozen=True)
class ObjectNature:
    """One concrete object kind: a feature per characteristic plus its class."""

    label: str
    features: tuple[int, ...]
    class_label: str


@dataclass(frozen=True, eq=False)
class Encoding:
    """Firing probability of each input neuron for each object nature.

    ``table[i, o]`` is the Bernoulli parameter of neuron ``neurons[i]`` while
    ``natures[o]`` is on display; it never depends on the round index.
    """

    neurons: tuple[str, ...]
    natures: tuple[ObjectNature, ...]
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.shape != (len(self.neurons), len(self.natures)):
            raise ValueError(
                f"encoding table shape {table.shape} does not match "
                f"{len(self.neurons)} neurons x {len(self.natures)} natures"
            )
        if np.any(table < 0.0) or np.any(table > 1.0):
            raise ValueError("firing probabilities must lie in [0, 1]")
        table.flags.writeable = False
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "neurons", tuple(self.neurons))
        object.__setattr__(self, "natures", tuple(self.natures))
        object.__setattr__(
            self, "_nature_index", {o.label: i for i, o in enumerate(self.natures)}
        )
        if len(self._nature_index) != len(self.natures):
            raise ValueError("nature labels must be unique")

    def nature_index(self, label: str) -> int:
        return self._nature_index[label]

    def rate(self, neuron: str, nature_label: str) -> float:
        return float(self.table[self.neurons.index(neuron), self.nature_index(nature_label)])

    def rates_for(self, nature_label: str) -> np.ndarray:
        """Column of firing probabilities for one nature."""
        return self.table[:, self.nature_index(nature_label)].copy()

    @property
    def classes(self) -> dict[str, tuple[str, ...]]:
        return class_map(self.natures)


def class_map(natures: Sequence[ObjectNature]) -> dict[str, tuple[str, ...]]:
    """Class label -> tuple of nature labels, classes in sorted order."""
    out: dict[str, list[str]] = {}
    for o in natures:
        out.setdefault(o.class_label, []).append(o.label)
    return {c: tuple(out[c]) for c in sorted(out)}


@dataclass(frozen=True, eq=False)
class StimulusSet:
    """A feature space, its natures/classes, and the input encoding for one variant."""

    space: FeatureSpace
    classes: dict[str, tuple[str, ...]]
    encoding: Encoding
    variant: str
    p: float
    q: float
    ablated: tuple[str, ...] = ()

    @property
    def natures(self) -> tuple[ObjectNature, ...]:
        return self.encoding.natures

    def ablate(self, feature_names: Iterable[str]) -> "StimulusSet":
        """Remove the detectors of the given features (both presence and absence)."""
        gone = set(feature_names)
        all_names = {x for row in self.space.feature_names for x in row}
        unknown = gone - all_names
        if unknown:
            raise ValueError(f"unknown features to ablate: {sorted(unknown)}")
        keep = [
            i
            for i, name in enumerate(self.encoding.neurons)
            if _detected_feature(name) not in gone
        ]
        if not keep:
            raise ValueError("ablation would remove every input neuron")
        enc = Encoding(
            tuple(self.encoding.neurons[i] for i in keep),
            self.encoding.natures,
            self.encoding.table[keep, :],
        )
        return StimulusSet(
            self.space, self.classes, enc, self.variant, self.p, self.q,
            tuple(sorted(set(self.ablated) | gone)),
        )


def _absence_name(feature: str) -> str:
    return f"no_{feature}"


def _detected_feature(neuron: str) -> str:
    return neuron[3:] if neuron.startswith("no_") else neuron


def build_concrete_example(
    c: int,
    n: int,
    p: float,
    q: float,
    variant: str,
    *,
    feature_names: tuple[tuple[str, ...], ...] = (),
) -> StimulusSet:
    """Build the one-exception classification task.

    Class ``B`` holds the single nature made of the first feature of every
    characteristic; class ``A`` holds the remaining ``n**c - 1`` natures.  The
    ``"han"`` variant has one presence detector per feature firing with
    probability ``p``; the ``"solo"`` variant adds one absence detector per
    feature firing with probability ``q`` when the feature is missing.
    """
    if not (0.0 < p < 1.0) or not (0.0 < q < 1.0):
        raise ValueError(f"p and q must lie in (0, 1), got p={p}, q={q}")
    variant = variant.lower()
    if variant not in ("han", "solo"):
        raise ValueError(f"variant must be 'han' or 'solo', got {variant!r}")
    space = FeatureSpace(c, n, feature_names)
    if space.n_natures < 2:
        raise ValueError("need at least two natures to form an exception class")

    natures = space.all_natures(lambda feats: "B" if all(l == 0 for l in feats) else "A")

    neurons: list[str] = []
    rows: list[np.ndarray] = []
    for k in range(c):
        for l in range(n):
            name = space.feature_name(k, l)
            neurons.append(name)
            rows.append(np.array([p if o.features[k] == l else 0.0 for o in natures]))
    if variant == "solo":
        for k in range(c):
            for l in range(n):
                name = _absence_name(space.feature_name(k, l))
                neurons.append(name)
                rows.append(np.array([q if o.features[k] != l else 0.0 for o in natures]))

    enc = Encoding(tuple(neurons), natures, np.vstack(rows))
    return StimulusSet(space, class_map(natures), enc, variant, p, q)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Presentation order of natures over the learning phase."""

    natures: tuple[ObjectNature, ...]
    order: np.ndarray  # (M,) indices into natures
    mode: str
    seed: int | None = None

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        if order.ndim != 1:
            raise ValueError("schedule order must be a 1-d index sequence")
        if order.size and (order.min() < 0 or order.max() >= len(self.natures)):
            raise ValueError("schedule order indexes outside the nature list")
        order.flags.writeable = False
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "natures", tuple(self.natures))

    @property
    def n_rounds(self) -> int:
        return int(self.order.size)

    @property
    def class_labels(self) -> tuple[str, ...]:
        return tuple(sorted({o.class_label for o in self.natures}))

    @property
    def class_counts(self) -> dict[str, int]:
        """Rounds per class over the whole schedule."""
        counts = dict.fromkeys(self.class_labels, 0)
        labels = [self.natures[i].class_label for i in self.order]
        for lab in labels:
            counts[lab] += 1
        return counts

    @property
    def xi(self) -> float | None:
        """Smallest class share min_j M^j / M; None for an empty schedule."""
        if self.n_rounds == 0:
            return None
        return min(self.class_counts.values()) / self.n_rounds

    @property
    def n_epochs(self) -> int | None:
        if self.mode != "epoch-shuffle":
            return None
        return self.n_rounds // len(self.natures)

    def class_index_per_round(self) -> np.ndarray:
        """Class index (position in ``class_labels``) of each round."""
        lut = {lab: i for i, lab in enumerate(self.class_labels)}
        per_nature = np.array([lut[o.class_label] for o in self.natures], dtype=np.int64)
        return per_nature[self.order]


def make_schedule(
    natures: Sequence[ObjectNature],
    n_rounds: int,
    mode: str = "epoch-shuffle",
    seed: int | None = None,
    order: Sequence[int] | None = None,
) -> Schedule:
    """Draw a presentation schedule, reproducibly for a given seed.

    Modes: ``epoch-shuffle`` concatenates independent permutations of all
    natures (requires the nature count to divide ``n_rounds``);
    ``iid-replacement`` draws natures independently and uniformly;
    ``explicit`` takes ``order`` verbatim.
    """
    if mode not in SCHEDULE_MODES:
        raise ValueError(f"unknown schedule mode {mode!r}; expected one of {SCHEDULE_MODES}")
    if n_rounds < 0:
        raise ValueError("n_rounds must be nonnegative")
    natures = tuple(natures)
    if not natures:
        raise ValueError("schedule needs at least one nature")

    if mode == "explicit":
        if order is None:
            raise ValueError("explicit mode requires an order sequence")
        return Schedule(natures, np.asarray(order, dtype=np.int64), mode, seed)

    rng = np.random.default_rng(seed)
    n = len(natures)
    if mode == "epoch-shuffle":
        if n_rounds % n != 0:
            raise ValueError(
                f"epoch-shuffle needs the nature count ({n}) to divide n_rounds ({n_rounds})"
            )
        chunks = [rng.permutation(n) for _ in range(n_rounds // n)]
        idx = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
    else:  # iid-replacement
        idx = rng.integers(0, n, size=n_rounds)
    return Schedule(natures, idx, mode, seed)


def stimulus_to_json(stimuli: StimulusSet) -> str:
    """Serialize a stimulus set so harness configs can embed custom universes."""
    doc = {
        "characteristics": stimuli.space.characteristics,
        "features_per_characteristic": stimuli.space.features_per_characteristic,
        "features": [list(row) for row in stimuli.space.feature_names],
        "variant": stimuli.variant,
        "p": stimuli.p,
        "q": stimuli.q,
        "ablated": list(stimuli.ablated),
        "classes": {c: list(v) for c, v in stimuli.classes.items()},
        "natures": [
            {"label": o.label, "features": list(o.features), "class": o.class_label}
            for o in stimuli.natures
        ],
        "neurons": list(stimuli.encoding.neurons),
        "probabilities": stimuli.encoding.table.tolist(),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def stimulus_from_json(text: str) -> StimulusSet:
    doc = json.loads(text)
    space = FeatureSpace(
        doc["characteristics"],
        doc["features_per_characteristic"],
        tuple(tuple(row) for row in doc["features"]),
    )
    natures = tuple(
        ObjectNature(o["label"], tuple(o["features"]), o["class"]) for o in doc["natures"]
    )
    enc = Encoding(tuple(doc["neurons"]), natures, np.asarray(doc["probabilities"]))
    return StimulusSet(
        space,
        {c: tuple(v) for c, v in doc["classes"].items()},
        enc,
        doc["variant"],
        doc["p"],
        doc["q"],
        tuple(doc.get("ablated", ())),
    )
