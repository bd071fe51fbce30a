"""Scholar-annotated class points and the design matrix built from them.

Annotation files are plain CSV so they stay hand-editable: one
``class_name,x,y`` line per point, ``#`` comments, and ``#class:<name>``
directives that declare a class before (or without) any points. The parser
and serializer are exact inverses on (classes, points).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UndertextWarning
from .stack import SpectralStack

CANONICAL_CLASSES = ("overwriting", "underwriting", "parchment", "both", "outside")

HEADER_LINE = "class,x,y"


@dataclass(frozen=True)
class ClassLabel:
    name: str
    id: int

    def __post_init__(self):
        if not self.name:
            raise DataError("class name must be non-empty")


@dataclass(frozen=True)
class AnnotatedPoint:
    x: int
    y: int
    label: ClassLabel


@dataclass(frozen=True)
class TrainingSet:
    """Annotated points grouped by named classes, in declaration order.

    ``provenance`` keeps reproducibility comments (manifest hash, crop rect)
    carried through serialization; it does not affect identity.
    """

    classes: tuple[ClassLabel, ...]
    points: tuple[AnnotatedPoint, ...]
    provenance: dict = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        by_name = {c.name: 0 for c in self.classes}
        for p in self.points:
            by_name[p.label.name] += 1
        return by_name

    def class_by_name(self, name: str) -> ClassLabel:
        for c in self.classes:
            if c.name == name:
                return c
        raise DataError(f"training set has no class {name!r}")

    def points_for(self, name: str) -> list[AnnotatedPoint]:
        return [p for p in self.points if p.label.name == name]


@dataclass(frozen=True)
class DesignMatrix:
    """B x N spectral matrix: column j is the spectral vector of point j.

    ``labels[j]`` is the class id of point j; ``class_names`` maps ids to
    names in declaration order.
    """

    values: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DataError("design matrix must be 2-D (bands x points)")
        if self.values.shape[1] != self.labels.shape[0]:
            raise DataError(
                f"{self.values.shape[1]} columns vs {self.labels.shape[0]} labels"
            )
        self.values.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def band_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def point_count(self) -> int:
        return int(self.values.shape[1])

    def class_counts(self) -> dict[str, int]:
        return {
            name: int(np.sum(self.labels == cid))
            for cid, name in enumerate(self.class_names)
        }


def parse_annotations(text: str) -> TrainingSet:
    """Parse annotation file contents into a TrainingSet.

    Classes appear in first-appearance order (a ``#class:`` directive counts
    as an appearance). Duplicate (class, x, y) triples collapse with a
    warning. Malformed lines, negative coordinates, and empty files raise
    DataError naming the offending line.
    """
    classes: list[ClassLabel] = []
    by_name: dict[str, ClassLabel] = {}
    points: list[AnnotatedPoint] = []
    seen: set[tuple[str, int, int]] = set()
    provenance: dict[str, str] = {}

    def declare(name: str) -> ClassLabel:
        if name not in by_name:
            label = ClassLabel(name, len(classes))
            classes.append(label)
            by_name[name] = label
        return by_name[name]

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("class:"):
                name = body[len("class:") :].strip()
                if not name:
                    raise DataError(f"line {lineno}: empty #class: directive")
                declare(name)
            elif ":" in body:
                key, _, value = body.partition(":")
                provenance.setdefault(key.strip(), value.strip())
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise DataError(
                f"line {lineno}: expected 'class,x,y', got {raw!r}"
            )
        if [p.lower() for p in parts] == ["class", "x", "y"]:
            continue  # optional header
        name, xs, ys = parts
        if not name:
            raise DataError(f"line {lineno}: empty class name")
        try:
            x, y = int(xs), int(ys)
        except ValueError:
            raise DataError(
                f"line {lineno}: coordinates must be integers, got {raw!r}"
            ) from None
        if x < 0 or y < 0:
            raise DataError(f"line {lineno}: negative coordinate in {raw!r}")
        key = (name, x, y)
        if key in seen:
            warnings.warn(
                f"line {lineno}: duplicate point {key} collapsed",
                UndertextWarning,
                stacklevel=2,
            )
            continue
        seen.add(key)
        points.append(AnnotatedPoint(x, y, declare(name)))

    if not classes:
        raise DataError("annotation file declares no classes and no points")
    return TrainingSet(tuple(classes), tuple(points), provenance)


def serialize_annotations(ts: TrainingSet) -> str:
    """Emit the CSV form read by :func:`parse_annotations`.

    Declared-but-empty classes survive as ``#class:`` directives; provenance
    entries become ``# key: value`` comments. parse(serialize(ts))
    reproduces ts exactly.
    """
    lines = [HEADER_LINE]
    for key, value in ts.provenance.items():
        lines.insert(0, f"# {key}: {value}")
    counted = ts.counts()
    for c in ts.classes:
        if counted[c.name] == 0:
            lines.append(f"#class:{c.name}")
    for p in ts.points:
        lines.append(f"{p.label.name},{p.x},{p.y}")
    return "\n".join(lines) + "\n"


def assemble_matrix(stack: SpectralStack, ts: TrainingSet) -> DesignMatrix:
    """Sample the stack at every annotated point, in point order.

    Requires a normalized stack (projection models are fitted on the 0-255
    values every other pipeline stage consumes) and in-bounds points.
    """
    if not stack.normalized:
        raise DataError("assemble_matrix requires a normalized stack")
    if not ts.points:
        raise DataError("training set has no points")
    values = np.empty((stack.band_count, len(ts.points)), dtype=np.float64)
    labels = np.empty(len(ts.points), dtype=np.intp)
    for j, p in enumerate(ts.points):
        if not (0 <= p.x < stack.width and 0 <= p.y < stack.height):
            raise DataError(
                f"point ({p.x}, {p.y}) of class {p.label.name!r} outside "
                f"{stack.width}x{stack.height} stack"
            )
        values[:, j] = stack.planes[:, p.y, p.x]
        labels[j] = p.label.id
    return DesignMatrix(values, labels, tuple(c.name for c in ts.classes))
