"""
Object height priors: a fixed class height or a per-instance dimension table
filled by an external dimension estimator.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Union

from src.errors import MissingPriorError, ParseError, ValidationError
from src.models.scene import ObjectInstance

# Sanity bound on any prior height, meters.
MAX_HEIGHT = 10.0
# Fixed car height prior.
DEFAULT_CAR_HEIGHT = 1.59

TABLE_HEADER = ("id", "height_m", "width_m", "length_m")


def _check_height(height: float, what: str):
    if not (math.isfinite(height) and 0 < height < MAX_HEIGHT):
        raise ValidationError(f"{what} must lie in (0, {MAX_HEIGHT}) m, got {height}")


@dataclass(frozen=True)
class Dimensions:
    """Object dimensions in meters."""

    height: float
    width: float
    length: float


@dataclass(frozen=True)
class FixedHeightPrior:
    """The same height for every object."""

    height: float = DEFAULT_CAR_HEIGHT

    def __post_init__(self):
        _check_height(self.height, "Fixed prior height")

    def height_for(self, instance: ObjectInstance) -> float:
        return self.height


@dataclass(frozen=True)
class DimensionTablePrior:
    """Per-instance dimensions keyed by instance id, with an optional fallback height."""

    dimensions: Mapping[int, Dimensions] = field(default_factory=dict)
    fallback: Optional[float] = None

    def __post_init__(self):
        for instance_id, dims in self.dimensions.items():
            _check_height(dims.height, f"Height of instance {instance_id}")
        if self.fallback is not None:
            _check_height(self.fallback, "Fallback height")

    def height_for(self, instance: ObjectInstance) -> float:
        dims = self.dimensions.get(instance.id)
        if dims is not None:
            return dims.height
        if self.fallback is not None:
            return self.fallback
        raise MissingPriorError(f"No dimensions for instance {instance.id} and no fallback height")


PriorSource = Union[FixedHeightPrior, DimensionTablePrior]


def prior_height(source: PriorSource, instance: ObjectInstance) -> float:
    """Prior height H_obj of one instance."""
    return source.height_for(instance)


def load_dimension_table(path: str, fallback: Optional[float] = None) -> DimensionTablePrior:
    """Parse an `id,height_m,width_m,length_m` CSV into a dimension-table prior."""
    dimensions: Dict[int, Dimensions] = {}
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(name.strip() for name in header) != TABLE_HEADER:
                raise ParseError(f"expected header {','.join(TABLE_HEADER)}", line=1, path=path)

            for row in reader:
                line = reader.line_num
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != len(TABLE_HEADER):
                    raise ParseError(f"expected {len(TABLE_HEADER)} fields, got {len(row)}", line=line, path=path)
                try:
                    instance_id = int(row[0])
                    height, width, length = (float(cell) for cell in row[1:])
                except ValueError:
                    raise ParseError(f"malformed row {','.join(row)}", line=line, path=path)

                if instance_id in dimensions:
                    raise ParseError(f"duplicate id {instance_id}", line=line, path=path)
                try:
                    _check_height(height, f"Height of instance {instance_id}")
                except ValidationError as e:
                    raise ValidationError(f"{path}:line {line}: {e}")
                dimensions[instance_id] = Dimensions(height, width, length)
    except FileNotFoundError:
        raise ParseError("file not found", path=path)

    return DimensionTablePrior(dimensions=dimensions, fallback=fallback)


def write_dimension_table(path: str, dimensions: Mapping[int, Dimensions]):
    """Write a dimension table in the format `load_dimension_table` reads."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TABLE_HEADER)
        for instance_id in sorted(dimensions):
            dims = dimensions[instance_id]
            writer.writerow([instance_id, repr(dims.height), repr(dims.width), repr(dims.length)])


def dimension_errors(
    predicted: Mapping[int, Dimensions],
    reference: Mapping[int, Dimensions],
    fixed_height: float = DEFAULT_CAR_HEIGHT,
) -> Dict[str, float]:
    """Mean absolute relative error per dimension over instances present in both tables.

    Also reports the height error a fixed-height prior would make on the same
    instances, as a baseline.
    """
    common = sorted(set(predicted) & set(reference))
    if not common:
        raise ValidationError("No instance id is shared by the predicted and reference tables")

    def abs_rel(estimate: float, truth: float) -> float:
        return abs(estimate - truth) / truth

    count = len(common)
    return {
        "count": float(count),
        "height": sum(abs_rel(predicted[i].height, reference[i].height) for i in common) / count,
        "width": sum(abs_rel(predicted[i].width, reference[i].width) for i in common) / count,
        "length": sum(abs_rel(predicted[i].length, reference[i].length) for i in common) / count,
        "fixed_height": sum(abs_rel(fixed_height, reference[i].height) for i in common) / count,
    }
