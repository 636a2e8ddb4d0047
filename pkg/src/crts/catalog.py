"""Vehicle model catalog and footprint matching.

Replayed vehicles are assigned the catalog model whose footprint best
matches the recorded dimensions, scored by the Jaccard similarity of the
two center-aligned axis-aligned rectangles.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, FormatError


@dataclass(frozen=True)
class VehicleModel:
    name: str
    length: float
    width: float


# Generic body styles spanning the common footprint range (meters).
DEFAULT_CATALOG: tuple[VehicleModel, ...] = (
    VehicleModel("compact_hatch", 3.83, 1.67),
    VehicleModel("city_car", 3.60, 1.65),
    VehicleModel("sedan", 4.70, 1.85),
    VehicleModel("compact_sedan", 4.35, 1.78),
    VehicleModel("coupe", 4.45, 1.85),
    VehicleModel("suv", 4.90, 1.95),
    VehicleModel("crossover", 4.40, 1.82),
    VehicleModel("van", 5.00, 1.95),
    VehicleModel("pickup", 5.30, 2.00),
    VehicleModel("box_truck", 7.20, 2.35),
    VehicleModel("semi_tractor", 16.0, 2.55),
    VehicleModel("motorcycle", 2.20, 0.80),
)


def footprint_jaccard(
    length_a: float, width_a: float, length_b: float, width_b: float
) -> float:
    """Jaccard similarity of two center-aligned axis-aligned footprints."""
    inter = min(length_a, length_b) * min(width_a, width_b)
    union = length_a * width_a + length_b * width_b - inter
    return inter / union


def match_vehicle_model(
    dims: tuple[float, float], catalog: tuple[VehicleModel, ...] = DEFAULT_CATALOG
) -> VehicleModel:
    """Best-matching catalog entry; ties break by catalog order."""
    length, width = dims
    if length <= 0 or width <= 0:
        raise DataError(f"non-positive vehicle dimensions ({length}, {width})")
    if not catalog:
        raise DataError("empty vehicle catalog")
    best = catalog[0]
    best_j = footprint_jaccard(length, width, best.length, best.width)
    for entry in catalog[1:]:
        j = footprint_jaccard(length, width, entry.length, entry.width)
        if j > best_j:
            best, best_j = entry, j
    return best


def read_catalog(path: str | Path) -> tuple[VehicleModel, ...]:
    """Catalog file: one ``name length width`` per line, '#' comments."""
    entries = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"{path}:{line_no}: expected 'name length width'")
        entries.append(VehicleModel(parts[0], float(parts[1]), float(parts[2])))
    if not entries:
        raise FormatError(f"{path}: empty catalog")
    return tuple(entries)


def write_catalog(catalog: tuple[VehicleModel, ...], path: str | Path) -> None:
    lines = [f"{m.name} {m.length} {m.width}" for m in catalog]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
