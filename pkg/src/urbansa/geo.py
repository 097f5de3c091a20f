"""Geospatial aggregation of per-aspect sentiment over located reviews."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import Polarity


@dataclass(frozen=True)
class GeoAspectRecord:
    """One extracted aspect occurrence tied to a review's location."""

    aspect: str
    polarity: Polarity
    lat: float
    lon: float
    place_id: str
    timestamp: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "aspect", self.aspect.lower())
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"coordinates out of range: ({self.lat}, {self.lon})")


@dataclass(frozen=True)
class FrequencyTable:
    polarity: Polarity
    entries: tuple[tuple[str, int], ...]  # (aspect, count), count descending

    def __post_init__(self) -> None:
        counts = [count for _, count in self.entries]
        if any(count <= 0 for count in counts):
            raise ValueError("counts must be positive")
        if any(a > b for a, b in zip(counts[1:], counts)):
            raise ValueError("entries must be sorted by descending count")

    @property
    def total(self) -> int:
        return sum(count for _, count in self.entries)


@dataclass(frozen=True)
class SpatialBin:
    """A lat/lon grid cell with per-polarity aspect counts."""

    cell_x: int  # floor(lon / cell_size)
    cell_y: int  # floor(lat / cell_size)
    cell_size_deg: float
    counts: Mapping[Polarity, Mapping[str, int]]

    @property
    def west(self) -> float:
        return self.cell_x * self.cell_size_deg

    @property
    def south(self) -> float:
        return self.cell_y * self.cell_size_deg

    def polarity_total(self, polarity: Polarity) -> int:
        return sum(self.counts.get(polarity, {}).values())

    @property
    def total(self) -> int:
        return sum(self.polarity_total(polarity) for polarity in Polarity)


def aggregate_frequency(
    records: Iterable[GeoAspectRecord], polarity: Polarity, k: int
) -> FrequencyTable:
    """Top-k aspect counts for one polarity; ties break lexicographically."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts: dict[str, int] = {}
    for record in records:
        if record.polarity is polarity:
            counts[record.aspect] = counts.get(record.aspect, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return FrequencyTable(polarity, tuple(ranked[:k]))


def bin_spatial(records: Iterable[GeoAspectRecord], cell_size_deg: float) -> list[SpatialBin]:
    """Assign each record to one grid cell by coordinate floor-division.

    A record exactly on a cell boundary lands in the higher-index cell.
    Bins are returned sorted by (cell_y, cell_x).
    """
    if cell_size_deg <= 0:
        raise ValueError("cell_size_deg must be positive")
    cells: dict[tuple[int, int], dict[Polarity, dict[str, int]]] = {}
    for record in records:
        key = (
            math.floor(record.lon / cell_size_deg),
            math.floor(record.lat / cell_size_deg),
        )
        per_polarity = cells.setdefault(key, {})
        aspect_counts = per_polarity.setdefault(record.polarity, {})
        aspect_counts[record.aspect] = aspect_counts.get(record.aspect, 0) + 1
    return [
        SpatialBin(cell_x=x, cell_y=y, cell_size_deg=cell_size_deg, counts=cells[(x, y)])
        for x, y in sorted(cells, key=lambda key: (key[1], key[0]))
    ]


def export_geojson(
    records: Sequence[GeoAspectRecord] | None = None,
    bins: Sequence[SpatialBin] | None = None,
) -> str:
    """FeatureCollection text: Point features per record or Polygon per bin.

    Coordinates follow the (lon, lat) GeoJSON convention.
    """
    if (records is None) == (bins is None):
        raise ValueError("pass exactly one of records or bins")
    features = []
    if records is not None:
        for record in records:
            features.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "Point",
                        "coordinates": [record.lon, record.lat],
                    },
                    "properties": {
                        "aspect": record.aspect,
                        "polarity": record.polarity.value,
                        "place_id": record.place_id,
                    },
                }
            )
    else:
        for cell in bins:
            west, south = cell.west, cell.south
            east = west + cell.cell_size_deg
            north = south + cell.cell_size_deg
            ring = [
                [west, south],
                [east, south],
                [east, north],
                [west, north],
                [west, south],
            ]
            properties = {
                polarity.value: cell.polarity_total(polarity) for polarity in Polarity
            }
            properties["total"] = cell.total
            properties["cell_x"] = cell.cell_x
            properties["cell_y"] = cell.cell_y
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                    "properties": properties,
                }
            )
    collection = {"type": "FeatureCollection", "features": features}
    return json.dumps(collection, ensure_ascii=False, sort_keys=True) + "\n"


def frequency_csv(tables: Sequence[FrequencyTable]) -> str:
    """CSV text with a header row and polarity,aspect,count columns."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["polarity", "aspect", "count"])
    for table in tables:
        for aspect, count in table.entries:
            writer.writerow([table.polarity.value, aspect, count])
    return out.getvalue()
