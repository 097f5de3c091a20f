"""POI place and review collection over a grid of nearby-search queries.

Two interchangeable backends: a live HTTP backend keyed through the
PLACES_API_KEY environment variable, and a pure fixture backend reading
canned responses from a directory laid out as::

    fixtures/
      nearby/<center-hash>.json     # nearby-search response per query center
      details/<place_id>.json       # place-details response per place

The center hash is :func:`center_key` of the query coordinates.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import requests

METERS_PER_DEG_LAT = 111_320.0
MAX_REVIEWS_PER_PLACE = 5

PLACES_API_KEY_VAR = "PLACES_API_KEY"
DEFAULT_BASE_URL = "https://maps.googleapis.com/maps/api/place"


class IngestError(Exception):
    pass


class MissingApiKeyError(IngestError):
    def __init__(self) -> None:
        super().__init__(f"live backend needs an API key in ${PLACES_API_KEY_VAR}")


class TransportError(IngestError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class ResponseParseError(IngestError):
    def __init__(self, field: str, message: str):
        super().__init__(f"field {field!r}: {message}")
        self.field = field


class PlaceNotFoundError(IngestError):
    def __init__(self, place_id: str):
        super().__init__(f"unknown place_id {place_id!r}")
        self.place_id = place_id


@dataclass(frozen=True)
class Place:
    place_id: str
    name: str
    lat: float
    lon: float
    rating: float | None
    total_user_ratings: int

    def __post_init__(self) -> None:
        if not self.place_id:
            raise ValueError("place_id must be non-empty")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"coordinates out of range: ({self.lat}, {self.lon})")
        if self.rating is not None and not 1.0 <= self.rating <= 5.0:
            raise ValueError(f"rating {self.rating} outside [1.0, 5.0]")
        if self.total_user_ratings < 0:
            raise ValueError("total_user_ratings must be non-negative")

    def to_dict(self) -> dict:
        return {
            "place_id": self.place_id,
            "name": self.name,
            "lat": self.lat,
            "lon": self.lon,
            "rating": self.rating,
            "total_user_ratings": self.total_user_ratings,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Place":
        return cls(
            place_id=data["place_id"],
            name=data["name"],
            lat=data["lat"],
            lon=data["lon"],
            rating=data.get("rating"),
            total_user_ratings=data.get("total_user_ratings", 0),
        )


@dataclass(frozen=True)
class Review:
    place_id: str
    text: str
    author: str
    language: str
    rating: int
    timestamp: int
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("review text must be non-empty")
        if not 1 <= self.rating <= 5:
            raise ValueError(f"rating {self.rating} outside [1, 5]")
        if self.timestamp <= 0:
            raise ValueError("timestamp must be positive")

    def to_dict(self) -> dict:
        return {
            "place_id": self.place_id,
            "text": self.text,
            "author": self.author,
            "language": self.language,
            "rating": self.rating,
            "timestamp": self.timestamp,
            "lat": self.lat,
            "lon": self.lon,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Review":
        return cls(**{key: data[key] for key in (
            "place_id", "text", "author", "language", "rating", "timestamp", "lat", "lon"
        )})


@dataclass(frozen=True)
class QueryGrid:
    origin_lat: float
    origin_lon: float
    rows: int
    cols: int
    spacing_m: float
    radius_m: float
    category: str = "park"

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if self.spacing_m <= 0 or self.radius_m <= 0:
            raise ValueError("spacing_m and radius_m must be positive")
        if not -90.0 < self.origin_lat < 90.0 or not -180.0 <= self.origin_lon <= 180.0:
            raise ValueError("origin out of range")
        if not self.category:
            raise ValueError("category must be non-empty")


def plan_grid(grid: QueryGrid) -> list[tuple[float, float]]:
    """Row-major query centers on a local equirectangular grid.

    The grid is centered on the origin; rows run north to south and
    columns west to east, spaced ``spacing_m`` apart. Emits a coverage
    warning when query circles cannot cover the grid without gaps.
    """
    if grid.radius_m < grid.spacing_m / 2:
        warnings.warn(
            f"radius {grid.radius_m} m < spacing/2 = {grid.spacing_m / 2} m "
            "leaves coverage gaps between query circles",
            stacklevel=2,
        )
    lat_step = grid.spacing_m / METERS_PER_DEG_LAT
    lon_step = grid.spacing_m / (METERS_PER_DEG_LAT * math.cos(math.radians(grid.origin_lat)))
    centers = []
    for r in range(grid.rows):
        lat = grid.origin_lat + ((grid.rows - 1) / 2 - r) * lat_step
        for c in range(grid.cols):
            lon = grid.origin_lon + (c - (grid.cols - 1) / 2) * lon_step
            centers.append((lat, lon))
    return centers


def center_key(lat: float, lon: float) -> str:
    """Stable fixture-file key for a query center."""
    digest = hashlib.sha1(f"{lat:.6f},{lon:.6f}".encode("ascii")).hexdigest()
    return digest[:16]


class Backend(Protocol):
    def nearby(self, lat: float, lon: float, radius_m: float, category: str) -> list[dict]: ...

    def details(self, place_id: str) -> dict: ...


class FixtureBackend:
    """Reads canned API responses from disk; pure and reentrant."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise FileNotFoundError(f"fixture directory {self.root} does not exist")

    def nearby(self, lat: float, lon: float, radius_m: float, category: str) -> list[dict]:
        path = self.root / "nearby" / f"{center_key(lat, lon)}.json"
        if not path.exists():
            return []
        return json.loads(path.read_text(encoding="utf-8")).get("results", [])

    def details(self, place_id: str) -> dict:
        path = self.root / "details" / f"{place_id}.json"
        if not path.exists():
            raise PlaceNotFoundError(place_id)
        return json.loads(path.read_text(encoding="utf-8")).get("result", {})


class TokenBucket:
    """Simple request throttle: ``rate`` tokens per second, burst of ``rate``."""

    def __init__(self, rate: float, now=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = rate
        self.tokens = rate
        self._now = now
        self._sleep = sleep
        self._last = now()

    def acquire(self) -> None:
        while True:
            current = self._now()
            self.tokens = min(self.capacity, self.tokens + (current - self._last) * self.rate)
            self._last = current
            if self.tokens >= 1.0:
                self.tokens -= 1.0
                return
            self._sleep((1.0 - self.tokens) / self.rate)


class LiveBackend:
    """HTTP backend for the places API, rate limited and retrying."""

    def __init__(
        self,
        api_key: str | None = None,
        session: requests.Session | None = None,
        base_url: str = DEFAULT_BASE_URL,
        rate_per_s: float = 10.0,
        max_attempts: int = 3,
    ):
        self.api_key = api_key if api_key is not None else os.environ.get(PLACES_API_KEY_VAR)
        if not self.api_key:
            raise MissingApiKeyError()
        self.session = session or requests.Session()
        self.base_url = base_url.rstrip("/")
        self.bucket = TokenBucket(rate_per_s)
        self.max_attempts = max_attempts

    def _get(self, endpoint: str, params: dict) -> dict:
        params = dict(params, key=self.api_key)
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            self.bucket.acquire()
            try:
                response = self.session.get(f"{self.base_url}/{endpoint}/json", params=params)
                response.raise_for_status()
                payload = response.json()
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                continue
            status = payload.get("status", "OK")
            if status in ("OK", "ZERO_RESULTS"):
                return payload
            last_error = IngestError(f"API status {status}")
        raise TransportError(str(last_error), attempts=self.max_attempts)

    def nearby(self, lat: float, lon: float, radius_m: float, category: str) -> list[dict]:
        payload = self._get(
            "nearbysearch",
            {"location": f"{lat},{lon}", "radius": int(radius_m), "type": category},
        )
        return payload.get("results", [])

    def details(self, place_id: str) -> dict:
        payload = self._get("details", {"place_id": place_id, "fields": "reviews"})
        if payload.get("status") == "ZERO_RESULTS":
            raise PlaceNotFoundError(place_id)
        return payload.get("result", {})


def _require(raw: dict, field: str):
    if field not in raw or raw[field] in (None, ""):
        raise ResponseParseError(field, "missing or empty")
    return raw[field]


def parse_place(raw: dict) -> Place:
    place_id = _require(raw, "place_id")
    name = _require(raw, "name")
    geometry = _require(raw, "geometry")
    location = geometry.get("location") or {}
    if "lat" not in location or "lng" not in location:
        raise ResponseParseError("geometry.location", "missing lat/lng")
    try:
        return Place(
            place_id=str(place_id),
            name=str(name),
            lat=float(location["lat"]),
            lon=float(location["lng"]),
            rating=None if raw.get("rating") is None else float(raw["rating"]),
            total_user_ratings=int(raw.get("user_ratings_total", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ResponseParseError("place", str(exc)) from exc


def parse_review(raw: dict, place: Place) -> Review:
    text = _require(raw, "text")
    try:
        return Review(
            place_id=place.place_id,
            text=str(text),
            author=str(raw.get("author_name", "")),
            language=str(raw.get("language", "und")),
            rating=int(_require(raw, "rating")),
            timestamp=int(_require(raw, "time")),
            lat=place.lat,
            lon=place.lon,
        )
    except (TypeError, ValueError) as exc:
        raise ResponseParseError("review", str(exc)) from exc


def _merge_places(existing: Place | None, candidate: Place) -> Place:
    if existing is None or candidate.total_user_ratings > existing.total_user_ratings:
        return candidate
    return existing


def nearby_search(
    center: tuple[float, float], radius_m: float, category: str, backend: Backend
) -> list[Place]:
    """Places around one query center, deduplicated on place_id."""
    lat, lon = center
    merged: dict[str, Place] = {}
    order: list[str] = []
    for raw in backend.nearby(lat, lon, radius_m, category):
        place = parse_place(raw)
        if place.place_id not in merged:
            order.append(place.place_id)
        merged[place.place_id] = _merge_places(merged.get(place.place_id), place)
    return [merged[place_id] for place_id in order]


def fetch_reviews(place: Place, backend: Backend) -> list[Review]:
    """Up to the top five reviews of a place, stamped with its location."""
    detail = backend.details(place.place_id)
    raws = detail.get("reviews", [])
    return [parse_review(raw, place) for raw in raws[:MAX_REVIEWS_PER_PLACE]]


def collect(grid: QueryGrid, backend: Backend) -> tuple[list[Place], list[Review]]:
    """Full collection run: grid search, dedup, then per-place reviews.

    Places repeated across overlapping query circles are merged keeping
    the larger total_user_ratings; output is sorted by place_id so runs
    are deterministic regardless of request ordering.
    """
    merged: dict[str, Place] = {}
    for center in plan_grid(grid):
        for place in nearby_search(center, grid.radius_m, grid.category, backend):
            merged[place.place_id] = _merge_places(merged.get(place.place_id), place)
    places = [merged[place_id] for place_id in sorted(merged)]
    reviews = []
    for place in places:
        reviews.extend(fetch_reviews(place, backend))
    return places, reviews


def _dump_jsonl(items: Iterable[dict], path: str | Path) -> None:
    lines = [json.dumps(item, ensure_ascii=False, sort_keys=True) for item in items]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_places(places: Sequence[Place], path: str | Path) -> None:
    _dump_jsonl((place.to_dict() for place in places), path)


def write_reviews(reviews: Sequence[Review], path: str | Path) -> None:
    _dump_jsonl((review.to_dict() for review in reviews), path)


def read_places(path: str | Path) -> list[Place]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [Place.from_dict(json.loads(line)) for line in lines if line.strip()]


def read_reviews(path: str | Path) -> list[Review]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [Review.from_dict(json.loads(line)) for line in lines if line.strip()]
