import json
from pathlib import Path

import pytest

from urbansa.ingest import QueryGrid, center_key, plan_grid

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def sample_apc_text() -> str:
    return (DATA_DIR / "sample.apc.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def sample_atepc_text() -> str:
    return (DATA_DIR / "sample.atepc.txt").read_text(encoding="utf-8")


def make_fixture_dir(
    root: Path,
    grid: QueryGrid,
    places_per_center: dict[int, list[dict]],
    reviews_per_place: dict[str, list[dict]],
) -> Path:
    """Lay out a fixture backend directory for the given grid.

    places_per_center maps a center index (row-major) to raw place dicts;
    reviews_per_place maps place_id to raw review dicts.
    """
    (root / "nearby").mkdir(parents=True, exist_ok=True)
    (root / "details").mkdir(parents=True, exist_ok=True)
    centers = plan_grid(grid)
    for index, places in places_per_center.items():
        lat, lon = centers[index]
        payload = {"results": places}
        (root / "nearby" / f"{center_key(lat, lon)}.json").write_text(
            json.dumps(payload), encoding="utf-8"
        )
    for place_id, reviews in reviews_per_place.items():
        payload = {"result": {"reviews": reviews}}
        (root / "details" / f"{place_id}.json").write_text(json.dumps(payload), encoding="utf-8")
    return root


def raw_place(place_id: str, lat: float = 42.36, lon: float = -71.06, ratings: int = 10) -> dict:
    return {
        "place_id": place_id,
        "name": f"Park {place_id}",
        "geometry": {"location": {"lat": lat, "lng": lon}},
        "rating": 4.2,
        "user_ratings_total": ratings,
    }


def raw_review(text: str, timestamp: int = 1_700_000_000, rating: int = 4) -> dict:
    return {
        "text": text,
        "author_name": "reviewer",
        "language": "en",
        "rating": rating,
        "time": timestamp,
    }
