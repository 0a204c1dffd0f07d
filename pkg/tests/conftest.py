from __future__ import annotations

import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("suite")

from transitepi.ingest import StopRef, TripRecord


def planar_stop(stop_id: str, x: float, y: float) -> StopRef:
    """Stop whose lat/lon are plain planar metres (use with the planar model)."""
    return StopRef(stop_id, x, y)


def trip(
    card: str,
    vehicle: str,
    board: float,
    alight: float,
    board_stop: StopRef | None = None,
    alight_stop: StopRef | None = None,
) -> TripRecord:
    return TripRecord(
        card_id=card,
        vehicle_id=vehicle,
        board_time=board,
        alight_time=alight,
        board_stop=board_stop or planar_stop("sA", 0.0, 0.0),
        alight_stop=alight_stop or planar_stop("sB", 0.0, 1.0),
    )
