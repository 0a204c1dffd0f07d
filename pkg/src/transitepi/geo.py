"""Distance models: great-circle geometry for real coordinates, plain
Euclidean geometry for synthetic/test coordinates.

A "point" throughout is a ``(lat, lon)`` pair.  In the planar model the two
components are interpreted directly as metres on a flat plane, which makes
hand-computable test geometries possible.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

Point = Tuple[float, float]

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(a: Point, b: Point) -> float:
    """Great-circle distance between two (lat, lon) points in metres."""
    lat1, lon1 = a
    lat2, lon2 = b
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    d_phi = phi2 - phi1
    d_lam = math.radians(lon2 - lon1)
    h = math.sin(d_phi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(d_lam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def euclidean_m(a: Point, b: Point) -> float:
    """Planar distance; coordinates are already metres."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


class PlanarModel:
    """Flat-plane geometry. Centre of mass is the weighted arithmetic mean."""

    name = "planar"

    def distance(self, a: Point, b: Point) -> float:
        return euclidean_m(a, b)

    def center_of_mass(self, points: Sequence[Point], weights: Sequence[float]) -> Point:
        total = float(sum(weights))
        x = sum(w * p[0] for p, w in zip(points, weights)) / total
        y = sum(w * p[1] for p, w in zip(points, weights)) / total
        return (x, y)


class HaversineModel:
    """Spherical geometry on WGS84 with mean Earth radius.

    The centre of mass is computed by averaging weighted 3-D unit vectors and
    renormalizing, then converting back to (lat, lon).  This avoids the
    antimeridian and polar artefacts of naive lat/lon averaging.
    """

    name = "haversine"

    def distance(self, a: Point, b: Point) -> float:
        return haversine_m(a, b)

    def center_of_mass(self, points: Sequence[Point], weights: Sequence[float]) -> Point:
        x = y = z = 0.0
        total = 0.0
        for (lat, lon), w in zip(points, weights):
            phi, lam = math.radians(lat), math.radians(lon)
            x += w * math.cos(phi) * math.cos(lam)
            y += w * math.cos(phi) * math.sin(lam)
            z += w * math.sin(phi)
            total += w
        x, y, z = x / total, y / total, z / total
        norm = math.sqrt(x * x + y * y + z * z)
        if norm < 1e-12:
            # antipodal cancellation; fall back to naive averaging
            lat = sum(w * p[0] for p, w in zip(points, weights)) / total
            lon = sum(w * p[1] for p, w in zip(points, weights)) / total
            return (lat, lon)
        return (math.degrees(math.asin(z / norm)), math.degrees(math.atan2(y, x)))


PLANAR = PlanarModel()
HAVERSINE = HaversineModel()

_MODELS = {"planar": PLANAR, "haversine": HAVERSINE}


def get_model(name: str):
    try:
        return _MODELS[name]
    except KeyError:
        raise ValueError(f"unknown distance model {name!r}; expected one of {sorted(_MODELS)}")


def local_km_to_latlon(x_km: float, y_km: float, origin_lat: float, origin_lon: float) -> Point:
    """Map a local (east, north) km offset to (lat, lon) near an origin.

    Equirectangular approximation; adequate for city-scale extents.
    """
    lat = origin_lat + y_km / 111.32
    lon = origin_lon + x_km / (111.32 * math.cos(math.radians(origin_lat)))
    return (lat, lon)


def latlon_to_local_km(lat: float, lon: float, origin_lat: float, origin_lon: float) -> Tuple[float, float]:
    """Inverse of :func:`local_km_to_latlon`."""
    y_km = (lat - origin_lat) * 111.32
    x_km = (lon - origin_lon) * 111.32 * math.cos(math.radians(origin_lat))
    return (x_km, y_km)
