"""Location resolution: free-text name -> coordinates -> retrieval box.

The geocoding client is a thin wrapper over an HTTP search endpoint
(Nominatim-compatible: ``q`` query parameter, JSON list of matches with
``lat``/``lon`` as decimal strings). A polite ``User-Agent`` header is
mandatory for the public service.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import requests

from ecoscapes.errors import (
    MalformedResponseError,
    NoMatchError,
    PolarRegionError,
    ServiceUnreachableError,
)

# Meters per degree of latitude on the spherical-earth small-angle model.
# Good to well under a pixel at the few-km scales framed here.
METERS_PER_DEGREE = 111_320.0

DEFAULT_GEOCODER_URL = "https://nominatim.openstreetmap.org/search"
DEFAULT_USER_AGENT = "ecoscapes/0.1 (batch climate-report pipeline)"


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class GeoBoundingBox:
    """An axis-aligned box of degrees around a center point."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float
    center: GeoPoint
    half_width_m: float

    def __post_init__(self):
        if not (self.min_lat < self.max_lat and self.min_lon < self.max_lon):
            raise ValueError("degenerate bounding box")
        if not (self.min_lat <= self.center.lat <= self.max_lat):
            raise ValueError("center latitude outside box")
        if not (self.min_lon <= self.center.lon <= self.max_lon):
            raise ValueError("center longitude outside box")

    @property
    def lat_span(self) -> float:
        return self.max_lat - self.min_lat

    @property
    def lon_span(self) -> float:
        return self.max_lon - self.min_lon

    def as_wsen(self) -> tuple[float, float, float, float]:
        """(west, south, east, north) ordering used by the process API."""
        return (self.min_lon, self.min_lat, self.max_lon, self.max_lat)


class GeocodingClient:
    """HTTP client for a Nominatim-style search endpoint.

    Stateless apart from the shared session, so one instance may be used
    from concurrent calls.
    """

    def __init__(self, url: str = DEFAULT_GEOCODER_URL,
                 user_agent: str = DEFAULT_USER_AGENT,
                 timeout: float = 30.0, session: requests.Session | None = None):
        if not user_agent.strip():
            raise ValueError("a User-Agent identifying this deployment is required")
        self.url = url
        self.user_agent = user_agent
        self.timeout = timeout
        self._session = session or requests.Session()

    def search(self, query: str) -> list[dict]:
        """Return the raw match list for a free-text query."""
        try:
            resp = self._session.get(
                self.url,
                params={"q": query, "format": "json", "limit": 1},
                headers={"User-Agent": self.user_agent},
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except requests.RequestException as e:
            raise ServiceUnreachableError(f"geocoding request failed: {e}") from e
        try:
            matches = resp.json()
        except (json.JSONDecodeError, ValueError) as e:
            raise MalformedResponseError("geocoding response is not JSON") from e
        if not isinstance(matches, list):
            raise MalformedResponseError("geocoding response is not a list")
        return matches


def geocode(name: str, client) -> GeoPoint:
    """Resolve a location name to the first match's coordinates.

    ``client`` is anything with a ``search(query) -> list[dict]`` method;
    the result is a pure function of that response, so a fixture client
    makes this fully deterministic.
    """
    name = name.strip()
    if not name:
        raise NoMatchError("empty location name")
    matches = client.search(name)
    if not matches:
        raise NoMatchError(f"no geocoding match for {name!r}")
    first = matches[0]
    try:
        return GeoPoint(lat=float(first["lat"]), lon=float(first["lon"]))
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedResponseError(
            f"geocoding match lacks decimal lat/lon: {first!r}"
        ) from e


def bounding_box(center: GeoPoint, half_width_m: float) -> GeoBoundingBox:
    """Build the box spanning ``half_width_m`` meters on each side of center.

    Uses the small-angle conversions dlat = m / 111320 and
    dlon = m / (111320 * cos(lat)); rejected near the poles where the
    longitude conversion blows up.
    """
    if half_width_m <= 0:
        raise ValueError(f"half_width_m must be positive, got {half_width_m}")
    if abs(center.lat) >= 89.0:
        raise PolarRegionError(
            f"cannot frame a box at latitude {center.lat}: too close to a pole"
        )
    dlat = half_width_m / METERS_PER_DEGREE
    dlon = half_width_m / (METERS_PER_DEGREE * math.cos(math.radians(center.lat)))
    return GeoBoundingBox(
        min_lat=center.lat - dlat,
        min_lon=center.lon - dlon,
        max_lat=center.lat + dlat,
        max_lon=center.lon + dlon,
        center=center,
        half_width_m=half_width_m,
    )
