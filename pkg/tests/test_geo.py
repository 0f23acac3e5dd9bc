from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecoscapes.errors import (
    MalformedResponseError,
    NoMatchError,
    PolarRegionError,
    ServiceUnreachableError,
)
from ecoscapes.geo import (
    METERS_PER_DEGREE,
    GeocodingClient,
    GeoPoint,
    bounding_box,
    geocode,
)
from tests.conftest import FakeGeocoder, fixture_server


class TestGeoPoint:
    def test_valid(self):
        p = GeoPoint(49.24, 10.89)
        assert (p.lat, p.lon) == (49.24, 10.89)

    @pytest.mark.parametrize("lat,lon", [(91, 0), (-91, 0), (0, 181), (0, -181)])
    def test_out_of_range(self, lat, lon):
        with pytest.raises(ValueError):
            GeoPoint(lat, lon)


class TestGeocode:
    def test_fixture_response_passthrough(self):
        point = geocode("Anywhere", FakeGeocoder([{"lat": "49.0", "lon": "11.0"}]))
        assert point == GeoPoint(49.0, 11.0)

    def test_pinned_town_fixture(self):
        # Pinned from a one-off query against the public service: the
        # town of Roßtal sits near lat 49.24, lon 10.89.
        client = FakeGeocoder([
            {"place_id": 1, "lat": "49.2394012", "lon": "10.8896239",
             "display_name": "Roßtal"},
        ])
        point = geocode("Roßtal", client)
        assert point.lat == pytest.approx(49.24, abs=0.05)
        assert point.lon == pytest.approx(10.89, abs=0.05)

    def test_empty_name_rejected(self):
        client = FakeGeocoder()
        with pytest.raises(NoMatchError):
            geocode("   ", client)
        assert client.calls == 0

    def test_no_results(self):
        with pytest.raises(NoMatchError):
            geocode("Nowhereville", FakeGeocoder([]))

    def test_first_match_wins(self):
        client = FakeGeocoder([
            {"lat": "1.0", "lon": "2.0"},
            {"lat": "3.0", "lon": "4.0"},
        ])
        assert geocode("x", client) == GeoPoint(1.0, 2.0)

    def test_missing_fields(self):
        with pytest.raises(MalformedResponseError):
            geocode("x", FakeGeocoder([{"name": "no coordinates"}]))

    def test_deterministic_for_fixed_response(self):
        client = FakeGeocoder([{"lat": "12.5", "lon": "-3.25"}])
        assert geocode("a", client) == geocode("a", client)


class TestGeocodingClientHttp:
    def test_query_and_user_agent(self):
        seen = {}

        def route(handler, method, path, body):
            seen["path"] = path
            seen["user_agent"] = handler.headers.get("User-Agent")
            return 200, [{"lat": "49.0", "lon": "11.0"}]

        with fixture_server(route) as url:
            client = GeocodingClient(url + "/search", user_agent="test-suite/1.0")
            point = geocode("Roßtal", client)
        assert point == GeoPoint(49.0, 11.0)
        assert "q=" in seen["path"]
        assert seen["user_agent"] == "test-suite/1.0"

    def test_requires_user_agent(self):
        with pytest.raises(ValueError):
            GeocodingClient("http://127.0.0.1:1/search", user_agent="  ")

    def test_malformed_body(self):
        with fixture_server(lambda h, m, p, b: (200, b"not json")) as url:
            client = GeocodingClient(url, user_agent="t/1")
            with pytest.raises(MalformedResponseError):
                client.search("x")

    def test_non_list_body(self):
        with fixture_server(lambda h, m, p, b: (200, {"lat": "1"})) as url:
            client = GeocodingClient(url, user_agent="t/1")
            with pytest.raises(MalformedResponseError):
                client.search("x")

    def test_unreachable(self):
        client = GeocodingClient("http://127.0.0.1:9/search", user_agent="t/1",
                                 timeout=0.2)
        with pytest.raises(ServiceUnreachableError):
            client.search("x")

    def test_http_error_status(self):
        with fixture_server(lambda h, m, p, b: (500, {})) as url:
            client = GeocodingClient(url, user_agent="t/1")
            with pytest.raises(ServiceUnreachableError):
                client.search("x")


class TestBoundingBox:
    def test_equator_spans(self):
        box = bounding_box(GeoPoint(0.0, 0.0), METERS_PER_DEGREE)
        assert box.min_lat == pytest.approx(-1.0, abs=1e-9)
        assert box.max_lat == pytest.approx(1.0, abs=1e-9)
        assert box.min_lon == pytest.approx(-1.0, abs=1e-9)
        assert box.max_lon == pytest.approx(1.0, abs=1e-9)

    def test_lat60_lon_span_doubles(self):
        box = bounding_box(GeoPoint(60.0, 10.0), METERS_PER_DEGREE)
        # cos(60 deg) = 0.5, so one degree of meters is two of longitude.
        assert box.lon_span == pytest.approx(4.0, abs=1e-9)
        assert box.lat_span == pytest.approx(2.0, abs=1e-9)

    def test_zero_half_width_rejected(self):
        with pytest.raises(ValueError):
            bounding_box(GeoPoint(0, 0), 0.0)

    def test_polar_rejected(self):
        with pytest.raises(PolarRegionError):
            bounding_box(GeoPoint(89.5, 0), 100.0)

    @given(
        lat=st.floats(min_value=-85, max_value=85),
        lon=st.floats(min_value=-170, max_value=170),
        half=st.floats(min_value=1.0, max_value=50_000.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_contains_center_and_exact_lat_span(self, lat, lon, half):
        box = bounding_box(GeoPoint(lat, lon), half)
        assert box.min_lat <= lat <= box.max_lat
        assert box.min_lon <= lon <= box.max_lon
        assert abs(box.lat_span - 2 * half / METERS_PER_DEGREE) <= 1e-9

    @given(
        lat=st.floats(min_value=-85, max_value=85),
        half=st.floats(min_value=2.0, max_value=50_000.0),
        shrink=st.floats(min_value=0.1, max_value=0.9),
    )
    @settings(max_examples=60, deadline=None)
    def test_shrinking_half_width_shrinks_both_spans(self, lat, half, shrink):
        center = GeoPoint(lat, 0.0)
        big = bounding_box(center, half)
        small = bounding_box(center, half * shrink)
        assert small.lat_span < big.lat_span
        assert small.lon_span < big.lon_span

    def test_lon_span_uses_cosine(self):
        lat = 35.0
        box = bounding_box(GeoPoint(lat, 0.0), 1000.0)
        expected = 2 * 1000.0 / (METERS_PER_DEGREE * math.cos(math.radians(lat)))
        assert box.lon_span == pytest.approx(expected, rel=1e-12)
