"""Shared fixtures: fake clients, fixture images, a tiny HTTP server."""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from ecoscapes.acquisition import BandId, BandRaster, SceneRef
from ecoscapes.chat import StubChatBackend
from ecoscapes.rasters import save_png


def make_band(code: str, values, mask=None) -> BandRaster:
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.ones(values.shape, dtype=bool)
    return BandRaster(band=BandId(code), values=values,
                      data_mask=np.asarray(mask, dtype=bool))


class FakeGeocoder:
    """Returns a fixed match list; counts every call."""

    def __init__(self, matches=None):
        self.matches = matches if matches is not None else [
            {"lat": "49.0", "lon": "11.0"}]
        self.calls = 0

    def search(self, query):
        self.calls += 1
        return self.matches


class FakeSatelliteClient:
    """In-memory catalog + band grids; counts every call."""

    def __init__(self, scenes=(), grids=None, height=8, width=8):
        self.scenes = list(scenes)
        self.height = height
        self.width = width
        self.grids = grids or {}
        self.search_calls = 0
        self.fetch_calls = 0

    @property
    def calls(self):
        return self.search_calls + self.fetch_calls

    def search_scenes(self, bbox, start, end, max_cloud):
        self.search_calls += 1
        return list(self.scenes)

    def fetch_bands(self, scene_id, bbox, codes):
        self.fetch_calls += 1
        out = {}
        for code in codes:
            values = self.grids.get(code)
            if values is None:
                values = np.full((self.height, self.width), 0.1, dtype=np.float64)
            out[code] = make_band(code, values)
        return out


class RecordingChatBackend(StubChatBackend):
    """Stub backend that remembers every session and request."""

    def __init__(self, fail_on=None):
        self.sessions = []   # (system, model_name)
        self.requests = []   # dicts with system/history/user_text/images
        self.fail_on = fail_on or (lambda text: False)

    def open_session(self, system=None, model_name=""):
        self.sessions.append((system, model_name))
        return super().open_session(system=system, model_name=model_name)

    def complete(self, system, history, user_text, images, model_name):
        self.requests.append({
            "system": system,
            "history": history,
            "user_text": user_text,
            "images": images,
            "model_name": model_name,
        })
        if self.fail_on(user_text):
            raise RuntimeError("injected backend failure")
        return super().complete(system, history, user_text, images, model_name)


def default_scene_catalog():
    import datetime as dt

    return [
        SceneRef("s-a", dt.date(2024, 6, 1), 0.005),
        SceneRef("s-b", dt.date(2024, 7, 1), 0.02),
        SceneRef("s-c", dt.date(2024, 3, 15), 0.008),
    ]


def fixture_rgb(height=96, width=128) -> np.ndarray:
    y = np.linspace(0, 255, height, dtype=np.uint8)[:, None]
    x = np.linspace(0, 255, width, dtype=np.uint8)[None, :]
    rgb = np.zeros((height, width, 3), dtype=np.uint8)
    rgb[..., 0] = y
    rgb[..., 1] = x
    rgb[..., 2] = 128
    return rgb


def fixture_moisture(height=96, width=128) -> np.ndarray:
    img = np.full((height, width, 3), 200, dtype=np.uint8)
    img[: height // 3, :, 0] = 255
    img[2 * height // 3:, :, 2] = 255
    return img


def fixture_water(height=96, width=128) -> np.ndarray:
    # A solid lake-sized blob: clearly significant after denoising.
    img = np.zeros((height, width), dtype=np.uint8)
    img[20:50, 30:70] = 255
    return img


def write_manual_set(root, location: str) -> None:
    folder = root / location
    folder.mkdir(parents=True)
    save_png(fixture_rgb(), folder / "rgb.png")
    save_png(fixture_moisture(), folder / "moisture.png")
    save_png(fixture_water(), folder / "water.png")


@pytest.fixture
def manual_root(tmp_path):
    root = tmp_path / "satellite_data"
    write_manual_set(root, "Roßtal")
    return root


class _FixtureHTTPHandler(BaseHTTPRequestHandler):
    route = None  # injected per server: fn(method, path, body) -> (status, obj)

    def _respond(self, method):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, payload = type(self).route(self, method, self.path, body)
        data = payload if isinstance(payload, bytes) else \
            json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self._respond("GET")

    def do_POST(self):
        self._respond("POST")

    def log_message(self, fmt, *args):
        pass


@contextmanager
def fixture_server(route):
    """Serve ``route(handler, method, path, body) -> (status, payload)``
    on an ephemeral local port, yielding the base URL."""
    handler = type("Handler", (_FixtureHTTPHandler,), {"route": route})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        server.server_close()
