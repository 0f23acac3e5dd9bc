"""Produce the three input images for a location.

Manually supplied files under ``satellite_data/<Location>/`` always win;
otherwise band rasters are fetched from a Sentinel-2 process API, with a
strict cloud-cover filter over the preceding year, and rendered locally.
The manual folder name must match the requested location byte-for-byte
(case-sensitive).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests

from ecoscapes import rasters
from ecoscapes.errors import (
    AcquisitionError,
    BandUnavailableError,
    ConfigurationError,
    GeometryMismatchError,
    IncompleteManualSetError,
    MalformedResponseError,
    NoEligibleSceneError,
    ServiceUnreachableError,
    UnreadableImageError,
)
from ecoscapes.geo import GeoBoundingBox, bounding_box, geocode

# Sentinel-2 band centers in nanometers, for the six bands this pipeline
# consumes: blue/green/red for true color, green + near-infrared for the
# water index, narrow near-infrared + short-wave infrared for moisture.
SENTINEL2_WAVELENGTHS_NM = {
    "B02": 492.1,
    "B03": 559.0,
    "B04": 665.0,
    "B08": 833.0,
    "B8A": 864.0,
    "B11": 1610.0,
}

ALL_BANDS = tuple(SENTINEL2_WAVELENGTHS_NM)

MANUAL_FILE_NAMES = ("rgb.png", "moisture.png", "water.png")


@dataclass(frozen=True)
class BandId:
    """One Sentinel-2 band; the code/wavelength pairing is fixed."""

    code: str
    center_wavelength_nm: float = field(default=0.0)

    def __post_init__(self):
        expected = SENTINEL2_WAVELENGTHS_NM.get(self.code)
        if expected is None:
            raise ValueError(f"unknown band code {self.code!r}")
        if self.center_wavelength_nm == 0.0:
            object.__setattr__(self, "center_wavelength_nm", expected)
        elif self.center_wavelength_nm != expected:
            raise ValueError(
                f"{self.code} is centered at {expected} nm, "
                f"not {self.center_wavelength_nm}"
            )


@dataclass(frozen=True)
class BandRaster:
    """One spectral band as a reflectance grid plus a validity mask."""

    band: BandId
    values: np.ndarray     # float64 reflectance, shape (H, W), >= 0
    data_mask: np.ndarray  # bool, shape (H, W); True = valid observation

    def __post_init__(self):
        if self.values.shape != self.data_mask.shape or self.values.ndim != 2:
            raise ValueError("values and data_mask must be equal-shaped 2-D arrays")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SceneRef:
    """A catalog entry for one acquisition."""

    scene_id: str
    sensing_date: dt.date
    cloud_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.cloud_fraction <= 1.0:
            raise ValueError(
                f"cloud_fraction must be in [0, 1], got {self.cloud_fraction}"
            )


@dataclass(frozen=True)
class ImageSet:
    """The three derived images for one location."""

    rgb: np.ndarray       # uint8, shape (H, W, 3)
    moisture: np.ndarray  # uint8, shape (H, W, 3)
    water: np.ndarray     # uint8, shape (H, W)
    source: str           # "manual" or "api"
    location: str

    def __post_init__(self):
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError("rgb must be 3-channel")
        if self.moisture.ndim != 3 or self.moisture.shape[2] != 3:
            raise ValueError("moisture must be 3-channel")
        if self.water.ndim != 2:
            raise ValueError("water must be single-channel")
        if self.source not in ("manual", "api"):
            raise ValueError(f"unknown source {self.source!r}")


def load_manual_images(root_dir, location: str, max_side: int = 1024,
                       invert_water: bool = False) -> ImageSet | None:
    """Pick up rgb/moisture/water PNGs from ``<root_dir>/<location>/``.

    Returns None when the location folder is absent (acquisition then
    falls through to the API). A folder that exists but lacks some of the
    three files is an error that lists exactly the missing names.
    ``invert_water`` flips the water luminance for images exported from
    the public data browser, whose ramp is inverted.
    """
    folder = Path(root_dir) / location
    if not folder.is_dir():
        return None
    missing = [name for name in MANUAL_FILE_NAMES if not (folder / name).is_file()]
    if missing:
        raise IncompleteManualSetError(location, missing)
    loaded = {}
    for name in MANUAL_FILE_NAMES:
        try:
            loaded[name] = rasters.load_png(folder / name)
        except Exception as e:
            raise UnreadableImageError(f"cannot decode {folder / name}: {e}") from e
    rgb = _ensure_rgb(loaded["rgb.png"])
    moisture = _ensure_rgb(loaded["moisture.png"])
    water = _ensure_gray(loaded["water.png"])
    if invert_water:
        water = (255 - water.astype(np.int16)).astype(np.uint8)
    return ImageSet(
        rgb=rasters.rescale_max_side(rgb, max_side),
        moisture=rasters.rescale_max_side(moisture, max_side),
        water=rasters.rescale_max_side(water, max_side),
        source="manual",
        location=location,
    )


def _ensure_rgb(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return np.stack([image] * 3, axis=-1)
    return image[..., :3]


def _ensure_gray(image: np.ndarray) -> np.ndarray:
    if image.ndim == 3:
        # Luminance collapse for accidentally-colored manual water maps.
        return rasters._round_half_up(image[..., :3].mean(axis=-1)).astype(np.uint8)
    return image


def discover_scenes(bbox: GeoBoundingBox, window: tuple[dt.date, dt.date],
                    max_cloud: float, client) -> list[SceneRef]:
    """List catalog scenes under the cloud ceiling, newest first.

    The threshold is strict: a scene at exactly ``max_cloud`` is out.
    The filter is enforced here regardless of what the service did with
    the hint it was sent.
    """
    start, end = window
    if start > end:
        raise ValueError(f"empty search window: {start} > {end}")
    if not 0.0 < max_cloud <= 1.0:
        raise ValueError(f"max_cloud must be in (0, 1], got {max_cloud}")
    catalog = client.search_scenes(bbox, start, end, max_cloud)
    eligible = [
        s for s in catalog
        if s.cloud_fraction < max_cloud and start <= s.sensing_date <= end
    ]
    if not eligible:
        raise NoEligibleSceneError(
            f"no scene with cloud fraction below {max_cloud} between "
            f"{start} and {end}; consider raising the cloud ceiling"
        )
    return sorted(eligible, key=lambda s: s.sensing_date, reverse=True)


def fetch_bands(scene: SceneRef, bbox: GeoBoundingBox, bands,
                client) -> dict[str, BandRaster]:
    """Fetch one raster per requested band, all with identical geometry."""
    codes = [b.code if isinstance(b, BandId) else str(b) for b in bands]
    if not codes:
        raise ValueError("band set must be non-empty")
    fetched = client.fetch_bands(scene.scene_id, bbox, codes)
    missing = [c for c in codes if c not in fetched]
    if missing:
        raise BandUnavailableError(f"bands not returned: {', '.join(sorted(missing))}")
    shapes = {c: fetched[c].values.shape for c in codes}
    if len(set(shapes.values())) > 1:
        raise GeometryMismatchError(f"inconsistent band shapes from server: {shapes}")
    return {c: fetched[c] for c in codes}


class HttpSatelliteClient:
    """Client for a Sentinel-2 process API.

    Two JSON-over-HTTP calls, both authenticated with a bearer token:

    * ``POST {base}/v1/scenes`` with the bounding box in degrees, an
      ISO-8601 time range, and the cloud-fraction ceiling; the reply
      lists scenes with id, sensing date, and cloud fraction.
    * ``POST {base}/v1/process`` with the scene id, bounding box, and
      band list; the reply carries width/height, one row-major
      reflectance grid per band, and a shared data mask.

    Instances hold no mutable state beyond the HTTP session and may be
    shared across concurrent requests.
    """

    def __init__(self, base_url: str, token: str, timeout: float = 60.0,
                 session: requests.Session | None = None):
        if not base_url:
            raise ConfigurationError("satellite API URL is not configured")
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self._session = session or requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._session.post(
                f"{self.base_url}{path}",
                json=payload,
                headers={"Authorization": f"Bearer {self.token}"},
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except requests.RequestException as e:
            raise ServiceUnreachableError(f"process API request failed: {e}") from e
        try:
            body = resp.json()
        except ValueError as e:
            raise MalformedResponseError("process API reply is not JSON") from e
        if not isinstance(body, dict):
            raise MalformedResponseError("process API reply is not an object")
        return body

    def search_scenes(self, bbox: GeoBoundingBox, start: dt.date, end: dt.date,
                      max_cloud: float) -> list[SceneRef]:
        body = self._post("/v1/scenes", {
            "bbox": list(bbox.as_wsen()),
            "time_range": {"from": start.isoformat(), "to": end.isoformat()},
            "max_cloud": max_cloud,
        })
        try:
            return [
                SceneRef(
                    scene_id=str(s["id"]),
                    sensing_date=dt.date.fromisoformat(s["sensing_date"]),
                    cloud_fraction=float(s["cloud_fraction"]),
                )
                for s in body["scenes"]
            ]
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedResponseError(f"bad scene list: {e}") from e

    def fetch_bands(self, scene_id: str, bbox: GeoBoundingBox,
                    codes: list[str]) -> dict[str, BandRaster]:
        body = self._post("/v1/process", {
            "scene_id": scene_id,
            "bbox": list(bbox.as_wsen()),
            "bands": list(codes),
        })
        try:
            width = int(body["width"])
            height = int(body["height"])
            mask = np.asarray(body["data_mask"], dtype=bool).reshape(height, width)
            out = {}
            for code, grid in body["bands"].items():
                values = np.asarray(grid, dtype=np.float64).reshape(height, width)
                out[code] = BandRaster(band=BandId(code), values=values,
                                       data_mask=mask)
            return out
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedResponseError(f"bad band payload: {e}") from e


def render_image_set(bands: dict[str, BandRaster], location: str,
                     gain: float = 2.5, max_side: int = 1024) -> ImageSet:
    """Render fetched bands into the rgb/moisture/water image triple."""
    rgb = rasters.compose_true_color(bands["B04"], bands["B03"], bands["B02"],
                                     gain=gain)
    moisture = rasters.render_moisture(
        rasters.normalized_difference(bands["B8A"], bands["B11"]))
    water = rasters.render_water(
        rasters.normalized_difference(bands["B03"], bands["B08"]))
    return ImageSet(
        rgb=rasters.rescale_max_side(rgb, max_side),
        moisture=rasters.rescale_max_side(moisture, max_side),
        water=rasters.rescale_max_side(water, max_side),
        source="api",
        location=location,
    )


def write_image_set(images: ImageSet, out_dir) -> None:
    """Mirror the three images to ``<out_dir>/{rgb,moisture,water}.png``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rasters.save_png(images.rgb, out / "rgb.png")
    rasters.save_png(images.moisture, out / "moisture.png")
    rasters.save_png(images.water, out / "water.png")


def acquire(location: str, *, manual_root, output_dir,
            geocoder_client=None, satellite_client=None,
            bbox_half_width_m: float = 2500.0, max_cloud: float = 0.01,
            max_side: int = 1024, gain: float = 2.5,
            reference_date: dt.date | None = None,
            invert_manual_water: bool = False) -> ImageSet:
    """Produce the image triple for a location and write it to disk.

    Manual images short-circuit everything: when the folder is complete
    no client is touched at all. Otherwise the chain is geocode ->
    bounding box -> scene discovery over the preceding year -> newest
    eligible scene -> band fetch -> local rendering. Any stage failure
    is re-raised naming that stage.
    """
    images = load_manual_images(manual_root, location, max_side=max_side,
                                invert_water=invert_manual_water)
    if images is None:
        if geocoder_client is None or satellite_client is None:
            raise ConfigurationError(
                f"no manual images for {location!r} under {manual_root} and no "
                "API access configured; supply satellite_api_url and a token "
                "or add the images manually"
            )
        ref = reference_date or dt.date.today()
        window = (ref - dt.timedelta(days=365), ref)
        center = _stage("geocode", geocode, location, geocoder_client)
        bbox = _stage("bounding_box", bounding_box, center, bbox_half_width_m)
        scenes = _stage("discover_scenes", discover_scenes, bbox, window,
                        max_cloud, satellite_client)
        newest = scenes[0]
        bands = _stage("fetch_bands", fetch_bands, newest, bbox, ALL_BANDS,
                       satellite_client)
        images = _stage("render", render_image_set, bands, location,
                        gain, max_side)
    _stage("write_images", write_image_set, images, output_dir)
    return images


def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except AcquisitionError:
        raise
    except Exception as e:
        raise AcquisitionError(name, str(e)) from e
