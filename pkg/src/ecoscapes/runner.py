"""Wiring of the full report pipeline and its execution for one location.

The module graph (hard edges unless noted):

    satellite_loader
      -> rgb_analysis ............ rgb.png -> rgb_analysis.txt
      -> moisture_analysis ....... moisture.png -> moisture_analysis.txt
      -> water_preprocessing ..... water.png -> water_preprocessed.png
           -> water_analysis ..... -> water_analysis.txt (only if enough water)
                -> water_rgb_analysis (+ rgb_analysis) -> revises rgb_analysis.txt
    climate_report <- rgb_analysis, moisture_analysis
                   <~ water_rgb_analysis (soft: its failure only costs revision 2)

The climate report consumes the latest rgb analysis revision, so when
the water branch produced one, its findings reach the report through it.
"""

from __future__ import annotations

import datetime as dt
import os
from pathlib import Path

import numpy as np

from ecoscapes import analysis, rasters
from ecoscapes.acquisition import HttpSatelliteClient, acquire
from ecoscapes.chat import ChatBackend, RemoteChatBackend, StubChatBackend
from ecoscapes.config import Config
from ecoscapes.engine import (
    ArtifactStore,
    ModuleSpec,
    RunReport,
    execute,
    resolve_order,
)
from ecoscapes.errors import BackendUnconfiguredError
from ecoscapes.geo import GeocodingClient

# Module ids, matching the pipeline overview above.
SATELLITE_LOADER = "satellite_loader"
RGB_ANALYSIS = "rgb_analysis"
MOISTURE_ANALYSIS = "moisture_analysis"
WATER_PREPROCESSING = "water_preprocessing"
WATER_ANALYSIS = "water_analysis"
WATER_RGB_ANALYSIS = "water_rgb_analysis"
CLIMATE_REPORT = "climate_report"

# Artifact file names as they appear on disk.
RGB_IMAGE = "rgb.png"
MOISTURE_IMAGE = "moisture.png"
WATER_IMAGE = "water.png"
WATER_PREPROCESSED_IMAGE = "water_preprocessed.png"
RGB_TEXT = "rgb_analysis.txt"
MOISTURE_TEXT = "moisture_analysis.txt"
WATER_TEXT = "water_analysis.txt"
REPORT_TEXT = "climate_report.txt"
DOWNSTREAM_TEXT = "downstream_prompt.txt"

RUN_REPORT_FILE = "run_report.json"


def build_pipeline(location: str, config: Config, *,
                   chat_backend: ChatBackend,
                   corpus: analysis.PromptCorpus,
                   output_dir: Path,
                   geocoder_client=None,
                   satellite_client=None) -> list[ModuleSpec]:
    """Construct the module graph for one location."""

    def load_satellite(store) -> None:
        images = acquire(
            location,
            manual_root=config.manual_root,
            output_dir=output_dir,
            geocoder_client=geocoder_client,
            satellite_client=satellite_client,
            bbox_half_width_m=config.bbox_half_width_m,
            max_cloud=config.max_cloud,
            max_side=config.max_side,
            gain=config.true_color_gain,
            reference_date=config.reference_date,
            invert_manual_water=config.invert_manual_water,
        )
        store.put(RGB_IMAGE, rasters.encode_png(images.rgb))
        store.put(MOISTURE_IMAGE, rasters.encode_png(images.moisture))
        store.put(WATER_IMAGE, rasters.encode_png(images.water))

    def analyze_rgb(store) -> None:
        text = analysis.run_rgb_analysis(
            store.get(RGB_IMAGE), chat_backend, corpus,
            model_name=config.rgb_model)
        store.put(RGB_TEXT, text.rendered)

    def analyze_moisture(store) -> None:
        text = analysis.run_moisture_analysis(
            store.get(MOISTURE_IMAGE), chat_backend, corpus,
            model_name=config.moisture_model)
        store.put(MOISTURE_TEXT, text.rendered)

    def preprocess_water(store) -> None:
        gray = _decode_gray(store.get(WATER_IMAGE))
        mask = rasters.threshold_mask(gray, config.water_threshold)
        cleaned = rasters.denoise_mask(mask, config.water_opening_radius,
                                       config.water_min_area_fraction)
        image = np.where(cleaned.bits, 255, 0).astype(np.uint8)
        store.put(WATER_PREPROCESSED_IMAGE, rasters.encode_png(image))

    def analyze_water(store) -> None:
        payload = store.get(WATER_PREPROCESSED_IMAGE)
        share = _water_share(payload)
        text = analysis.run_water_analysis(
            payload, share, chat_backend, corpus,
            significance_cutoff=config.water_significance_cutoff,
            model_name=config.water_model)
        if text is not None:
            store.put(WATER_TEXT, text.rendered)
        # Too little water: succeed with no artifact so dependents can
        # tell "nothing to say" from "stage broke".

    def modify_rgb(store) -> None:
        if not store.has(WATER_TEXT):
            return
        revised = analysis.apply_water_modification(
            store.get(RGB_IMAGE), store.get_text(RGB_TEXT),
            store.get_text(WATER_TEXT), chat_backend, corpus,
            model_name=config.rgb_model)
        store.revise(RGB_TEXT, revised.rendered)

    def synthesize_report(store) -> None:
        report = analysis.generate_climate_report(
            location, store.get_text(RGB_TEXT), store.get_text(MOISTURE_TEXT),
            chat_backend, corpus, model_name=config.report_model)
        store.put(REPORT_TEXT, report.rendered)
        store.put(DOWNSTREAM_TEXT,
                  analysis.assemble_downstream_prompt(report.rendered, location))

    return [
        ModuleSpec(SATELLITE_LOADER, load_satellite),
        ModuleSpec(RGB_ANALYSIS, analyze_rgb, deps={SATELLITE_LOADER}),
        ModuleSpec(MOISTURE_ANALYSIS, analyze_moisture, deps={SATELLITE_LOADER}),
        ModuleSpec(WATER_PREPROCESSING, preprocess_water,
                   deps={SATELLITE_LOADER}),
        ModuleSpec(WATER_ANALYSIS, analyze_water, deps={WATER_PREPROCESSING}),
        ModuleSpec(WATER_RGB_ANALYSIS, modify_rgb,
                   deps={WATER_ANALYSIS, RGB_ANALYSIS}),
        ModuleSpec(CLIMATE_REPORT, synthesize_report,
                   deps={RGB_ANALYSIS, MOISTURE_ANALYSIS},
                   soft_deps={WATER_RGB_ANALYSIS}),
    ]


def _decode_gray(png_bytes: bytes) -> np.ndarray:
    import io

    from PIL import Image

    with Image.open(io.BytesIO(png_bytes)) as img:
        return np.asarray(img.convert("L"))


def _water_share(png_bytes: bytes) -> float:
    gray = _decode_gray(png_bytes)
    return float(np.count_nonzero(gray >= 128)) / gray.size


def make_chat_backend(config: Config, env=None) -> ChatBackend:
    env = env if env is not None else os.environ
    if config.backend == "stub":
        return StubChatBackend()
    token = config.resolve_token(env)
    if not config.chat_api_url:
        raise BackendUnconfiguredError(
            "backend=remote needs chat_api_url in the config")
    return RemoteChatBackend(config.chat_api_url, token=token or "",
                             temperature=config.temperature)


def make_satellite_client(config: Config, env=None):
    """HTTP client when the process API is configured, else None; the
    acquisition stage treats None as "manual images only"."""
    env = env if env is not None else os.environ
    token = config.resolve_token(env)
    if config.satellite_api_url and token is not None:
        return HttpSatelliteClient(config.satellite_api_url, token)
    return None


def resolve_output_dir(root, location: str, now=None) -> Path:
    """Per-location output folder; reruns nest in a timestamped subdir."""
    base = Path(root) / location
    if not base.exists():
        return base
    stamp = (now or dt.datetime.now()).strftime("run-%Y%m%d-%H%M%S-%f")
    return base / stamp


def run_pipeline(location: str, config: Config, *,
                 chat_backend: ChatBackend | None = None,
                 geocoder_client=None,
                 satellite_client=None,
                 output_dir=None,
                 env=None) -> tuple[RunReport, Path]:
    """Execute the full pipeline for one location.

    Clients left as None are built from the config; tests inject
    instrumented ones through the same seams. Returns the run report and
    the directory holding every artifact plus ``run_report.json``.
    """
    env = env if env is not None else os.environ
    corpus = analysis.load_prompt_corpus()
    if chat_backend is None:
        chat_backend = make_chat_backend(config, env)
    if geocoder_client is None:
        geocoder_client = GeocodingClient(config.geocoder_url,
                                          user_agent=config.user_agent)
    if satellite_client is None:
        satellite_client = make_satellite_client(config, env)
    out = Path(output_dir) if output_dir is not None \
        else resolve_output_dir(config.output_dir, location)
    out.mkdir(parents=True, exist_ok=True)

    modules = build_pipeline(
        location, config,
        chat_backend=chat_backend,
        corpus=corpus,
        output_dir=out,
        geocoder_client=geocoder_client,
        satellite_client=satellite_client,
    )
    store = ArtifactStore()
    report = execute(resolve_order(modules), store)
    store.mirror_to_disk(out)
    report.write(out / RUN_REPORT_FILE)
    return report, out


def exit_code_for(report: RunReport) -> int:
    """Shell-boundary encoding of partial-failure semantics.

    0 = everything succeeded; 2 = the report exists but some optional
    branch failed or was skipped; 1 = no report.
    """
    if not report.succeeded(CLIMATE_REPORT):
        return 1
    return 0 if report.all_succeeded() else 2
