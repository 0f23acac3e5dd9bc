"""Command-line surface tying the pipeline together.

Commands:

* ``run <location>`` - full pipeline, artifacts + run report on disk.
  Exit 0 on full success, 2 when the climate report was produced despite
  failures in optional branches, 1 otherwise.
* ``indices --bands <dir> --out <dir>`` - standalone raster utility:
  raw band files in, rgb/moisture/water images out.
* ``score add`` / ``score summary`` - the manual grading store.
* ``validate-manual <location>`` - check a manual image folder.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from ecoscapes import rasters, runner
from ecoscapes.acquisition import ALL_BANDS, BandId, BandRaster, MANUAL_FILE_NAMES
from ecoscapes.config import Config, load_config
from ecoscapes.engine import ModuleState
from ecoscapes.errors import EcoScapesError
from ecoscapes.scores import (
    ScoreRecord,
    ScoreStore,
    bundled_scores_path,
    compare_systems,
    format_comparison,
)


def _config_from(path: str | None) -> Config:
    return load_config(path, env=os.environ)


@click.group()
def main():
    """Turn a town name into a localized climate-adaptation report."""


@main.command("run")
@click.argument("location")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="YAML config file; defaults apply without it.")
@click.option("--output-dir", type=click.Path(), default=None,
              help="Exact artifact directory (overrides the per-location layout).")
def cmd_run(location: str, config_path: str | None, output_dir: str | None):
    """Run the full pipeline for LOCATION."""
    try:
        config = _config_from(config_path)
        report, out = runner.run_pipeline(location, config,
                                          output_dir=output_dir)
    except EcoScapesError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    for module_id in report.order:
        status = report.statuses[module_id]
        line = f"{module_id}: {status.state.value}"
        if status.state is ModuleState.FAILED:
            line += f" ({status.reason})"
        elif status.state is ModuleState.SKIPPED:
            line += f" (missing: {', '.join(status.missing)})"
        click.echo(line)
    click.echo(f"artifacts: {out}")
    for module_id, status in report.statuses.items():
        if status.state is not ModuleState.SUCCEEDED:
            click.echo(f"stage {module_id} did not succeed: "
                       f"{status.reason or status.state.value}", err=True)
    sys.exit(runner.exit_code_for(report))


@main.command("indices")
@click.option("--bands", "bands_dir", type=click.Path(exists=True), required=True,
              help="Directory of single-band greyscale PNGs with JSON sidecars.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--invert-water", is_flag=True, default=False,
              help="Emit the data-browser water ramp (0 -> white, 1 -> black).")
def cmd_indices(bands_dir: str, out_dir: str, config_path: str | None,
                invert_water: bool):
    """Render rgb/moisture/water images from raw band files.

    Every PNG in the band directory needs a sidecar of the same stem,
    e.g. ``green.json`` next to ``green.png``, containing at least
    ``{"band": "B03"}`` and optionally ``reflectance_scale`` (the
    reflectance that full luminance 255 maps to, default 1.0).
    """
    try:
        config = _config_from(config_path)
        bands = _load_band_dir(Path(bands_dir))
        missing = [code for code in ALL_BANDS if code not in bands]
        if missing:
            raise EcoScapesError(f"missing band(s): {', '.join(missing)}")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rgb = rasters.compose_true_color(bands["B04"], bands["B03"], bands["B02"],
                                         gain=config.true_color_gain)
        moisture = rasters.render_moisture(
            rasters.normalized_difference(bands["B8A"], bands["B11"]))
        water = rasters.render_water(
            rasters.normalized_difference(bands["B03"], bands["B08"]),
            invert=invert_water)
        rasters.save_png(rasters.rescale_max_side(rgb, config.max_side),
                         out / "rgb.png")
        rasters.save_png(rasters.rescale_max_side(moisture, config.max_side),
                         out / "moisture.png")
        rasters.save_png(rasters.rescale_max_side(water, config.max_side),
                         out / "water.png")
    except EcoScapesError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(f"wrote rgb.png, moisture.png, water.png to {out_dir}")


def _load_band_dir(bands_dir: Path) -> dict[str, BandRaster]:
    bands: dict[str, BandRaster] = {}
    for sidecar in sorted(bands_dir.glob("*.json")):
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        code = meta["band"]
        scale = float(meta.get("reflectance_scale", 1.0))
        png = sidecar.with_suffix(".png")
        if not png.is_file():
            raise EcoScapesError(f"sidecar {sidecar.name} has no {png.name}")
        gray = rasters.load_png(png)
        if gray.ndim == 3:
            gray = gray[..., 0]
        values = gray.astype(np.float64) / 255.0 * scale
        bands[code] = BandRaster(band=BandId(code), values=values,
                                 data_mask=np.ones(gray.shape, dtype=bool))
    return bands


@main.group("score")
def cmd_score():
    """Record and summarize manual rubric scores."""


def _open_store(path: str) -> ScoreStore:
    p = Path(path)
    return ScoreStore.load(p) if p.is_file() else ScoreStore()


@cmd_score.command("add")
@click.option("--location", required=True)
@click.option("--system", required=True)
@click.option("--criterion", required=True)
@click.option("--run-index", type=int, required=True)
@click.option("--value", type=int, required=True)
@click.option("--store", "store_path", type=click.Path(), default="scores.csv",
              show_default=True)
def score_add(location, system, criterion, run_index, value, store_path):
    """Validate and append one score record."""
    try:
        store = _open_store(store_path)
        store.record(ScoreRecord(location, system, criterion, run_index, value))
        store.save(store_path)
    except (EcoScapesError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(f"recorded {location}/{system}/{criterion} "
               f"run {run_index} = {value}")


@cmd_score.command("summary")
@click.option("--location", required=True)
@click.option("--criterion", required=True)
@click.option("--system", "systems", multiple=True,
              help="Restrict to specific systems (repeatable).")
@click.option("--store", "store_path", type=click.Path(), default="scores.csv",
              show_default=True)
@click.option("--bundled", is_flag=True, default=False,
              help="Summarize the evaluation scores shipped with the package.")
@click.option("--json-out", type=click.Path(), default=None,
              help="Also write the summaries as JSON.")
def score_summary(location, criterion, systems, store_path, bundled, json_out):
    """Print per-system five-number summaries side by side."""
    try:
        path = bundled_scores_path() if bundled else Path(store_path)
        if not path.is_file():
            raise EcoScapesError(f"no score store at {path}")
        store = ScoreStore.load(path)
        table = compare_systems(store, location, criterion,
                                systems=list(systems) or None)
    except (EcoScapesError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(format_comparison(table, location, criterion))
    if json_out:
        payload = {
            system: dict(zip(("min", "q1", "median", "q3", "max"),
                             summary.as_tuple()))
            for system, summary in table.items()
        }
        Path(json_out).write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")


@main.command("validate-manual")
@click.argument("location")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_validate_manual(location: str, config_path: str | None):
    """Check that a manual image folder for LOCATION is complete."""
    try:
        config = _config_from(config_path)
    except EcoScapesError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    folder = Path(config.manual_root) / location
    if not folder.is_dir():
        click.echo(f"error: no folder {folder} (names are case-sensitive)",
                   err=True)
        sys.exit(1)
    missing = [n for n in MANUAL_FILE_NAMES if not (folder / n).is_file()]
    if missing:
        click.echo(f"error: {folder} is missing {', '.join(missing)}", err=True)
        sys.exit(1)
    click.echo(f"{folder} is complete ({', '.join(MANUAL_FILE_NAMES)})")


if __name__ == "__main__":
    main()
