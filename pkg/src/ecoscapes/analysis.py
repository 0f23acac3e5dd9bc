"""The analysis stages and their fixed prompt corpus.

Each stage drives a slice of the prompt corpus through a chat backend
against one image and assembles the replies into a text artifact. The
corpus ships with the package and is integrity-checked on every load, so
drift from the pinned texts is caught instead of silently changing what
the models are asked.

Stage protocol differences that matter:

* RGB and moisture prompts run as independent single-turn exchanges
  (fresh session per prompt, no system prompt) to avoid context drift.
* Water analysis only runs when the preprocessed mask shows enough
  water; its three user prompts each start a fresh chat that shares
  only the water system prompt.
* The water->RGB modification step reuses the original RGB image plus
  both earlier texts and yields a revision of the RGB analysis.
* The climate report is one two-turn conversation under the report
  system prompt.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from ecoscapes.chat import ChatBackend
from ecoscapes.errors import (
    AnalysisError,
    ChecksumMismatchError,
    MissingCorpusError,
    MissingPlaceholderInputError,
)

CORPUS_FILES = (
    "rgb_prompts.json",
    "moisture_prompts.json",
    "water_prompts.json",
    "report_prompts.json",
    "modification_prompt.json",
)

RGB_PROMPT_COUNT = 14
MOISTURE_PROMPT_COUNT = 7
WATER_USER_PROMPT_COUNT = 3
REPORT_TEMPLATE_COUNT = 2

LOCATION_PLACEHOLDER = "<location>"
RGB_TEXT_PLACEHOLDER = "rgb_analysis.txt"
MOISTURE_TEXT_PLACEHOLDER = "moisture_analysis.txt"
MOD_WATER_PLACEHOLDER = "<water_analysis>"
MOD_RGB_PLACEHOLDER = "<rgb_analysis>"


class AnalysisStage(str, Enum):
    RGB = "rgb"
    MOISTURE = "moisture"
    WATER = "water"
    RGB_MODIFIED = "rgb_modified"
    REPORT = "report"


@dataclass(frozen=True)
class AnalysisText:
    """Ordered (prompt, reply) sections of one stage, plus the flat text."""

    stage: AnalysisStage
    sections: tuple[tuple[str, str], ...]
    heading: str | None = None

    @property
    def rendered(self) -> str:
        if self.stage is AnalysisStage.RGB_MODIFIED:
            # Free text: the revised analysis is the artifact.
            return self.sections[-1][1] + "\n"
        if self.stage is AnalysisStage.REPORT:
            # Transcript of the synthesis replies under a location
            # heading, so the artifact names its subject even when a
            # backend does not echo it.
            parts = [self.heading] if self.heading else []
            parts.extend(reply for _prompt, reply in self.sections)
            return "\n\n".join(parts) + "\n"
        blocks = [
            f"## Prompt {i}\n{reply}"
            for i, (_prompt, reply) in enumerate(self.sections, start=1)
        ]
        return "\n\n".join(blocks) + "\n"


@dataclass(frozen=True)
class PromptCorpus:
    rgb_prompts: tuple[str, ...]
    moisture_prompts: tuple[str, ...]
    water_system: str
    water_user_prompts: tuple[str, ...]
    report_system: str
    report_user_templates: tuple[str, ...]
    modification_template: str

    def __post_init__(self):
        counts = (
            (len(self.rgb_prompts), RGB_PROMPT_COUNT, "rgb"),
            (len(self.moisture_prompts), MOISTURE_PROMPT_COUNT, "moisture"),
            (len(self.water_user_prompts), WATER_USER_PROMPT_COUNT, "water"),
            (len(self.report_user_templates), REPORT_TEMPLATE_COUNT, "report"),
        )
        for actual, expected, label in counts:
            if actual != expected:
                raise ValueError(
                    f"{label} corpus has {actual} prompts, expected {expected}"
                )


def default_corpus_dir() -> Path:
    return Path(str(resources.files("ecoscapes"))) / "prompts"


def load_prompt_corpus(path=None) -> PromptCorpus:
    """Load and integrity-check the prompt corpus.

    Every corpus file must match its pinned sha256 from the manifest;
    an edited prompt raises rather than silently shipping a different
    question to the models.
    """
    corpus_dir = Path(path) if path is not None else default_corpus_dir()
    manifest_path = corpus_dir / "manifest.json"
    if not manifest_path.is_file():
        raise MissingCorpusError(f"corpus manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    raw: dict[str, dict] = {}
    for name in CORPUS_FILES:
        file_path = corpus_dir / name
        if not file_path.is_file():
            raise MissingCorpusError(f"corpus file not found: {file_path}")
        data = file_path.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        pinned = manifest.get(name)
        if pinned != digest:
            raise ChecksumMismatchError(
                f"{name} drifted from the pinned corpus "
                f"(expected {pinned}, got {digest})"
            )
        raw[name] = json.loads(data.decode("utf-8"))

    return PromptCorpus(
        rgb_prompts=tuple(raw["rgb_prompts.json"]["prompts"]),
        moisture_prompts=tuple(raw["moisture_prompts.json"]["prompts"]),
        water_system=raw["water_prompts.json"]["system"],
        water_user_prompts=tuple(raw["water_prompts.json"]["user"]),
        report_system=raw["report_prompts.json"]["system"],
        report_user_templates=tuple(raw["report_prompts.json"]["user_templates"]),
        modification_template=raw["modification_prompt.json"]["template"],
    )


def _run_prompt_series(stage: AnalysisStage, prompts, image: bytes,
                       backend: ChatBackend, model_name: str) -> AnalysisText:
    if not image:
        raise ValueError(f"{stage.value} analysis needs a non-empty image")
    sections = []
    for i, prompt in enumerate(prompts, start=1):
        session = backend.open_session(system=None, model_name=model_name)
        try:
            reply = session.send(prompt, images=[image])
        except Exception as e:
            raise AnalysisError(stage.value, i, str(e)) from e
        sections.append((prompt, reply))
    return AnalysisText(stage=stage, sections=tuple(sections))


def run_rgb_analysis(rgb_image: bytes, backend: ChatBackend,
                     corpus: PromptCorpus, model_name: str = "") -> AnalysisText:
    """Walk the 14 scene-description prompts over the true-color image.

    Each prompt is an independent single-turn exchange with the image
    attached, so one derailed answer cannot contaminate the rest.
    """
    return _run_prompt_series(AnalysisStage.RGB, corpus.rgb_prompts,
                              rgb_image, backend, model_name)


def run_moisture_analysis(moisture_image: bytes, backend: ChatBackend,
                          corpus: PromptCorpus,
                          model_name: str = "") -> AnalysisText:
    """Walk the 7 heat/moisture prompts over the moisture rendering."""
    return _run_prompt_series(AnalysisStage.MOISTURE, corpus.moisture_prompts,
                              moisture_image, backend, model_name)


def run_water_analysis(water_image: bytes, water_share: float,
                       backend: ChatBackend, corpus: PromptCorpus,
                       significance_cutoff: float = 0.001,
                       model_name: str = "") -> AnalysisText | None:
    """Interrogate the preprocessed water map, if there is enough water.

    Below the significance cutoff the stage deliberately produces
    nothing (no artifact, not a failure). Each of the three user prompts
    starts a fresh chat carrying the shared water system prompt.
    """
    if water_share < significance_cutoff:
        return None
    if not water_image:
        raise ValueError("water analysis needs a non-empty image")
    sections = []
    for i, prompt in enumerate(corpus.water_user_prompts, start=1):
        session = backend.open_session(system=corpus.water_system,
                                       model_name=model_name)
        try:
            reply = session.send(prompt, images=[water_image])
        except Exception as e:
            raise AnalysisError(AnalysisStage.WATER.value, i, str(e)) from e
        sections.append((prompt, reply))
    return AnalysisText(stage=AnalysisStage.WATER, sections=tuple(sections))


def apply_water_modification(rgb_image: bytes, rgb_text: str,
                             water_text: str | None,
                             backend: ChatBackend, corpus: PromptCorpus,
                             model_name: str = "") -> AnalysisText | None:
    """Re-evaluate the RGB analysis in light of the water findings.

    Takes the rendered rgb and water analysis texts. Without a water
    text there is nothing to fold in and the original analysis stands
    (returns None). Otherwise a single exchange embeds both texts
    verbatim, re-attaches the RGB image, and the reply becomes revision
    2 of the RGB analysis.
    """
    if water_text is None:
        return None
    instruction = (corpus.modification_template
                   .replace(MOD_WATER_PLACEHOLDER, water_text)
                   .replace(MOD_RGB_PLACEHOLDER, rgb_text))
    session = backend.open_session(system=None, model_name=model_name)
    try:
        reply = session.send(instruction, images=[rgb_image])
    except Exception as e:
        raise AnalysisError(AnalysisStage.RGB_MODIFIED.value, 1, str(e)) from e
    return AnalysisText(stage=AnalysisStage.RGB_MODIFIED,
                        sections=((instruction, reply),))


def generate_climate_report(location: str, rgb_current: str,
                            moisture_text: str, backend: ChatBackend,
                            corpus: PromptCorpus,
                            model_name: str = "") -> AnalysisText:
    """Synthesize the climate report from the analysis texts.

    One session under the report system prompt: the first turn names the
    location, the second substitutes the full rgb and moisture texts into
    the hand-off template; the final assistant reply is the report.
    """
    if not location.strip():
        raise MissingPlaceholderInputError("location must be non-empty")
    if not rgb_current.strip():
        raise MissingPlaceholderInputError("rgb analysis text is missing")
    if not moisture_text.strip():
        raise MissingPlaceholderInputError("moisture analysis text is missing")
    turn1 = corpus.report_user_templates[0].replace(LOCATION_PLACEHOLDER, location)
    turn2 = (corpus.report_user_templates[1]
             .replace(RGB_TEXT_PLACEHOLDER, rgb_current)
             .replace(MOISTURE_TEXT_PLACEHOLDER, moisture_text))
    session = backend.open_session(system=corpus.report_system,
                                   model_name=model_name)
    try:
        intro_reply = session.send(turn1)
        report = session.send(turn2)
    except Exception as e:
        raise AnalysisError(AnalysisStage.REPORT.value,
                            len(session.history) // 2 + 1, str(e)) from e
    return AnalysisText(stage=AnalysisStage.REPORT,
                        sections=((turn1, intro_reply), (turn2, report)),
                        heading=f"# Climate report: {location}")


def assemble_downstream_prompt(report_text: str, location: str) -> str:
    """Bundle the report into a paste-ready prompt for an external assistant.

    A fixed framing line asking for an adaptation strategy, then the full
    report verbatim. None of the corpus system prompts belong here; the
    downstream system brings its own instructions.
    """
    if not location.strip():
        raise ValueError("location must be non-empty")
    framing = (
        f"Please develop a climate adaptation strategy for {location} "
        "based on the following climate report.\n\n"
    )
    return framing + report_text
