"""Exception hierarchy shared across the pipeline.

Every error raised by this package derives from :class:`EcoScapesError`,
so callers (and the CLI) can catch one base type and still tell failure
modes apart by subclass.
"""

from __future__ import annotations


class EcoScapesError(Exception):
    """Base class for all errors raised by this package."""


# --- geocoding ---------------------------------------------------------


class NoMatchError(EcoScapesError):
    """The geocoding service returned no result for the query."""


class ServiceUnreachableError(EcoScapesError):
    """A remote service could not be reached (transport failure)."""


class MalformedResponseError(EcoScapesError):
    """A remote service replied with something we cannot parse."""


class PolarRegionError(EcoScapesError):
    """Bounding-box construction rejected a near-polar center."""


# --- satellite acquisition --------------------------------------------


class IncompleteManualSetError(EcoScapesError):
    """A manual image folder exists but lacks some of the three files."""

    def __init__(self, location: str, missing: list[str]):
        self.location = location
        self.missing = sorted(missing)
        super().__init__(
            f"manual image set for {location!r} is incomplete, "
            f"missing: {', '.join(self.missing)}"
        )


class UnreadableImageError(EcoScapesError):
    """An image file exists but could not be decoded."""


class NoEligibleSceneError(EcoScapesError):
    """No scene passed the cloud-cover filter in the search window."""


class BandUnavailableError(EcoScapesError):
    """The process API did not return a requested band."""


class GeometryMismatchError(EcoScapesError):
    """Two rasters that must share width/height/mask geometry do not."""


class ConfigurationError(EcoScapesError):
    """The run cannot proceed because required configuration is absent."""


class AcquisitionError(EcoScapesError):
    """Image acquisition failed; names the stage that broke."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"acquisition failed at stage {stage!r}: {message}")


# --- pipeline engine ---------------------------------------------------


class CycleDetectedError(EcoScapesError):
    """The dependency graph contains a cycle."""

    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("dependency cycle: " + " -> ".join(cycle + cycle[:1]))


class MissingHardDependencyError(EcoScapesError):
    """A module declares a hard dependency on an unknown module id."""


class DuplicateArtifactError(EcoScapesError):
    """A module tried to overwrite an artifact without declaring a revision."""


# --- chat backends -----------------------------------------------------


class BackendUnconfiguredError(EcoScapesError):
    """The chat backend is missing its endpoint or credentials."""


class TransportError(EcoScapesError):
    """The chat request failed at the transport level."""


class RateLimitedError(EcoScapesError):
    """The chat service kept rate-limiting after all retries."""

    def __init__(self, attempts: int):
        self.attempts = attempts
        super().__init__(f"rate limited after {attempts} attempts")


class MalformedReplyError(EcoScapesError):
    """The chat service replied without the expected fields."""


# --- analysis suite ----------------------------------------------------


class MissingCorpusError(EcoScapesError):
    """A prompt corpus file is absent."""


class ChecksumMismatchError(EcoScapesError):
    """A prompt corpus file does not match its pinned checksum."""


class AnalysisError(EcoScapesError):
    """An analysis stage failed; carries the 1-based prompt index."""

    def __init__(self, stage: str, prompt_index: int, message: str):
        self.stage = stage
        self.prompt_index = prompt_index
        super().__init__(
            f"{stage} analysis failed at prompt {prompt_index}: {message}"
        )


class MissingPlaceholderInputError(EcoScapesError):
    """Report synthesis is missing a text that a template placeholder needs."""


# --- evaluation harness ------------------------------------------------


class OutOfRangeError(EcoScapesError):
    """A rubric score is outside the 0-5 integer scale."""


class DuplicateKeyError(EcoScapesError):
    """A score record conflicts with an existing one for the same key."""


class EmptyInputError(EcoScapesError):
    """A summary was requested over an empty list of scores."""


class NoDataError(EcoScapesError):
    """No score records exist for the requested slice."""


# --- configuration -----------------------------------------------------


class UnknownKeyError(EcoScapesError):
    """The config file contains a key this package does not define."""


class OutOfRangeValueError(EcoScapesError):
    """A config value is outside its documented range."""


class MissingTokenError(EcoScapesError):
    """A remote backend is configured but no API token is resolvable."""
