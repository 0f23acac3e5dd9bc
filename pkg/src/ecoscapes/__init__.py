"""EcoScapes: localized climate-adaptation reports from satellite imagery.

A batch pipeline that resolves a town name to coordinates, acquires
Sentinel-2 imagery (or picks up manually downloaded images), computes
spectral-index renderings, drives a fixed prompt corpus through a
pluggable multimodal chat backend, and synthesizes the analysis texts
into a single climate report. Execution is orchestrated by a module
engine with hard and soft dependencies, so optional stages may fail
without killing the run.
"""

__version__ = "0.1.0"

from ecoscapes.errors import EcoScapesError

__all__ = ["EcoScapesError", "__version__"]
