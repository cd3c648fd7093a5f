"""Synthetic office-scene benchmark: scene generation, event-based scoring
and repeated-measures significance analysis."""

from scenebench.vocab import CLASS_LABELS

__version__ = "0.1.0"

__all__ = ["CLASS_LABELS", "__version__"]
