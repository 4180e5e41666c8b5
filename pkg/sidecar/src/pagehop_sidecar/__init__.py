"""Reference provider/scorer service for the pagehop wire protocols.

Serves entity/event linking, decomposition, correction, and pair scoring
behind swappable backends, and trains a lightweight relevance reranker
from exported question/context pairs.
"""

__version__ = "0.1.0"


class SidecarError(RuntimeError):
    """Bad configuration, unloadable backend, or malformed input file."""
