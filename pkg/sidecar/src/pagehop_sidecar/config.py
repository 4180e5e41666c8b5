"""Endpoint configuration: which backend serves which op."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import SidecarError

KNOWN_OPS = ("entity_link", "event_link", "decompose", "correct", "score")
PROVIDER_OPS = ("entity_link", "event_link", "decompose", "correct")


@dataclass
class ModelEndpointConfig:
    ops: dict[str, dict]  # op -> {"backend": name, ...backend options}
    device: str = "cpu"
    batch_size: int = 32
    generation: dict = field(default_factory=dict)

    def __post_init__(self):
        for op, spec in self.ops.items():
            if op not in KNOWN_OPS:
                raise SidecarError(f"unknown op {op!r}; known: {', '.join(KNOWN_OPS)}")
            if "backend" not in spec:
                raise SidecarError(f"op {op!r} has no backend configured")

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelEndpointConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SidecarError(f"cannot load config {path}: {exc}") from exc
        return cls(
            ops=data.get("ops", {}),
            device=data.get("device", "cpu"),
            batch_size=data.get("batch_size", 32),
            generation=data.get("generation", {}),
        )


def reference_config(titles_path: str | Path) -> ModelEndpointConfig:
    """All five ops on the deterministic model-free reference backends."""
    titles = str(titles_path)
    return ModelEndpointConfig(ops={
        "entity_link": {"backend": "lexical-link", "titles": titles},
        "event_link": {"backend": "lexical-link", "titles": titles},
        "decompose": {"backend": "template-decompose"},
        "correct": {"backend": "whitespace-correct"},
        "score": {"backend": "overlap-score"},
    })
