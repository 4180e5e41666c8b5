"""Train a lightweight relevance reranker from exported question/context pairs.

The model is a logistic regression over hashed bag-of-words features of the
concatenated question ⊕ context. The concatenation template and the
positive/negative token names are recorded in the artifact metadata so the
label convention travels with the model.
"""
from __future__ import annotations

import json
import math
import random
import re
import zlib
from pathlib import Path

import numpy as np

from . import SidecarError

ARTIFACT_FORMAT = "pagehop-reranker/1"
PAIRS_HEADER = "#pagehop-pairs/1"
TEMPLATE = "{question} [SEP] {context}"
POSITIVE_TOKEN = "relevant"
NEGATIVE_TOKEN = "irrelevant"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def read_pairs_tsv(path: str | Path) -> list[tuple[str, str, int]]:
    """(question, context, label) rows from the exported TSV; label 1 = pos."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SidecarError(f"cannot read pairs file {path}: {exc}") from exc
    if not lines or not lines[0].startswith(PAIRS_HEADER):
        raise SidecarError(f"{path}:1: expected a {PAIRS_HEADER} header line")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 4 or fields[2] not in ("pos", "neg"):
            raise SidecarError(f"{path}:{lineno}: malformed pair row")
        rows.append((fields[0], fields[1], 1 if fields[2] == "pos" else 0))
    if not rows:
        raise SidecarError(f"{path}: no training pairs")
    return rows


def _features(question: str, context: str, dim: int, template: str = TEMPLATE) -> np.ndarray:
    text = template.format(question=question, context=context)
    idx = sorted({zlib.crc32(t.encode("utf-8")) % dim for t in _TOKEN_RE.findall(text.lower())})
    return np.asarray(idx, dtype=np.int64)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def train_reranker(pairs_file: str | Path, out_path: str | Path,
                   epochs: int = 1, seed: int = 0, dim: int = 4096,
                   learning_rate: float = 0.5) -> Path:
    """SGD logistic regression; seeded shuffling makes the artifact
    reproducible for identical inputs."""
    rows = read_pairs_tsv(pairs_file)
    rng = random.Random(seed)
    examples = [(_features(q, c, dim), y) for q, c, y in rows]
    weights = np.zeros(dim, dtype=np.float64)
    bias = 0.0
    order = list(range(len(examples)))
    for _ in range(max(1, epochs)):
        rng.shuffle(order)
        for i in order:
            idx, y = examples[i]
            p = _sigmoid(float(weights[idx].sum()) + bias)
            grad = p - y
            weights[idx] -= learning_rate * grad
            bias -= learning_rate * grad
    artifact = {
        "format": ARTIFACT_FORMAT,
        "dim": dim,
        "weights": weights.tolist(),
        "bias": bias,
        "template": TEMPLATE,
        "positive_token": POSITIVE_TOKEN,
        "negative_token": NEGATIVE_TOKEN,
        "epochs": epochs,
        "seed": seed,
        "trained_pairs": len(rows),
    }
    out_path = Path(out_path)
    out_path.write_text(json.dumps(artifact, sort_keys=True) + "\n", encoding="utf-8")
    return out_path


def load_artifact(path: str | Path) -> dict:
    path = Path(path)
    try:
        artifact = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SidecarError(f"cannot load reranker artifact {path}: {exc}") from exc
    if artifact.get("format") != ARTIFACT_FORMAT:
        raise SidecarError(f"{path}: unsupported artifact format {artifact.get('format')!r}")
    artifact["weights"] = np.asarray(artifact["weights"], dtype=np.float64)
    return artifact


def score_with_artifact(artifact: dict, pairs: list[tuple[str, str]]) -> list[float]:
    """Positive-token probability per pair, preserving input order."""
    weights = artifact["weights"]
    bias = artifact["bias"]
    dim = artifact["dim"]
    template = artifact.get("template", TEMPLATE)
    return [
        _sigmoid(float(weights[_features(q, c, dim, template)].sum()) + bias)
        for q, c in pairs
    ]
