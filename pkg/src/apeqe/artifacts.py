"""Provenance sidecars: every artifact records its producing command,
effective-config hash, and seed, so incompatible stage outputs cannot be
mixed silently.  Sidecar content is fully deterministic (no timestamps),
which keeps re-runs byte-identical."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

FORMAT_VERSION = "1"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(effective_config: dict) -> str:
    return hashlib.sha256(canonical_json(effective_config).encode("utf-8")).hexdigest()


def sidecar_path(artifact: str | Path) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + ".meta.json")


def write_sidecar(artifact: str | Path, command: str, effective_config: dict,
                  seed: int | None) -> None:
    meta = {
        "command": command,
        "config_hash": config_hash(effective_config),
        "seed": seed,
        "format_version": FORMAT_VERSION,
    }
    sidecar_path(artifact).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")


def read_sidecar(artifact: str | Path) -> dict:
    return json.loads(sidecar_path(artifact).read_text(encoding="utf-8"))
