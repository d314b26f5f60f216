"""Provenance manifests for CLI-produced artifacts.

Every command writes a ``<artifact>.manifest.json`` sidecar recording the
resolved configuration, input file digests, and tool version. The manifest
digest covers only those deterministic parts (never the timestamp), so
artifacts that embed it stay byte-identical across reruns.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from regrag import __version__


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


@dataclass
class RunManifest:
    command: str
    config: dict
    input_digests: dict[str, str]
    tool_version: str
    created_at: str

    @classmethod
    def create(cls, command: str, config: dict, inputs: list[str | Path]) -> "RunManifest":
        return cls(
            command=command,
            config=config,
            input_digests={str(p): file_digest(p) for p in inputs},
            tool_version=__version__,
            created_at=datetime.now(timezone.utc).isoformat(),
        )

    def digest(self) -> str:
        # Input digests enter by content only (not path), so identical
        # pipelines run from different directories agree byte-for-byte.
        payload = json.dumps(
            {
                "command": self.command,
                "config": self.config,
                "inputs": sorted(self.input_digests.values()),
                "tool_version": self.tool_version,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def write_sidecar(self, artifact_path: str | Path) -> str:
        """Write ``<artifact>.manifest.json`` and return the manifest digest."""
        digest = self.digest()
        payload = {
            "command": self.command,
            "config": self.config,
            "created_at": self.created_at,
            "digest": digest,
            "input_digests": self.input_digests,
            "tool_version": self.tool_version,
        }
        sidecar = Path(str(artifact_path) + ".manifest.json")
        sidecar.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return digest
