"""Run manifests: a JSON snapshot of everything needed to reproduce a run,
written before the run starts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Config snapshot, input hashes, and planned outputs of one run."""

    command: str
    version: str
    seed: int
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    created: str = ""

    @classmethod
    def create(
        cls,
        command: str,
        version: str,
        seed: int,
        config: dict,
        input_paths: list[str | Path],
        output_paths: list[str | Path],
    ) -> "RunManifest":
        return cls(
            command=command,
            version=version,
            seed=seed,
            config=config,
            inputs={str(p): sha256_file(p) for p in input_paths},
            outputs=[str(p) for p in output_paths],
            created=datetime.now(timezone.utc).isoformat(),
        )

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def verify_inputs(self) -> None:
        """Recompute input hashes; raise ValueError on any mismatch."""
        for path, recorded in self.inputs.items():
            actual = sha256_file(path)
            if actual != recorded:
                raise ValueError(
                    f"input {path} changed since the manifest was written "
                    f"(recorded {recorded[:12]}, found {actual[:12]})"
                )
