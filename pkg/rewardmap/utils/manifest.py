"""
Run manifests: one manifest.yaml per output directory, enough to replay the command
"""

import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List

import yaml

from rewardmap import __version__
from rewardmap.errors import UsageError

MANIFEST_NAME = "manifest.yaml"


@dataclass
class RunManifest:
    command: str
    argv: List[str]
    config: Dict[str, Any]
    seeds: Dict[str, int]
    inputs: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    tool_version: str = __version__
    substitutes: Dict[str, str] = field(default_factory=dict)

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, MANIFEST_NAME)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            yaml.safe_dump(asdict(self), f, sort_keys=True, default_flow_style=False)
        return path

    @classmethod
    def read(cls, path: str) -> "RunManifest":
        if os.path.isdir(path):
            path = os.path.join(path, MANIFEST_NAME)
        if not os.path.isfile(path):
            raise UsageError(f"Manifest does not exist: {path}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise UsageError(f"Could not parse manifest {path}: {e}")
        if not isinstance(data, dict) or "command" not in data or "argv" not in data:
            raise UsageError(f"{path} is not a run manifest")
        return cls(**data)


def replace_out(argv: List[str], out_dir: str) -> List[str]:
    """Recorded argv with its --out value pointed at a new directory"""
    replaced = []
    skip = False
    for token in argv:
        if skip:
            skip = False
            continue
        if token == "--out":
            skip = True
            continue
        if token.startswith("--out="):
            continue
        replaced.append(token)
    return replaced + ["--out", out_dir]
