"""Run manifests: a flat key=value record written next to every output.

A manifest captures everything needed to reproduce a run: the command, tool
version, fully resolved parameters (defaults included), input and output
paths, and the wall-clock duration. Two runs are "the same" when every field
except the duration matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._version import __version__


def _stringify(d: dict) -> dict[str, str]:
    out = {}
    for key, val in d.items():
        key = str(key)
        if any(ch in key for ch in "=\n") or key != key.strip():
            raise ValueError(f"manifest key unsuitable for key=value format: {key!r}")
        sval = str(val)
        if "\n" in sval:
            raise ValueError(f"manifest value for {key!r} contains a newline")
        out[key] = sval
    return out


@dataclass
class RunManifest:
    """All parameters and paths of one command invocation."""

    command: str
    params: dict[str, str] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    duration_s: float = 0.0

    def __post_init__(self):
        self.params = _stringify(self.params)
        self.inputs = _stringify(self.inputs)
        self.outputs = _stringify(self.outputs)

    def write(self, path) -> None:
        lines = [
            f"command={self.command}",
            f"version={self.version}",
            f"duration_s={self.duration_s!r}",
        ]
        for prefix, group in (("param", self.params), ("input", self.inputs), ("output", self.outputs)):
            for key in sorted(group):
                lines.append(f"{prefix}.{key}={group[key]}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        command = version = None
        duration = 0.0
        groups: dict[str, dict[str, str]] = {"param": {}, "input": {}, "output": {}}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{line_no}: expected key=value, got {line!r}")
                key, val = line.split("=", 1)
                if key == "command":
                    command = val
                elif key == "version":
                    version = val
                elif key == "duration_s":
                    duration = float(val)
                else:
                    prefix, _, name = key.partition(".")
                    if prefix not in groups or not name:
                        raise ValueError(f"{path}:{line_no}: unknown manifest key {key!r}")
                    groups[prefix][name] = val
        if command is None or version is None:
            raise ValueError(f"{path}: manifest is missing command or version")
        return cls(
            command=command,
            params=groups["param"],
            inputs=groups["input"],
            outputs=groups["output"],
            version=version,
            duration_s=duration,
        )

    def same_run(self, other: "RunManifest") -> bool:
        """True when the two manifests describe the same work, ignoring how
        long it took."""
        return (
            self.command == other.command
            and self.version == other.version
            and self.params == other.params
            and self.inputs == other.inputs
            and self.outputs == other.outputs
        )
