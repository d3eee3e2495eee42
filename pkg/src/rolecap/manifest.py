"""Plain-text run manifests: parameters, content digests, stage timings.

Two runs whose manifests agree on everything except `stage.*.seconds`
lines must produce byte-identical outputs; the digest lines make that
checkable after the fact.
"""

from __future__ import annotations

import hashlib
import os


def sha256_file(path, chunk=1 << 22) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            block = fh.read(chunk)
            if not block:
                break
            h.update(block)
    return h.hexdigest()


class RunManifest:
    def __init__(self, tool_version):
        self._rows = [("tool_version", str(tool_version))]

    def set_param(self, key, value):
        self._rows.append((f"param.{key}", _fmt_value(value)))

    def add_input(self, name, path):
        self._rows.append((f"input.{name}.path", os.path.basename(str(path))))
        self._rows.append((f"input.{name}.sha256", sha256_file(path)))

    def add_output(self, name, path):
        self._rows.append((f"output.{name}.path", os.path.basename(str(path))))
        self._rows.append((f"output.{name}.sha256", sha256_file(path)))

    def add_timing(self, stage, seconds):
        self._rows.append((f"stage.{stage}.seconds", f"{seconds:.3f}"))

    def set_result(self, key, value):
        self._rows.append((f"result.{key}", _fmt_value(value)))

    def render(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self._rows)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())


def _fmt_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def strip_timings(text: str) -> str:
    """Manifest text without the stage.*.seconds lines, for comparisons."""
    keep = [line for line in text.splitlines()
            if not (line.startswith("stage.") and ".seconds" in line)]
    return "\n".join(keep) + "\n"
