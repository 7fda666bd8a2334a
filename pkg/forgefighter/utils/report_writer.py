"""
Ordered report writer.

All files of a report go through one writer, which keeps the write order fixed
and produces byte-stable JSON and CSV.
"""

import json
import logging
import os

logger = logging.getLogger(__name__)


class ReportWriter:
    """Writes report files under one directory in call order."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.written = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def _record(self, name):
        self.written.append(name)
        logger.debug(f"Wrote {self.path(name)}")
        return self.path(name)

    def write_text(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return self._record(name)

    def write_json(self, name, payload):
        return self.write_text(name, json.dumps(payload, sort_keys=True, indent=2) + "\n")

    def write_jsonl(self, name, rows):
        return self.write_text(name, "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))

    def write_csv(self, name, frame):
        """Write a pandas DataFrame without its index."""
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as f:
            frame.to_csv(f, index=False, float_format="%.12g")
        return self._record(name)

    def subdir(self, name):
        os.makedirs(self.path(name), exist_ok=True)
        return self.path(name)
