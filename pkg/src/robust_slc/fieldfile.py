"""Persistence of trained control fields.

Layout::

    # robust-slc field v1
    # model: coupled_phase
    # horizon_ns: 50.0
    # intervals: 200
    # channels: omega_1[0.0,5.0];omega_2[0.0,5.0];omega_c[-0.1,0.1]
    # seed_train: 0
    # final_J: 0.99...
    # converged: true
    k,t_mid,omega_1,omega_2,omega_c
    0,0.125,...
    ...
    # sha256: <hex digest of every byte above this line>

Floats are written with ``repr`` so a read/write cycle is byte-exact.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .optimizer import ControlField

MAGIC = "# robust-slc field v1"
_CHANNEL = re.compile(r"^([A-Za-z0-9_]+)\[([^,\]]+),([^\]]+)\]$")


class FieldFileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FieldFile:
    model: str
    horizon: float
    names: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    values: np.ndarray
    seed_train: int = 0
    final_J: float = float("nan")
    converged: bool = False

    @classmethod
    def from_field(cls, field: ControlField, model: str, seed_train: int = 0,
                   final_J: float = float("nan"), converged: bool = False) -> "FieldFile":
        names = field.names or tuple(f"u{c}" for c in range(field.channels))
        return cls(model, float(field.horizon), tuple(names), tuple(map(float, field.lower)),
                   tuple(map(float, field.upper)), np.array(field.values), int(seed_train),
                   float(final_J), bool(converged))

    @property
    def intervals(self) -> int:
        return self.values.shape[1]

    def to_field(self) -> ControlField:
        return ControlField(self.values, np.array(self.lower), np.array(self.upper), self.horizon, self.names)

    def to_text(self) -> str:
        channels = ";".join(f"{n}[{lo!r},{hi!r}]" for n, lo, hi in zip(self.names, self.lower, self.upper))
        lines = [
            MAGIC,
            f"# model: {self.model}",
            f"# horizon_ns: {self.horizon!r}",
            f"# intervals: {self.intervals}",
            f"# channels: {channels}",
            f"# seed_train: {self.seed_train}",
            f"# final_J: {self.final_J!r}",
            f"# converged: {'true' if self.converged else 'false'}",
            "k,t_mid," + ",".join(self.names),
        ]
        dt = self.horizon / self.intervals
        for k in range(self.intervals):
            cells = [str(k), repr((k + 0.5) * dt)] + [repr(float(v)) for v in self.values[:, k]]
            lines.append(",".join(cells))
        body = "\n".join(lines) + "\n"
        digest = hashlib.sha256(body.encode()).hexdigest()
        return body + f"# sha256: {digest}\n"

    @classmethod
    def from_text(cls, text: str) -> "FieldFile":
        body, sep, last = text.rstrip("\n").rpartition("\n")
        if not sep or not last.startswith("# sha256: "):
            raise FieldFileError("missing checksum line")
        body += "\n"
        if hashlib.sha256(body.encode()).hexdigest() != last[len("# sha256: "):].strip():
            raise FieldFileError("checksum mismatch: field file is corrupted")
        lines = body.splitlines()
        if not lines or lines[0] != MAGIC:
            raise FieldFileError("not a field file (bad magic line)")
        header = {}
        i = 1
        while i < len(lines) and lines[i].startswith("# "):
            key, _, value = lines[i][2:].partition(": ")
            header[key] = value
            i += 1
        try:
            names, lower, upper = [], [], []
            for item in header["channels"].split(";"):
                m = _CHANNEL.match(item)
                if not m:
                    raise FieldFileError(f"bad channel spec {item!r}")
                names.append(m.group(1))
                lower.append(float(m.group(2)))
                upper.append(float(m.group(3)))
            intervals = int(header["intervals"])
            horizon = float(header["horizon_ns"])
            columns = lines[i].split(",")
            if columns != ["k", "t_mid", *names]:
                raise FieldFileError("column header does not match channel list")
            rows = [line.split(",") for line in lines[i + 1:]]
            if len(rows) != intervals or any(len(r) != len(columns) for r in rows):
                raise FieldFileError("body does not match the declared shape")
            values = np.array([[float(x) for x in r[2:]] for r in rows]).T.reshape(len(names), intervals)
            return cls(header["model"], horizon, tuple(names), tuple(lower), tuple(upper), values,
                       int(header["seed_train"]), float(header["final_J"]), header["converged"] == "true")
        except (KeyError, IndexError, ValueError) as exc:
            if isinstance(exc, FieldFileError):
                raise
            raise FieldFileError(f"malformed field file: {exc}") from None

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path) -> "FieldFile":
        with open(path, newline="") as fh:
            return cls.from_text(fh.read())
