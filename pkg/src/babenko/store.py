"""Files for waves, branches, spectra and chain reports.

Numbers that must survive a round trip bit-exactly are written as decimal
strings with 17 significant digits.  Wave files carry a SHA-256 checksum of
their canonical payload; a workspace keeps an ``index.json`` listing what has
been written.
"""
import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import grid as g
from .errors import (ChecksumMismatch, InvariantViolation, MonotonicityViolation,
                     ParseError, VersionUnsupported)
from .solver import Branch, BranchPoint, StokesWave, babenko_residual

FORMAT_VERSION = 1
SUPPORTED_VERSIONS = {1}
BRANCH_COLUMNS = ["s", "c", "H", "P", "E", "M_residual", "N"]


def fmt(x):
    return "%.17g" % x


def _digest(payload):
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def file_checksum(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_document(path):
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChecksumMismatch(f"{path}: unreadable or truncated ({exc.msg})") from exc
    if not isinstance(doc, dict) or "checksum" not in doc:
        raise ChecksumMismatch(f"{path}: no checksum")
    version = doc.get("format_version")
    if version not in SUPPORTED_VERSIONS:
        raise VersionUnsupported(f"{path}: format_version {version!r} is not supported")
    expected = doc.pop("checksum")
    if _digest(doc) != expected:
        raise ChecksumMismatch(f"{path}: checksum does not match content")
    return doc, expected


def save_wave(wave, path):
    """Write ``wave`` and return the checksum."""
    doc = {
        "format_version": FORMAT_VERSION,
        "N": int(wave.N),
        "c": fmt(wave.c),
        "s": fmt(wave.s),
        "residual_norm": fmt(wave.residual_norm),
        "tol": fmt(wave.tol),
        "coefficients": [fmt(a) for a in wave.coefficients],
    }
    checksum = _digest(doc)
    doc["checksum"] = checksum
    _write_atomic(path, json.dumps(doc, indent=1))
    return checksum


def load_wave(path, validate=True):
    doc, _ = _load_document(path)
    try:
        N = int(doc["N"])
        coeffs = np.array([float(a) for a in doc["coefficients"]])
        c = float(doc["c"])
        res = float(doc["residual_norm"])
        tol = float(doc["tol"])
        s = float(doc["s"])
    except (KeyError, ValueError, TypeError) as exc:
        raise InvariantViolation(f"{path}: malformed wave record ({exc})") from exc
    if coeffs.size != N // 2 + 1 or not g.is_power_of_two(N):
        raise InvariantViolation(f"{path}: {coeffs.size} coefficients do not fit N={N}")
    wave = StokesWave(coeffs, c, res, tol)
    if validate:
        validate_wave(wave, stored_s=s)
    return wave


def validate_wave(wave, stored_s=None):
    eta = wave.eta.samples
    if not np.any(eta):
        return
    if wave.c <= 1.0:
        raise InvariantViolation(f"speed {wave.c} must exceed 1 for a nonzero profile")
    if stored_s is not None and abs(wave.s - stored_s) > 1e-14 * max(1.0, abs(stored_s)):
        raise InvariantViolation(f"stored steepness {stored_s} does not match the profile ({wave.s})")
    res = g.norm(babenko_residual(eta, wave.c))
    if res > max(2 * wave.residual_norm, wave.tol):
        raise InvariantViolation(
            f"recomputed residual {res:.3e} exceeds stored {wave.residual_norm:.3e} and tol {wave.tol:.1e}")
    mass = g.inner(eta, 1.0 + g.k_op(eta))
    if abs(mass) > 1e-10:
        raise InvariantViolation(f"zero-mean constraint violated ({mass:.3e})")


def save_field(samples, path, name, meta=None):
    """Write a real grid function (for eigenvector components) with a checksum."""
    a = np.asarray(samples, dtype=float)
    doc = {"format_version": FORMAT_VERSION, "kind": "field", "name": name, "N": int(a.size),
           "meta": meta or {}, "samples": [fmt(x) for x in a]}
    checksum = _digest(doc)
    doc["checksum"] = checksum
    _write_atomic(path, json.dumps(doc, indent=1))
    return checksum


def load_field(path):
    doc, _ = _load_document(path)
    return np.array([float(x) for x in doc["samples"]]), doc


def save_branch(branch, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BRANCH_COLUMNS)
    for p in branch.points:
        writer.writerow([fmt(p.s), fmt(p.c), fmt(p.H), fmt(p.P), fmt(p.E), fmt(p.M_residual), str(int(p.N))])
    _write_atomic(path, buf.getvalue())
    return file_checksum(path)


def load_branch(path):
    """Read a branch table; rows must have strictly increasing ``s``."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file", line=1)
    header = [h.strip() for h in lines[0].split(",")]
    if header != BRANCH_COLUMNS:
        raise ParseError(f"{path}: unexpected header {lines[0]!r}", line=1)
    branch = Branch()
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row:
            continue
        if len(row) != len(BRANCH_COLUMNS):
            raise ParseError(f"{path}: expected {len(BRANCH_COLUMNS)} fields, got {len(row)}",
                             line=lineno)
        try:
            vals = [float(x) for x in row[:6]]
            n = int(row[6])
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}", line=lineno) from exc
        pt = BranchPoint(*vals, n)
        if branch.points and not pt.s > branch.points[-1].s:
            raise MonotonicityViolation(
                f"{path}, line {lineno}: s={pt.s!r} does not exceed previous s={branch.points[-1].s!r}")
        branch.points.append(pt)
    return branch


def save_text(text, path):
    _write_atomic(path, text)
    return file_checksum(path)


def save_json(doc, path):
    """Write a report (a dict or an already serialized string)."""
    return save_text(doc if isinstance(doc, str) else json.dumps(doc, indent=1), path)


@dataclass
class IndexEntry:
    kind: str
    path: str
    s: float
    c: float
    N: int
    checksum: str


@dataclass
class ArtifactIndex:
    root: Path
    entries: list = field(default_factory=list)

    KINDS = ("wave", "branch", "spectrum", "chain", "field", "table")

    @classmethod
    def open(cls, root):
        root = Path(root)
        idx = cls(root)
        f = root / "index.json"
        if f.exists():
            doc = json.loads(f.read_text())
            if doc.get("format_version") not in SUPPORTED_VERSIONS:
                raise VersionUnsupported(f"{f}: unsupported index version")
            idx.entries = [IndexEntry(**e) for e in doc.get("entries", [])]
        return idx

    def add(self, kind, path, checksum, s=float("nan"), c=float("nan"), N=0):
        if kind not in self.KINDS:
            raise ValueError(f"unknown artifact kind {kind!r}")
        rel = os.path.relpath(Path(path).resolve(), self.root.resolve())
        self.entries = [e for e in self.entries if e.path != rel]
        self.entries.append(IndexEntry(kind, rel, float(s), float(c), int(N), checksum))

    def save(self):
        doc = {"format_version": FORMAT_VERSION,
               "entries": [asdict(e) for e in self.entries]}
        _write_atomic(self.root / "index.json", json.dumps(doc, indent=1))

    def verify(self):
        """Re-check every listed file; raises ChecksumMismatch on the first bad one."""
        for e in self.entries:
            p = self.root / e.path
            if e.kind in ("wave", "field"):
                _, stored = _load_document(p)
                ok = stored == e.checksum
            else:
                ok = file_checksum(p) == e.checksum
            if not ok:
                raise ChecksumMismatch(f"{p}: checksum differs from index")
