"""Trap transition-matrix algebra and vision-trap construction.

A trap is a column-stochastic linear operator on pose distributions: entry
(i, j) is the probability that a part arriving in pose j leaves in pose i.
State N+1 is the absorbing discard state (rejected parts stay rejected).
Applying trap T to distribution p is the matrix-vector product T @ p, and
`chain([t1, t2, ...])` composes traps so that t1 acts first.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import CatalogError, RecordError, SearchCapExceeded

MAX_VISION_POSES = 20  # 2^N vision configurations beyond this is never sane


@dataclass(frozen=True)
class TransitionMatrix:
    """(N+1) x (N+1) trap operator; column j is the outcome distribution for
    parts arriving in pose j; the last row/column is the discard state."""

    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 2:
            raise ValueError("transition matrix must be square, at least 2x2")
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        """Number of stable poses (matrix order minus the discard state)."""
        return self.entries.shape[0] - 1

    def to_csv(self) -> str:
        labels = [str(i) for i in range(1, self.n + 1)] + ["discard"]
        out = io.StringIO()
        out.write("to\\from," + ",".join(labels) + "\n")
        for name, row in zip(labels, self.entries):
            out.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class VisionTrapConfig:
    """Allowed pose subset and the confidence threshold for passing."""

    allowed: frozenset[int]
    tau: float

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must be in (0, 1)")
        allowed = frozenset(int(i) for i in self.allowed)
        if any(i < 1 for i in allowed):
            raise ValueError("allowed pose ids must be >= 1")
        object.__setattr__(self, "allowed", allowed)

    def to_bitmask(self) -> int:
        return sum(1 << (i - 1) for i in self.allowed)

    @classmethod
    def from_bitmask(cls, bitmask: int, tau: float) -> "VisionTrapConfig":
        allowed = frozenset(i + 1 for i in range(bitmask.bit_length()) if bitmask >> i & 1)
        return cls(allowed=allowed, tau=tau)


def validate(trap: TransitionMatrix) -> ValidationReport:
    """Check column-stochasticity, non-negativity and the absorbing discard."""
    e = trap.entries
    violations = []
    neg = np.argwhere(e < -1e-12)
    if len(neg):
        i, j = neg[0]
        violations.append(f"negative entry {e[i, j]!r} at ({i + 1}, {j + 1})")
    sums = e.sum(axis=0)
    bad = np.where(np.abs(sums - 1.0) > 1e-9)[0]
    if len(bad):
        j = int(bad[0])
        violations.append(f"column {j + 1} sums to {sums[j]!r}, expected 1")
    if abs(e[-1, -1] - 1.0) > 1e-9:
        violations.append(f"discard not absorbing: bottom-right entry is {e[-1, -1]!r}")
    return ValidationReport(ok=not violations, violations=tuple(violations))


def identity_trap(n: int, label: str = "identity") -> TransitionMatrix:
    return TransitionMatrix(entries=np.eye(n + 1), label=label)


def chain(traps) -> TransitionMatrix:
    """Combined operator of a trap sequence; traps[0] acts first:
    chain([t1, t2]) @ p == t2 @ (t1 @ p)."""
    traps = list(traps)
    if not traps:
        raise ValueError("cannot chain an empty trap list")
    n = traps[0].n
    for t in traps:
        if t.n != n:
            raise ValueError(f"trap {t.label!r} has {t.n} poses, expected {n}")
    combined = traps[0].entries
    for t in traps[1:]:
        combined = t.entries @ combined
    return TransitionMatrix(entries=combined, label=">".join(t.label or "?" for t in traps))


def apply(trap: TransitionMatrix, distribution) -> np.ndarray:
    """Pose distribution after the trap: the product T @ p."""
    p = np.asarray(distribution, dtype=float)
    if p.shape != (trap.n + 1,):
        raise ValueError(f"distribution has shape {p.shape}, expected ({trap.n + 1},)")
    return trap.entries @ p


def initial_distribution(priors) -> np.ndarray:
    """Arrival distribution: pose priors with zero mass on the discard state."""
    p = np.asarray(priors, dtype=float)
    out = np.zeros(len(p) + 1)
    out[:-1] = p
    return out


def vision_trap_matrix(records, cfg: VisionTrapConfig) -> TransitionMatrix:
    """Rejection-type trap estimated from classification records.

    Pose j passes iff the summed probability over the allowed set strictly
    exceeds tau; the diagonal entry is the pass fraction over pose-j records
    and the rest of the column mass is discarded.
    """
    records = list(records)
    if not records:
        raise RecordError("no records")
    n = len(records[0].dist)
    if any(i > n for i in cfg.allowed):
        raise ValueError(f"allowed pose ids exceed the record pose count {n}")
    idx = [i - 1 for i in sorted(cfg.allowed)]
    entries = np.zeros((n + 1, n + 1))
    entries[n, n] = 1.0
    for j in range(1, n + 1):
        dists = [r.dist for r in records if r.true_pose == j]
        if not dists:
            raise RecordError(f"pose {j} has no records")
        passes = [1.0 if float(d[idx].sum()) > cfg.tau else 0.0 for d in np.array(dists)]
        frac = float(np.mean(passes))
        entries[j - 1, j - 1] = frac
        entries[n, j - 1] = 1.0 - frac
    label = f"vision(tau={cfg.tau},allow={sorted(cfg.allowed)})"
    return TransitionMatrix(entries=entries, label=label)


def enumerate_vision_configs(n: int, tau: float) -> Iterator[VisionTrapConfig]:
    """All 2^n allowed-set configurations in canonical bitmask order."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > MAX_VISION_POSES:
        raise SearchCapExceeded(
            f"2^{n} vision configurations exceed the hard cap of 2^{MAX_VISION_POSES}; "
            "reduce the pose count first",
            size=2**n,
        )
    for bitmask in range(2**n):
        yield VisionTrapConfig.from_bitmask(bitmask, tau)


def load_catalog(data: bytes) -> list[TransitionMatrix]:
    """Parse a mechanical-trap catalog: {"n": N, "traps": [{label, matrix}]}.

    Matrices are row-major (N+1)^2 entry lists; every trap is validated and
    labels must be unique.
    """
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CatalogError(f"catalog is not valid JSON: {exc}") from exc
    try:
        n = int(obj["n"])
        raw_traps = list(obj["traps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CatalogError(f"catalog must have 'n' and 'traps' ({exc})") from exc
    traps = []
    seen = set()
    side = n + 1
    for k, item in enumerate(raw_traps):
        try:
            label = str(item["label"])
            matrix = np.array(item["matrix"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise CatalogError(f"trap #{k}: malformed entry ({exc})") from exc
        if label in seen:
            raise CatalogError(f"duplicate trap label {label!r}")
        seen.add(label)
        if matrix.size != side * side:
            raise CatalogError(
                f"trap {label!r}: matrix has {matrix.size} entries, expected {side * side}"
            )
        trap = TransitionMatrix(entries=matrix.reshape(side, side), label=label)
        report = validate(trap)
        if not report.ok:
            raise CatalogError(f"trap {label!r}: {report.violations[0]}")
        traps.append(trap)
    return traps


def catalog_to_json(traps) -> str:
    """Inverse of load_catalog, for writing catalogs."""
    traps = list(traps)
    if not traps:
        raise ValueError("empty catalog")
    return json.dumps(
        {
            "n": traps[0].n,
            "traps": [
                {"label": t.label, "matrix": [float(v) for v in t.entries.ravel()]}
                for t in traps
            ],
        },
        sort_keys=True,
        indent=2,
    )
