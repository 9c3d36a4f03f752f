"""Brute-force feeder design search over trap sequences.

A candidate assigns each of K slots either a mechanical trap from the
catalog or the single vision trap in one of its 2^N allowed-set
configurations. Every candidate is evaluated through the linear transition
model; `simulate_flow` is an independent Monte Carlo oracle for the same
quantity. Enumeration order (vision slot position, then vision bitmask,
then catalog indices) is pinned so rankings are reproducible.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import SearchCapExceeded
from .transitions import (
    TransitionMatrix,
    VisionTrapConfig,
    apply,
    chain,
    vision_trap_matrix,
)

MODE_YIELD = "maximize-yield"
MODE_MATCH = "match-distribution"
POLICY_ONE_VISION = "exactly-one"
POLICY_NO_VISION = "none"

DEFAULT_SEARCH_CAP = 10_000_000


@dataclass
class DesignProblem:
    """Inputs of one feeder design search.

    `priors` is the arrival distribution over the N poses plus the discard
    state (last entry zero). `target` is the set D of desired pose ids for
    yield mode; `target_dist` the desired output distribution for match mode.
    """

    priors: np.ndarray
    target: frozenset[int] = frozenset()
    mode: str = MODE_YIELD
    purity_min: float = 0.99
    target_dist: np.ndarray | None = None
    k_slots: int = 1
    mechanical_catalog: list[TransitionMatrix] = field(default_factory=list)
    vision_records: list = field(default_factory=list)
    tau: float = 0.9
    vision_policy: str = POLICY_ONE_VISION
    search_cap: int = DEFAULT_SEARCH_CAP

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=float)
        if abs(float(self.priors.sum()) - 1.0) > 1e-9:
            raise ValueError("priors must sum to 1")
        if abs(float(self.priors[-1])) > 1e-12:
            raise ValueError("arrival distribution must have zero discard mass")
        if self.k_slots not in (1, 2, 3):
            raise ValueError("k_slots must be 1, 2 or 3")
        if self.mode not in (MODE_YIELD, MODE_MATCH):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.vision_policy not in (POLICY_ONE_VISION, POLICY_NO_VISION):
            raise ValueError(f"unknown vision policy {self.vision_policy!r}")
        if self.mode == MODE_YIELD and not self.target:
            raise ValueError("yield mode needs a non-empty target pose set")
        if self.mode == MODE_MATCH:
            if self.target_dist is None:
                raise ValueError("match mode needs target_dist")
            self.target_dist = np.asarray(self.target_dist, dtype=float)
            if self.target_dist.shape != self.priors.shape:
                raise ValueError("target_dist must match the priors shape")
        self.target = frozenset(int(i) for i in self.target)
        if any(not 1 <= i <= self.n for i in self.target):
            raise ValueError("target pose ids outside 1..N")

    @property
    def n(self) -> int:
        return len(self.priors) - 1


@dataclass(frozen=True)
class Candidate:
    """Ordered slot assignment; each slot is ("mech", catalog_index) or
    ("vision", allowed-set bitmask)."""

    slots: tuple[tuple[str, int], ...]

    def describe(self, tau: float) -> list[dict]:
        out = []
        for kind, value in self.slots:
            if kind == "mech":
                out.append({"kind": "mech", "index": value})
            else:
                cfg = VisionTrapConfig.from_bitmask(value, tau)
                out.append(
                    {"kind": "vision", "bitmask": value, "allowed": sorted(cfg.allowed)}
                )
        return out


@dataclass(frozen=True)
class DesignResult:
    candidate: Candidate
    output: np.ndarray  # (N+1,) pose distribution at the feeder exit
    yield_fraction: float  # desired-pose mass delivered
    purity: float  # desired fraction of the non-discarded output
    tv_to_target: float | None  # match mode only
    rank: int

    def to_dict(self, tau: float) -> dict:
        d = {
            "rank": self.rank,
            "slots": self.candidate.describe(tau),
            "output": [float(v) for v in self.output],
            "yield": float(self.yield_fraction),
            "purity": float(self.purity),
        }
        if self.tv_to_target is not None:
            d["tv_to_target"] = float(self.tv_to_target)
        return d


def search_size(problem: DesignProblem) -> int:
    """Exact candidate count for the problem's policy; raises when it
    exceeds the configured cap."""
    m_m = len(problem.mechanical_catalog)
    k = problem.k_slots
    if problem.vision_policy == POLICY_NO_VISION:
        size = m_m**k
    else:
        m_v = 2**problem.n
        size = k * m_v * m_m ** (k - 1)
    if size > problem.search_cap:
        raise SearchCapExceeded(
            f"search space has {size} candidates, over the cap of {problem.search_cap}; "
            "reduce the number of stable poses (a practical target is around 10 to 16) "
            "or lower k_slots",
            size=size,
        )
    return size


def iter_candidates(problem: DesignProblem) -> Iterator[Candidate]:
    """Candidates in pinned order: vision slot position outermost, then
    vision bitmask, then mechanical catalog indices."""
    m_m = len(problem.mechanical_catalog)
    k = problem.k_slots
    if problem.vision_policy == POLICY_NO_VISION:
        for combo in itertools.product(range(m_m), repeat=k):
            yield Candidate(slots=tuple(("mech", i) for i in combo))
        return
    for vision_pos in range(k):
        for bitmask in range(2**problem.n):
            for combo in itertools.product(range(m_m), repeat=k - 1):
                slots = [("mech", i) for i in combo]
                slots.insert(vision_pos, ("vision", bitmask))
                yield Candidate(slots=tuple(slots))


class _VisionCache:
    """Vision trap matrices per allowed-set bitmask, built once per search."""

    def __init__(self, problem: DesignProblem):
        self._problem = problem
        self._cache: dict[int, TransitionMatrix] = {}

    def get(self, bitmask: int) -> TransitionMatrix:
        if bitmask not in self._cache:
            cfg = VisionTrapConfig.from_bitmask(bitmask, self._problem.tau)
            self._cache[bitmask] = vision_trap_matrix(self._problem.vision_records, cfg)
        return self._cache[bitmask]


def _slot_matrices(candidate: Candidate, problem: DesignProblem, cache: _VisionCache):
    mats = []
    for kind, value in candidate.slots:
        if kind == "mech":
            mats.append(problem.mechanical_catalog[value])
        elif kind == "vision":
            mats.append(cache.get(value))
        else:
            raise ValueError(f"unknown slot kind {kind!r}")
    return mats


def _metrics(output: np.ndarray, problem: DesignProblem) -> tuple[float, float, float | None]:
    n = problem.n
    yield_fraction = float(sum(output[i - 1] for i in problem.target))
    kept = 1.0 - float(output[n])
    purity = yield_fraction / kept if kept > 1e-15 else 0.0
    tv = None
    if problem.target_dist is not None:
        target_kept = 1.0 - float(problem.target_dist[n])
        if kept > 1e-15 and target_kept > 1e-15:
            q = output[:n] / kept
            t = problem.target_dist[:n] / target_kept
            tv = 0.5 * float(np.abs(q - t).sum())
        else:
            tv = 1.0
    return yield_fraction, purity, tv


def evaluate(candidate: Candidate, problem: DesignProblem, _cache: _VisionCache | None = None) -> DesignResult:
    """Chain the candidate's slot matrices and push the priors through."""
    cache = _cache or _VisionCache(problem)
    combined = chain(_slot_matrices(candidate, problem, cache))
    output = apply(combined, problem.priors)
    y, purity, tv = _metrics(output, problem)
    return DesignResult(
        candidate=candidate, output=output, yield_fraction=y, purity=purity,
        tv_to_target=tv, rank=0,
    )


def _count_non_identity(candidate: Candidate, problem: DesignProblem, cache: _VisionCache) -> int:
    eye = np.eye(problem.n + 1)
    count = 0
    for mat in _slot_matrices(candidate, problem, cache):
        if not np.allclose(mat.entries, eye, atol=1e-12):
            count += 1
    return count


def search(problem: DesignProblem, top_k: int | None = None) -> list[DesignResult]:
    """Evaluate every candidate and rank deterministically.

    Yield mode keeps candidates with purity >= purity_min and sorts by yield
    (descending), tie-broken by fewer non-identity traps, then enumeration
    order. Match mode sorts by conditional total-variation distance to the
    target (ascending) with the same tie-breaks. Returns [] when nothing is
    feasible.
    """
    size = search_size(problem)
    if size == 0:
        raise ValueError("no candidates: the catalog is empty for this policy")
    cache = _VisionCache(problem)
    yields = np.empty(size)
    purities = np.empty(size)
    tvs = np.empty(size)
    non_identity = np.empty(size, dtype=int)
    for idx, cand in enumerate(iter_candidates(problem)):
        combined = chain(_slot_matrices(cand, problem, cache))
        output = apply(combined, problem.priors)
        y, purity, tv = _metrics(output, problem)
        yields[idx] = y
        purities[idx] = purity
        tvs[idx] = tv if tv is not None else 0.0
        non_identity[idx] = _count_non_identity(cand, problem, cache)

    order = np.arange(size)
    if problem.mode == MODE_YIELD:
        feasible = purities >= problem.purity_min - 1e-12
        order = order[feasible]
        keys = np.lexsort((order, non_identity[order], -yields[order]))
    else:
        keys = np.lexsort((order, non_identity[order], tvs[order]))
    ranked = order[keys]
    if top_k is not None:
        ranked = ranked[:top_k]

    # re-enumerate to materialize only the ranked candidates; the candidate
    # list itself can be too large to keep around
    wanted = {int(i): None for i in ranked}
    for idx, cand in enumerate(iter_candidates(problem)):
        if idx in wanted:
            wanted[idx] = cand
    results = []
    for rank, idx in enumerate(ranked, start=1):
        cand = wanted[int(idx)]
        combined = chain(_slot_matrices(cand, problem, cache))
        output = apply(combined, problem.priors)
        results.append(
            DesignResult(
                candidate=cand,
                output=output,
                yield_fraction=float(yields[idx]),
                purity=float(purities[idx]),
                tv_to_target=float(tvs[idx]) if problem.mode == MODE_MATCH else None,
                rank=rank,
            )
        )
    return results


def simulate_flow(candidate: Candidate, problem: DesignProblem, n_parts: int, seed: int) -> np.ndarray:
    """Monte Carlo oracle: sample part trajectories through the slots and
    return the empirical output distribution (length N+1)."""
    if n_parts < 1000:
        raise ValueError("n_parts must be >= 1000")
    cache = _VisionCache(problem)
    mats = _slot_matrices(candidate, problem, cache)
    rng = np.random.default_rng(seed)
    n = problem.n
    cum_priors = np.cumsum(problem.priors)
    states = np.searchsorted(cum_priors, rng.random(n_parts), side="right")
    states = np.minimum(states, n)
    for mat in mats:
        cum = np.cumsum(mat.entries, axis=0)  # (n+1, n+1), column = source
        u = rng.random(n_parts)
        states = (u[None, :] > cum[:, states]).sum(axis=0)
        states = np.minimum(states, n)
    counts = np.bincount(states, minlength=n + 1)
    return counts / float(n_parts)


def results_to_json(results, tau: float) -> str:
    return json.dumps([r.to_dict(tau) for r in results], sort_keys=True, indent=2)


def results_to_csv(results, tau: float) -> str:
    lines = ["rank,slots,yield,purity,tv_to_target,discard"]
    for r in results:
        slot_desc = ";".join(
            f"mech:{v}" if kind == "mech" else f"vision:{v}" for kind, v in r.candidate.slots
        )
        tv = "" if r.tv_to_target is None else repr(float(r.tv_to_target))
        lines.append(
            f"{r.rank},{slot_desc},{r.yield_fraction!r},{r.purity!r},{tv},{float(r.output[-1])!r}"
        )
    return "\n".join(lines) + "\n"
