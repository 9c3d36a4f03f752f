"""Command-line front end for the feeder vision-trap pipeline.

Commands chain the library stages and write fixed-name artifacts under the
output directory: poses.json, records.jsonl, confusion.csv/.json,
confusion_reduced.csv, merges.json, trap_matrix.csv/.json, design.json,
design.csv, simulate.json, report.txt. Every command is deterministic for a
fixed --seed: identical runs produce byte-identical files.

Exit codes: 0 success, 1 internal error, 2 input/geometry/usage error,
3 search-cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import confusion as cf
from . import designer as dz
from . import synthetic_vision as sv
from . import transitions as tr
from .errors import InputError, SearchCapExceeded
from .geometry import load_mesh
from .stable_poses import PoseSet, TrackConfig, identify_stable_poses


@dataclass
class RunConfig:
    """Pipeline knobs; JSON config file values are overridden by CLI flags."""

    mesh: str | None = None
    poses: str | None = None
    records: str | None = None
    catalog: str | None = None
    out: str = "out"
    part_id: str = "part"
    wall_side: str = "right"
    surface_tilt: float = 0.05
    n_samples: int = 10000
    cluster_threshold: float = 0.1
    seed: int = 0
    resolution: int = 96
    pixels_per_meter: float = 48.0
    yaw_jitter_std: float = 0.02
    translation_jitter_std: float = 0.006
    pixel_flip_rate: float = 0.002
    samples_per_pose: int = 40
    tau: float = 0.9
    allow: list[int] | None = None
    target: list[int] | None = None
    target_n: int | None = None
    purity_min: float = 0.99
    k_slots: int = 1
    mode: str = dz.MODE_YIELD
    vision_policy: str = dz.POLICY_ONE_VISION
    search_cap: int = dz.DEFAULT_SEARCH_CAP
    top_k: int = 20
    n_parts: int = 100000
    simulate: bool = False
    slots: str | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        values: dict = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            if not path.exists():
                raise InputError(f"config file not found: {path}")
            try:
                values.update(json.loads(path.read_text()))
            except json.JSONDecodeError as exc:
                raise InputError(f"config file is not valid JSON: {exc}") from exc
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        for name in names:
            flag = getattr(args, name, None)
            if flag is not None:
                values[name] = flag
        return cls(**values)

    def track(self) -> TrackConfig:
        return TrackConfig(wall_side=self.wall_side, surface_tilt=self.surface_tilt)

    def observation(self) -> sv.ObservationConfig:
        return sv.ObservationConfig(
            resolution=self.resolution,
            pixels_per_meter=self.pixels_per_meter,
            yaw_jitter_std=self.yaw_jitter_std,
            translation_jitter_std=self.translation_jitter_std,
            pixel_flip_rate=self.pixel_flip_rate,
            samples_per_pose=self.samples_per_pose,
            seed=self.seed,
        )


def _read_bytes(path_str: str | None, what: str) -> bytes:
    if not path_str:
        raise InputError(f"missing required input: {what}")
    path = Path(path_str)
    if not path.exists():
        raise InputError(f"{what} file not found: {path}")
    return path.read_bytes()


def _load_mesh(cfg: RunConfig):
    data = _read_bytes(cfg.mesh, "mesh")
    suffix = Path(cfg.mesh).suffix.lower()
    fmt = {"obj": "obj-ascii", "stl": "stl-binary"}.get(suffix.lstrip("."))
    if fmt is None:
        raise InputError(f"cannot infer mesh format from suffix {suffix!r} (use .obj or .stl)")
    return load_mesh(data, fmt)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _compute_poses(cfg: RunConfig) -> PoseSet:
    if cfg.poses:
        return PoseSet.from_json(_read_bytes(cfg.poses, "poses").decode("utf-8"))
    mesh = _load_mesh(cfg)
    return identify_stable_poses(
        mesh,
        cfg.track(),
        n_samples=cfg.n_samples,
        threshold=cfg.cluster_threshold,
        seed=cfg.seed,
        part_id=cfg.part_id,
    )


def _load_or_generate_records(cfg: RunConfig, poses: PoseSet | None = None):
    if cfg.records:
        return sv.load_records(_read_bytes(cfg.records, "records"))
    if poses is None:
        poses = _compute_poses(cfg)
    mesh = _load_mesh(cfg)
    return sv.generate_dataset(mesh, poses, cfg.observation())


def _require_allowed(cfg: RunConfig) -> tr.VisionTrapConfig:
    if cfg.allow is None:
        raise InputError("this command needs --allow (comma-separated pose ids, or empty)")
    return tr.VisionTrapConfig(allowed=frozenset(cfg.allow), tau=cfg.tau)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_poses(cfg: RunConfig) -> int:
    poses = _compute_poses(cfg)
    out = _out_dir(cfg)
    (out / "poses.json").write_text(poses.to_json())
    print(f"N = {len(poses)}")
    print("id  support_face  wall_edge  prior")
    for p in poses.poses:
        print(f"{p.id:<3d} {p.support_face:>12d} {p.wall_edge:>10d}  {p.prior:.6f}")
    print(f"wrote {out / 'poses.json'}")
    return 0


def cmd_dataset(cfg: RunConfig) -> int:
    poses = _compute_poses(cfg)
    records = _load_or_generate_records(cfg, poses)
    out = _out_dir(cfg)
    (out / "records.jsonl").write_bytes(sv.records_to_jsonl(records))
    print(f"wrote {len(records)} records to {out / 'records.jsonl'}")
    return 0


def cmd_confusion(cfg: RunConfig) -> int:
    poses = _compute_poses(cfg)
    records = _load_or_generate_records(cfg, poses)
    matrix = cf.confusion_matrix(records, poses.priors)
    out = _out_dir(cfg)
    (out / "confusion.csv").write_text(matrix.to_csv())
    (out / "confusion.json").write_text(matrix.to_json())
    print(f"confusion matrix: n={matrix.n}, score={cf.score(matrix)!r}")
    if cfg.target_n is not None:
        if not 1 <= cfg.target_n <= matrix.n:
            raise InputError(f"--target-n must be in 1..{matrix.n}")
        reduced, partition = cf.reduce(matrix, cfg.target_n)
        (out / "confusion_reduced.csv").write_text(reduced.to_csv())
        (out / "merges.json").write_text(partition.to_json())
        print(f"reduced to n={reduced.n} with {len(partition.order)} merges")
        for step in partition.order:
            print(f"  merged {list(step.merged_ids)} -> score {step.score_after!r}")
    print(f"wrote {out / 'confusion.csv'}")
    return 0


def cmd_reduce(cfg: RunConfig) -> int:
    if cfg.target_n is None:
        raise InputError("reduce needs --target-n")
    return cmd_confusion(cfg)


def cmd_trap_matrix(cfg: RunConfig) -> int:
    vision_cfg = _require_allowed(cfg)
    records = _load_or_generate_records(cfg)
    trap = tr.vision_trap_matrix(records, vision_cfg)
    out = _out_dir(cfg)
    (out / "trap_matrix.csv").write_text(trap.to_csv())
    (out / "trap_matrix.json").write_text(
        json.dumps(
            {"label": trap.label, "n": trap.n,
             "matrix": [float(v) for v in trap.entries.ravel()]},
            sort_keys=True, indent=2,
        )
    )
    diag = [float(trap.entries[j, j]) for j in range(trap.n)]
    print("pass fraction per pose:", " ".join(f"{v:.4f}" for v in diag))
    print(f"wrote {out / 'trap_matrix.csv'}")
    return 0


def _build_problem(cfg: RunConfig, poses: PoseSet, records) -> dz.DesignProblem:
    catalog = []
    if cfg.catalog:
        catalog = tr.load_catalog(_read_bytes(cfg.catalog, "catalog"))
    return dz.DesignProblem(
        priors=tr.initial_distribution(poses.priors),
        target=frozenset(cfg.target or []),
        mode=cfg.mode,
        purity_min=cfg.purity_min,
        k_slots=cfg.k_slots,
        mechanical_catalog=catalog,
        vision_records=records,
        tau=cfg.tau,
        vision_policy=cfg.vision_policy,
        search_cap=cfg.search_cap,
    )


def cmd_design(cfg: RunConfig) -> int:
    poses = _compute_poses(cfg)
    records = _load_or_generate_records(cfg, poses)
    problem = _build_problem(cfg, poses, records)
    size = dz.search_size(problem)
    results = dz.search(problem, top_k=cfg.top_k)
    sim_tv = None
    if cfg.simulate:
        sim_tv = []
        for r in results:
            empirical = dz.simulate_flow(r.candidate, problem, cfg.n_parts, cfg.seed)
            sim_tv.append(0.5 * float(np.abs(empirical - r.output).sum()))
    out = _out_dir(cfg)
    payload = [r.to_dict(cfg.tau) for r in results]
    if sim_tv is not None:
        for entry, tv in zip(payload, sim_tv):
            entry["simulated_tv"] = tv
    (out / "design.json").write_text(json.dumps(payload, sort_keys=True, indent=2))
    (out / "design.csv").write_text(dz.results_to_csv(results, cfg.tau))
    print(f"searched {size} candidates, {len(results)} ranked (top {cfg.top_k})")
    for entry in payload[:5]:
        line = (
            f"#{entry['rank']} slots={entry['slots']} "
            f"yield={entry['yield']:.4f} purity={entry['purity']:.4f}"
        )
        if "simulated_tv" in entry:
            line += f" sim_tv={entry['simulated_tv']:.4f}"
        print(line)
    print(f"wrote {out / 'design.json'}")
    return 0


def _parse_slots(text: str) -> dz.Candidate:
    slots = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        kind, _, value = token.partition(":")
        if kind not in ("mech", "vision") or not value.isdigit():
            raise InputError(f"bad slot spec {token!r}; use mech:<index> or vision:<bitmask>")
        slots.append((kind, int(value)))
    if not slots:
        raise InputError("empty --slots specification")
    return dz.Candidate(slots=tuple(slots))


def cmd_simulate(cfg: RunConfig) -> int:
    if not cfg.slots:
        raise InputError("simulate needs --slots, e.g. 'vision:5' or 'mech:0,vision:3'")
    candidate = _parse_slots(cfg.slots)
    poses = _compute_poses(cfg)
    records = _load_or_generate_records(cfg, poses)
    saved_k = len(candidate.slots)
    cfg.k_slots = saved_k if saved_k in (1, 2, 3) else cfg.k_slots
    problem = _build_problem(cfg, poses, records)
    result = dz.evaluate(candidate, problem)
    empirical = dz.simulate_flow(candidate, problem, cfg.n_parts, cfg.seed)
    tv = 0.5 * float(np.abs(empirical - result.output).sum())
    out = _out_dir(cfg)
    (out / "simulate.json").write_text(
        json.dumps(
            {
                "slots": candidate.describe(cfg.tau),
                "linear_output": [float(v) for v in result.output],
                "empirical_output": [float(v) for v in empirical],
                "tv_distance": tv,
                "n_parts": cfg.n_parts,
                "seed": cfg.seed,
            },
            sort_keys=True, indent=2,
        )
    )
    print(f"TV(linear, empirical) = {tv:.6f} over {cfg.n_parts} parts")
    print(f"wrote {out / 'simulate.json'}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    vision_cfg = _require_allowed(cfg)
    records = _load_or_generate_records(cfg)
    report = evaluation_report(records, vision_cfg)
    out = _out_dir(cfg)
    text = report.format_table()
    (out / "report.txt").write_text(text)
    print(text, end="")
    print(f"wrote {out / 'report.txt'}")
    return 0


@dataclass(frozen=True)
class EvaluationReport:
    """Pass/reject outcome counts for labeled records against one vision
    configuration."""

    part_id: str
    true_positives: int
    true_negatives: int
    false_positives: int
    false_negatives: int

    @property
    def total(self) -> int:
        return (self.true_positives + self.true_negatives
                + self.false_positives + self.false_negatives)

    def format_table(self) -> str:
        rows = [
            ("True positives", self.true_positives),
            ("True negatives", self.true_negatives),
            ("False positives", self.false_positives),
            ("False negatives", self.false_negatives),
            ("Total", self.total),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"Part: {self.part_id}"]
        lines += [f"{name:<{width}}  {count:>6d}" for name, count in rows]
        return "\n".join(lines) + "\n"


def evaluation_report(records, cfg: tr.VisionTrapConfig) -> EvaluationReport:
    """Count TP/TN/FP/FN for the pass rule P(allowed set | observation) > tau."""
    records = list(records)
    if not records:
        raise InputError("no records to evaluate")
    idx = [i - 1 for i in sorted(cfg.allowed)]
    tp = tn = fp = fn = 0
    for r in records:
        passed = float(r.dist[idx].sum()) > cfg.tau if idx else False
        desired = r.true_pose in cfg.allowed
        if passed and desired:
            tp += 1
        elif passed and not desired:
            fp += 1
        elif not passed and desired:
            fn += 1
        else:
            tn += 1
    return EvaluationReport(
        part_id=records[0].part_id,
        true_positives=tp, true_negatives=tn,
        false_positives=fp, false_negatives=fn,
    )


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedtrap",
        description="Vision-trap configuration pipeline for vibratory part feeders",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--mesh", help="part mesh (.obj ascii or .stl binary)")
        p.add_argument("--poses", help="existing poses.json (skips settling)")
        p.add_argument("--records", help="existing records.jsonl (skips rendering)")
        p.add_argument("--catalog", help="mechanical trap catalog JSON")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--part-id", dest="part_id", help="part identifier")
        p.add_argument("--wall-side", dest="wall_side", choices=["left", "right"])
        p.add_argument("--surface-tilt", dest="surface_tilt", type=float)
        p.add_argument("--samples", dest="n_samples", type=int, help="settling samples")
        p.add_argument("--threshold", dest="cluster_threshold", type=float,
                       help="pose clustering angle, radians")
        p.add_argument("--seed", type=int)
        p.add_argument("--resolution", type=int)
        p.add_argument("--pixels-per-meter", dest="pixels_per_meter", type=float)
        p.add_argument("--yaw-jitter", dest="yaw_jitter_std", type=float)
        p.add_argument("--translation-jitter", dest="translation_jitter_std", type=float)
        p.add_argument("--flip-rate", dest="pixel_flip_rate", type=float)
        p.add_argument("--samples-per-pose", dest="samples_per_pose", type=int)
        p.add_argument("--tau", type=float)
        p.add_argument("--allow", type=_int_list, help="allowed pose ids, comma-separated")
        p.add_argument("--target", type=_int_list, help="desired pose ids, comma-separated")
        p.add_argument("--target-n", dest="target_n", type=int)
        p.add_argument("--purity-min", dest="purity_min", type=float)
        p.add_argument("--k-slots", dest="k_slots", type=int)
        p.add_argument("--mode", choices=[dz.MODE_YIELD, dz.MODE_MATCH])
        p.add_argument("--vision-policy", dest="vision_policy",
                       choices=[dz.POLICY_ONE_VISION, dz.POLICY_NO_VISION])
        p.add_argument("--search-cap", dest="search_cap", type=int)
        p.add_argument("--top-k", dest="top_k", type=int)
        p.add_argument("--n-parts", dest="n_parts", type=int)
        p.add_argument("--simulate", action="store_const", const=True, default=None)
        p.add_argument("--slots", help="candidate slots, e.g. 'mech:0,vision:5'")
        return p

    add("poses", "enumerate stable poses and priors from a mesh")
    add("dataset", "generate classification records for the stable poses")
    add("confusion", "build (and optionally reduce) the confusion matrix")
    add("reduce", "alias of confusion with a required --target-n")
    add("trap-matrix", "estimate the vision trap transition matrix")
    add("design", "brute-force search over trap sequences")
    add("simulate", "Monte Carlo flow check for one candidate")
    add("report", "TP/TN/FP/FN evaluation of a vision configuration")
    return parser


COMMANDS = {
    "poses": cmd_poses,
    "dataset": cmd_dataset,
    "confusion": cmd_confusion,
    "reduce": cmd_reduce,
    "trap-matrix": cmd_trap_matrix,
    "design": cmd_design,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        return COMMANDS[args.command](cfg)
    except SearchCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
