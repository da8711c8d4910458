"""End-to-end experiment orchestration.

One replicate = one Poisson draw on the padded window, one *joint* pair of
field draws over (Poisson points + local-time grid) from a single covariance
factorization, one triangulation, the increment statistics with their
decompositions, and the local-time estimate -- so statistic and limit target
come from the same realization.

A campaign runs replicates over a ladder of intensities, persists one JSON
record per replicate plus a manifest, and aggregates convergence diagnostics:
correlations between the scaled statistics and c_V * L_hat(0), ratio
trajectories, edge/triangle intensities, and normality diagnostics of the
non-switching parts.  Everything is reproducible from the master seed; worker
scheduling cannot affect results because every replicate owns a named
substream.
"""

from __future__ import annotations

import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np
import scipy.stats

from . import __version__
from .consts import ConstantsReport, compute_constants
from .errors import FracfieldError, InsufficientData
from .field import FieldParams, PointSet, ROLE_GRID, sample_pair
from .geom import WindowSpec, default_pad, sample_poisson, select_ordered, triangulate
from .ltime import default_epsilon, estimate_local_time, grid_points
from .rng import substream
from .stats import IncrementReport, compute_increment_report, scaled_statistics

#: Ratio diagnostics are skipped (not the correlations) when L_hat is below this.
LHAT_GUARD = 0.01

CSV_COLUMNS = (
    "alpha,N,replicates,corr_s2,corr_s3,ratio2_median,ratio2_iqr,"
    "ratio3_median,ratio3_iqr,edges_per_n,triangles_per_n,skew_v2g,kurt_v2g"
)


@dataclass
class RunConfig:
    """Campaign configuration; every default mirrors a recorded design value."""

    alpha: float = 0.5
    sigma2: float = 1.0
    intensities: tuple = (500, 1000, 2000, 4000)
    replicates: int = 30
    grid_m: int = 64
    epsilon_rule: str | float = "h^alpha"
    pad_rule: str | float = "default"
    level: float = 0.0
    seed: int = 20250607
    output_dir: str = "run"
    workers: int = 1
    constants_nodes: int = 161
    constants_samples: int = 1_000_000
    phi2_normalization: str = "standard"

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        self.intensities = tuple(float(n) for n in self.intensities)
        if list(self.intensities) != sorted(self.intensities):
            raise ValueError("intensities must be sorted ascending")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def pad(self, n: float) -> float:
        if isinstance(self.pad_rule, (int, float)):
            return float(self.pad_rule)
        if self.pad_rule == "default":
            return default_pad(n)
        raise ValueError(f"unknown pad_rule {self.pad_rule!r}")

    def epsilon(self) -> float:
        if isinstance(self.epsilon_rule, (int, float)):
            return float(self.epsilon_rule)
        if self.epsilon_rule == "h^alpha":
            return default_epsilon(self.grid_m, self.alpha)
        raise ValueError(f"unknown epsilon_rule {self.epsilon_rule!r}")

    def to_dict(self) -> dict:
        return asdict(self) | {"intensities": list(self.intensities)}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(**{k: (tuple(v) if k == "intensities" else v) for k, v in data.items()})


@dataclass
class ReplicateRecord:
    """Everything one replicate produced, or the error that stopped it.

    Byte-for-byte determinism applies to the canonical payload (everything
    except wall-clock timings).
    """

    n: float
    replicate_id: int
    increment_report: IncrementReport | None = None
    local_time: dict | None = None
    scaled: dict | None = None
    targets: dict | None = None
    counts: dict | None = None
    timings: dict = dc_field(default_factory=dict)
    error: str | None = None

    def canonical_dict(self) -> dict:
        return {
            "n": self.n,
            "replicate_id": self.replicate_id,
            "increment_report": None
            if self.increment_report is None
            else self.increment_report.to_dict(),
            "local_time": self.local_time,
            "scaled": self.scaled,
            "targets": self.targets,
            "counts": self.counts,
            "error": self.error,
        }

    def to_dict(self) -> dict:
        return self.canonical_dict() | {"timings": self.timings}

    @classmethod
    def from_dict(cls, data: dict) -> "ReplicateRecord":
        report = data.get("increment_report")
        return cls(
            n=data["n"],
            replicate_id=data["replicate_id"],
            increment_report=None if report is None else IncrementReport.from_dict(report),
            local_time=data.get("local_time"),
            scaled=data.get("scaled"),
            targets=data.get("targets"),
            counts=data.get("counts"),
            timings=data.get("timings", {}),
            error=data.get("error"),
        )

    @property
    def ok(self) -> bool:
        return self.error is None


def run_replicate(
    cfg: RunConfig, n: float, rep_id: int, constants: ConstantsReport | None = None
) -> ReplicateRecord:
    """Execute one replicate; deterministic given (cfg.seed, n, rep_id)."""
    params = FieldParams(sigma2=cfg.sigma2, alpha=cfg.alpha)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    spec = WindowSpec(intensity=n, pad=cfg.pad(n))
    poisson = sample_poisson(spec, substream(cfg.seed, "replicate", cfg.alpha, n, rep_id, "poisson"))
    grid = PointSet(grid_points(cfg.grid_m), np.full(cfg.grid_m**2, ROLE_GRID))
    joint = PointSet.concatenate([poisson, grid])
    timings["points"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    scene = sample_pair(
        params, joint, substream(cfg.seed, "replicate", cfg.alpha, n, rep_id, "field")
    )
    timings["field"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    complex_ = triangulate(poisson)
    sel = select_ordered(complex_)
    timings["triangulation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    report = compute_increment_report(scene, sel)
    scaled = scaled_statistics(report, n, cfg.alpha)
    timings["statistics"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    eps = cfg.epsilon()
    lt = estimate_local_time(scene, cfg.grid_m, eps, cfg.level)
    lt_half = estimate_local_time(scene, cfg.grid_m, eps / 2.0, cfg.level)
    timings["local_time"] = time.perf_counter() - t0

    targets = None
    if constants is not None:
        targets = {
            "t2": constants.c_v2 * lt.value,
            "t3": constants.c_v3 * lt.value,
        }
    return ReplicateRecord(
        n=n,
        replicate_id=rep_id,
        increment_report=report,
        local_time={
            "value": lt.value,
            "value_half_eps": lt_half.value,
            "epsilon": eps,
            "grid_m": cfg.grid_m,
            "level": cfg.level,
        },
        scaled={"s2": scaled.s2, "s3": scaled.s3},
        targets=targets,
        counts={
            "points": len(joint),
            "poisson_points": len(poisson),
            "edges": report.counts[0],
            "triangles": report.counts[1],
            "dropped_triangles": report.dropped_triangles,
            "ties_at_zero": report.ties_at_zero,
        },
        timings=timings,
    )


def _safe_replicate(args) -> dict:
    cfg_dict, constants_dict, n, rep_id = args
    cfg = RunConfig.from_dict(cfg_dict)
    constants = None if constants_dict is None else ConstantsReport.from_dict(constants_dict)
    try:
        record = run_replicate(cfg, n, rep_id, constants)
    except FracfieldError as exc:
        record = ReplicateRecord(n=n, replicate_id=rep_id, error=f"{type(exc).__name__}: {exc}")
    return record.to_dict()


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"fracfield-{__version__}+g{out.stdout.strip()}"
    except OSError:
        pass
    return f"fracfield-{__version__}"


def _record_path(root: Path, alpha: float, n: float, rep_id: int) -> Path:
    return root / f"{alpha:g}" / f"{n:g}" / f"{rep_id}.json"


def _dump_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run_campaign(
    cfg: RunConfig,
    constants: ConstantsReport | None = None,
    progress: bool = False,
) -> list[ReplicateRecord]:
    """Run the full (alpha, N, replicate) grid, persist records and aggregates."""
    root = Path(cfg.output_dir)
    if constants is None:
        constants = compute_constants(
            cfg.alpha,
            cfg.seed,
            phi2_normalization=cfg.phi2_normalization,
            n_nodes=cfg.constants_nodes,
            n_samples=cfg.constants_samples,
        )
    manifest = {
        "config": cfg.to_dict(),
        "constants": constants.to_dict(),
        "version": version_string(),
    }
    _dump_json(root / "manifest.json", manifest)

    jobs = [(n, rep_id) for n in cfg.intensities for rep_id in range(cfg.replicates)]
    if cfg.workers > 1:
        args = [(cfg.to_dict(), constants.to_dict(), n, r) for n, r in jobs]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            dicts = list(pool.map(_safe_replicate, args))
        records = [ReplicateRecord.from_dict(d) for d in dicts]
    else:
        records = []
        for n, rep_id in jobs:
            records.append(
                ReplicateRecord.from_dict(_safe_replicate((cfg.to_dict(), constants.to_dict(), n, rep_id)))
            )
            if progress:
                r = records[-1]
                status = "ok" if r.ok else r.error
                print(f"  N={n:g} replicate {rep_id}: {status}", flush=True)

    for record in records:
        _dump_json(_record_path(root, cfg.alpha, record.n, record.replicate_id), record.to_dict())

    try:
        report = convergence_report(records, cfg.alpha)
        _dump_json(root / "convergence.json", report)
        write_convergence_csv(root / "convergence.csv", report)
        write_plots(root, report)
    except InsufficientData:
        pass
    return records


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) < 2 or np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def convergence_report(records: list[ReplicateRecord], alpha: float) -> dict:
    """Aggregate the per-replicate records into the convergence diagnostics.

    Failed replicates never contribute; the output is invariant under
    permutation of the input order.
    """
    ok = [r for r in records if r.ok]
    by_n: dict[float, list[ReplicateRecord]] = {}
    for record in sorted(ok, key=lambda r: (r.n, r.replicate_id)):
        by_n.setdefault(record.n, []).append(record)
    if len(by_n) < 2:
        raise InsufficientData(f"need >= 2 intensities, got {len(by_n)}")
    for n, group in by_n.items():
        if len(group) < 10:
            raise InsufficientData(f"need >= 10 replicates at N={n:g}, got {len(group)}")

    factor2 = np.sqrt(3.0) / 3.0
    factor3 = np.sqrt(2.0) / 2.0
    rows = []
    for n, group in sorted(by_n.items()):
        s2 = np.array([r.scaled["s2"] for r in group])
        s3 = np.array([r.scaled["s3"] for r in group])
        t2 = np.array([r.targets["t2"] for r in group])
        t3 = np.array([r.targets["t3"] for r in group])
        lhat = np.array([r.local_time["value"] for r in group])
        scale = n ** (-(2.0 - alpha) / 4.0)
        dom2 = np.array([r.increment_report.v2_parts[2] for r in group]) * factor2 * scale
        dom3 = np.array([r.increment_report.v3_parts[2] for r in group]) * factor3 * scale
        gauss2 = np.array(
            [r.increment_report.v2_parts[0] + r.increment_report.v2_parts[1] for r in group]
        )
        guard = lhat > LHAT_GUARD
        ratios2 = s2[guard] / t2[guard]
        ratios3 = s3[guard] / t3[guard]
        ratios2_dom = dom2[guard] / t2[guard]
        ratios3_dom = dom3[guard] / t3[guard]
        edges = np.array([r.counts["edges"] for r in group])
        triangles = np.array([r.counts["triangles"] for r in group])
        rows.append(
            {
                "alpha": alpha,
                "n": n,
                "replicates": len(group),
                "corr_s2": _pearson(s2, t2),
                "corr_s3": _pearson(s3, t3),
                "ratio2_median": float(np.median(ratios2)),
                "ratio2_iqr": float(np.subtract(*np.percentile(ratios2, [75, 25]))),
                "ratio3_median": float(np.median(ratios3)),
                "ratio3_iqr": float(np.subtract(*np.percentile(ratios3, [75, 25]))),
                "ratio2_dominant_median": float(np.median(ratios2_dom)),
                "ratio3_dominant_median": float(np.median(ratios3_dom)),
                "guarded_out": int(np.sum(~guard)),
                "edges_per_n": float(edges.mean() / n),
                "triangles_per_n": float(triangles.mean() / n),
                "skew_v2g": float(scipy.stats.skew(gauss2)),
                "kurt_v2g": float(scipy.stats.kurtosis(gauss2)),
                "sd_v2_parts": float(np.std(gauss2, ddof=1)),
                "sd_v2_cross": float(
                    np.std([r.increment_report.v2_parts[2] for r in group], ddof=1)
                ),
            }
        )
    failed = [
        {"n": r.n, "replicate_id": r.replicate_id, "error": r.error}
        for r in records
        if not r.ok
    ]
    return {"alpha": alpha, "rows": rows, "failed": failed}


def write_convergence_csv(path, report: dict) -> None:
    lines = [CSV_COLUMNS]
    for row in report["rows"]:
        lines.append(
            ",".join(
                [
                    f"{row['alpha']:g}",
                    f"{row['n']:g}",
                    str(row["replicates"]),
                    f"{row['corr_s2']:.6g}",
                    f"{row['corr_s3']:.6g}",
                    f"{row['ratio2_median']:.6g}",
                    f"{row['ratio2_iqr']:.6g}",
                    f"{row['ratio3_median']:.6g}",
                    f"{row['ratio3_iqr']:.6g}",
                    f"{row['edges_per_n']:.6g}",
                    f"{row['triangles_per_n']:.6g}",
                    f"{row['skew_v2g']:.6g}",
                    f"{row['kurt_v2g']:.6g}",
                ]
            )
        )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def write_plots(root: Path, report: dict) -> None:
    """Static SVG charts: correlation vs N, ratio medians/IQR vs N."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = report["rows"]
    ns = [row["n"] for row in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ns, [row["corr_s2"] for row in rows], "o-", label="edge statistic")
    ax.plot(ns, [row["corr_s3"] for row in rows], "s-", label="triangle statistic")
    ax.set_xscale("log")
    ax.set_xlabel("intensity N")
    ax.set_ylabel("corr(scaled statistic, c * local time)")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(root / "corr_vs_n.svg", metadata={"Date": None})
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    for key, marker, label in (
        ("ratio2", "o", "edge statistic"),
        ("ratio3", "s", "triangle statistic"),
    ):
        med = np.array([row[f"{key}_median"] for row in rows])
        iqr = np.array([row[f"{key}_iqr"] for row in rows])
        ax.errorbar(ns, med, yerr=iqr / 2.0, marker=marker, capsize=3, label=label)
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("intensity N")
    ax.set_ylabel("median ratio statistic / (c * L_hat)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(root / "ratio_vs_n.svg", metadata={"Date": None})
    plt.close(fig)


def load_records(root: Path, alpha: float) -> list[ReplicateRecord]:
    """Read back all persisted replicate records for one alpha."""
    records = []
    base = Path(root) / f"{alpha:g}"
    for path in sorted(base.glob("*/*.json")):
        with open(path) as fh:
            records.append(ReplicateRecord.from_dict(json.load(fh)))
    return records
