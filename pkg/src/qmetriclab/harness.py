"""Experiment orchestration: config ingestion, deterministic seeding, reports.

Every suite is a pure function of (config, root seed). Child seeds are derived
by hashing "<seed>:<suite>:<index>" with SHA-256 and taking the first eight
bytes, so parallel or reordered execution cannot change any stream. Reports
serialize without wall-clock data; re-emitting the same report is
byte-identical, and re-running the same config reproduces the same bytes.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import ideals as afi
from . import spaces as comm
from .elements import Element
from .fixtures import (
    SPACE_CONFIGS,
    TOWER_CONFIGS,
    builtin_space,
    builtin_tower,
    random_space,
)
from .seminorms import admissible_triple, check_triple, xn_factors
from .spaces import FiniteMetricSpace
from .towers import BetaSequence, BratteliTower, tower_from_config

__all__ = [
    "MODES",
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "parse_config",
    "run_experiment",
    "emit_report",
    "derive_seed",
]

MODES = (
    "af_convergence",
    "af_certificates",
    "comm_repair",
    "comm_ball_haus",
    "triple_check",
)

SCHEMA_VERSION = 1

#: environment variable naming the default output directory for reports
OUTPUT_DIR_ENV = "QMETRICLAB_OUT"


class ConfigError(ValueError):
    """Invalid experiment config; ``fields`` names every offending entry."""

    def __init__(self, fields: Sequence[str]):
        super().__init__("invalid config fields: " + ", ".join(fields))
        self.fields = tuple(fields)


def derive_seed(root: int, suite: str, index: int) -> int:
    """Documented child-seed scheme: sha256("<root>:<suite>:<index>")[:8]."""
    digest = hashlib.sha256(f"{root}:{suite}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    seed: int
    samples: int
    tol: float
    options: dict
    raw: dict

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def _resolve_tower(ref) -> tuple[BratteliTower, BetaSequence]:
    if isinstance(ref, str):
        if ref in TOWER_CONFIGS:
            return builtin_tower(ref)
        path = Path(ref)
        if not path.exists():
            raise ConfigError(["tower"])
        with open(path, "r", encoding="utf-8") as fh:
            ref = json.load(fh)
    if not isinstance(ref, dict):
        raise ConfigError(["tower"])
    tower, beta = tower_from_config(ref)
    if beta is None:
        raise ConfigError(["tower.beta"])
    report = tower.validate()
    if not report.passed:
        raise ConfigError(["tower:" + c.name for c in report.failures()])
    if len(beta) != tower.top_level:
        raise ConfigError(["tower.beta"])
    return tower, beta


def _resolve_space(ref) -> FiniteMetricSpace:
    if isinstance(ref, str):
        if ref in SPACE_CONFIGS:
            return builtin_space(ref)
        path = Path(ref)
        if not path.exists():
            raise ConfigError(["space"])
        with open(path, "r", encoding="utf-8") as fh:
            ref = json.load(fh)
    if not isinstance(ref, dict):
        raise ConfigError(["space"])
    return FiniteMetricSpace.from_config(ref)


_DEFAULT_SAMPLES = {
    "af_convergence": 1,
    "af_certificates": 200,
    "comm_repair": 500,
    "comm_ball_haus": 8,
    "triple_check": 10000,
}

_DEFAULT_TOL = {
    "af_convergence": 1e-8,
    "af_certificates": 1e-8,
    "comm_repair": 1e-9,
    "comm_ball_haus": 1e-3,
    "triple_check": 0.0,
}


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw config dict; raises ConfigError naming bad fields."""
    bad: list[str] = []
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(["mode"])
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        bad.append("seed")
        seed = 0
    samples = raw.get("samples", _DEFAULT_SAMPLES[mode])
    if not (isinstance(samples, int) and samples >= 1):
        bad.append("samples")
        samples = 1
    tol = raw.get("tol", _DEFAULT_TOL[mode])
    if not (isinstance(tol, (int, float)) and tol >= 0.0):
        bad.append("tol")
        tol = 0.0

    options: dict[str, Any] = {}
    if mode in ("af_certificates", "af_convergence"):
        if "tower" not in raw:
            bad.append("tower")
        else:
            options["tower_ref"] = raw["tower"]
    if mode == "af_certificates":
        ideals_cfg = raw.get("ideals", [{"top_support": None}])
        if not (isinstance(ideals_cfg, list) and ideals_cfg):
            bad.append("ideals")
        options["ideals"] = ideals_cfg
        options["levels"] = raw.get("levels")
    if mode == "af_convergence":
        for key in ("sequence", "limit"):
            if key not in raw:
                bad.append(key)
        options["sequence"] = raw.get("sequence", [])
        options["limit"] = raw.get("limit")
    if mode == "comm_repair":
        trials = raw.get("trials", samples)
        if not (isinstance(trials, int) and trials >= 1):
            bad.append("trials")
            trials = 1
        max_points = raw.get("max_points", 12)
        if not (isinstance(max_points, int) and max_points >= 2):
            bad.append("max_points")
            max_points = 2
        options["trials"] = trials
        options["max_points"] = max_points
        options["space_ref"] = raw.get("space")
    if mode == "comm_ball_haus":
        fixtures = raw.get("fixtures", 6)
        if isinstance(fixtures, int):
            if fixtures < 1:
                bad.append("fixtures")
                fixtures = 1
        elif not (isinstance(fixtures, list) and fixtures):
            bad.append("fixtures")
        options["fixtures"] = fixtures
        options["max_points"] = raw.get("max_points", 8)
    if mode == "triple_check":
        tuples = raw.get("tuples", samples)
        if not (isinstance(tuples, int) and tuples >= 1):
            bad.append("tuples")
            tuples = 1
        options["tuples"] = tuples

    if bad:
        raise ConfigError(bad)
    return ExperimentConfig(
        mode=mode, seed=seed, samples=samples, tol=float(tol), options=options, raw=raw
    )


@dataclass
class Report:
    """Deterministic experiment record.

    ``runtime_seconds`` is measured but intentionally excluded from the
    serialized payload so identical (config, seed) runs emit identical bytes.
    """

    mode: str
    provenance: dict
    columns: tuple[str, ...]
    rows: list[tuple]
    summary: dict
    runtime_seconds: float | None = field(default=None, compare=False)

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("pass", False))

    def payload(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "provenance": self.provenance,
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "summary": self.summary,
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.payload(), indent=2, sort_keys=False) + "\n").encode()

    def to_csv_bytes(self) -> bytes:
        def cell(v) -> str:
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return repr(v)
            return str(v)

        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(cell(v) for v in row))
        return ("\n".join(lines) + "\n").encode()


def emit_report(report: Report, fmt: str, path=None) -> Path:
    """Write the report as JSON or CSV; re-emission is byte-identical."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    data = report.to_json_bytes() if fmt == "json" else report.to_csv_bytes()
    if path is None:
        out_dir = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
        out_dir.mkdir(parents=True, exist_ok=True)
        name = f"{report.mode}_{report.provenance['config_hash']}.{fmt}"
        path = out_dir / name
    path = Path(path)
    path.write_bytes(data)
    return path


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.hash, "seed": cfg.seed}


def _pos(x: float) -> float:
    return x if x > 0.0 else 0.0


# -- suites -------------------------------------------------------------------


def _run_af_certificates(cfg: ExperimentConfig) -> Report:
    tower, beta = _resolve_tower(cfg.options["tower_ref"])
    top = tower.top_level
    levels = cfg.options.get("levels") or list(range(1, top))
    if any(not 1 <= n < top for n in levels):
        raise ConfigError(["levels"])
    ideal_list = []
    for spec_ in cfg.options["ideals"]:
        support = spec_.get("top_support")
        if support is None:  # full ideal
            support = list(range(len(tower.level_shapes[top].dims)))
        ideal_list.append(afi.derive_supports(tower, support))

    columns = (
        "k",
        "N_k",
        "beta_N",
        "x_N",
        "bound",
        "imprint_estimate",
        "imprint_bound",
        "certificate_failures",
        "pass",
    )
    rows = []
    max_violation = 0.0
    k = 0
    for idx, ideal in enumerate(ideal_list):
        top_samples = afi.ball_sample(
            tower, beta, ideal, top, cfg.samples, derive_seed(cfg.seed, "top", idx)
        )
        for n in levels:
            level_samples = afi.ball_sample(
                tower,
                beta,
                ideal,
                n,
                cfg.samples,
                derive_seed(cfg.seed, f"level{n}", idx),
            )
            failures = 0
            for b in top_samples:
                cert = afi.recover_certificate(tower, beta, ideal, b, n, tol=cfg.tol)
                failures += len(cert.failures)
                max_violation = max(
                    max_violation,
                    _pos(cert.d_scaled - cert.x_n),
                    _pos(cert.d_candidate - 1.0),
                    _pos(cert.dist - cert.bound),
                )
            bridge = afi.imprint_estimate(
                tower, beta, ideal, n, level_samples, top_samples
            )
            failures += len(bridge.certificate_failures)
            max_violation = max(
                max_violation, _pos(bridge.imprint_estimate - bridge.imprint_bound)
            )
            xf = xn_factors(beta, n)
            rows.append(
                (
                    k,
                    n,
                    beta[n],
                    xf.x,
                    bridge.lambda_bound,
                    bridge.imprint_estimate,
                    bridge.imprint_bound,
                    failures,
                    failures == 0,
                )
            )
            k += 1
    n_failed = sum(1 for r in rows if not r[-1])
    summary = {
        "rows": len(rows),
        "failures": n_failed,
        "max_violation": max_violation,
        "pass": n_failed == 0,
    }
    return Report("af_certificates", _provenance(cfg), columns, rows, summary)


def _run_af_convergence(cfg: ExperimentConfig) -> Report:
    tower, beta = _resolve_tower(cfg.options["tower_ref"])
    top = tower.top_level
    limit_cfg = cfg.options["limit"]
    if not isinstance(limit_cfg, dict) or "top_support" not in limit_cfg:
        raise ConfigError(["limit"])

    def mk(support_cfg):
        support = support_cfg.get("top_support")
        if support is None:
            support = list(range(len(tower.level_shapes[top].dims)))
        return afi.derive_supports(tower, support)

    limit = mk(limit_cfg)
    sequence = [mk(c) for c in cfg.options["sequence"]]
    table = afi.fell_to_propinquity_table(tower, beta, sequence, limit)
    columns = (
        "k",
        "N_k",
        "beta_N",
        "x_N",
        "bound",
        "surrogate_distance",
        "pass",
        "note",
    )
    rows = [
        (
            r.k,
            r.n_agree,
            r.beta_n,
            r.x_n,
            r.bound,
            r.surrogate,
            True,
            r.note,
        )
        for r in table
    ]
    summary = {
        "rows": len(rows),
        "failures": 0,
        "max_violation": 0.0,
        "pass": True,
    }
    return Report("af_convergence", _provenance(cfg), columns, rows, summary)


def _sample_ball_function(space, zero_idx, rng, real=False) -> np.ndarray:
    v = rng.standard_normal(space.size).astype(np.complex128)
    if not real:
        v = v + 1j * rng.standard_normal(space.size)
    v[list(zero_idx)] = 0.0
    dv = comm.d_norm(space, zero_idx, v)
    return v / max(dv, comm.EPS_DIV)


def _run_comm_repair(cfg: ExperimentConfig) -> Report:
    trials = cfg.options["trials"]
    max_points = cfg.options["max_points"]
    fixed_space = (
        _resolve_space(cfg.options["space_ref"])
        if cfg.options.get("space_ref")
        else None
    )
    columns = (
        "k",
        "n_points",
        "set_hausdorff",
        "eps",
        "dist",
        "bound",
        "vanish_violation",
        "lip_re",
        "lip_im",
        "sup_norm",
        "ratio",
        "pass",
    )
    rows = []
    max_violation = 0.0
    for k in range(trials):
        rng = np.random.default_rng(derive_seed(cfg.seed, "comm_repair", k))
        space = fixed_space or random_space(rng, max_points)
        n = space.size
        limit_size = int(rng.integers(1, n + 1))
        limit = tuple(sorted(rng.choice(n, size=limit_size, replace=False).tolist()))
        if rng.uniform() < 1 / 3:
            near = limit
        else:
            near_set = set(limit)
            for _ in range(int(rng.integers(1, 3))):
                near_set.symmetric_difference_update({int(rng.integers(0, n))})
            near = tuple(sorted(near_set)) or limit
        H = comm.hausdorff_sets(space, near, limit)
        lo = np.sqrt(H) * (1.0 + 1e-6) + 1e-12
        if lo >= 0.95:
            near = limit
            H = 0.0
            lo = 1e-12
        eps = float(rng.uniform(max(lo, 0.05), 1.0))
        f = _sample_ball_function(space, near, rng, real=bool(k % 4 == 0))
        _, cert = comm.repair(space, near, limit, f, eps, tol=cfg.tol)
        max_violation = max(
            max_violation,
            cert.vanish_violation,
            _pos(cert.lip_re - 1.0),
            _pos(cert.lip_im - 1.0),
            _pos(cert.sup_norm - 1.0),
            _pos(cert.dist_to_input - cert.bound),
        )
        rows.append(
            (
                k,
                n,
                H,
                cert.eps,
                cert.dist_to_input,
                cert.bound,
                cert.vanish_violation,
                cert.lip_re,
                cert.lip_im,
                cert.sup_norm,
                cert.ratio,
                cert.passed,
            )
        )
    n_failed = sum(1 for r in rows if not r[-1])
    summary = {
        "rows": len(rows),
        "failures": n_failed,
        "max_violation": max_violation,
        "pass": n_failed == 0,
    }
    return Report("comm_repair", _provenance(cfg), columns, rows, summary)


def _random_ball_haus_fixture(rng, max_points):
    """Three families: identical sets, nearby sets, far sets."""
    space = random_space(rng, max_points, min_points=3)
    n = space.size
    fam = int(rng.integers(0, 3))
    size = int(rng.integers(1, max(2, n // 2 + 1)))
    f1 = sorted(rng.choice(n, size=size, replace=False).tolist())
    if fam == 0:
        f2 = list(f1)
    elif fam == 1:
        # swap one point for its nearest neighbour outside the set
        f2 = list(f1)
        i = f2[int(rng.integers(0, len(f2)))]
        order = np.argsort(space.dist[i])
        for j in order:
            if int(j) != i and int(j) not in f2:
                f2[f2.index(i)] = int(j)
                break
        f2 = sorted(set(f2))
    else:
        f2 = sorted(rng.choice(n, size=size, replace=False).tolist())
    return space, f1, f2


def _run_comm_ball_haus(cfg: ExperimentConfig) -> Report:
    fixtures = cfg.options["fixtures"]
    max_points = cfg.options["max_points"]
    resolved = []
    if isinstance(fixtures, int):
        for k in range(fixtures):
            rng = np.random.default_rng(derive_seed(cfg.seed, "ball_haus_fix", k))
            resolved.append(_random_ball_haus_fixture(rng, max_points))
    else:
        for fx in fixtures:
            space = _resolve_space(fx["space"])
            resolved.append((space, fx["f1"], fx["f2"]))
    columns = (
        "k",
        "n_points",
        "set_hausdorff",
        "eps_star",
        "paper_bound",
        "estimate",
        "pass",
    )
    rows = []
    max_violation = 0.0
    for k, (space, f1, f2) in enumerate(resolved):
        res = comm.ball_hausdorff(
            space, f1, f2, cfg.samples, derive_seed(cfg.seed, "ball_haus", k), cfg.tol
        )
        max_violation = max(max_violation, _pos(res.estimate - res.paper_bound))
        rows.append(
            (
                k,
                space.size,
                res.set_hausdorff,
                res.eps_star,
                res.paper_bound,
                res.estimate,
                res.passed,
            )
        )
    n_failed = sum(1 for r in rows if not r[-1])
    summary = {
        "rows": len(rows),
        "failures": n_failed,
        "max_violation": max_violation,
        "pass": n_failed == 0,
    }
    return Report("comm_ball_haus", _provenance(cfg), columns, rows, summary)


def _run_triple_check(cfg: ExperimentConfig) -> Report:
    count = cfg.options["tuples"]
    columns = ("case", "inequality", "samples", "max_violation", "pass")
    rows = []
    for case in ("af", "commutative"):
        viol = check_triple(
            admissible_triple(case), count, derive_seed(cfg.seed, "triples", 0)
        )
        for name, v in viol.items():
            rows.append((case, name, count, v, v <= cfg.tol))
    n_failed = sum(1 for r in rows if not r[-1])
    summary = {
        "rows": len(rows),
        "failures": n_failed,
        "max_violation": max(r[3] for r in rows),
        "pass": n_failed == 0,
    }
    return Report("triple_check", _provenance(cfg), columns, rows, summary)


_RUNNERS = {
    "af_certificates": _run_af_certificates,
    "af_convergence": _run_af_convergence,
    "comm_repair": _run_comm_repair,
    "comm_ball_haus": _run_comm_ball_haus,
    "triple_check": _run_triple_check,
}


def run_experiment(cfg: ExperimentConfig | dict) -> Report:
    """Dispatch a validated config to its suite and return the report."""
    if isinstance(cfg, dict):
        cfg = parse_config(cfg)
    start = time.perf_counter()
    report = _RUNNERS[cfg.mode](cfg)
    report.runtime_seconds = time.perf_counter() - start
    return report
