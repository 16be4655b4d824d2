"""Run configuration and the end-to-end pipeline that writes a report directory.

Stages run in order: tune, partitions, renorm, tubular, conjugacy.  Each
stage writes its own CSV/JSON files; the manifest lists every file with
its sha256 digest, the timings and any stage error.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__
from .conjugacy import (
    build_conjugacy,
    convergence_probe,
    criterion_audit,
    derivative_profile,
    endpoint_gap_audit,
    fundamental_ratio_audit,
    interval_log_ratio_audit,
    return_map_band,
    signature,
    triangle_check,
)
from .errors import ConfigError, CircleRenormError
from .io import (
    emit_decay_plot,
    inventory,
    write_cells_csv,
    write_csv,
    write_json,
    write_report_csv,
)
from .maps import family_from_spec, map_from_spec
from .numerics import MIN_PRECISION, default_precision, working_precision
from .partitions import (
    CircleDynamics,
    bridge_counts,
    check_partitions,
    classical_recovery_lags,
    two_bridges_partitions,
)
from .renorm import chi, pair_at_level, pair_sup_distance, renormalize
from .rotation import Budget, tune_parameter
from .tubular import tubular_chart, tubular_set

log = logging.getLogger(__name__)

STAGES = ("tune", "partitions", "renorm", "tubular", "conjugacy")
AUDITS = ("partitions", "renorm", "tubular", "signature", "criterion", "endpoint_gap",
          "fundamental", "interval", "return_map", "derivative", "d2")
CONJUGACY_AUDITS = AUDITS[3:]
TUBULAR_MIN_QUOTIENT = 10
DEMO_CONFIG = "demo_golden.json"


@dataclass
class RunConfig:
    """Everything a run needs; ``g`` is optional and only used by the conjugacy stage."""

    f: dict
    cf: list
    depth: int
    out: str
    g: dict | None = None
    precision: int | None = None
    audits: list = field(default_factory=lambda: list(AUDITS))
    budget: int | None = None
    jobs: int = 1
    oracle_points: int = 128
    probe_grid: int = 64
    tubular_mesh: int = 2048
    band_b: float = 0.5
    svg: bool = False

    def __post_init__(self):
        if isinstance(self.audits, str):
            self.audits = [self.audits]
        if "all" in self.audits:
            self.audits = list(AUDITS)
        bad = [a for a in self.audits if a not in AUDITS]
        if bad:
            raise ConfigError(f"unknown audits {bad}; choose from {list(AUDITS)} or 'all'")
        if not isinstance(self.depth, int) or self.depth < 1:
            raise ConfigError("depth must be an integer >= 1")
        if self.budget is not None and self.budget <= 0:
            raise ConfigError("budget must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.precision is not None and self.precision < MIN_PRECISION:
            raise ConfigError(f"precision must be at least {MIN_PRECISION} bits")
        if not self.cf or any(int(a) < 1 for a in self.cf):
            raise ConfigError("cf must be a non-empty list of positive integers")
        self.cf = [int(a) for a in self.cf]
        for name in ("f", "g"):
            spec = getattr(self, name)
            if spec is not None and (not isinstance(spec, dict) or "family" not in spec):
                raise ConfigError(f"map spec {name} needs a 'family' key")

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, **overrides)

    def hashed_fields(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("jobs")
        return d

    def digest(self) -> str:
        text = json.dumps(self.hashed_fields(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def demo_config(out: str, **overrides) -> RunConfig:
    text = resources.files("circle_renorm").joinpath("configs", DEMO_CONFIG).read_text(encoding="utf-8")
    return RunConfig.from_dict(dict(json.loads(text), out=out), **overrides)


@dataclass
class RunManifest:
    config_hash: str
    version: str
    stages: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    precision: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    error: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_dict(self) -> dict:
        return asdict(self)


class _Run:
    def __init__(self, config: RunConfig):
        self.cfg = config
        self.out = Path(config.out)
        self.prec = config.precision or default_precision()
        self.budget = Budget(config.budget)
        self.maps = {}
        self.dyn = {}

    def wants(self, *names) -> bool:
        return any(n in self.cfg.audits for n in names)

    # stages --------------------------------------------------------------
    def tune(self):
        rows = {}
        for name in ("f", "g"):
            spec = getattr(self.cfg, name)
            if spec is None:
                continue
            if "a" in spec:
                self.maps[name] = map_from_spec(spec, self.prec)
                rows[name] = {"spec": self.maps[name].spec(), "tuned": False}
                continue
            fam = family_from_spec(spec, self.prec)
            res = tune_parameter(fam, self.cfg.cf, precision=self.prec, budget=self.cfg.budget)
            self.maps[name] = res.map
            rows[name] = {"spec": res.map.spec(), "tuned": True, "quotients": res.quotients,
                          "verified_depth": res.verified_depth, "iterations": res.iterations}
        return rows

    def dynamics(self, name):
        if name not in self.dyn:
            self.dyn[name] = CircleDynamics(self.maps[name], self.cfg.depth + 2, budget=self.budget)
        return self.dyn[name]

    def partitions(self):
        dyn = self.dynamics("f")
        if not self.wants("partitions"):
            return
        parts = two_bridges_partitions(dyn, self.cfg.depth)
        rows = []
        for c in check_partitions(dyn, parts):
            part = parts[c.level]
            rows.append([c.level, part.atom_count, part.kind, c.coverage_defect, c.numeric_order,
                         c.refines_previous, c.fundamental_unions, c.passed, c.adjacent_ratio])
        write_csv(self.out / "partitions.csv",
                  ["n", "atoms", "kind", "coverage_defect", "numeric_order", "refines",
                   "fundamental_unions", "passed", "adjacent_ratio"], rows, self.prec)
        lags = classical_recovery_lags(dyn, parts)
        bridges = {}
        for n in range(self.cfg.depth):
            bd = bridge_counts(dyn, n)
            if bd is not None:
                bridges[n] = {"slot": bd.slot, "r": bd.right, "l": bd.left,
                              "right_case": bd.right_case, "left_case": bd.left_case}
        write_json(self.out / "partitions.json",
                   {"quotients": dyn.quotients, "delta": str(dyn.delta), "guard_bits": dyn.guard_bits,
                    "recovery_lags": lags, "two_bridges": bridges}, self.prec)

    def renorm(self):
        if not self.wants("renorm"):
            return
        dyn = self.dynamics("f")
        rows = []
        top = self.cfg.depth - 1
        for n in range(top + 1):
            pair = pair_at_level(dyn, 0, n)
            c = chi(pair)
            oracle = None
            if 1 <= n < top:
                nxt = pair_at_level(dyn, 0, n + 1)
                oracle = pair_sup_distance(renormalize(pair), nxt, self.cfg.oracle_points)
            rows.append([n, c, dyn.quotients[n + 1], pair.scaling_ratio(), oracle])
        write_csv(self.out / "renorm.csv", ["n", "chi", "a_next", "scaling_ratio", "oracle_sup"],
                  rows, self.prec)

    def tubular(self):
        if not self.wants("tubular"):
            return
        dyn = self.dynamics("f")
        rows = []
        for n in range(self.cfg.depth):
            if dyn.quotients[n + 1] < TUBULAR_MIN_QUOTIENT:
                continue
            pair = pair_at_level(dyn, 0, n)
            tset = tubular_set(pair, mesh=self.cfg.tubular_mesh)
            for z, d1, d2 in tset.centers:
                chart = tubular_chart(pair, center=z)
                rows.append([n, tset.L, len(tset.components), z, abs(d1 - 1), d2, chart.eps,
                             max(chart.residuals.values())])
        write_csv(self.out / "tubular.csv",
                  ["n", "L", "components", "center", "abs_DR_minus_1", "D2R", "eps", "chart_residual"],
                  rows, self.prec)

    def conjugacy(self):
        wanted = [a for a in self.cfg.audits if a in CONJUGACY_AUDITS]
        if not wanted or "g" not in self.maps:
            return
        if "signature" in wanted:
            sig = {}
            for name in ("f", "g"):
                s = signature(self.maps[name], self.cfg.depth + 2, dyn=self.dynamics(name))
                sig[name] = {"quotients": s.quotients, "N": s.N, "d0": s.d0, "d1": s.d1,
                             "delta0": s.delta0.value, "delta1": s.delta1.value,
                             "error_bar": float(s.error_bar), "delta0_birkhoff": s.delta0_birkhoff}
            write_json(self.out / "signature.json", sig, self.prec)
        audits = [a for a in wanted if a != "signature"]
        if not audits:
            return
        conj = build_conjugacy(self.maps["f"], self.maps["g"], self.cfg.depth,
                               dyn_f=self.dynamics("f"), dyn_g=self.dynamics("g"))
        b = self.cfg.band_b
        jobs = {
            "criterion": lambda: {"criterion": criterion_audit(conj)},
            "fundamental": lambda: {f"{k}_c{c}": v for c, d in fundamental_ratio_audit(conj).items()
                                    for k, v in d.items() if k != "limit"},
            "interval": lambda: {"interval": interval_log_ratio_audit(conj, band_b=b)},
            "endpoint_gap": lambda: endpoint_gap_audit(conj, band_b=b),
            "return_map": lambda: return_map_band(conj, band_b=b),
            "d2": lambda: {"d2": convergence_probe(conj, grid=self.cfg.probe_grid)},
            "derivative": lambda: {"derivative": derivative_profile(conj)},
        }
        names = [a for a in audits if a in jobs]
        with ThreadPoolExecutor(max_workers=self.cfg.jobs) as pool:
            results = dict(zip(names, pool.map(lambda a: jobs[a](), names)))
        summary = {}
        for audit in names:
            for key, rep in results[audit].items():
                stem = audit if key == audit else f"{audit}_{key}"
                if key == "cells":
                    write_cells_csv(self.out / f"{stem}.csv", rep, self.prec)
                elif audit == "derivative":
                    write_csv(self.out / "derivative_profile.csv", ["position", "slope"],
                              zip(rep.positions, rep.slopes), self.prec)
                    summary["derivative"] = {"level": rep.level, "oscillation": rep.oscillation}
                else:
                    write_report_csv(self.out / f"{stem}.csv", rep, self.prec)
                    summary[stem] = {"C": rep.C, "lambda": rep.lam, "residual": rep.residual,
                                     "censored": rep.censored, "fit_start": rep.fit_start}
                    if self.cfg.svg:
                        emit_decay_plot(rep, self.out / f"{stem}.svg")
        if "criterion" in results and "interval" in audits:
            summary["triangle_violation"] = triangle_check(conj, results["criterion"]["criterion"], band_b=b)
        if "criterion" in results:
            rep = results["criterion"]["criterion"]
            summary["criterion_checks"] = {"refines": rep.notes.get("refines"),
                                           "max_atom": rep.notes.get("max_atom")}
        with working_precision(self.prec):
            summary["equivariance_residual"] = conj.equivariance_residual()
        summary["monotone"] = conj.monotone()
        write_json(self.out / "conjugacy_summary.json", summary, self.prec)

    def precision_record(self) -> dict:
        out = {}
        for name, dyn in self.dyn.items():
            out[name] = {"working": dyn.prec, "orbit": dyn.orbit_prec,
                         "levels": {n: dyn.prec for n in range(self.cfg.depth + 1)}}
        return out


def run(config: RunConfig, stages=STAGES) -> RunManifest:
    """Execute ``stages`` and write the report directory plus ``manifest.json``.

    A stage error stops the run; files written so far stay and the error
    is recorded in the manifest with the stage name.
    """
    state = _Run(config)
    try:
        state.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {config.out} is not writable: {exc}") from exc
    manifest = RunManifest(config.digest(), __version__)
    manifest_path = state.out / "manifest.json"
    for stage in STAGES:
        if stage not in stages and stage != "tune":
            continue
        t0 = time.perf_counter()
        try:
            with working_precision(state.prec):
                result = getattr(state, stage)()
            if stage == "tune" and "tune" in stages and (config.audits or tuple(stages) == ("tune",)):
                write_json(state.out / "tune.json", result, state.prec)
        except CircleRenormError as exc:
            manifest.error = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}
            diff = getattr(exc, "diff", None)
            if diff is not None:
                manifest.error["diff"] = diff.as_dict()
            log.error("stage %s failed: %s", stage, exc)
            break
        finally:
            manifest.timings[stage] = round(time.perf_counter() - t0, 3)
        manifest.stages.append(stage)
    manifest.precision = state.precision_record()
    if manifest_path.exists():
        manifest_path.unlink()
    manifest.files = inventory(state.out)
    write_json(manifest_path, manifest.as_dict(), state.prec)
    return manifest


def load_manifest(out) -> dict:
    return json.loads((Path(out) / "manifest.json").read_text(encoding="utf-8"))

