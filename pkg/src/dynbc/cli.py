"""Command-line front end: ``dynbc run|compare|schema``.

Configs are JSON; complex scalars are written as ``[re, im]`` pairs and
matrices as lists of rows. Exit codes: 0 all checks passed, 1 a check
failed, 2 the config is invalid.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import coupling, discretize, semigroup, stability
from .errors import CheckFailed, ConfigInvalid, DynBCError, IncompatibleScenarios
from .matcore import eigenvalues, spectral_abscissa, spectral_distance

SCHEMA_VERSION = 1
CHECK_ORDER = (
    "spectrum", "similarity", "evolve", "boundedness", "analyticity",
    "wentzell", "dyson_phillips", "stability_certificate", "cosine",
)
DEFAULT_RUN = {
    "T": 1.0,
    "steps": 20,
    "k_max": 12,
    "dp_T": 5.0,
    "dp_steps": 500,
    "T_max": 1000.0,
    "growth_T_max": 50.0,
    "seed": 0,
    "analyticity_norm": "energy",
    "cosine_t": 0.5,
    "cosine_s": 0.25,
    "sweep": [round(0.1 * i, 1) for i in range(11)],
}
DEFAULT_TOL = {
    "similarity": 1e-7,
    "inverse": 1e-9,
    "boundedness_bound": 1e8,
    "analyticity_threshold": 1e3,
    "wentzell_abs": 1e-4,
    "dalembert_rel": 1e-8,
}

_complex = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_matrix = {"type": "array", "items": {"type": "array", "items": _complex}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dynbc scenario config",
    "type": "object",
    "required": ["version", "scenario", "checks"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "scenario": {"enum": ["interval_plate", "network_wave", "strongly_damped_interval", "custom"]},
        "parameters": {
            "type": "object",
            "properties": {
                "n": {"type": "integer"},
                "alpha": _complex,
                "beta": {"type": "array", "items": _complex, "minItems": 4, "maxItems": 4},
                "n_vertices": {"type": "integer", "minimum": 1},
                "edges": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
                    "minItems": 1,
                },
                "M": _matrix, "N": _matrix, "P": _matrix, "Phi": _matrix,
                "A": _matrix, "C": _matrix, "L": _matrix,
                "B1": _matrix, "B2": _matrix, "B3": _matrix, "B4": _matrix,
                "case_tag": {"enum": list(discretize.CASE_TAGS)},
                "feedback_scale": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "lambda": _complex,
        "checks": {"type": "array", "items": {"enum": list(CHECK_ORDER)}, "uniqueItems": True},
        "run": {
            "type": "object",
            "properties": {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "steps": {"type": "integer", "minimum": 1},
                "k_max": {"type": "integer", "minimum": 0},
                "dp_T": {"type": "number", "exclusiveMinimum": 0},
                "dp_steps": {"type": "integer", "minimum": 1},
                "T_max": {"type": "number", "exclusiveMinimum": 0},
                "growth_T_max": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
                "analyticity_norm": {"enum": ["energy", "euclidean"]},
                "cosine_t": {"type": "number"},
                "cosine_s": {"type": "number"},
                "sweep": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "tolerances": {
                    "type": "object",
                    "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in DEFAULT_TOL},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
    },
}


def _cx(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _mat(rows, cols: int = 0) -> np.ndarray:
    """Matrix from a list of rows; an empty list gives a (0, cols) matrix."""
    if not rows:
        return np.zeros((0, cols), dtype=complex)
    return np.array([[_cx(v) for v in row] for row in rows], dtype=complex).reshape(len(rows), -1)


def _jsonable(x):
    if isinstance(x, complex) or isinstance(x, np.complexfloating):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigInvalid(f"schema violation at {list(exc.absolute_path)}: {exc.message}") from exc
    params = cfg.get("parameters", {})
    required = {
        "interval_plate": ("n",),
        "network_wave": ("n", "n_vertices", "edges", "M", "N", "P"),
        "strongly_damped_interval": ("n", "alpha", "beta"),
        "custom": ("A", "C", "L", "B1", "B2", "B3", "B4"),
    }[cfg["scenario"]]
    missing = [k for k in required if k not in params]
    if missing:
        raise ConfigInvalid(f"scenario {cfg['scenario']} is missing parameters {missing}")
    if "n" in params and not 4 <= params["n"] <= 2048:
        raise ConfigInvalid(f"n={params['n']} outside [4, 2048]")


def build_problem(cfg: dict) -> discretize.DiscreteProblem:
    p = cfg.get("parameters", {})
    kind = cfg["scenario"]
    try:
        if kind == "interval_plate":
            P = discretize.build_interval_plate(p["n"])
        elif kind == "network_wave":
            graph = discretize.NetworkGraph.uniform(p["n_vertices"], [tuple(e) for e in p["edges"]], p["n"])
            Phi = _mat(p["Phi"]) if "Phi" in p else None
            P = discretize.build_network_wave(graph, _mat(p["M"]), _mat(p["N"]), _mat(p["P"]), Phi)
        elif kind == "strongly_damped_interval":
            P = discretize.build_strongly_damped_interval(_cx(p["alpha"]), [_cx(b) for b in p["beta"]], p["n"])
        else:
            n = len(p["A"])
            P = discretize.build_custom(
                *(_mat(p[k], n) for k in ("A", "C", "L", "B1", "B2")),
                *(_mat(p[k]) for k in ("B3", "B4")),
                case_tag=p.get("case_tag", "bounded_trace"), metadata={"scenario": "custom"},
            )
            if not 4 <= P.dim_X <= 2048:
                raise ConfigInvalid(f"custom state dimension {P.dim_X} outside [4, 2048]")
    except ConfigInvalid:
        raise
    except (DynBCError, ValueError) as exc:
        raise ConfigInvalid(f"cannot build {kind}: {exc}") from exc
    if "case_tag" in p and kind != "custom":
        P = P.with_case(p["case_tag"])
    if "feedback_scale" in p:
        P = P.with_feedback_scale(p["feedback_scale"])
    return P


def _initial_data(P: discretize.DiscreteProblem, seed: int):
    if P.nodes is not None:
        x = P.nodes
        return np.cos(np.pi * x) + x**2, np.zeros_like(x)
    rng = np.random.default_rng(seed)
    return rng.standard_normal(P.dim_X), np.zeros(P.dim_X)


def _write_trace_csv(path: Path, trace: semigroup.EvolutionTrace) -> None:
    blocks = trace.block_norms()
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *[f"norm_{k}" for k in blocks], "norm_total"])
        total = np.linalg.norm(trace.states, axis=1)
        for i, t in enumerate(trace.time_grid):
            w.writerow([repr(float(t)), *[repr(float(v[i])) for v in blocks.values()], repr(float(total[i]))])


class _Runner:
    def __init__(self, cfg: dict, out: Path | None):
        self.cfg = cfg
        self.out = out
        self.run = {**DEFAULT_RUN, **{k: v for k, v in cfg.get("run", {}).items() if k != "tolerances"}}
        self.tol = {**DEFAULT_TOL, **cfg.get("run", {}).get("tolerances", {})}
        self.P = build_problem(cfg)
        lam = cfg.get("lambda")
        self.lam = None if lam is None else _cx(lam)
        self._trace = None

    def assemble(self):
        self.R = coupling.assemble(self.P, self.lam)
        self.abscissa = spectral_abscissa(self.R.G)

    def trace(self):
        if self._trace is None:
            u, v = _initial_data(self.P, self.run["seed"])
            z0 = semigroup.initial_state(self.R, self.P, u, v)
            self._trace = semigroup.evolve(self.R.G, z0, self.run["T"], self.run["steps"], self.R)
        return self._trace

    def spectrum(self):
        w = eigenvalues(self.R.G)
        return True, {"eigenvalues": w, "spectral_abscissa": self.abscissa, "lambda": self.R.lam, "form": self.R.form_tag}

    def similarity(self):
        w_con = eigenvalues(coupling.assemble_A_constrained(self.P))
        other = complex(self.R.lam) + 1.0
        R2 = coupling.assemble(self.P, other)
        d1 = spectral_distance(w_con, eigenvalues(self.R.G))
        d2 = spectral_distance(w_con, eigenvalues(R2.G))
        inv = max(self.R.inverse_defect(), R2.inverse_defect())
        conj = coupling.similarity_defect(self.P, self.R)
        ok = max(d1, d2) <= self.tol["similarity"] and inv <= self.tol["inverse"]
        return ok, {"spectral_mismatch": [d1, d2], "lambdas": [self.R.lam, other], "inverse_defect": inv, "conjugation_defect": conj}

    def evolve(self):
        tr = self.trace()
        if self.out is not None:
            _write_trace_csv(self.out / "evolve.csv", tr)
        final = float(np.linalg.norm(tr.states[-1]))
        return bool(np.all(np.isfinite(tr.states))), {
            "T": self.run["T"], "initial_norm": float(np.linalg.norm(tr.states[0])), "final_norm": final,
            "max_propagator_norm": float(tr.norms.max()),
        }

    def boundedness(self):
        rep = semigroup.check_boundedness(self.R.G, self.run["T_max"], self.tol["boundedness_bound"])
        return rep.bounded, {"observed_sup": rep.observed_sup, "trend_slope": rep.trend_slope, "T_max": rep.T_max}

    def analyticity(self):
        G, norm = self.R.G, "euclidean"
        if self.run["analyticity_norm"] == "energy":
            try:
                G, norm = semigroup.energy_scaled_generator(self.P, self.R), "energy"
            except ValueError:
                pass
        omega = max(self.abscissa, 0.0) + 1e-3
        rep = semigroup.check_analyticity(G, omega, threshold=self.tol["analyticity_threshold"])
        return rep.verdict == "consistent_with_analytic", {
            "norm": norm, "omega": omega, "sup_norms": rep.sup_norms, "verdict": rep.verdict, "flagged": rep.flagged,
        }

    def wentzell(self):
        if self.P.dim_dX == 0:
            return None, "no boundary coordinates"
        tr = self.trace()
        res = [semigroup.wentzell_residual(self.P, tr, i) for i in range(1, tr.time_grid.size)]
        return res[-1] <= self.tol["wentzell_abs"], {"t": tr.time_grid[1:], "residual": res, "final": res[-1]}

    def dyson_phillips(self):
        sys2 = stability.split_blocks(self.R)
        if sys2.q == 0:
            return None, "no boundary block to split off"
        exp = stability.dyson_phillips(sys2, self.run["dp_T"], self.run["dp_steps"], self.run["k_max"])
        zp = stability.verify_zero_pattern(exp)
        return zp["passed"], {"partial_sum_error": exp.partial_sum_error, "zero_pattern": zp}

    def stability_certificate(self):
        sys2 = stability.split_blocks(self.R)
        if sys2.q == 0:
            return None, "no boundary block to split off"
        a1, a2 = spectral_abscissa(sys2.H), spectral_abscissa(sys2.Lb)
        if a1 >= 0 or a2 >= 0:
            return None, f"diagonal blocks not both stable (abscissas {a1:.3g}, {a2:.3g})"
        sys2 = sys2.with_bounds(self.run["growth_T_max"])
        rng = np.random.default_rng(self.run["seed"])
        probes = [rng.standard_normal(sys2.p + sys2.q) for _ in range(5)]
        cert = stability.smallness_criterion(sys2, probes)
        ok = True
        if cert.verdict == "uniformly_exponentially_stable":
            ic = cert.evidence["integral_check"]
            ok = cert.evidence["spectral_abscissa"] < 0 and (ic is None or ic["passed"])
        return ok, {"M": cert.M, "M0": cert.M0, "verdict": cert.verdict, "bounds": sys2.bounds, **cert.evidence}

    def cosine(self):
        op = self.P.C if self.P.case_tag.startswith("strong_damping") else self.P.A
        op0, _ = coupling.kernel_restriction(op, self.P.L)
        t, s = self.run["cosine_t"], self.run["cosine_s"]
        r = semigroup.dalembert_check(op0, t, s)
        bound = semigroup.dalembert_tolerance(op0, t, s) * self.tol["dalembert_rel"] / 1e-8
        return r <= bound, {"operator": "C0" if op is self.P.C else "A0", "residual": r, "threshold": bound}


def run_config(cfg: dict, out: Path | None = None) -> dict:
    """Execute the requested checks; returns the report dictionary."""
    validate_config(cfg)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    runner = _Runner(cfg, out)
    runner.assemble()
    timings["assemble"] = time.perf_counter() - t0
    results = {}
    for name in CHECK_ORDER:
        if name not in cfg["checks"]:
            continue
        t0 = time.perf_counter()
        try:
            ok, evidence = getattr(runner, name)()
        except DynBCError as exc:
            ok, evidence = False, {"error": f"{type(exc).__name__}: {exc}"}
        timings[name] = time.perf_counter() - t0
        if ok is None:
            results[name] = {"status": "skipped", "reason": evidence}
        else:
            results[name] = {"status": "pass" if ok else "fail", "evidence": evidence}
    failed = [k for k, v in results.items() if v["status"] == "fail"]
    report = {
        "config": cfg,
        "problem": {"dim_X": runner.P.dim_X, "dim_dX": runner.P.dim_dX, "case_tag": runner.P.case_tag},
        "checks": results,
        "failed": failed,
        "timings": timings,
    }
    report = _jsonable(report)
    if out is not None:
        (out / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    return report


def _flatten(d, prefix=""):
    out = {}
    if isinstance(d, dict):
        for k, v in d.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    else:
        out[prefix[:-1]] = d
    return out


def sweep_feedback(cfg: dict, scales) -> list:
    """Spectral abscissa and certificate constant M with B1, B2 scaled by s."""
    base = build_problem(cfg)
    lam = None if cfg.get("lambda") is None else _cx(cfg["lambda"])
    growth_T = cfg.get("run", {}).get("growth_T_max", DEFAULT_RUN["growth_T_max"])
    rows = []
    for s in scales:
        R = coupling.assemble(base.with_feedback_scale(s), lam)
        sys2 = stability.split_blocks(R)
        row = {"s": float(s), "spectral_abscissa": spectral_abscissa(R.G), "M": None, "verdict": None}
        if sys2.q and spectral_abscissa(sys2.H) < 0 and spectral_abscissa(sys2.Lb) < 0:
            cert = stability.smallness_criterion(sys2.with_bounds(growth_T))
            row["M"], row["verdict"] = cert.M, cert.verdict
        rows.append(row)
    return rows


def _sweep_summary(rows: list) -> dict:
    a = np.array([r["spectral_abscissa"] for r in rows])
    jumps = np.abs(np.diff(a))
    continuity = True
    for i, j in enumerate(jumps):
        neighbours = [jumps[k] for k in (i - 1, i + 1) if 0 <= k < jumps.size]
        if neighbours and j > 10 * max(neighbours) + 1e-9:
            continuity = False
    loss = next((r["s"] for r in rows if r["spectral_abscissa"] >= 0), None)
    return {"stability_loss_scale": loss, "continuity_ok": continuity, "max_jump": float(jumps.max()) if jumps.size else 0.0}


def compare_configs(cfg_a: dict, cfg_b: dict) -> dict:
    validate_config(cfg_a)
    validate_config(cfg_b)
    if cfg_a["scenario"] != cfg_b["scenario"]:
        raise IncompatibleScenarios(f"{cfg_a['scenario']} vs {cfg_b['scenario']}")
    fa, fb = _flatten(cfg_a), _flatten(cfg_b)
    diff = {k: {"a": fa.get(k), "b": fb.get(k)} for k in sorted(set(fa) | set(fb)) if fa.get(k) != fb.get(k)}
    scales = cfg_a.get("run", {}).get("sweep", DEFAULT_RUN["sweep"])
    out = {"scenario": cfg_a["scenario"], "diff": diff, "sweep": {}}
    for tag, cfg in (("a", cfg_a), ("b", cfg_b)):
        rows = sweep_feedback(cfg, scales)
        out["sweep"][tag] = {"rows": rows, **_sweep_summary(rows)}
    return _jsonable(out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dynbc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the checks listed in a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="directory for report.json and CSV traces")
    p_cmp = sub.add_parser("compare", help="diff two configs and sweep the feedback scale")
    p_cmp.add_argument("config_a")
    p_cmp.add_argument("config_b")
    sub.add_parser("schema", help="print the config JSON schema")
    args = parser.parse_args(argv)

    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return 0
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            report = run_config(cfg, Path(args.out) if args.out else None)
            print(json.dumps({"checks": {k: v["status"] for k, v in report["checks"].items()}, "failed": report["failed"]}, indent=2))
            if report["failed"]:
                err = CheckFailed(f"failed checks: {', '.join(report['failed'])}", report["failed"][0])
                print(f"error: {err}", file=sys.stderr)
                return 1
            return 0
        cfg_a, cfg_b = load_config(args.config_a), load_config(args.config_b)
        print(json.dumps(compare_configs(cfg_a, cfg_b), indent=2))
        return 0
    except (ConfigInvalid, IncompatibleScenarios) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
