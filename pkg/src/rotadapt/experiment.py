"""Declarative experiment runner: JSON config in, CSV/JSON artifacts out.

A config pins the mixture parameters, a list of rotation angles, one network,
one dataset seed, and a list of optimizer settings. Every (angle, optimizer)
cell trains once and writes a trajectory CSV, a traced decision boundary, and
a Monte-Carlo risk report. With the reparameterization stage enabled, the
basis is estimated once at angle zero and carried to the other angles through
the exact parameter-rotation coupling; configured checks then compare cells
across angles. All randomness is seeded from the config, so identical config
bytes give identical artifact bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import analysis, datagen, egop, linalg, loss, model, optim

FLOAT_FMT = "%.17g"

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "rotadapt experiment configuration",
    "type": "object",
    "required": ["params", "gammas", "architecture", "dataset", "optimizers"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "params": {
            "type": "object",
            "required": ["omega", "mu", "sigma"],
            "additionalProperties": False,
            "properties": {
                "omega": {"type": "number", "exclusiveMinimum": 1},
                "mu": {"type": "number", "exclusiveMinimum": 0},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "gammas": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "number"},
        },
        "architecture": {
            "type": "object",
            "required": ["family", "d", "m", "init_seed"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["fixed_outer", "full"]},
                "d": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "a_seed": {"type": "integer"},
                "init_seed": {"type": "integer"},
                "init_scale": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "dataset": {
            "type": "object",
            "required": ["n", "seed"],
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
        "optimizers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "eta", "steps"],
                "additionalProperties": False,
                "properties": {
                    "name": {"enum": ["gd", "adam", "signgd", "shampoo"]},
                    "label": {"type": "string"},
                    "eta": {"type": "number", "exclusiveMinimum": 0},
                    "steps": {"type": "integer", "minimum": 0},
                    "beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                    "beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                    "eps": {"type": "number", "minimum": 0},
                    "momentum": {"type": "number", "minimum": 0},
                    "standard_order": {"type": "boolean"},
                    "root_period": {"type": "integer", "minimum": 1},
                    "include_step0_root": {"type": "boolean"},
                },
            },
        },
        "egop": {
            "type": "object",
            "required": ["enabled"],
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "samples": {"type": "integer", "minimum": 1},
                "scale": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "bbox": {
                    "type": "array",
                    "minItems": 4,
                    "maxItems": 4,
                    "items": {"type": "number"},
                },
                "resolution": {"type": "integer", "minimum": 16},
                "n_mc": {"type": "integer", "minimum": 10000},
                "risk_seed": {"type": "integer"},
                "probe_count": {"type": "integer", "minimum": 1},
                "probe_seed": {"type": "integer"},
            },
        },
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "tol"],
                "additionalProperties": False,
                "properties": {
                    "type": {"enum": ["iterate_invariance", "boundary_equivariance"]},
                    "tol": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "theta_dump_stride": {"type": "integer", "minimum": 0},
    },
}

_ANALYSIS_DEFAULTS = {
    "bbox": list(analysis.DEFAULT_BBOX),
    "resolution": analysis.DEFAULT_RESOLUTION,
    "n_mc": 100_000,
    "risk_seed": 424243,
    "probe_count": 1000,
    "probe_seed": 424244,
}

_EGOP_DEFAULTS = {"enabled": False, "samples": 0, "scale": 1.0, "seed": 424245}


def config_schema() -> dict:
    return json.loads(json.dumps(CONFIG_SCHEMA))


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read()
    cfg = json.loads(raw.decode("utf-8"))
    validate_config(cfg)
    cfg["_sha256"] = hashlib.sha256(raw).hexdigest()
    return cfg


def validate_config(cfg: dict) -> None:
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    if cfg["architecture"]["family"] == "fixed_outer" and "a_seed" not in cfg["architecture"]:
        raise ValueError("fixed_outer architecture requires a_seed")
    checks = cfg.get("checks", [])
    egop_cfg = {**_EGOP_DEFAULTS, **cfg.get("egop", {})}
    if any(c["type"] == "iterate_invariance" for c in checks) and not egop_cfg["enabled"]:
        raise ValueError("iterate_invariance checks need the egop stage enabled")
    if egop_cfg["enabled"] and egop_cfg["samples"] < 1:
        raise ValueError("egop stage needs a positive sample count")


def _build_network(cfg: dict):
    arch_cfg = cfg["architecture"]
    if arch_cfg["family"] == "fixed_outer":
        rng = np.random.default_rng(arch_cfg["a_seed"])
        a = rng.integers(0, 2, arch_cfg["m"]) * 2.0 - 1.0
        return model.make_fixed_outer_two_layer(
            arch_cfg["d"],
            arch_cfg["m"],
            a,
            arch_cfg["init_seed"],
            arch_cfg.get("init_scale"),
        )
    return model.make_full_two_layer(
        arch_cfg["d"], arch_cfg["m"], arch_cfg["init_seed"], arch_cfg.get("init_scale")
    )


def _optimizer_label(opt: dict) -> str:
    return opt.get("label", opt["name"])


def _run_optimizer(opt: dict, oracle, layout, theta0) -> optim.Trajectory:
    name = opt["name"]
    if name == "gd":
        return optim.gd_run(
            oracle, theta0, opt["eta"], opt["steps"], opt.get("momentum", 0.0)
        )
    if name == "adam":
        return optim.adam_run(
            oracle,
            theta0,
            opt["eta"],
            opt.get("beta1", 0.9999),
            opt.get("beta2", 0.9999),
            opt.get("eps", 1e-8),
            opt["steps"],
            opt.get("standard_order", False),
        )
    if name == "signgd":
        return optim.signgd_run(
            oracle, theta0, opt["eta"], opt.get("eps", 0.0), opt["steps"]
        )
    return optim.shampoo_run(
        oracle,
        layout,
        theta0,
        opt["eta"],
        opt.get("eps", 1e-4),
        opt["steps"],
        opt.get("root_period", 1),
        opt.get("include_step0_root", True),
    )


def _trajectory_csv(traj: optim.Trajectory, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("t,loss,theta_norm\n")
        for k in range(len(traj)):
            norm = np.linalg.norm(traj.thetas[k])
            fh.write(f"{traj.steps[k]},{FLOAT_FMT % traj.losses[k]},{FLOAT_FMT % norm}\n")


@dataclass
class CellResult:
    gamma_index: int
    gamma: float
    label: str
    trajectory: optim.Trajectory
    predictor: object
    files: list = field(default_factory=list)


def _make_predictor(arch, theta, basis):
    final = theta if basis is None else basis @ theta

    def predict(points):
        return model.forward_batch(arch, final, np.atleast_2d(points))

    return predict


def run_experiment(config_path, out_dir=None, dry_run: bool = False) -> dict:
    """Execute a config and return the summary dict (also written to disk)."""
    cfg = load_config(config_path)
    name = cfg.get("name", Path(config_path).stem)
    out = Path(out_dir) if out_dir is not None else Path(config_path).parent / name
    params = datagen.MixtureParams(**cfg["params"])
    gammas = list(cfg["gammas"])
    egop_cfg = {**_EGOP_DEFAULTS, **cfg.get("egop", {})}
    ana_cfg = {**_ANALYSIS_DEFAULTS, **cfg.get("analysis", {})}
    arch, theta0 = _build_network(cfg)
    layout = arch.layout()

    plan = {
        "name": name,
        "config_sha256": cfg["_sha256"],
        "out_dir": str(out),
        "cells": [
            {"gamma": g, "optimizer": _optimizer_label(o)}
            for g in gammas
            for o in cfg["optimizers"]
        ],
        "egop_enabled": bool(egop_cfg["enabled"]),
        "n_params": layout.size,
    }
    if dry_run:
        return {"plan": plan, "checks": [], "passed": True, "dry_run": True}

    out.mkdir(parents=True, exist_ok=True)
    datasets = {}
    for gi, g in enumerate(gammas):
        ds = datagen.sample(params, g, cfg["dataset"]["n"], cfg["dataset"]["seed"])
        datasets[gi] = ds
        datagen.dataset_to_csv(ds, out / f"dataset_g{gi}.csv")

    bases = {gi: None for gi in range(len(gammas))}
    if egop_cfg["enabled"]:
        base_ds = datagen.sample(
            params, 0.0, cfg["dataset"]["n"], cfg["dataset"]["seed"]
        )
        base_oracle = loss.make_sample_loss_oracle(base_ds, arch)
        spec = egop.SamplingSpec(scale=egop_cfg["scale"], seed=egop_cfg["seed"])
        estimate = egop.estimate_egop(base_oracle, spec, egop_cfg["samples"])
        v_base = egop.egop_basis(estimate)
        for gi, g in enumerate(gammas):
            if g == 0.0:
                bases[gi] = v_base
            else:
                q = linalg.param_rotation(linalg.rotation_matrix(g), arch)
                bases[gi] = egop.coupled_basis(v_base, q)

    def run_cell(gi_opt):
        gi, opt = gi_opt
        g = gammas[gi]
        label = _optimizer_label(opt)
        prefix = f"{label}_g{gi}"
        oracle = loss.make_sample_loss_oracle(datasets[gi], arch)
        if bases[gi] is not None:
            oracle = egop.reparameterized_oracle(oracle, bases[gi])
        traj = _run_optimizer(opt, oracle, layout, theta0)
        files = []
        _trajectory_csv(traj, out / f"{prefix}_trajectory.csv")
        files.append(f"{prefix}_trajectory.csv")
        predictor = _make_predictor(arch, traj.final, bases[gi])
        boundary = analysis.extract_boundary(
            predictor, tuple(ana_cfg["bbox"]), ana_cfg["resolution"]
        )
        analysis.boundary_to_csv(boundary, out / f"{prefix}_boundary.csv")
        files.append(f"{prefix}_boundary.csv")
        report = analysis.classification_risk(
            predictor, params, g, ana_cfg["n_mc"], ana_cfg["risk_seed"]
        )
        report.to_json(out / f"{prefix}_risk.json")
        files.append(f"{prefix}_risk.json")
        stride = cfg.get("theta_dump_stride", 0)
        if stride > 0:
            np.save(out / f"{prefix}_iterates.npy", traj.thetas[::stride])
            files.append(f"{prefix}_iterates.npy")
        return (gi, label), CellResult(gi, g, label, traj, predictor, files)

    cell_keys = [(gi, opt) for gi in range(len(gammas)) for opt in cfg["optimizers"]]
    max_workers = _thread_cap(len(cell_keys))
    results = {}
    if max_workers == 1:
        for key in cell_keys:
            k, v = run_cell(key)
            results[k] = v
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for k, v in pool.map(run_cell, cell_keys):
                results[k] = v

    check_outcomes = _run_checks(cfg, gammas, results, ana_cfg)
    passed = all(c["passed"] for c in check_outcomes)
    summary = {
        "plan": plan,
        "cells": {
            f"{label}_g{gi}": {
                "gamma": results[(gi, label)].gamma,
                "files": results[(gi, label)].files,
                "final_loss": float(results[(gi, label)].trajectory.losses[-1]),
            }
            for (gi, label) in results
        },
        "checks": check_outcomes,
        "passed": passed,
        "metadata": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())},
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _thread_cap(n_cells: int) -> int:
    env = os.environ.get("LAB_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_cells))


def _run_checks(cfg, gammas, results, ana_cfg) -> list:
    outcomes = []
    checks = cfg.get("checks", [])
    if not checks:
        return outcomes
    labels = sorted({label for (_, label) in results})
    base_idx = next((gi for gi, g in enumerate(gammas) if g == 0.0), None)
    rng = np.random.Generator(np.random.Philox(key=ana_cfg["probe_seed"]))
    x0, x1, y0, y1 = ana_cfg["bbox"]
    probes = np.stack(
        [
            rng.random(ana_cfg["probe_count"]) * (x1 - x0) + x0,
            rng.random(ana_cfg["probe_count"]) * (y1 - y0) + y0,
        ],
        axis=1,
    )
    for check in checks:
        if base_idx is None:
            outcomes.append(
                {
                    "type": check["type"],
                    "passed": False,
                    "detail": "checks need a gamma = 0 cell as the reference",
                }
            )
            continue
        worst = 0.0
        for label in labels:
            base = results[(base_idx, label)]
            for gi, g in enumerate(gammas):
                if gi == base_idx:
                    continue
                cell = results[(gi, label)]
                if check["type"] == "iterate_invariance":
                    num = np.linalg.norm(
                        cell.trajectory.thetas - base.trajectory.thetas, axis=1
                    )
                    den = 1.0 + np.linalg.norm(base.trajectory.thetas, axis=1)
                    worst = max(worst, float((num / den).max()))
                else:
                    worst = max(
                        worst,
                        analysis.boundary_equivariance_check(
                            cell.predictor, base.predictor, g, probes
                        ),
                    )
        outcomes.append(
            {
                "type": check["type"],
                "passed": bool(worst <= check["tol"]),
                "max_residual": worst,
                "tol": check["tol"],
            }
        )
    return outcomes
