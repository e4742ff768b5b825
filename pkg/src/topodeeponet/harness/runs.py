"""Pipelines behind the CLI subcommands. Each returns a JSON-ready report dict."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from ..constructive.sensors import discretize_functional, error_table
from ..constructive.separable import SeparableExpansion, build_separable_approximant, expansion_to_deeponet
from ..deeponet import TopologicalDeepONet, evaluate_field, sup_error, tensor_grid
from ..errors import RejectedInputError
from ..ridge1d import Activation
from ..spaces import MeasurementSpace, SpaceElement, UniformRandom, coordinate_family, sample_family
from ..toponet import random_network
from ..training import TrainConfig, generate_dataset, random_deeponet, train
from . import reporting
from .config import ExperimentConfig, build_density, build_family, build_oracle, build_space
from .serialization import load_model, save_model

__all__ = ["run_construct", "run_train", "run_evaluate", "run_discretize", "run_reduction_check", "run_sweep",
           "evaluation_set", "StageError"]


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, exc):
        super().__init__(f"stage {stage}: {exc}")
        self.stage = stage


class _Stage:
    def __init__(self, name, timings):
        self.name, self.timings = name, timings

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, et, exc, tb):
        self.timings[self.name] = time.perf_counter() - self.t0
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


def _setup(cfg: ExperimentConfig):
    space = build_space(cfg)
    family = build_family(cfg, space)
    oracle = build_oracle(cfg, family) if cfg.operator is not None else None
    return space, family, oracle


def evaluation_set(cfg: ExperimentConfig, family, oracle):
    """Held-out elements (seed + 2) and the tensor y-grid used by every sup-error report."""
    samples = sample_family(family, UniformRandom(cfg.grids.n_eval, cfg.seed + 2))
    ys = tensor_grid(oracle.domain[0], oracle.domain[1], cfg.grids.y_points)
    return samples, ys


def _worst_case_figure(model, oracle, err, family, ys, path):
    u = SpaceElement(family.space, np.dot(np.array(err.argmax_c), family.basis))
    reporting.plot_worst_case(ys, oracle.field(u, ys), evaluate_field(model, u, ys), path,
                              title=f"worst element, sup error {err.sup:.3g}")


def _base_report(cfg, command):
    return {"command": command, "config": cfg.model_dump(mode="json", by_alias=True), "metrics": {}, "artifacts": {},
            "runtimes": {}, "flags": []}


def run_construct(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    out = Path(out)
    report = _base_report(cfg, "construct")
    t = report["runtimes"]
    with _Stage("setup", t):
        space, family, oracle = _setup(cfg)
        samples, ys = evaluation_set(cfg, family, oracle)
    c = cfg.construction
    with _Stage("build_separable_approximant", t):
        expansion, build = build_separable_approximant(
            oracle, family, c.epsilon, ys, n_train=c.n_train, n_validation=c.n_validation,
            dict_size=c.dict_size, atom_budget=c.atom_budget, seed=cfg.seed, workers=workers)
    with _Stage("expansion_to_deeponet", t):
        model = expansion_to_deeponet(expansion)
    with _Stage("sup_error", t):
        err = sup_error(model, oracle, family, samples, ys, workers)
    with _Stage("persist", t):
        save_model(out / "model.json", model)
        save_model(out / "expansion.json", expansion)
        b = build.as_dict()
        scalar = {k: v for k, v in b.items() if not isinstance(v, list)}
        reporting.write_csv(out / "construction.csv", sorted(scalar.items()), ["metric", "value"])
        m = oracle.output_dim
        rows = [(k // m, k % m, tol, got) for k, (tol, got) in enumerate(zip(b["coeff_tolerances"], b["coeff_errors"]))]
        reporting.write_csv(out / "coefficient_fits.csv", rows, ["atom", "component", "tolerance", "achieved"])
        _worst_case_figure(model, oracle, err, family, ys, out / "worst_case.svg")
    report["metrics"] = {"construction": b, "evaluation": err.as_dict(), "cover_size": build.cover_size,
                         "n_atoms": build.n_atoms}
    report["artifacts"] = {k: str(out / k) for k in
                           ("model.json", "expansion.json", "construction.csv", "coefficient_fits.csv",
                            "worst_case.svg")}
    report["flags"] = list(build.flags)
    if err.sup > c.epsilon:
        report["flags"].append("evaluation sup above eps")
    return report


def run_train(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    out = Path(out)
    report = _base_report(cfg, "train")
    t = report["runtimes"]
    tb = cfg.train
    with _Stage("setup", t):
        space, family, oracle = _setup(cfg)
        samples, ys = evaluation_set(cfg, family, oracle)
    with _Stage("generate_dataset", t):
        data = generate_dataset(oracle, family, tb.n_u, ys, cfg.seed, tb.split_ratio)
    with _Stage("train", t):
        rng = np.random.default_rng(cfg.seed)
        model = random_deeponet(space, tb.p, tb.branch_widths, oracle.output_dim, oracle.domain, rng,
                                Activation(tb.activation), tb.mixing)
        config = TrainConfig(seed=cfg.seed, epochs=tb.epochs, batch_size=tb.batch_size,
                             learning_rate=tb.learning_rate, decay=tb.decay,
                             freeze_functionals=tb.freeze_functionals)
        result = train(model, data, config)
    with _Stage("sup_error", t):
        err = sup_error(result.model, oracle, family, samples, ys, workers)
    with _Stage("persist", t):
        save_model(out / "model.json", result.model)
        keys = ["epoch", "train_mse", "validation_mse", "best_validation_mse", "learning_rate"]
        reporting.write_csv(out / "history.csv", [[h[k] for k in keys] for h in result.history], keys)
        if result.history:
            reporting.plot_history(result.history, out / "history.svg")
        _worst_case_figure(result.model, oracle, err, family, ys, out / "worst_case.svg")
    best = min((h["validation_mse"] for h in result.history), default=float("nan"))
    report["metrics"] = {"evaluation": err.as_dict(), "best_epoch": result.best_epoch,
                         "best_validation_mse": best, "epochs_run": len(result.history),
                         "diverged": result.diverged, "latent_dim": tb.p}
    report["artifacts"] = {k: str(out / k) for k in ("model.json", "history.csv", "history.svg", "worst_case.svg")}
    if result.diverged:
        report["flags"].append("training diverged")
    return report


def run_evaluate(cfg: ExperimentConfig, model_path, out: Path, workers: int = 1) -> dict:
    out = Path(out)
    report = _base_report(cfg, "evaluate")
    t = report["runtimes"]
    with _Stage("setup", t):
        space, family, oracle = _setup(cfg)
        samples, ys = evaluation_set(cfg, family, oracle)
    with _Stage("load_model", t):
        model = load_model(model_path)
        if isinstance(model, SeparableExpansion):
            model = expansion_to_deeponet(model)
        if not isinstance(model, TopologicalDeepONet):
            raise RejectedInputError("evaluate needs a deeponet or separable_expansion model")
    with _Stage("sup_error", t):
        err = sup_error(model, oracle, family, samples, ys, workers)
    report["metrics"] = {"evaluation": err.as_dict()}
    report["artifacts"] = {"model": str(model_path)}
    if cfg.pipeline == "constructive" and err.sup > cfg.construction.epsilon:
        report["flags"].append("evaluation sup above eps")
    return report


def _doubling(limit):
    k, out = 1, []
    while k < limit:
        out.append(k)
        k *= 2
    return out + [limit]


def run_discretize(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    out = Path(out)
    report = _base_report(cfg, "discretize")
    t = report["runtimes"]
    with _Stage("setup", t):
        space = build_space(cfg)
        family = build_family(cfg, space)
        f = build_density(cfg, space)
    with _Stage("error_table", t):
        table = error_table(f, family, _doubling(space.dim))
    rows = []
    with _Stage("discretize_functional", t):
        for delta in cfg.discretize.deltas:
            d = discretize_functional(f, family, delta, n_check=cfg.discretize.n_check, seed=cfg.seed)
            rows.append((delta, d.k, d.certified_error, d.sampled_error, d.tolerance_met))
            if not d.tolerance_met:
                report["flags"].append(f"delta {delta:g} not reached with {d.k} sensors")
    with _Stage("persist", t):
        reporting.write_csv(out / "sensor_table.csv", table, ["sensors", "certified_error"])
        reporting.write_csv(out / "certificates.csv", rows,
                            ["delta", "sensors", "certified_error", "sampled_error", "tolerance_met"])
        reporting.plot_discretization(table, out / "sensor_table.svg", cfg.discretize.deltas)
    errs = [e for _, e in table]
    monotone = all(b <= a or b <= 1e-13 for a, b in zip(errs, errs[1:]))
    report["metrics"] = {"table": table, "certificates": rows, "monotone": monotone}
    report["artifacts"] = {k: str(out / k) for k in ("sensor_table.csv", "certificates.csv", "sensor_table.svg")}
    return report


def run_reduction_check(seed: int = 0, n_inputs: int = 1000, d: int = 5, width: int = 16, m: int = 3) -> dict:
    """Coordinate-embedded topological network against a plain dense MLP."""
    rng = np.random.default_rng(seed)
    space = MeasurementSpace.matrix(d, 1)
    net = random_network(space, [width], m, rng)
    xs = rng.standard_normal((n_inputs, d))
    ours = np.stack([net(SpaceElement(space, x)) for x in xs])
    w, theta, a = net.layer.weights, net.layer.biases, net.output
    ref = np.stack([a @ np.tanh(w @ x - theta) for x in xs])
    diff = float(np.max(np.abs(ours - ref)))
    return {"command": "reduction-check", "max_abs_diff": diff, "n_inputs": n_inputs, "passed": diff <= 1e-12,
            "flags": [] if diff <= 1e-12 else ["reduction mismatch"]}


_SWEEP_TARGET = {"epsilon": ("construction", "epsilon", float), "dict_size": ("construction", "dict_size", int),
                 "p": ("train", "p", int), "seed": (None, "seed", int)}


def _with_value(cfg, parameter, value):
    if parameter == "delta":
        block = cfg.discretize.model_copy(update={"deltas": [float(value)]})
        return cfg.model_copy(update={"discretize": block})
    block_name, key, cast = _SWEEP_TARGET[parameter]
    if block_name is None:
        return cfg.model_copy(update={key: cast(value)})
    block = getattr(cfg, block_name).model_copy(update={key: cast(value)})
    return cfg.model_copy(update={block_name: block})


def run_sweep(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    if cfg.sweep is None:
        raise StageError("setup", RejectedInputError("sweep needs a sweep block in the config"))
    out = Path(out)
    report = _base_report(cfg, "sweep")
    runner = {"constructive": run_construct, "trained": run_train, "chen_chen_discretized": run_discretize}
    rows, errors, tols = [], [], []
    for i, value in enumerate(cfg.sweep.values):
        sub = _with_value(cfg, cfg.sweep.parameter, value)
        sub_report = runner[cfg.pipeline](sub, out / f"point_{i:02d}", workers)
        if cfg.pipeline == "chen_chen_discretized":
            sup, tol = sub_report["metrics"]["certificates"][0][2], sub.discretize.deltas[0]
        else:
            sup = sub_report["metrics"]["evaluation"]["sup"]
            tol = sub.construction.epsilon if cfg.pipeline == "constructive" else float("nan")
        rows.append((value, sup, tol, ";".join(sub_report["flags"])))
        errors.append(sup)
        tols.append(tol)
        report["flags"] += [f"{cfg.sweep.parameter}={value}: {f}" for f in sub_report["flags"]]
    reporting.write_csv(out / "sweep.csv", rows, [cfg.sweep.parameter, "sup_error", "tolerance", "flags"])
    reporting.plot_sweep(list(cfg.sweep.values), errors, cfg.sweep.parameter, out / "sweep.svg",
                         tols if cfg.pipeline != "trained" else None)
    report["metrics"] = {"points": rows}
    report["artifacts"] = {k: str(out / k) for k in ("sweep.csv", "sweep.svg")}
    return report
