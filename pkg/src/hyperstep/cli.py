"""Command-line interface: training runs, closed-form queries, oracle checks,
and the convergence comparison report.

Exit codes: 0 success, 1 usage or input error (including divergence),
2 a run hit its epoch budget without converging, 3 an internal check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .objectives import ObjectiveId, ParamPoint, RegressionSample, evaluate, gradient
from .optimizers import HyperParams, Method, OptimizerState, PerCoord
from . import analyzer, hyperopt
from .harness import (
    DEFAULT_HYPERS,
    DEFAULT_INIT_COORD,
    DEFAULT_SAMPLE,
    DEFAULT_TOLERANCE,
    OPTIMIZED_HYPERS,
    HyperPolicy,
    RandomInit,
    RunConfig,
    Trace,
    reproduce_table2,
    resolve_init,
    run_training,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CHECK_FAILED = 3

TRACE_HEADER = "epoch,loss,w,b,eta,alpha,beta,eta_flag,alpha_flag,beta_flag"
TABLE2_HEADER = (
    "method,objective,optimal_epoch,optimal_loss,fixed_epoch,fixed_loss,"
    "published_optimal_epoch,published_optimal_loss,published_fixed_epoch,published_fixed_loss"
)

_ARGMIN_TOL = 1e-6
_ONE_STEP_TOL = 1e-20
_GRADIENT_TOL = 1e-6


class _UsageError(Exception):
    """Input problem detected after argument parsing; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; this tool reserves 2 for
    # non-convergence, so usage problems are remapped to 1.
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _method_arg(text: str) -> Method:
    try:
        return Method(text.lower())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown method {text!r} (choose from gd, momentum, adagrad, rmsprop)"
        ) from None


def _objective_arg(text: str) -> ObjectiveId:
    try:
        return ObjectiveId(text.lower())
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown objective {text!r} (choose from f1, f2, f3)") from None


def _init_arg(text: str) -> ParamPoint:
    values: dict[str, float] = {}
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        key, sep, raw = piece.partition("=")
        key = key.strip()
        if not sep or key not in ("w", "b"):
            raise argparse.ArgumentTypeError(f"bad init component {piece!r}; expected w=... or b=...")
        try:
            values[key] = float(raw)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad number in init component {piece!r}") from None
    if "w" not in values:
        raise argparse.ArgumentTypeError(f"init {text!r} must set w")
    return ParamPoint(w=values["w"], b=values.get("b"))


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _fmt_bool(value: bool) -> str:
    return "true" if value else "false"


def _pick(*values):
    for v in values:
        if v is not None:
            return v
    return None


# ---------------------------------------------------------------------------
# config files: flat "key = value" lines, '#' comments, keys matching the
# long flag names with dashes or underscores. Explicit flags win.

_TRUE_WORDS = {"true", "yes", "on", "1"}
_FALSE_WORDS = {"false", "no", "off", "0"}


def _bool_word(text: str) -> bool:
    word = text.strip().lower()
    if word in _TRUE_WORDS:
        return True
    if word in _FALSE_WORDS:
        return False
    raise _UsageError(f"expected a boolean, got {text!r}")


def _load_config(path: str) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise _UsageError(f"cannot read config file {path!r}: {exc}") from None
    entries: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        key, sep, value = text.partition("=")
        if not sep:
            raise _UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _apply_config(args: argparse.Namespace, converters: dict[str, object]) -> None:
    if args.config is None:
        return
    for key, raw in _load_config(args.config).items():
        if key not in converters:
            raise _UsageError(f"unknown config key {key!r}")
        if getattr(args, key) is None:
            try:
                setattr(args, key, converters[key](raw))
            except argparse.ArgumentTypeError as exc:
                raise _UsageError(f"config key {key!r}: {exc}") from None
            except ValueError as exc:
                raise _UsageError(f"config key {key!r}: {exc}") from None


_RUN_CONVERTERS = {
    "method": _method_arg,
    "objective": _objective_arg,
    "policy": str,
    "optimize": str,
    "eta": float,
    "alpha": float,
    "beta": float,
    "epsilon": float,
    "init": _init_arg,
    "init_seed": int,
    "x": float,
    "y": float,
    "max_epochs": int,
    "tolerance": float,
    "f3_half_gradient": _bool_word,
    "format": str,
    "output": str,
}

_TABLE2_CONVERTERS = {
    "eta": float,
    "alpha": float,
    "beta": float,
    "epsilon": float,
    "init": _init_arg,
    "init_seed": int,
    "x": float,
    "y": float,
    "max_epochs": int,
    "tolerance": float,
    "f3_half_gradient": _bool_word,
    "format": str,
    "output": str,
}


def _write_output(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _UsageError(f"cannot write {path!r}: {exc}") from None


# ---------------------------------------------------------------------------
# run

def _record_row(rec) -> list[str]:
    return [
        str(rec.epoch),
        _fmt(rec.loss),
        _fmt(rec.params.w),
        "" if rec.params.b is None else _fmt(rec.params.b),
        _fmt(rec.hyper_used.eta),
        _fmt(rec.hyper_used.alpha),
        _fmt(rec.hyper_used.beta),
        rec.hyper_flags.eta,
        rec.hyper_flags.alpha,
        rec.hyper_flags.beta,
    ]


def _render_trace_csv(trace: Trace) -> str:
    lines = [TRACE_HEADER]
    lines.extend(",".join(_record_row(rec)) for rec in trace.records)
    return "\n".join(lines) + "\n"


def _config_echo(cfg: RunConfig, init_seed: int | None) -> dict:
    resolved = resolve_init(cfg)
    return {
        "method": cfg.method.value,
        "objective": cfg.objective.value,
        "sample": None if cfg.sample is None else {"x": cfg.sample.x, "y": cfg.sample.y},
        "init": {"w": resolved.w, "b": resolved.b},
        "init_seed": init_seed,
        "policy": {
            "kind": cfg.policy.kind.value,
            "optimize": sorted(cfg.policy.optimize),
            "base": {
                "eta": cfg.policy.base.eta,
                "alpha": cfg.policy.base.alpha,
                "beta": cfg.policy.base.beta,
                "epsilon": cfg.policy.base.epsilon,
            },
        },
        "max_epochs": cfg.max_epochs,
        "tolerance": cfg.tolerance,
        "f3_half_gradient": cfg.f3_half_gradient,
    }


def _render_artifact_json(trace: Trace, cfg: RunConfig, init_seed: int | None) -> str:
    records = []
    for rec in trace.records:
        records.append(
            {
                "epoch": rec.epoch,
                "loss": rec.loss,
                "w": rec.params.w,
                "b": rec.params.b,
                "eta": rec.hyper_used.eta,
                "alpha": rec.hyper_used.alpha,
                "beta": rec.hyper_used.beta,
                "eta_flag": rec.hyper_flags.eta,
                "alpha_flag": rec.hyper_flags.alpha,
                "beta_flag": rec.hyper_flags.beta,
            }
        )
    payload = {
        "format": "json",
        "config": _config_echo(cfg, init_seed),
        "trace": {
            "records": records,
            "converged_epoch": trace.converged_epoch,
            "final_loss": trace.final_loss,
            "diverged": trace.diverged,
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _build_run_config(args: argparse.Namespace) -> tuple[RunConfig, int | None]:
    _apply_config(args, _RUN_CONVERTERS)
    if args.method is None or args.objective is None:
        raise _UsageError("both --method and --objective are required")
    method: Method = args.method
    objective: ObjectiveId = args.objective

    base = HyperParams(
        eta=_pick(args.eta, DEFAULT_HYPERS.eta),
        alpha=_pick(args.alpha, DEFAULT_HYPERS.alpha),
        beta=_pick(args.beta, DEFAULT_HYPERS.beta),
        epsilon=_pick(args.epsilon, DEFAULT_HYPERS.epsilon),
    )

    policy_name = _pick(args.policy, "fixed")
    if policy_name not in ("fixed", "optimal"):
        raise _UsageError(f"policy must be 'fixed' or 'optimal', got {policy_name!r}")
    if policy_name == "fixed":
        if args.optimize is not None:
            raise _UsageError("--optimize only applies to the optimal policy")
        policy = HyperPolicy.fixed(base)
    else:
        if args.optimize is None:
            names = OPTIMIZED_HYPERS[method]
        else:
            names = frozenset(p.strip() for p in args.optimize.split(",") if p.strip())
            if not names:
                raise _UsageError("--optimize names no hyperparameters")
        policy = HyperPolicy.optimal(base, names)

    if args.init is not None and args.init_seed is not None:
        raise _UsageError("--init and --init-seed are mutually exclusive")
    if args.init_seed is not None:
        init: ParamPoint | RandomInit = RandomInit(seed=args.init_seed)
    elif args.init is not None:
        init = args.init
    else:
        init = ParamPoint(
            w=DEFAULT_INIT_COORD,
            b=DEFAULT_INIT_COORD if objective.arity == 2 else None,
        )

    sample = None
    if objective is ObjectiveId.F3:
        sample = RegressionSample(x=_pick(args.x, DEFAULT_SAMPLE.x), y=_pick(args.y, DEFAULT_SAMPLE.y))
    elif args.x is not None or args.y is not None:
        raise _UsageError(f"--x/--y only apply to f3, not {objective.value}")

    cfg = RunConfig(
        method=method,
        objective=objective,
        policy=policy,
        sample=sample,
        init=init,
        max_epochs=_pick(args.max_epochs, 200),
        tolerance=_pick(args.tolerance, DEFAULT_TOLERANCE),
        f3_half_gradient=_pick(args.f3_half_gradient, False),
    )
    return cfg, args.init_seed


def _cmd_run(args: argparse.Namespace) -> int:
    cfg, init_seed = _build_run_config(args)
    trace = run_training(cfg)
    fmt = _pick(args.format, "csv")
    if fmt == "csv":
        text = _render_trace_csv(trace)
    elif fmt == "json":
        text = _render_artifact_json(trace, cfg, init_seed)
    else:
        raise _UsageError(f"format must be 'csv' or 'json', got {fmt!r}")
    _write_output(args.output, text)
    if trace.diverged:
        print("run diverged: loss or gradient became non-finite", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if trace.converged_epoch is not None else EXIT_NO_CONVERGENCE


# ---------------------------------------------------------------------------
# optimal

def _require(args: argparse.Namespace, names: list[str]) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise _UsageError(f"the formula needs {', '.join(missing)}")


def _build_state(args: argparse.Namespace, obj: ObjectiveId) -> OptimizerState:
    two = obj.arity == 2
    w = _pick(args.w, 0.0)
    b = _pick(args.b, 0.0) if two else None
    none_b = None if not two else 0.0
    return OptimizerState(
        params=ParamPoint(w=w, b=b),
        velocity=PerCoord(w=_pick(args.v_w, 0.0), b=_pick(args.v_b, none_b)),
        grad_sq_sum=PerCoord(w=_pick(args.phi_w, 0.0), b=_pick(args.phi_b, none_b)),
        weighted_grad_sq=PerCoord(w=_pick(args.u_w, 0.0), b=_pick(args.u_b, none_b)),
    )


def _cmd_optimal(args: argparse.Namespace) -> int:
    method: Method = args.method
    obj: ObjectiveId = args.objective
    two = obj.arity == 2
    sample = None
    if obj is ObjectiveId.F3:
        _require(args, ["x", "y"])
        sample = RegressionSample(x=args.x, y=args.y)

    epsilon = _pick(args.epsilon, DEFAULT_HYPERS.epsilon)
    half = _pick(args.f3_half_gradient, False)
    rows: list[tuple[str, hyperopt.FeasibleValue]] = []

    if method is Method.GD:
        state = _build_state(args, obj)
        rows.append(("eta", hyperopt.optimal_lr_gd(obj, state, sample)))
    elif method is Method.MOMENTUM:
        _require(args, ["w"] + (["b"] if two else []))
        state = _build_state(args, obj)
        if args.alpha is None and args.eta is None:
            raise _UsageError("provide --alpha to solve eta, --eta to solve alpha, or both")
        if args.alpha is not None:
            rows.append(("eta", hyperopt.optimal_lr_momentum(obj, state, sample, alpha=args.alpha)))
        if args.eta is not None:
            rows.append(("alpha", hyperopt.optimal_momentum_coef(obj, state, sample, eta=args.eta)))
    elif method is Method.ADAGRAD:
        _require(args, ["phi_w"] + (["phi_b"] if two else []))
        state = _build_state(args, obj)
        rows.append(("eta", hyperopt.optimal_lr_adagrad(obj, state, sample, epsilon=epsilon)))
    else:
        _require(args, ["w", "u_w"] + (["b", "u_b"] if two else []))
        state = _build_state(args, obj)
        if args.beta is None and args.eta is None:
            raise _UsageError("provide --beta to solve eta, --eta to solve beta, or both")
        if args.beta is not None:
            rows.append(
                ("eta", hyperopt.optimal_lr_rmsprop(
                    obj, state, sample, beta=args.beta, epsilon=epsilon, f3_half_gradient=half))
            )
        if args.eta is not None:
            rows.append(
                ("beta", hyperopt.optimal_beta_rmsprop(
                    obj, state, sample, eta=args.eta, epsilon=epsilon, f3_half_gradient=half))
            )

    for name, fv in rows:
        print(
            f"{name}: value={_fmt(fv.value)} raw={_fmt(fv.raw)} "
            f"feasible={_fmt_bool(fv.feasible)} defined={_fmt_bool(fv.defined)}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def _unit_open(rng: np.random.Generator) -> float:
    # uniform draw from (0, 1]
    return 1.0 - float(rng.random())


def _rand_params(rng: np.random.Generator, obj: ObjectiveId) -> ParamPoint:
    w = float(rng.uniform(0.0, 1.0))
    return ParamPoint(w=w, b=float(rng.uniform(0.0, 1.0)) if obj.arity == 2 else None)


def _rand_percoord(rng: np.random.Generator, obj: ObjectiveId, lo: float, hi: float) -> PerCoord:
    w = float(rng.uniform(lo, hi))
    return PerCoord(w=w, b=float(rng.uniform(lo, hi)) if obj.arity == 2 else None)


def _open_percoord(rng: np.random.Generator, obj: ObjectiveId) -> PerCoord:
    return PerCoord(w=_unit_open(rng), b=_unit_open(rng) if obj.arity == 2 else None)


def _obj_sample(obj: ObjectiveId) -> RegressionSample | None:
    return DEFAULT_SAMPLE if obj is ObjectiveId.F3 else None


_ALL_OBJECTIVES = (ObjectiveId.F1, ObjectiveId.F2, ObjectiveId.F3)
_BETA_SAMPLE = RegressionSample(x=1.0, y=0.3)  # common-gradient point for the beta rule


def _check_gradients(samples: int, seed: int) -> list[dict]:
    checks = []
    for obj in _ALL_OBJECTIVES:
        rng = np.random.default_rng(seed)
        s = _obj_sample(obj)
        worst = 0.0
        for _ in range(samples):
            p = _rand_params(rng, obj)
            a = analyzer.finite_diff_gradient(obj, p, s)
            g = gradient(obj, p, s)
            dev = abs(a.d_w - g.d_w) / max(1.0, abs(g.d_w))
            if g.d_b is not None:
                dev = max(dev, abs(a.d_b - g.d_b) / max(1.0, abs(g.d_b)))
            worst = max(worst, dev)
        checks.append(
            {
                "name": f"gradients/{obj.value}",
                "tolerance": _GRADIENT_TOL,
                "max_deviation": worst,
                "samples": samples,
                "passed": worst <= _GRADIENT_TOL,
            }
        )
    return checks


def _gd_argmin_cases() -> list[tuple[ObjectiveId, RegressionSample | None]]:
    return [
        (ObjectiveId.F1, None),
        (ObjectiveId.F2, None),
        (ObjectiveId.F3, RegressionSample(x=0.3, y=0.23)),
        (ObjectiveId.F3, RegressionSample(x=1.0, y=0.3)),
        (ObjectiveId.F3, RegressionSample(x=2.0, y=0.4)),
    ]


def _check_argmin_gd(seed: int) -> dict:
    worst = 0.0
    for obj, s in _gd_argmin_cases():
        template = OptimizerState.initial(
            ParamPoint(w=0.0, b=0.0 if obj.arity == 2 else None)
        )
        res = analyzer.argmin_hyper(
            Method.GD, obj, "eta", DEFAULT_HYPERS, s,
            analyzer.default_sampling(obj, seed), template, f3_half_gradient=True,
        )
        fv = hyperopt.optimal_lr_gd(obj, template, s)
        worst = max(worst, abs(res.argmin - fv.value))
    return {
        "name": "argmin/gd",
        "tolerance": _ARGMIN_TOL,
        "max_deviation": worst,
        "passed": worst <= _ARGMIN_TOL,
    }


def _pointwise_cases(method: Method) -> list[tuple[ObjectiveId, str]]:
    targets = sorted(OPTIMIZED_HYPERS[method])
    return [(obj, t) for obj in _ALL_OBJECTIVES for t in targets]


def _pointwise_deviation(
    method: Method, obj: ObjectiveId, target: str, rng: np.random.Generator
) -> tuple[float | None, bool]:
    """One sampled state; returns (deviation or None if skipped, defined)."""
    sample = _BETA_SAMPLE if (method is Method.RMSPROP and target == "beta" and obj is ObjectiveId.F3) else _obj_sample(obj)
    half = obj is ObjectiveId.F3
    params = _rand_params(rng, obj)
    velocity = _rand_percoord(rng, obj, -0.5, 0.5)
    phi = _open_percoord(rng, obj)
    if method is Method.RMSPROP and target == "beta":
        shared = _unit_open(rng)
        u = PerCoord(w=shared, b=shared if obj.arity == 2 else None)
    else:
        u = _open_percoord(rng, obj)
    state = OptimizerState(params=params, velocity=velocity, grad_sq_sum=phi, weighted_grad_sq=u)
    ctx_eta = float(rng.uniform(0.0, 1.0))
    ctx_alpha = float(rng.uniform(0.0, 1.0))
    ctx_beta = float(rng.uniform(0.0, 1.0))
    fixed = HyperParams(eta=ctx_eta, alpha=ctx_alpha, beta=ctx_beta, epsilon=1e-8)

    if method is Method.MOMENTUM:
        if target == "eta":
            fv = hyperopt.optimal_lr_momentum(obj, state, sample, alpha=ctx_alpha)
        else:
            fv = hyperopt.optimal_momentum_coef(obj, state, sample, eta=ctx_eta)
    elif method is Method.ADAGRAD:
        fv = hyperopt.optimal_lr_adagrad(obj, state, sample, epsilon=fixed.epsilon)
    else:
        if target == "eta":
            fv = hyperopt.optimal_lr_rmsprop(
                obj, state, sample, beta=ctx_beta, epsilon=fixed.epsilon, f3_half_gradient=half
            )
        else:
            fv = hyperopt.optimal_beta_rmsprop(
                obj, state, sample, eta=ctx_eta, epsilon=fixed.epsilon, f3_half_gradient=half
            )
    if not fv.defined:
        return None, False
    if not fv.feasible:
        return None, True
    res = analyzer.pointwise_argmin_hyper(
        method, obj, target, fixed, sample, state, f3_half_gradient=half
    )
    return abs(res.argmin - fv.value), True


def _check_argmin_pointwise(method: Method, seed: int, states: int = 100) -> dict:
    worst = 0.0
    min_defined = 1.0
    compared = 0
    for obj, target in _pointwise_cases(method):
        rng = np.random.default_rng(seed)
        defined = 0
        for _ in range(states):
            dev, is_defined = _pointwise_deviation(method, obj, target, rng)
            defined += int(is_defined)
            if dev is not None:
                worst = max(worst, dev)
                compared += 1
        min_defined = min(min_defined, defined / states)
    return {
        "name": f"argmin/{method.value}",
        "tolerance": _ARGMIN_TOL,
        "max_deviation": worst,
        "compared": compared,
        "min_defined_fraction": min_defined,
        "passed": worst <= _ARGMIN_TOL and min_defined >= 0.95,
    }


def _one_step_state(rng: np.random.Generator, obj: ObjectiveId) -> OptimizerState:
    return OptimizerState(
        params=_rand_params(rng, obj),
        velocity=_rand_percoord(rng, obj, -0.5, 0.5),
        grad_sq_sum=_open_percoord(rng, obj),
        weighted_grad_sq=_open_percoord(rng, obj),
    )


def _one_step_loss_max(method: Method, samples: int, seed: int) -> tuple[float, int]:
    """Worst post-step loss using closed-form values, over defined+feasible draws."""
    from .optimizers import step as take_step

    worst = 0.0
    tested = 0
    for obj in _ALL_OBJECTIVES:
        half = obj is ObjectiveId.F3
        sample = _obj_sample(obj)
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            state = _one_step_state(rng, obj)
            trials: list[HyperParams] = []
            if method is Method.GD:
                fv = hyperopt.optimal_lr_gd(obj, state, sample)
                if fv.defined and fv.feasible:
                    trials.append(HyperParams(eta=fv.value))
            elif method is Method.MOMENTUM:
                alpha = float(rng.uniform(0.0, 1.0))
                eta = float(rng.uniform(0.0, 1.0))
                fv = hyperopt.optimal_lr_momentum(obj, state, sample, alpha=alpha)
                if fv.defined and fv.feasible:
                    trials.append(HyperParams(eta=fv.value, alpha=alpha))
                fv = hyperopt.optimal_momentum_coef(obj, state, sample, eta=eta)
                if fv.defined and fv.feasible:
                    trials.append(HyperParams(eta=eta, alpha=fv.value))
            elif method is Method.ADAGRAD:
                g = gradient(obj, state.params, sample, f3_half_gradient=half)
                post_b = None if g.d_b is None else state.grad_sq_sum.b + g.d_b * g.d_b
                view = OptimizerState(
                    params=state.params,
                    velocity=state.velocity,
                    grad_sq_sum=PerCoord(w=state.grad_sq_sum.w + g.d_w * g.d_w, b=post_b),
                    weighted_grad_sq=state.weighted_grad_sq,
                )
                fv = hyperopt.optimal_lr_adagrad(obj, view, sample, epsilon=1e-8)
                if fv.defined and fv.feasible:
                    trials.append(HyperParams(eta=fv.value, epsilon=1e-8))
            else:
                beta = float(rng.uniform(0.0, 1.0))
                eta = float(rng.uniform(0.0, 1.0))
                fv = hyperopt.optimal_lr_rmsprop(
                    obj, state, sample, beta=beta, epsilon=1e-8, f3_half_gradient=half
                )
                if fv.defined and fv.feasible:
                    trials.append(HyperParams(eta=fv.value, beta=beta, epsilon=1e-8))
                beta_sample = _BETA_SAMPLE if obj is ObjectiveId.F3 else sample
                shared = _unit_open(rng)
                beta_state = OptimizerState(
                    params=state.params,
                    velocity=state.velocity,
                    grad_sq_sum=state.grad_sq_sum,
                    weighted_grad_sq=PerCoord(w=shared, b=shared if obj.arity == 2 else None),
                )
                fv = hyperopt.optimal_beta_rmsprop(
                    obj, beta_state, beta_sample, eta=eta, epsilon=1e-8, f3_half_gradient=half
                )
                if fv.defined and fv.feasible:
                    loss = evaluate(
                        obj,
                        take_step(
                            method, beta_state, HyperParams(eta=eta, beta=fv.value, epsilon=1e-8),
                            obj, beta_sample, f3_half_gradient=half,
                        ).params,
                        beta_sample,
                    )
                    worst = max(worst, float(loss))
                    tested += 1
            for hyper in trials:
                loss = evaluate(
                    obj,
                    take_step(method, state, hyper, obj, sample, f3_half_gradient=half).params,
                    sample,
                )
                worst = max(worst, float(loss))
                tested += 1
    return worst, tested


def _check_one_step(method: Method, samples: int, seed: int) -> dict:
    worst, tested = _one_step_loss_max(method, samples, seed)
    return {
        "name": f"one-step/{method.value}",
        "tolerance": _ONE_STEP_TOL,
        "max_deviation": worst,
        "tested": tested,
        "passed": worst <= _ONE_STEP_TOL and tested > 0,
    }


def _cmd_verify(args: argparse.Namespace) -> int:
    scope = args.scope or "all"
    samples = args.samples if args.samples is not None else 1000
    seed = args.seed if args.seed is not None else 0
    methods = [args.method] if args.method is not None else list(OPTIMIZED_HYPERS)

    checks: list[dict] = []
    if scope in ("gradients", "all"):
        checks.extend(_check_gradients(samples, seed))
    if scope in ("argmin", "all"):
        if Method.GD in methods:
            checks.append(_check_argmin_gd(seed))
        for m in methods:
            if m is not Method.GD:
                checks.append(_check_argmin_pointwise(m, seed))
    if scope in ("one-step", "all"):
        for m in methods:
            checks.append(_check_one_step(m, samples, seed))

    passed = all(c["passed"] for c in checks)
    report = {"scope": scope, "seed": seed, "samples": samples, "passed": passed, "checks": checks}
    print(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# table2

def _epoch_str(epoch: int | None) -> str:
    return "" if epoch is None else str(epoch)


def _render_table2_csv(matrix) -> str:
    lines = [TABLE2_HEADER]
    for c in matrix.cells:
        lines.append(
            ",".join(
                [
                    c.method.value,
                    c.objective.value,
                    _epoch_str(c.optimal.converged_epoch),
                    _fmt(c.optimal.final_loss),
                    _epoch_str(c.fixed.converged_epoch),
                    _fmt(c.fixed.final_loss),
                    str(c.published.optimal_epoch),
                    _fmt(c.published.optimal_loss),
                    str(c.published.fixed_epoch),
                    _fmt(c.published.fixed_loss),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _render_table2_json(matrix, settings: dict) -> str:
    cells = []
    for c in matrix.cells:
        cells.append(
            {
                "method": c.method.value,
                "objective": c.objective.value,
                "optimal": {
                    "converged_epoch": c.optimal.converged_epoch,
                    "final_loss": c.optimal.final_loss,
                    "diverged": c.optimal.diverged,
                },
                "fixed": {
                    "converged_epoch": c.fixed.converged_epoch,
                    "final_loss": c.fixed.final_loss,
                    "diverged": c.fixed.diverged,
                },
                "published": {
                    "optimal_epoch": c.published.optimal_epoch,
                    "optimal_loss": c.published.optimal_loss,
                    "fixed_epoch": c.published.fixed_epoch,
                    "fixed_loss": c.published.fixed_loss,
                },
            }
        )
    return json.dumps({"settings": settings, "cells": cells}, sort_keys=True, indent=2) + "\n"


def _cmd_table2(args: argparse.Namespace) -> int:
    _apply_config(args, _TABLE2_CONVERTERS)
    defaults = HyperParams(
        eta=_pick(args.eta, DEFAULT_HYPERS.eta),
        alpha=_pick(args.alpha, DEFAULT_HYPERS.alpha),
        beta=_pick(args.beta, DEFAULT_HYPERS.beta),
        epsilon=_pick(args.epsilon, DEFAULT_HYPERS.epsilon),
    )
    sample = RegressionSample(x=_pick(args.x, DEFAULT_SAMPLE.x), y=_pick(args.y, DEFAULT_SAMPLE.y))
    if args.init is not None and args.init_seed is not None:
        raise _UsageError("--init and --init-seed are mutually exclusive")
    init = RandomInit(seed=args.init_seed) if args.init_seed is not None else args.init
    half = _pick(args.f3_half_gradient, True)
    matrix = reproduce_table2(
        defaults=defaults,
        sample=sample,
        init=init,
        tolerance=_pick(args.tolerance, DEFAULT_TOLERANCE),
        max_epochs=_pick(args.max_epochs, 1000),
        f3_half_gradient=half,
    )
    fmt = _pick(args.format, "csv")
    if fmt == "csv":
        text = _render_table2_csv(matrix)
    elif fmt == "json":
        settings = {
            "eta": defaults.eta,
            "alpha": defaults.alpha,
            "beta": defaults.beta,
            "epsilon": defaults.epsilon,
            "x": sample.x,
            "y": sample.y,
            "init": None if init is None else (
                {"seed": init.seed} if isinstance(init, RandomInit) else {"w": init.w, "b": init.b}
            ),
            "tolerance": _pick(args.tolerance, DEFAULT_TOLERANCE),
            "max_epochs": _pick(args.max_epochs, 1000),
            "f3_half_gradient": half,
        }
        text = _render_table2_json(matrix, settings)
    else:
        raise _UsageError(f"format must be 'csv' or 'json', got {fmt!r}")
    _write_output(args.output, text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_state_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--w", type=float, help="current w")
    p.add_argument("--b", type=float, help="current b (two-parameter objectives)")
    p.add_argument("--v-w", type=float, help="velocity, w component")
    p.add_argument("--v-b", type=float, help="velocity, b component")
    p.add_argument("--phi-w", type=float, help="gradient-square sum divisor, w component")
    p.add_argument("--phi-b", type=float, help="gradient-square sum divisor, b component")
    p.add_argument("--u-w", type=float, help="weighted gradient-square, w component")
    p.add_argument("--u-b", type=float, help="weighted gradient-square, b component")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hyperstep", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one training configuration and emit its trace")
    run.add_argument("--method", type=_method_arg)
    run.add_argument("--objective", type=_objective_arg)
    run.add_argument("--policy", choices=["fixed", "optimal"])
    run.add_argument("--optimize", help="comma list of hyperparameters to re-derive each epoch")
    run.add_argument("--eta", type=float)
    run.add_argument("--alpha", type=float)
    run.add_argument("--beta", type=float)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--init", type=_init_arg, help='initial parameters, e.g. "w=0.3,b=0.4"')
    run.add_argument("--init-seed", type=int, help="draw the initial parameters from this seed")
    run.add_argument("--x", type=float, help="regression input (f3)")
    run.add_argument("--y", type=float, help="regression target (f3)")
    run.add_argument("--max-epochs", type=int)
    run.add_argument("--tolerance", type=float)
    run.add_argument("--f3-half-gradient", action=argparse.BooleanOptionalAction,
                     help="use the halved regression gradient (x*r, r) for f3")
    run.add_argument("--format", choices=["csv", "json"])
    run.add_argument("--output", help="write the trace here instead of stdout")
    run.add_argument("--config", help="flat key=value file supplying any of the above")
    run.set_defaults(handler=_cmd_run)

    optimal = sub.add_parser("optimal", help="closed-form optimal hyperparameters at one state")
    optimal.add_argument("--method", type=_method_arg, required=True)
    optimal.add_argument("--objective", type=_objective_arg, required=True)
    _add_state_options(optimal)
    optimal.add_argument("--x", type=float, help="regression input (f3)")
    optimal.add_argument("--y", type=float, help="regression target (f3)")
    optimal.add_argument("--eta", type=float, help="given eta (solves the coefficient rules)")
    optimal.add_argument("--alpha", type=float, help="given alpha (solves the momentum eta rule)")
    optimal.add_argument("--beta", type=float, help="given beta (solves the rmsprop eta rule)")
    optimal.add_argument("--epsilon", type=float)
    optimal.add_argument("--f3-half-gradient", action=argparse.BooleanOptionalAction)
    optimal.set_defaults(handler=_cmd_optimal)

    verify = sub.add_parser("verify", help="run the numeric oracles against the closed forms")
    verify.add_argument("--scope", choices=["gradients", "argmin", "one-step", "all"])
    verify.add_argument("--samples", type=int)
    verify.add_argument("--seed", type=int)
    verify.add_argument("--method", type=_method_arg, help="restrict to one method")
    verify.set_defaults(handler=_cmd_verify)

    table2 = sub.add_parser("table2", help="4x3 convergence comparison against published values")
    table2.add_argument("--eta", type=float)
    table2.add_argument("--alpha", type=float)
    table2.add_argument("--beta", type=float)
    table2.add_argument("--epsilon", type=float)
    table2.add_argument("--x", type=float)
    table2.add_argument("--y", type=float)
    table2.add_argument("--init", type=_init_arg)
    table2.add_argument("--init-seed", type=int)
    table2.add_argument("--tolerance", type=float)
    table2.add_argument("--max-epochs", type=int)
    table2.add_argument("--f3-half-gradient", action=argparse.BooleanOptionalAction)
    table2.add_argument("--format", choices=["csv", "json"])
    table2.add_argument("--output")
    table2.add_argument("--config", help="flat key=value file supplying any of the above")
    table2.set_defaults(handler=_cmd_table2)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
