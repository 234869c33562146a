"""Training runs, the fallback contract, and the convergence comparison."""

import math

import pytest

from hyperstep import (
    DEFAULT_HYPERS,
    EpochRecord,
    HyperFlags,
    HyperParams,
    HyperPolicy,
    Method,
    ObjectiveId,
    ParamPoint,
    PolicyKind,
    RandomInit,
    RegressionSample,
    RunConfig,
    Trace,
    detect_convergence,
    reproduce_table2,
    run_training,
)

F1, F2, F3 = ObjectiveId.F1, ObjectiveId.F2, ObjectiveId.F3


def _rec(epoch, loss):
    return EpochRecord(
        epoch=epoch,
        params=ParamPoint(w=0.0),
        loss=loss,
        hyper_used=DEFAULT_HYPERS,
        hyper_flags=HyperFlags(),
    )


def test_detect_convergence():
    records = [_rec(1, 0.5), _rec(2, 1e-13), _rec(3, 1e-20)]
    assert detect_convergence(records, 1e-12) == 2
    assert detect_convergence(records, 1e-22) is None
    assert detect_convergence([], 1e-12) is None
    with pytest.raises(ValueError):
        detect_convergence(records, 0.0)


def test_gd_f1_optimal_converges_in_one_update():
    cfg = RunConfig(
        method=Method.GD,
        objective=F1,
        policy=HyperPolicy.optimal(DEFAULT_HYPERS, {"eta"}),
    )
    trace = run_training(cfg)
    assert trace.converged_epoch == 2
    assert trace.final_loss == 0.0
    assert len(trace.records) == 2
    first, second = trace.records
    assert first.epoch == 1 and first.loss == pytest.approx(0.04, rel=1e-12)
    assert first.hyper_flags == HyperFlags(eta="", alpha="", beta="")
    assert second.hyper_used.eta == 0.5
    assert second.hyper_flags.eta == "closed_form"


def test_gd_f1_fixed_rate_follows_the_geometric_decay():
    # each update scales the residual by 1 - 2 * 0.1, so epoch k holds
    # loss 0.04 * 0.64**(k - 1); solve for the first epoch at or below tol
    tol = 2.5e-13
    predicted = 1 + math.ceil(math.log(tol / 0.04) / math.log(0.64))
    cfg = RunConfig(
        method=Method.GD,
        objective=F1,
        policy=HyperPolicy.fixed(DEFAULT_HYPERS),
        tolerance=tol,
        max_epochs=500,
    )
    trace = run_training(cfg)
    assert predicted == 59
    assert trace.converged_epoch == predicted
    for k, rec in enumerate(trace.records):
        assert rec.loss == pytest.approx(0.04 * 0.64**k, rel=1e-9)


def test_starting_at_the_minimum_converges_at_epoch_one():
    cfg = RunConfig(
        method=Method.GD,
        objective=F1,
        policy=HyperPolicy.fixed(DEFAULT_HYPERS),
        init=ParamPoint(w=0.5),
    )
    trace = run_training(cfg)
    assert trace.converged_epoch == 1
    assert len(trace.records) == 1


def test_runs_are_bit_for_bit_deterministic():
    cfg = RunConfig(
        method=Method.RMSPROP,
        objective=F3,
        policy=HyperPolicy.optimal(DEFAULT_HYPERS, {"eta", "beta"}),
        sample=RegressionSample(x=0.3, y=0.23),
        init=RandomInit(seed=11),
        f3_half_gradient=True,
    )
    a = run_training(cfg)
    b = run_training(cfg)
    assert a == b  # frozen dataclasses compare by value, floats must match exactly


def test_divergent_run_is_truncated_and_flagged():
    cfg = RunConfig(
        method=Method.GD,
        objective=F1,
        policy=HyperPolicy.fixed(HyperParams(eta=1e150)),
        max_epochs=50,
    )
    trace = run_training(cfg)
    assert trace.diverged
    assert trace.converged_epoch is None
    assert not math.isfinite(trace.final_loss)
    assert len(trace.records) < 50  # truncated well before the budget


def test_optimal_arm_loss_never_increases():
    matrix = reproduce_table2()
    for cell in matrix.cells:
        losses = [rec.loss for rec in cell.optimal.records]
        assert all(b <= a for a, b in zip(losses, losses[1:])), (
            cell.method,
            cell.objective,
        )


def test_optimal_beats_fixed_in_every_cell():
    matrix = reproduce_table2()
    inf = float("inf")
    for cell in matrix.cells:
        opt = cell.optimal.converged_epoch or inf
        fix = cell.fixed.converged_epoch or inf
        assert opt < fix, (cell.method, cell.objective)


def test_optimal_arm_converges_second_epoch_from_random_inits():
    # the first update already lands on the minimizer: the coefficient is
    # resolved first (falling back at the start where velocity is zero) and
    # the learning rate then zeroes the residual exactly
    for seed in range(20):
        for method in Method:
            for obj in (F1, F2, F3):
                cfg = RunConfig(
                    method=method,
                    objective=obj,
                    policy=HyperPolicy.optimal(
                        DEFAULT_HYPERS,
                        {
                            Method.GD: {"eta"},
                            Method.MOMENTUM: {"eta", "alpha"},
                            Method.ADAGRAD: {"eta"},
                            Method.RMSPROP: {"eta", "beta"},
                        }[method],
                    ),
                    sample=RegressionSample(x=0.3, y=0.23) if obj is F3 else None,
                    init=RandomInit(seed=seed),
                    f3_half_gradient=obj is F3,
                )
                trace = run_training(cfg)
                assert trace.converged_epoch == 2, (method, obj, seed)
                assert trace.final_loss <= 1e-20


def test_momentum_first_update_flags():
    cfg = RunConfig(
        method=Method.MOMENTUM,
        objective=F1,
        policy=HyperPolicy.optimal(DEFAULT_HYPERS, {"eta", "alpha"}),
    )
    trace = run_training(cfg)
    flags = trace.records[1].hyper_flags
    # zero starting velocity leaves the coefficient rule undefined
    assert flags.alpha == "fallback"
    assert flags.eta == "closed_form"
    assert trace.records[1].hyper_used.alpha == DEFAULT_HYPERS.alpha


def test_fixed_run_flags_every_update_as_fixed():
    cfg = RunConfig(
        method=Method.GD,
        objective=F1,
        policy=HyperPolicy.fixed(DEFAULT_HYPERS),
        max_epochs=3,
    )
    trace = run_training(cfg)
    assert trace.records[0].hyper_flags == HyperFlags(eta="", alpha="", beta="")
    for rec in trace.records[1:]:
        assert rec.hyper_flags == HyperFlags(eta="fixed", alpha="fixed", beta="fixed")


def test_policy_validation():
    with pytest.raises(ValueError):
        HyperPolicy(kind=PolicyKind.FIXED, base=DEFAULT_HYPERS, optimize=frozenset({"eta"}))
    with pytest.raises(ValueError):
        HyperPolicy.optimal(DEFAULT_HYPERS, set())
    with pytest.raises(ValueError):
        HyperPolicy.optimal(DEFAULT_HYPERS, {"gamma"})


def test_run_config_validation():
    fixed = HyperPolicy.fixed(DEFAULT_HYPERS)
    with pytest.raises(ValueError):
        RunConfig(method=Method.GD, objective=F3, policy=fixed)  # sample missing
    with pytest.raises(ValueError):
        RunConfig(
            method=Method.GD, objective=F1, policy=fixed,
            sample=RegressionSample(x=0.3, y=0.23),
        )
    with pytest.raises(ValueError):
        RunConfig(
            method=Method.GD, objective=F1,
            policy=HyperPolicy.optimal(DEFAULT_HYPERS, {"beta"}),  # gd has no beta
        )
    with pytest.raises(ValueError):
        RunConfig(method=Method.GD, objective=F1, policy=fixed, max_epochs=0)
    with pytest.raises(ValueError):
        # init arity is resolved at run time, where random inits are drawn
        run_training(
            RunConfig(method=Method.GD, objective=F2, policy=fixed, init=ParamPoint(w=0.3))
        )


def test_table2_published_reference_values_are_quoted_verbatim():
    matrix = reproduce_table2()
    cell = matrix.cell(Method.RMSPROP, F1)
    assert cell.published.fixed_epoch == 48
    assert cell.published.fixed_loss == 0.0025
    cell = matrix.cell(Method.MOMENTUM, F3)
    assert cell.published.optimal_epoch == 4
    assert cell.published.fixed_epoch == 205


def test_rmsprop_fixed_arm_plateaus_at_the_epsilon_free_equilibrium():
    matrix = reproduce_table2()
    # with beta fixed at 0.5 the divisor settles where eta**2 = 4 r**2, so
    # the loss stalls near 0.0025 for f1 and 0.01 for f2
    f1_cell = matrix.cell(Method.RMSPROP, F1)
    f2_cell = matrix.cell(Method.RMSPROP, F2)
    assert f1_cell.fixed.converged_epoch is None
    assert f1_cell.fixed.final_loss == pytest.approx(0.0025, rel=0.1)
    assert f2_cell.fixed.converged_epoch is None
    assert f2_cell.fixed.final_loss == pytest.approx(0.01, rel=0.1)


def test_trace_final_loss_matches_last_record():
    cfg = RunConfig(method=Method.GD, objective=F1, policy=HyperPolicy.fixed(DEFAULT_HYPERS), max_epochs=7)
    trace = run_training(cfg)
    assert trace.final_loss == trace.records[-1].loss
    assert isinstance(trace, Trace)
