import itertools

import pytest

from faceopt.evaluators import EMOTIONS, EmotionScores, EvaluationResult, TransportError
from faceopt.gp import Posterior
from faceopt.loop import (
    HyperparameterConfig,
    LoopConfig,
    RoundRecord,
    best_of,
    incumbent_trace,
    random_baseline,
    run_campaign,
)


def fixed_clock():
    ticks = itertools.count()
    return lambda: float(next(ticks))


def record(index, objective, status="ok"):
    scores = None
    if objective is not None:
        rest = (1 - objective) / 6
        scores = EmotionScores({e: objective if e == "fear" else rest for e in EMOTIONS})
    return RoundRecord(index, (index,), {1: index}, scores, objective, None, None, 0.0, status)


class Flaky:
    """Wraps an evaluator and raises on the listed call numbers (0-based)."""

    evaluator_id = "flaky"

    def __init__(self, inner, failing, exc=TransportError):
        self.inner = inner
        self.failing = set(failing)
        self.exc = exc
        self.calls = 0

    def evaluate(self, vector, target):
        n, self.calls = self.calls, self.calls + 1
        if n in self.failing:
            raise self.exc(f"call {n} failed")
        return self.inner.evaluate(vector, target)


def toy_cfg(**kw):
    base = dict(target="happiness", rounds=20, n_init=5, seed=3)
    base.update(kw)
    return LoopConfig(**base)


def test_incumbent_trace_example():
    recs = [record(0, 0.2), record(1, 0.5), record(2, 0.4)]
    assert incumbent_trace(recs) == [(0, 0.2), (1, 0.5), (2, 0.5)]
    assert best_of(recs) == ((1,), 0.5)
    with pytest.raises(ValueError):
        incumbent_trace([])


def test_trace_skips_failed_rounds():
    recs = [record(0, None, "failed"), record(1, 0.3), record(2, None, "failed"), record(3, 0.1)]
    assert incumbent_trace(recs) == [(1, 0.3), (2, 0.3), (3, 0.3)]


def test_initial_design_only(toy_space, bowl):
    res = run_campaign(toy_space, bowl, toy_cfg(rounds=5, n_init=5))
    assert res.status == "complete"
    assert len(res.records) == 5
    assert all(r.posterior is None for r in res.records)
    assert len({r.point for r in res.records}) == 5


def test_bo_rounds_carry_posterior_and_incumbent(toy_space, bowl):
    res = run_campaign(toy_space, bowl, toy_cfg())
    assert [r.index for r in res.records] == list(range(20))
    assert all(r.posterior is not None for r in res.records[5:])
    incs = [r.incumbent for r in res.records]
    assert incs == sorted(incs)
    assert res.best_value == max(r.objective for r in res.records)
    assert len({r.point for r in res.records}) == 20


def test_bo_finds_bowl_optimum(toy_space, bowl):
    res = run_campaign(toy_space, bowl, toy_cfg(rounds=30, n_init=10, seed=0))
    assert res.best_point == (5, 2)
    assert res.best_value == 1.0


def test_same_seed_same_campaign(toy_space, bowl):
    a = run_campaign(toy_space, bowl, toy_cfg(), clock=fixed_clock())
    b = run_campaign(toy_space, bowl, toy_cfg(), clock=fixed_clock())
    assert [r.to_dict() for r in a.records] == [r.to_dict() for r in b.records]
    c = run_campaign(toy_space, bowl, toy_cfg(seed=4), clock=fixed_clock())
    assert [r.point for r in c.records] != [r.point for r in a.records]


def test_continuing_from_prefix_matches_uninterrupted(toy_space, bowl):
    full = run_campaign(toy_space, bowl, toy_cfg(), clock=fixed_clock())
    head = full.records[:12]
    rest = run_campaign(toy_space, bowl, toy_cfg(), records=head)
    assert [r.point for r in rest.records] == [r.point for r in full.records]
    assert [r.kernel for r in rest.records] == [r.kernel for r in full.records]


def test_kernel_reselected_on_schedule(toy_space, bowl):
    hp = HyperparameterConfig(enabled=True, interval=4, lengthscales=(0.05, 0.3, 2.0), signal_variances=(0.1, 1.0))
    res = run_campaign(toy_space, bowl, toy_cfg(rounds=21, hyperparameters=hp))
    bo = res.records[5:]
    for block in (bo[0:4], bo[4:8], bo[8:12], bo[12:16]):
        assert len({r.kernel for r in block}) == 1
    fixed = run_campaign(toy_space, bowl, toy_cfg(hyperparameters=HyperparameterConfig(enabled=False)))
    assert {r.kernel for r in fixed.records[5:]} == {toy_cfg().kernel}


def test_initial_points_are_used_first(toy_space, bowl):
    res = run_campaign(toy_space, bowl, toy_cfg(initial_points=[(1, 1), (9, 0)], rounds=3))
    assert res.records[0].point == (1, 1)
    assert res.records[1].point == (7, 0)


def test_abort_policy_stops(toy_space, bowl):
    ev = Flaky(bowl, {6})
    res = run_campaign(toy_space, ev, toy_cfg(on_eval_failure="abort"))
    assert res.status == "aborted"
    assert len(res.records) == 7
    assert res.records[-1].status == "failed" and "TransportError" in res.records[-1].error


def test_skip_round_policy_continues(toy_space, bowl):
    ev = Flaky(bowl, {2, 8})
    res = run_campaign(toy_space, ev, toy_cfg(on_eval_failure="skip-round"))
    assert res.status == "complete"
    assert [r.index for r in res.records if not r.ok] == [2, 8]
    assert res.records[2].incumbent == res.records[1].incumbent


def test_retry_once_policy(toy_space, bowl):
    ev = Flaky(bowl, {4})
    res = run_campaign(toy_space, ev, toy_cfg(on_eval_failure="retry-once"))
    assert res.status == "complete" and all(r.ok for r in res.records)
    ev = Flaky(bowl, {4, 5})
    res = run_campaign(toy_space, ev, toy_cfg(on_eval_failure="retry-once"))
    assert res.status == "aborted" and len(res.records) == 5


def test_unexpected_errors_propagate(toy_space, bowl):
    with pytest.raises(ZeroDivisionError):
        run_campaign(toy_space, Flaky(bowl, {0}, ZeroDivisionError), toy_cfg())


def test_hook_sees_each_record_in_order(toy_space, bowl):
    seen = []
    run_campaign(toy_space, bowl, toy_cfg(rounds=8), on_record=lambda r: seen.append(r.index))
    assert seen == list(range(8))


def test_random_baseline_shares_initial_stream(toy_space, bowl):
    bo = run_campaign(toy_space, bowl, toy_cfg())
    rand = random_baseline(toy_space, bowl, 20, seed=3, target="happiness")
    assert rand[:5] == bo.trace()[:5]
    assert len(rand) == 20


def test_config_round_trip():
    cfg = toy_cfg(initial_points=[(1, 2)], on_eval_failure="skip-round")
    assert LoopConfig.from_dict(cfg.to_dict()) == cfg
    for bad in ({"target": "joy"}, {"rounds": 0}, {"n_init": 0}, {"seed": -1}, {"on_eval_failure": "ignore"}):
        with pytest.raises(ValueError):
            toy_cfg(**bad)


def test_record_round_trip():
    r = RoundRecord(3, (1, 2), {1: 1, 2: 2}, EmotionScores({e: 1 / 7 for e in EMOTIONS}), 1 / 7,
                    Posterior(0.1, 0.2), 0.5, 0.25)
    assert RoundRecord.from_dict(r.to_dict()) == r


class ConstantEvaluator:
    evaluator_id = "constant"

    def evaluate(self, vector, target):
        s = EmotionScores({e: 1 / 7 for e in EMOTIONS})
        return EvaluationResult(s, s[target], 0.0, self.evaluator_id)


def test_flat_objective_still_explores(toy_space):
    res = run_campaign(toy_space, ConstantEvaluator(), toy_cfg(rounds=25))
    assert len({r.point for r in res.records}) == 25
