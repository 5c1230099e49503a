import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickbait_hybrid import tensor as tc
from clickbait_hybrid.model import ModelConfig
from clickbait_hybrid.tensor import DimensionError, Tensor
from clickbait_hybrid.training import (
    PROB_EPS,
    AdadeltaState,
    TrainConfig,
    adadelta_step,
    bce_loss,
    glorot_uniform,
    split_train_val,
    train,
)


class TestBceLoss:
    def test_half_probability_gives_ln2(self):
        p = Tensor(0.5)
        assert bce_loss(p, 1).item() == pytest.approx(math.log(2.0), abs=1e-12)
        assert bce_loss(p, 0).item() == pytest.approx(math.log(2.0), abs=1e-12)

    def test_saturated_probability_is_clamped(self):
        assert bce_loss(Tensor(1.0), 1).item() == pytest.approx(-math.log(1.0 - PROB_EPS), abs=1e-15)
        assert bce_loss(Tensor(0.0), 0).item() == pytest.approx(-math.log(1.0 - PROB_EPS), abs=1e-15)
        assert bce_loss(Tensor(0.0), 1).item() == pytest.approx(-math.log(PROB_EPS), rel=1e-12)

    def test_label_must_be_binary(self):
        with pytest.raises(ValueError):
            bce_loss(Tensor(0.5), 2)
        with pytest.raises(ValueError):
            bce_loss(Tensor(0.5), -1)

    def test_gradient_matches_closed_form(self):
        # d/dp -log(p) at p=0.3 with label 1 is -1/p = -10/3
        p = Tensor(0.3, requires_grad=True)
        tc.backward(bce_loss(p, 1))
        assert float(p.grad) == pytest.approx(-1.0 / 0.3, rel=1e-12)
        q = Tensor(0.3, requires_grad=True)
        tc.backward(bce_loss(q, 0))
        assert float(q.grad) == pytest.approx(1.0 / 0.7, rel=1e-12)

    def test_gradient_matches_finite_differences(self):
        step = 1e-7
        for label in (0, 1):
            p = Tensor(0.42, requires_grad=True)
            tc.backward(bce_loss(p, label))
            with tc.no_grad():
                up = bce_loss(Tensor(0.42 + step), label).item()
                down = bce_loss(Tensor(0.42 - step), label).item()
            assert float(p.grad) == pytest.approx((up - down) / (2 * step), rel=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0), st.integers(0, 1))
    def test_loss_is_finite_and_nonnegative(self, p, label):
        value = bce_loss(Tensor(p), label).item()
        assert math.isfinite(value) and value >= 0.0


class TestGlorot:
    def test_bound_values(self):
        # fanin=fanout=3 -> sqrt(6/6)=1; fanin=fanout=300 -> sqrt(6/600)=0.1
        draws = glorot_uniform(3, 3, np.random.default_rng(0), shape=(100000,))
        assert np.all(np.abs(draws) < 1.0)
        assert np.max(np.abs(draws)) > 0.99
        small = glorot_uniform(300, 300, np.random.default_rng(1), shape=(100000,))
        assert np.all(np.abs(small) < 0.1)
        assert np.max(np.abs(small)) > 0.099

    def test_mean_is_near_zero(self):
        n = 100000
        bound = math.sqrt(6.0 / (20 + 30))
        draws = glorot_uniform(20, 30, np.random.default_rng(2), shape=(n,))
        sigma_of_mean = bound / math.sqrt(3.0 * n)
        assert abs(draws.mean()) < 3.0 * sigma_of_mean

    def test_default_shape_is_fanout_by_fanin(self):
        w = glorot_uniform(7, 4, np.random.default_rng(3))
        assert w.shape == (4, 7)

    def test_deterministic_per_seed(self):
        a = glorot_uniform(5, 5, np.random.default_rng(9), shape=(64,))
        b = glorot_uniform(5, 5, np.random.default_rng(9), shape=(64,))
        assert np.array_equal(a, b)

    def test_positive_fans_required(self):
        with pytest.raises(ValueError):
            glorot_uniform(0, 3, np.random.default_rng(0))


def one_param(values, rho=0.95, epsilon=1e-6):
    params = {"w": Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)}
    return params, AdadeltaState(rho=rho, epsilon=epsilon)


class TestAdadelta:
    def test_zero_gradient_is_a_fixpoint(self):
        params, state = one_param([1.0, -2.0])
        before = params["w"].data.copy()
        adadelta_step(params, {"w": np.zeros(2)}, state)
        assert np.array_equal(params["w"].data, before)

    def test_accumulators_decay_by_rho(self):
        params, state = one_param([0.0], rho=0.9)
        adadelta_step(params, {"w": np.array([2.0])}, state)
        sq_grad_after_one = state.sq_grad["w"].copy()
        assert sq_grad_after_one[0] == pytest.approx(0.1 * 4.0)
        adadelta_step(params, {"w": np.zeros(1)}, state)
        assert state.sq_grad["w"][0] == pytest.approx(0.9 * sq_grad_after_one[0])

    def test_first_step_closed_form(self):
        rho, eps, g = 0.95, 1e-6, 0.7
        params, state = one_param([1.0], rho=rho, epsilon=eps)
        adadelta_step(params, {"w": np.array([g])}, state)
        expected_delta = -math.sqrt(eps) / math.sqrt((1 - rho) * g * g + eps) * g
        assert params["w"].data[0] == pytest.approx(1.0 + expected_delta, rel=1e-12)
        assert state.sq_update["w"][0] == pytest.approx((1 - rho) * expected_delta**2, rel=1e-12)

    def test_updates_oppose_the_gradient(self):
        params, state = one_param([0.0, 0.0])
        adadelta_step(params, {"w": np.array([3.0, -3.0])}, state)
        assert params["w"].data[0] < 0.0 < params["w"].data[1]

    def test_accumulators_stay_nonnegative_over_many_steps(self):
        generator = np.random.default_rng(4)
        params, state = one_param(generator.normal(size=(3, 2)))
        for _ in range(1000):
            adadelta_step(params, {"w": generator.normal(size=(3, 2)) * 10}, state)
        assert np.all(state.sq_grad["w"] >= 0)
        assert np.all(state.sq_update["w"] >= 0)
        assert np.all(np.isfinite(params["w"].data))

    def test_none_gradient_skips_update_but_decays(self):
        params, state = one_param([5.0], rho=0.5)
        state.sq_grad["w"] = np.array([1.0])
        state.sq_update["w"] = np.array([2.0])
        adadelta_step(params, {"w": None}, state)
        assert params["w"].data[0] == 5.0
        assert state.sq_grad["w"][0] == pytest.approx(0.5)
        assert state.sq_update["w"][0] == pytest.approx(1.0)

    def test_gradient_shape_mismatch_rejected(self):
        params, state = one_param(np.zeros(3))
        with pytest.raises(DimensionError):
            adadelta_step(params, {"w": np.zeros(4)}, state)

    def test_converges_on_a_quadratic(self):
        # minimize (x - 3)^2; adadelta is slow but must make steady progress
        params, state = one_param([0.0])
        for _ in range(20000):
            grad = 2.0 * (params["w"].data - 3.0)
            adadelta_step(params, {"w": grad}, state)
        assert abs(params["w"].data[0] - 3.0) < 0.5


class TestSplit:
    def test_default_ratio_splits_100_into_80_20(self):
        records = list(range(100))
        train_side, val_side = split_train_val(records, seed=0)
        assert len(train_side) == 80 and len(val_side) == 20

    def test_ceil_rounding(self):
        train_side, val_side = split_train_val(list(range(7)), ratio=(4, 1), seed=0)
        assert len(train_side) == math.ceil(7 * 0.8) and len(val_side) == 7 - len(train_side)

    def test_deterministic(self):
        records = list(range(50))
        assert split_train_val(records, seed=3) == split_train_val(records, seed=3)
        assert split_train_val(records, seed=3) != split_train_val(records, seed=4)

    def test_too_few_records(self):
        with pytest.raises(ValueError):
            split_train_val([1, 2, 3, 4])

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            split_train_val(list(range(10)), ratio=(4, 0))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=5, max_value=60), st.integers(0, 2**31 - 1))
    def test_split_is_a_partition(self, n, seed):
        records = list(range(n))
        train_side, val_side = split_train_val(records, seed=seed)
        assert sorted(train_side + val_side) == records
        assert len(train_side) == math.ceil(n * 4 / 5)


def small_train_config(**overrides):
    base = dict(
        batch_size=16,
        seed=0,
        max_epochs=3,
        patience=10,
        model=ModelConfig(
            hidden_size=8,
            attention_size=6,
            char_dim=4,
            char_channels=(5, 5, 6),
            siamese_hidden=10,
            siamese_out=7,
        ),
    )
    base.update(overrides)
    return TrainConfig(**base)


class TestTrain:
    def test_epoch_zero_loss_is_near_chance(self, overfit_records, overfit_tables):
        result = train(small_train_config(max_epochs=1), overfit_records, overfit_tables)
        assert abs(result.trace[0].train_loss - math.log(2.0)) < 0.15

    def test_all_parameters_receive_gradient_signal(self, overfit_records, overfit_tables):
        # after an epoch of updates every named tensor should have moved,
        # since the fixture batches include records with and without images
        config = small_train_config(max_epochs=1)
        result = train(config, overfit_records, overfit_tables)
        from clickbait_hybrid.training import init_model_params

        train_recs, _ = split_train_val(overfit_records, config.split_ratio, config.seed)
        title_cap = max(len(r.post_title_tokens) for r in train_recs)
        chars = {ch for r in train_recs for token in r.post_title_tokens for ch in token}
        virgin = init_model_params(config.model, chars, title_cap, config.seed)
        moved = {
            name: not np.array_equal(tensor.data, virgin.named_tensors()[name].data)
            for name, tensor in result.final_params.named_tensors().items()
        }
        stuck = [name for name, did_move in moved.items() if not did_move]
        assert not stuck, f"parameters never updated: {stuck}"

    def test_loss_decreases_across_epochs(self, overfit_records, overfit_tables):
        result = train(small_train_config(max_epochs=4), overfit_records, overfit_tables)
        losses = [stats.train_loss for stats in result.trace]
        assert losses[-1] < losses[0]

    def test_stop_at_train_accuracy(self, overfit_records, overfit_tables):
        config = small_train_config(max_epochs=50, stop_at_train_accuracy=0.9)
        result = train(config, overfit_records, overfit_tables)
        assert result.trace[-1].train_accuracy >= 0.9
        assert len(result.trace) < 50

    def test_patience_stops_training(self, overfit_records, overfit_tables):
        config = small_train_config(max_epochs=50, patience=2)
        result = train(config, overfit_records, overfit_tables)
        if len(result.trace) < 50:  # early stop happened
            best = result.best_epoch
            assert len(result.trace) - 1 - best >= 2

    def test_title_cap_defaults_to_longest_training_title(self, overfit_records, overfit_tables):
        config = small_train_config(max_epochs=1)
        result = train(config, overfit_records, overfit_tables)
        train_recs, _ = split_train_val(overfit_records, config.split_ratio, config.seed)
        assert result.title_cap == max(len(r.post_title_tokens) for r in train_recs)
        assert result.best_params.title_cap == result.title_cap

    def test_title_cap_override(self, overfit_records, overfit_tables):
        config = small_train_config(max_epochs=1, title_cap=11)
        result = train(config, overfit_records, overfit_tables)
        assert result.title_cap == 11

    def test_deterministic_given_seed(self, overfit_records, overfit_tables):
        first = train(small_train_config(max_epochs=2), overfit_records, overfit_tables)
        second = train(small_train_config(max_epochs=2), overfit_records, overfit_tables)
        assert first.trace == second.trace
        for name, tensor in first.final_params.named_tensors().items():
            assert np.array_equal(tensor.data, second.final_params.named_tensors()[name].data)

    def test_best_params_track_highest_val_f1(self, overfit_records, overfit_tables):
        result = train(small_train_config(max_epochs=3), overfit_records, overfit_tables)
        best_f1 = max(stats.val_f1 for stats in result.trace)
        assert result.trace[result.best_epoch].val_f1 == best_f1


class TestTrainConfig:
    def test_defaults(self):
        config = TrainConfig()
        assert config.batch_size == 256
        assert config.rho == 0.95 and config.epsilon == 1e-6
        assert config.split_ratio == (4, 1)
        assert config.threshold == 0.5

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(max_epochs=0)

    def test_each_instance_gets_its_own_model_config(self):
        assert TrainConfig().model is not TrainConfig().model
