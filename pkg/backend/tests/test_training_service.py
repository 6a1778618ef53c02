import math

import numpy as np
import pytest

from proje.exceptions import ConfigurationError, ContractViolation, TrainingDivergedError
from proje.models import Direction, ModelParams, TrainingInstance
from proje.schemas import ModelConfig, Task, Variant
from proje.services.graph_service import KnowledgeGraph, Triple, Vocabulary
from proje.services.projection_service import instance_loss, score_instance
from proje.services.training_service import (
    backward,
    batch_gradients,
    build_instances,
    dropout_mask,
    init_params,
    l1_norm,
    l1_penalty_and_subgradient,
    train,
)
from proje.utils.rng import RngStream


def _loss(instance, params, variant, mask):
    return instance_loss(score_instance(instance, params, variant, mask), instance.labels, variant)


def _numeric_gradients(instance, params, variant, mask, step=1e-5):
    """Central differences over every scalar of every tensor."""
    grads = {}
    for name, tensor in params.tensors().items():
        g = np.zeros_like(tensor)
        for idx in np.ndindex(tensor.shape):
            original = tensor[idx]
            tensor[idx] = original + step
            up = _loss(instance, params, variant, mask)
            tensor[idx] = original - step
            down = _loss(instance, params, variant, mask)
            tensor[idx] = original
            g[idx] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def _random_instance(gen, n_entities, n_relations, direction):
    pool = n_relations if direction is Direction.RELATION_MISSING else n_entities
    n_candidates = int(gen.integers(2, min(pool, 5) + 1))
    candidates = gen.choice(pool, size=n_candidates, replace=False)
    labels = np.zeros(n_candidates)
    labels[: int(gen.integers(1, n_candidates + 1))] = 1.0
    gen.shuffle(labels)
    known, other = (int(x) for x in gen.choice(n_entities, size=2, replace=False))
    return TrainingInstance(
        known_entity=known,
        relation=None if direction is Direction.RELATION_MISSING else int(gen.integers(n_relations)),
        direction=direction,
        candidates=candidates.astype(np.int64),
        labels=labels,
        other_entity=other,
    )


class TestInitParams:
    def test_bound_at_k36(self):
        params = init_params(50, 5, 36, np.random.default_rng(0))
        for tensor in params.tensors().values():
            assert np.all(np.abs(tensor) <= 1.0)
        assert np.abs(params.W_E).max() > 0.9

    def test_bound_at_k200(self):
        params = init_params(10, 2, 200, np.random.default_rng(0))
        bound = 6 / math.sqrt(200)
        assert bound == pytest.approx(0.42426, abs=1e-5)
        assert all(np.all(np.abs(t) <= bound) for t in params.tensors().values())

    def test_same_seed_same_tensors(self):
        a = init_params(7, 3, 8, RngStream.from_seed(11).init)
        b = init_params(7, 3, 8, RngStream.from_seed(11).init)
        for name, tensor in a.tensors().items():
            np.testing.assert_array_equal(tensor, b.tensors()[name])

    def test_zero_k(self):
        with pytest.raises(ConfigurationError):
            init_params(3, 1, 0, np.random.default_rng(0))


class TestBuildInstances:
    def test_one_instance_per_triple_with_brute_force_positives(self, small_graph):
        instances = build_instances(small_graph.train, small_graph, 0.5, Task.ENTITY, RngStream.from_seed(1))
        assert len(instances) == len(small_graph.train)
        train = set(small_graph.train)
        for inst, (h, r, t) in zip(instances, small_graph.train):
            positives = set(inst.candidates[inst.labels == 1].tolist())
            if inst.direction is Direction.TAIL_MISSING:
                assert inst.known_entity == h
                assert positives == {x for x in range(6) if (h, r, x) in train}
            else:
                assert inst.known_entity == t
                assert positives == {x for x in range(6) if (x, r, t) in train}
            assert inst.relation == r

    def test_no_sampling_keeps_only_positives(self, small_graph):
        for inst in build_instances(small_graph.train, small_graph, 0.0, Task.ENTITY, RngStream.from_seed(2)):
            assert np.all(inst.labels == 1)

    def test_full_sampling_uses_every_entity(self, small_graph):
        for inst in build_instances(small_graph.train, small_graph, 1.0, Task.ENTITY, RngStream.from_seed(3)):
            assert sorted(inst.candidates.tolist()) == list(range(small_graph.n_entities))

    def test_positives_first_then_ascending_negatives(self, small_graph):
        for inst in build_instances(small_graph.train, small_graph, 0.7, Task.ENTITY, RngStream.from_seed(4)):
            n_pos = inst.n_positive
            assert np.all(inst.labels[:n_pos] == 1) and np.all(inst.labels[n_pos:] == 0)
            assert np.all(np.diff(inst.candidates[:n_pos]) > 0)
            assert np.all(np.diff(inst.candidates[n_pos:]) > 0)

    def test_relation_task(self, small_graph):
        instances = build_instances(small_graph.train, small_graph, 1.0, Task.RELATION, RngStream.from_seed(5))
        for inst, (h, r, t) in zip(instances, small_graph.train):
            assert inst.direction is Direction.RELATION_MISSING
            assert (inst.known_entity, inst.other_entity) == (h, t)
            assert r in inst.candidates[inst.labels == 1]
            assert sorted(inst.candidates.tolist()) == [0, 1]

    def test_sampling_rate_matches_bernoulli(self):
        n_entities, p_y = 10_000, 0.25
        vocab = Vocabulary.from_names([f"e{i}" for i in range(n_entities)], ["r"])
        graph = KnowledgeGraph.from_splits(vocab, [Triple(0, 0, 1), Triple(0, 0, 2), Triple(0, 0, 3)])
        observed, expected, variance = 0, 0.0, 0.0
        for seed in range(100):
            for inst in build_instances(graph.train, graph, p_y, Task.ENTITY, RngStream.from_seed(seed)):
                pool = n_entities - inst.n_positive
                observed += int((inst.labels == 0).sum())
                expected += p_y * pool
                variance += pool * p_y * (1 - p_y)
        assert abs(observed - expected) < 3 * math.sqrt(variance)

    def test_same_seed_same_instances(self, small_graph):
        a = build_instances(small_graph.train, small_graph, 0.5, Task.ENTITY, RngStream.from_seed(9))
        b = build_instances(small_graph.train, small_graph, 0.5, Task.ENTITY, RngStream.from_seed(9))
        for x, y in zip(a, b):
            assert x.direction is y.direction
            np.testing.assert_array_equal(x.candidates, y.candidates)

    def test_invalid_probability(self, small_graph):
        with pytest.raises(ConfigurationError):
            build_instances(small_graph.train, small_graph, 1.5, Task.ENTITY, RngStream.from_seed(0))


class TestDropoutMask:
    def test_no_dropout(self):
        np.testing.assert_array_equal(dropout_mask(6, 0.0, np.random.default_rng(0)), np.ones(6))

    def test_survivors_scaled_exactly(self):
        mask = dropout_mask(1000, 0.5, np.random.default_rng(0))
        assert set(np.unique(mask).tolist()) == {0.0, 2.0}

    def test_unbiased(self):
        gen = np.random.default_rng(0)
        masks = np.stack([dropout_mask(16, 0.3, gen) for _ in range(10_000)])
        assert abs(masks.mean() - 1.0) < 0.02

    @pytest.mark.parametrize("p_d", [1.0, -0.1])
    def test_invalid_probability(self, p_d):
        with pytest.raises(ConfigurationError):
            dropout_mask(4, p_d, np.random.default_rng(0))


class TestBackward:
    @pytest.mark.parametrize("variant", list(Variant))
    @pytest.mark.parametrize("direction", list(Direction))
    def test_matches_finite_differences(self, make_params, variant, direction):
        gen = np.random.default_rng(10 * list(Variant).index(variant) + list(Direction).index(direction))
        for trial in range(20):
            k = int(gen.integers(2, 9))
            params = make_params(5, 4, k, seed=trial)
            inst = _random_instance(gen, 5, 4, direction)
            mask = dropout_mask(k, 0.3, gen)
            config = ModelConfig(variant=variant, k=k)

            loss, grads = backward(inst, params, config, mask)
            assert loss == pytest.approx(_loss(inst, params, variant, mask), rel=1e-12)

            analytic = grads.to_dense(params)
            numeric = _numeric_gradients(inst, params, variant, mask)
            for name, expected in numeric.items():
                scale = np.maximum(np.maximum(np.abs(analytic[name]), np.abs(expected)), 1e-4)
                rel = np.abs(analytic[name] - expected) / scale
                assert rel.max() < 1e-5, f"{variant.value}/{direction.value} {name}"

    def test_listwise_minimum_has_zero_gradient(self):
        params = ModelParams.zeros(4, 1, 3)
        params.W_E[:] = [0.3, -0.2, 0.5]
        params.W_R[0] = [0.1, 0.4, -0.7]
        params.D_eh[:] = 1.0
        params.D_rh[:] = 1.0
        inst = TrainingInstance(1, 0, Direction.TAIL_MISSING, np.array([0, 2, 3]), np.ones(3))
        _, grads = backward(inst, params, ModelConfig(variant=Variant.LISTWISE, k=3))
        for name, g in grads.to_dense(params).items():
            np.testing.assert_allclose(g, 0.0, atol=1e-12, err_msg=name)

    def test_wlistwise_gradient_scales_with_positive_count(self, make_params):
        params = make_params(6, 2, 4, seed=7)
        inst = TrainingInstance(
            0, 1, Direction.HEAD_MISSING, np.array([1, 2, 3, 5]), np.array([1.0, 1.0, 1.0, 0.0])
        )
        _, listwise = backward(inst, params, ModelConfig(variant=Variant.LISTWISE, k=4))
        _, weighted = backward(inst, params, ModelConfig(variant=Variant.WLISTWISE, k=4))
        for name, g in listwise.to_dense(params).items():
            np.testing.assert_allclose(weighted.to_dense(params)[name], 3 * g, atol=1e-12)

    def test_gradient_rows_only_for_touched_rows(self, make_params):
        params = make_params(6, 3, 4)
        inst = TrainingInstance(4, 2, Direction.TAIL_MISSING, np.array([0, 5]), np.array([1.0, 0.0]))
        _, grads = backward(inst, params, ModelConfig(k=4))
        assert set(grads.W_E.indices.tolist()) == {0, 4, 5}
        assert set(grads.W_R.indices.tolist()) == {2}

    @pytest.mark.parametrize("variant", list(Variant))
    def test_batch_is_sum_of_instances(self, make_params, variant):
        gen = np.random.default_rng(42)
        params = make_params(5, 4, 6, seed=1)
        instances = [
            _random_instance(gen, 5, 4, Direction.TAIL_MISSING if i % 2 else Direction.HEAD_MISSING)
            for i in range(7)
        ]
        masks = np.stack([dropout_mask(6, 0.5, gen) for _ in instances])
        config = ModelConfig(variant=variant, k=6)

        # Small max_cells forces several padded chunks
        total, grads = batch_gradients(instances, masks, params, variant, max_cells=40)
        expected_total = 0.0
        expected = {name: np.zeros_like(t) for name, t in params.tensors().items()}
        for inst, mask in zip(instances, masks):
            loss, g = backward(inst, params, config, mask)
            expected_total += loss
            for name, value in g.to_dense(params).items():
                expected[name] += value
        assert total == pytest.approx(expected_total, rel=1e-12)
        for name, value in grads.to_dense(params).items():
            np.testing.assert_allclose(value, expected[name], atol=1e-12)


class TestL1:
    def test_zero_weight(self, make_params):
        penalty, grads = l1_penalty_and_subgradient(make_params(4, 2, 3), 0.0)
        assert penalty == 0.0
        assert all(np.all(g == 0) for g in grads.to_dense(make_params(4, 2, 3)).values())

    def test_hand_values(self):
        penalty, sub = l1_norm(np.array([1.0, -2.0, 0.0]), 0.1)
        assert penalty == pytest.approx(0.3)
        np.testing.assert_allclose(sub, [0.1, -0.1, 0.0])

    def test_sign_flip_invariance(self, make_params):
        params = make_params(4, 2, 3)
        before, _ = l1_penalty_and_subgradient(params, 0.01)
        params.W_E[1] *= -1
        params.D_rt *= -1
        after, _ = l1_penalty_and_subgradient(params, 0.01)
        assert after == pytest.approx(before)

    def test_biases_are_not_regularized(self, make_params):
        params = make_params(4, 2, 3)
        penalty, grads = l1_penalty_and_subgradient(params, 0.5)
        dense = grads.to_dense(params)
        np.testing.assert_array_equal(dense["b_c"], 0.0)
        np.testing.assert_array_equal(dense["b_p"], 0.0)
        expected = 0.5 * sum(
            np.abs(getattr(params, name)).sum() for name in ("W_E", "W_R", "D_eh", "D_rh", "D_et", "D_rt")
        )
        assert penalty == pytest.approx(expected)

    def test_lazy_rows(self, make_params):
        params = make_params(6, 3, 2)
        penalty, grads = l1_penalty_and_subgradient(params, 1.0, np.array([2, 2, 0]), np.array([1]))
        assert grads.W_E.indices.tolist() == [0, 2]
        assert grads.W_R.indices.tolist() == [1]
        expected = (
            np.abs(params.W_E[[0, 2]]).sum()
            + np.abs(params.W_R[1]).sum()
            + sum(np.abs(getattr(params, n)).sum() for n in ("D_eh", "D_rh", "D_et", "D_rt"))
        )
        assert penalty == pytest.approx(expected)

    def test_negative_weight(self, make_params):
        with pytest.raises(ConfigurationError):
            l1_penalty_and_subgradient(make_params(2, 1, 2), -1e-5)


class TestTrain:
    CONFIG = ModelConfig(k=8, batch_size=4, sampling_p=0.5, dropout_p=0.5)

    def test_zero_epochs_returns_initialization(self, small_graph):
        params, history = train(small_graph, self.CONFIG, 0, RngStream.from_seed(3))
        expected = init_params(6, 2, 8, RngStream.from_seed(3).init)
        assert history == []
        for name, tensor in expected.tensors().items():
            np.testing.assert_array_equal(params.tensors()[name], tensor)

    def test_deterministic(self, small_graph):
        a, history_a = train(small_graph, self.CONFIG, 4, RngStream.from_seed(8))
        b, history_b = train(small_graph, self.CONFIG, 4, RngStream.from_seed(8))
        assert [m.mean_loss for m in history_a] == [m.mean_loss for m in history_b]
        for name, tensor in a.tensors().items():
            np.testing.assert_array_equal(tensor, b.tensors()[name])

    def test_sink_receives_every_epoch(self, small_graph):
        rows = []
        _, history = train(small_graph, self.CONFIG, 3, RngStream.from_seed(0), report_sink=rows.append, validation_split="valid")
        assert [m.epoch for m in rows] == [1, 2, 3]
        assert rows == history
        assert all(m.report is not None and m.report.split == "valid" for m in rows)

    def test_initial_params_are_copied(self, small_graph, make_params):
        start = make_params(6, 2, 8)
        snapshot = start.copy()
        params, _ = train(small_graph, self.CONFIG, 1, RngStream.from_seed(0), initial_params=start)
        np.testing.assert_array_equal(start.W_E, snapshot.W_E)
        assert not np.array_equal(params.W_E, snapshot.W_E)

    def test_initial_params_with_other_k(self, small_graph, make_params):
        with pytest.raises(ContractViolation):
            train(small_graph, self.CONFIG, 1, RngStream.from_seed(0), initial_params=make_params(6, 2, 4))

    def test_empty_train_split(self):
        graph = KnowledgeGraph.from_splits(Vocabulary.from_names(["a"], ["r"]), [])
        with pytest.raises(ConfigurationError):
            train(graph, self.CONFIG, 1, RngStream.from_seed(0))

    def test_non_finite_loss_names_batch(self, small_graph, make_params):
        start = make_params(6, 2, 8)
        start.b_p[0] = np.nan
        with pytest.raises(TrainingDivergedError) as exc:
            train(small_graph, self.CONFIG, 2, RngStream.from_seed(0), initial_params=start)
        assert (exc.value.epoch, exc.value.batch_index) == (1, 0)

    @pytest.mark.slow
    @pytest.mark.parametrize("variant", list(Variant))
    def test_loss_falls_on_block_graph(self, block_graph, variant):
        config = ModelConfig(variant=variant, k=16)
        _, history = train(block_graph, config, 10, RngStream.from_seed(0))
        assert history[9].mean_loss < history[0].mean_loss
