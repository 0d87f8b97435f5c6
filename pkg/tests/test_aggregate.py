import itertools
import math

import numpy as np
import pytest

from tempr import ConfigError, adaptive, dsc, eap_label, eicw, em, variant
from tempr import numkit as nk
from tempr.aggregate import VARIANTS, BetaParam, eicw_weights, prediction_set


def t(x):
    return nk.tensor(np.asarray(x, dtype=np.float64))


# straight-line transcriptions used as independent oracles -------------------


def dsc_oracle(a, b):
    return 2.0 * sum(x * y for x, y in zip(a, b)) / (sum(x * x for x in a) + sum(y * y for y in b))


def eicw_oracle(y_hats):
    n = len(y_hats)
    k = len(y_hats[0])
    ybar = [sum(y[c] for y in y_hats) / n for c in range(k)]
    inv = [min(1.0 / dsc_oracle(y, ybar), 1e6) for y in y_hats]
    z = sum(math.exp(v - max(inv)) for v in inv)
    weights = [math.exp(v - max(inv)) / z for v in inv]
    contrib = [sum(weights[i] * y_hats[i][c] for i in range(n)) for c in range(k)]
    return weights, contrib


def em_oracle(y_hats):
    n = len(y_hats)
    k = len(y_hats[0])
    weights = []
    for i in range(n):
        row = []
        for c in range(k):
            col = [y_hats[j][c] for j in range(n)]
            row.append(math.exp(y_hats[i][c] - max(col)) / sum(math.exp(v - max(col)) for v in col))
        weights.append(row)
    contrib = [sum(weights[i][c] * y_hats[i][c] for i in range(n)) for c in range(k)]
    return weights, contrib


def prob_grid(k, step=0.25):
    """All k-class probability vectors on a step-0.25 simplex grid."""
    units = int(round(1 / step))
    vecs = []
    for combo in itertools.product(range(units + 1), repeat=k - 1):
        if sum(combo) <= units:
            vecs.append([c * step for c in combo] + [1.0 - sum(combo) * step])
    return vecs


class TestDSC:
    def test_self_similarity(self):
        assert dsc(t([0.5, 0.5]), t([0.5, 0.5])).item() == 1.0

    def test_disjoint_support(self):
        assert dsc(t([1.0, 0.0]), t([0.0, 1.0])).item() == 0.0

    def test_hand_arithmetic(self):
        val = dsc(t([0.7, 0.3]), t([0.4, 0.6])).item()
        assert val == pytest.approx(0.92 / 1.10, abs=1e-12)

    def test_symmetric(self):
        a, b = t([0.6, 0.1, 0.3]), t([0.2, 0.5, 0.3])
        assert dsc(a, b).item() == pytest.approx(dsc(b, a).item(), abs=1e-15)

    def test_zero_vectors_rejected(self):
        with pytest.raises(ConfigError):
            dsc(t([0.0, 0.0]), t([0.0, 0.0]))


class TestEICW:
    def test_identical_towers_uniform(self):
        w, contrib = eicw([t([0.3, 0.7])] * 3)
        np.testing.assert_allclose(w.data, 1 / 3, atol=1e-12)
        np.testing.assert_allclose(contrib.data, [0.3, 0.7], atol=1e-12)

    def test_single_tower(self):
        w, contrib = eicw([t([0.9, 0.1])])
        np.testing.assert_allclose(w.data, [1.0], atol=1e-15)
        np.testing.assert_allclose(contrib.data, [0.9, 0.1], atol=1e-15)

    def test_transcription_oracle_n3(self):
        y = [[0.8, 0.2], [0.6, 0.4], [0.1, 0.9]]
        w, contrib = eicw([t(v) for v in y])
        ow, oc = eicw_oracle(y)
        np.testing.assert_allclose(w.data, ow, atol=1e-12)
        np.testing.assert_allclose(contrib.data, oc, atol=1e-12)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            y = [t(v) for v in rng.dirichlet(np.ones(4), size=3)]
            np.testing.assert_allclose(eicw_weights(y).data.sum(axis=0), 1.0, atol=1e-9)

    def test_outlier_gets_most_weight(self):
        # lower similarity to the mean -> larger exp(DSC^-1) weight
        y = [[0.8, 0.2], [0.6, 0.4], [0.1, 0.9]]
        w, _ = eicw([t(v) for v in y])
        assert np.argmax(w.data) == 2


class TestEM:
    def test_identical_towers(self):
        w, contrib = em([t([0.3, 0.7])] * 4)
        np.testing.assert_allclose(w.data, 0.25, atol=1e-12)
        np.testing.assert_allclose(contrib.data, [0.3, 0.7], atol=1e-12)

    def test_scalar_softmax_oracle(self):
        # class column (1.0, 0.0) across two towers
        w, _ = em([t([1.0, 0.0]), t([0.0, 1.0])])
        e = math.e
        np.testing.assert_allclose(w.data[:, 0], [e / (e + 1), 1 / (e + 1)], atol=1e-12)
        np.testing.assert_allclose(w.data[:, 1], [1 / (e + 1), e / (e + 1)], atol=1e-12)

    def test_single_tower_identity(self):
        _, contrib = em([t([0.25, 0.75])])
        np.testing.assert_array_equal(contrib.data, [0.25, 0.75])

    def test_transcription_oracle(self):
        y = [[0.5, 0.25, 0.25], [0.1, 0.8, 0.1], [0.4, 0.4, 0.2]]
        w, contrib = em([t(v) for v in y])
        ow, oc = em_oracle(y)
        np.testing.assert_allclose(w.data, ow, atol=1e-12)
        np.testing.assert_allclose(contrib.data, oc, atol=1e-12)


class TestGridEquivalence:
    @pytest.mark.parametrize("n,k", [(2, 2), (3, 2), (2, 3), (3, 3), (2, 4)])
    def test_matches_transcriptions_on_simplex_grid(self, n, k):
        grid = prob_grid(k)
        rng = np.random.default_rng(n * 10 + k)
        combos = list(itertools.product(range(len(grid)), repeat=n))
        if len(combos) > 300:
            combos = [combos[i] for i in rng.choice(len(combos), 300, replace=False)]
        for idxs in combos:
            y = [grid[i] for i in idxs]
            if any(all(v == 0 for v in row) for row in y):
                continue
            w, contrib = eicw([t(v) for v in y])
            ow, oc = eicw_oracle(y)
            np.testing.assert_allclose(w.data, ow, atol=1e-12)
            np.testing.assert_allclose(contrib.data, oc, atol=1e-12)
            w2, c2 = em([t(v) for v in y])
            ow2, oc2 = em_oracle(y)
            np.testing.assert_allclose(w2.data, ow2, atol=1e-12)
            np.testing.assert_allclose(c2.data, oc2, atol=1e-12)


class TestAdaptive:
    def y(self):
        return [t([0.8, 0.2]), t([0.6, 0.4]), t([0.1, 0.9])]

    def test_beta_init(self):
        assert abs(BetaParam.init(0.5).value - 0.5) < 1e-9
        assert BetaParam.init(0.5).raw.data == 0.0

    def test_beta_bad_init(self):
        for b in (0.0, 1.0, -0.2):
            with pytest.raises(ConfigError):
                BetaParam.init(b)

    def test_endpoints(self):
        y = self.y()
        hi = BetaParam(raw=nk.parameter(np.asarray(20.0)))
        lo = BetaParam(raw=nk.parameter(np.asarray(-20.0)))
        pure_eicw = variant("eicw", y).data
        pure_em = variant("em", y).data
        assert np.max(np.abs(adaptive(y, hi).data - pure_eicw)) < 1e-8
        assert np.max(np.abs(adaptive(y, lo).data - pure_em)) < 1e-8

    def test_identical_towers_identity(self):
        out = adaptive([t([0.2, 0.5, 0.3])] * 3, BetaParam.init(0.37))
        np.testing.assert_allclose(out.data, [0.2, 0.5, 0.3], atol=1e-12)

    def test_sums_to_one(self):
        out = adaptive(self.y(), BetaParam.init(0.5))
        assert out.data.sum() == pytest.approx(1.0, abs=1e-12)

    def test_permutation_invariance(self):
        y = self.y()
        a = adaptive(y, BetaParam.init(0.5)).data
        b = adaptive([y[2], y[0], y[1]], BetaParam.init(0.5)).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_gradcheck_wrt_raw_beta(self):
        beta = BetaParam.init(0.5)
        y = self.y()

        def loss():
            return nk.sum_(adaptive(y, beta) * t([1.0, -2.0]))

        nk.check_gradients(loss, [beta.raw], tol=1e-4)

    def test_gradcheck_wrt_predictions(self):
        beta = BetaParam.init(0.4)
        p = nk.parameter(np.array([0.6, 0.4]))
        y = [p, t([0.3, 0.7])]

        def loss():
            return nk.sum_(adaptive(y, beta) * t([1.0, -2.0]))

        nk.check_gradients(loss, [p, beta.raw], tol=1e-4)


class TestVariants:
    def test_avg(self):
        out = variant("avg", [t([1.0, 0.0]), t([0.0, 1.0])])
        np.testing.assert_allclose(out.data, [0.5, 0.5], atol=1e-12)

    def test_top_eval_picks_sharpest(self):
        out = variant("top", [t([0.9, 0.1]), t([0.6, 0.4])])
        np.testing.assert_allclose(out.data, [0.9, 0.1], atol=1e-15)

    def test_top_training_is_differentiable_blend(self):
        p = nk.parameter(np.array([0.9, 0.1]))
        out = variant("top", [p, t([0.6, 0.4])], training=True)
        nk.sum_(out * t([1.0, 0.0])).backward()
        assert p.grad is not None and np.any(p.grad != 0)

    def test_gate_degenerate_equals_avg(self):
        y = [t([0.7, 0.3]), t([0.4, 0.6])]
        np.testing.assert_allclose(
            variant("gate", y, theta=0.1).data, variant("avg", y).data, atol=1e-12)

    def test_gate_excludes_unconfident(self):
        y = [t([0.9, 0.1]), t([0.5, 0.5])]
        out = variant("gate", y, theta=0.8)
        np.testing.assert_allclose(out.data, [0.9, 0.1], atol=1e-12)

    def test_gate_fallback_when_none_qualify(self):
        y = [t([0.6, 0.4]), t([0.5, 0.5])]
        np.testing.assert_allclose(
            variant("gate", y, theta=0.99).data, variant("avg", y).data, atol=1e-12)

    def test_gate_requires_theta(self):
        with pytest.raises(ConfigError):
            variant("gate", [t([0.5, 0.5])])

    def test_icw_unexponentiated(self):
        y = [[0.8, 0.2], [0.6, 0.4], [0.1, 0.9]]
        out = variant("icw", [t(v) for v in y]).data
        ybar = np.mean(y, axis=0)
        inv = np.array([1.0 / dsc_oracle(v, ybar) for v in y])
        w = inv / inv.sum()
        expected = (w[:, None] * np.asarray(y)).sum(axis=0)
        np.testing.assert_allclose(out, expected / expected.sum(), atol=1e-12)

    def test_weighted_uses_softmaxed_weights(self):
        y = [t([1.0, 0.0]), t([0.0, 1.0])]
        weights = nk.parameter(np.array([math.log(3.0), 0.0]))  # softmax -> (0.75, 0.25)
        out = variant("weighted", y, weights=weights)
        np.testing.assert_allclose(out.data, [0.75, 0.25], atol=1e-12)

    def test_weighted_theta_floors_weights(self):
        n = 2
        y = [t([1.0, 0.0]), t([0.0, 1.0])]
        weights = nk.parameter(np.array([50.0, 0.0]))  # softmax ~ (1, 0)
        out = variant("weighted_theta", y, weights=weights)  # default theta = 1/(2n)
        theta = 1.0 / (2 * n)
        np.testing.assert_allclose(out.data, [1.0 - theta, theta], atol=1e-9)

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            variant("median", [t([0.5, 0.5])])

    @pytest.mark.parametrize("name", [v for v in VARIANTS if v != "adaptive"])
    def test_identical_towers_identity_every_variant(self, name):
        y = [t([0.2, 0.5, 0.3])] * 3
        kwargs = {}
        if name in ("gate",):
            kwargs["theta"] = 0.1
        if name in ("weighted", "weighted_theta"):
            kwargs["weights"] = nk.parameter(np.zeros(3))
        out = variant(name, y, **kwargs)
        np.testing.assert_allclose(out.data, [0.2, 0.5, 0.3], atol=1e-12)

    @pytest.mark.parametrize("name", [v for v in VARIANTS if v != "adaptive"])
    def test_outputs_are_distributions(self, name):
        rng = np.random.default_rng(1)
        y = [t(v) for v in rng.dirichlet(np.ones(4), size=3)]
        kwargs = {}
        if name == "gate":
            kwargs["theta"] = 0.1
        if name in ("weighted", "weighted_theta"):
            kwargs["weights"] = nk.parameter(rng.normal(size=3))
        out = variant(name, y, **kwargs).data
        assert np.all(out >= -1e-15)
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-9)


class TestEapLabel:
    def test_argmax(self):
        assert eap_label(np.array([0.2, 0.5, 0.3])) == 1

    def test_tie_breaks_low(self):
        assert eap_label(np.array([0.25, 0.25, 0.25, 0.25])) == 0
        assert eap_label(np.array([0.1, 0.45, 0.45])) == 1

    def test_scaling_invariance(self):
        v = np.array([0.2, 0.5, 0.3])
        assert eap_label(v) == eap_label(7.5 * v)

    def test_batched(self):
        out = eap_label(np.array([[0.9, 0.1], [0.2, 0.8]]))
        np.testing.assert_array_equal(out, [0, 1])


class TestPredictionSet:
    def test_invariants(self):
        rng = np.random.default_rng(2)
        y = rng.dirichlet(np.ones(4), size=(3, 5))  # (n, N, K)
        ps = prediction_set(y, beta_value=0.5)
        np.testing.assert_allclose(ps.weights_eicw.sum(axis=0), 1.0, atol=1e-9)
        np.testing.assert_allclose(ps.weights_em.sum(axis=0), 1.0, atol=1e-9)
        np.testing.assert_allclose(ps.aggregated.sum(axis=-1), 1.0, atol=1e-9)
        np.testing.assert_allclose(ps.mean, y.mean(axis=0), atol=1e-15)
