import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentrl import metrics
from latentrl.agent import LatentSpec
from latentrl.envs import CW, CCW, RingMdp, RingMdpConfig
from latentrl.metrics import (JointDistribution, MiMode, behavior_embedding,
                              diversity_score, mi_lower_bound,
                              mi_lower_bound_table, mi_oracle,
                              ring_stationary_joint)

LOG2 = float(np.log(2.0))


class TestMiOracle:
    def test_independent_joint_zero_mi(self):
        table = np.full((2, 2, 2), 1 / 8)
        joint = JointDistribution(table)
        assert mi_oracle(joint, MiMode.S_Z) == pytest.approx(0.0, abs=1e-12)
        assert mi_oracle(joint, MiMode.SA_Z) == pytest.approx(0.0, abs=1e-12)

    def test_perfectly_dependent_state(self):
        # z determines s: I(s;z) = H(z) = log 2.
        table = np.zeros((2, 1, 2))
        table[0, 0, 0] = 0.5
        table[1, 0, 1] = 0.5
        joint = JointDistribution(table)
        assert mi_oracle(joint, MiMode.S_Z) == pytest.approx(LOG2, abs=1e-12)
        assert mi_oracle(joint, MiMode.SA_Z) == pytest.approx(LOG2, abs=1e-12)

    def test_ring_counterexample_exact(self):
        # Identical state visitation, opposite actions: the state-only MI
        # vanishes while the state-action MI saturates at log 2.
        joint = ring_stationary_joint(RingMdpConfig())
        assert mi_oracle(joint, MiMode.S_Z) == pytest.approx(0.0, abs=1e-12)
        assert mi_oracle(joint, MiMode.SA_Z) == pytest.approx(LOG2, abs=1e-12)

    def test_ring_counterexample_other_sizes(self):
        for n in (3, 5, 8):
            joint = ring_stationary_joint(RingMdpConfig(
                n_states=n, reward_states=frozenset({0})))
            assert mi_oracle(joint, MiMode.S_Z) == pytest.approx(0.0, abs=1e-12)
            assert mi_oracle(joint, MiMode.SA_Z) == pytest.approx(LOG2,
                                                                  abs=1e-12)

    def test_invalid_table_rejected(self):
        with pytest.raises(ValueError):
            JointDistribution(np.full((2, 2, 2), 1.0))
        with pytest.raises(ValueError):
            JointDistribution(np.full((2, 2), 0.25))

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_mi_nonnegative_and_bounded_by_latent_entropy(self, seed):
        rng = np.random.default_rng(seed)
        table = rng.dirichlet(np.ones(2 * 2 * 3)).reshape(2, 2, 3)
        table /= table.sum()
        joint = JointDistribution(table)
        p_z = joint.marginal((2,))
        h_z = -np.sum(p_z[p_z > 0] * np.log(p_z[p_z > 0]))
        for mode in MiMode:
            mi = mi_oracle(joint, mode)
            assert -1e-12 <= mi <= h_z + 1e-12

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_sa_mi_dominates_s_mi(self, seed):
        # Data-processing: (s, a) carries at least as much about z as s.
        rng = np.random.default_rng(seed)
        table = rng.dirichlet(np.ones(12)).reshape(2, 3, 2)
        table /= table.sum()
        joint = JointDistribution(table)
        assert (mi_oracle(joint, MiMode.SA_Z)
                >= mi_oracle(joint, MiMode.S_Z) - 1e-12)


class TestMiLowerBound:
    def test_table_bound_tight_at_true_posterior(self):
        # With q = p(z|s,a) the bound equals the exact MI.
        joint = ring_stationary_joint(RingMdpConfig())
        p = joint.table
        p_sa = p.sum(axis=2, keepdims=True)
        q = np.divide(p, p_sa, out=np.full_like(p, 0.5), where=p_sa > 0)
        bound = mi_lower_bound_table(joint, q)
        assert bound == pytest.approx(mi_oracle(joint, MiMode.SA_Z), abs=1e-12)

    def test_table_bound_below_mi_for_wrong_posterior(self):
        joint = ring_stationary_joint(RingMdpConfig())
        q = np.full((4, 2, 2), 0.5)  # uninformative posterior
        bound = mi_lower_bound_table(joint, q)
        assert bound == pytest.approx(0.0, abs=1e-12)
        assert bound <= mi_oracle(joint, MiMode.SA_Z)

    def test_network_bound_matches_manual_computation(self):
        from latentrl.numerics import mlp_init
        spec = LatentSpec(cont_dim=1, disc_k=0)
        rng = np.random.default_rng(0)
        posterior = mlp_init([5, 8, 2], rng, "linear")
        x = rng.normal(size=(16, 5))
        z = rng.uniform(-1, 1, size=(16, 1))
        got = mi_lower_bound(x, z, np.full(16, -1), posterior, spec)
        from latentrl.numerics import gaussian_log_prob, mlp_forward
        out, _ = mlp_forward(posterior, x)
        logq = []
        for i in range(16):
            mean = out[i, :1]
            log_std = np.clip(out[i, 1:2], -5.0, 2.0)
            logq.append(gaussian_log_prob(z[i], mean, log_std))
        expected = float(np.mean(logq)) + spec.entropy()
        assert got == pytest.approx(expected, abs=1e-12)

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_table_bound_never_exceeds_oracle(self, seed):
        # Gibbs' inequality: any normalized q gives a bound <= the exact MI.
        rng = np.random.default_rng(seed)
        shape = (int(rng.integers(2, 4)), int(rng.integers(2, 4)),
                 int(rng.integers(2, 4)))
        table = rng.dirichlet(np.ones(np.prod(shape))).reshape(shape)
        table /= table.sum()
        joint = JointDistribution(table)
        q = rng.uniform(0.1, 1.0, size=shape)
        q /= q.sum(axis=2, keepdims=True)
        bound = mi_lower_bound_table(joint, q)
        assert bound <= mi_oracle(joint, MiMode.SA_Z) + 0.02

    def test_empty_dataset_rejected(self):
        from latentrl.numerics import mlp_init
        spec = LatentSpec(cont_dim=1, disc_k=0)
        posterior = mlp_init([5, 8, 2], np.random.default_rng(0), "linear")
        with pytest.raises(ValueError):
            mi_lower_bound(np.zeros((0, 5)), np.zeros((0, 1)),
                           np.zeros(0), posterior, spec)


class ConstantPolicyEnv:
    """Minimal 3-step episodic env for embedding tests."""

    def __init__(self, horizon=3):
        self.horizon = horizon

    def reset(self, rng):
        self._t = 0
        return _EnvState(np.zeros(2), False)

    def step(self, a):
        self._t += 1
        return _EnvState(np.zeros(2), self._t >= self.horizon), 0.0


class _EnvState:
    def __init__(self, observation, terminated):
        self.observation = observation
        self.terminated = terminated


class TestBehaviorEmbedding:
    def test_constant_policy_embedding_is_the_constant(self):
        env = ConstantPolicyEnv()
        c = np.array([0.3, -0.7])
        emb = behavior_embedding(lambda s: c, env, 2, np.random.default_rng(0))
        np.testing.assert_allclose(emb.vector, c, atol=0)
        assert emb.episodes == 2

    def test_seeded_embedding_is_reproducible(self):
        env = RingMdp(RingMdpConfig())
        policy = lambda s: CW if s[0] > 0 else CCW
        encode = lambda a: 1.0 if a == CW else -1.0
        e1 = behavior_embedding(policy, env, 3, np.random.default_rng(5),
                                action_embed=encode)
        e2 = behavior_embedding(policy, env, 3, np.random.default_rng(5),
                                action_embed=encode)
        np.testing.assert_array_equal(e1.vector, e2.vector)

    def test_ring_constant_policies_embed_to_plus_minus_one(self):
        # Rollout enumeration with actions encoded CW -> +1, CCW -> -1.
        env = RingMdp(RingMdpConfig())
        rng = np.random.default_rng(0)
        encode = lambda a: 1.0 if a == CW else -1.0
        e_cw = behavior_embedding(lambda s: CW, env, 3, rng,
                                  action_embed=encode)
        e_ccw = behavior_embedding(lambda s: CCW, env, 3, rng,
                                   action_embed=encode)
        np.testing.assert_array_equal(e_cw.vector, [1.0])
        np.testing.assert_array_equal(e_ccw.vector, [-1.0])


class TestDiversityScore:
    def test_single_embedding_scores_one(self):
        assert diversity_score([np.array([3.0, 4.0])], h=1.0) == 1.0

    def test_duplicate_embeddings_score_zero(self):
        e = np.array([1.0, 2.0])
        assert diversity_score([e, e.copy()], h=1.0) == 0.0

    def test_two_point_closed_form(self):
        # Distance h*sqrt(2 ln 2) gives kernel 1/2 and det 1 - 1/4 = 0.75.
        h = 0.7
        d = h * np.sqrt(2 * np.log(2))
        score = diversity_score([np.zeros(1), np.array([d])], h)
        assert score == pytest.approx(0.75, abs=1e-12)

    def test_far_apart_approaches_one(self):
        pts = [np.array([100.0 * i]) for i in range(4)]
        assert diversity_score(pts, h=1.0) == pytest.approx(1.0, abs=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            diversity_score([], h=1.0)
        with pytest.raises(ValueError):
            diversity_score([np.zeros(2)], h=0.0)

    @given(st.integers(0, 2 ** 31 - 1), st.integers(2, 6))
    @settings(max_examples=100, deadline=None)
    def test_range_and_permutation_invariance(self, seed, m):
        rng = np.random.default_rng(seed)
        pts = [rng.normal(size=3) for _ in range(m)]
        score = diversity_score(pts, h=1.0)
        assert 0.0 <= score <= 1.0
        perm = [pts[i] for i in rng.permutation(m)]
        assert diversity_score(perm, h=1.0) == pytest.approx(score, rel=1e-9,
                                                             abs=1e-12)

    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    @settings(max_examples=100, deadline=None)
    def test_pairwise_monotone_in_distance(self, d1, d2):
        lo, hi = sorted((d1, d2))
        s_lo = diversity_score([np.zeros(1), np.array([lo])], h=1.0)
        s_hi = diversity_score([np.zeros(1), np.array([hi])], h=1.0)
        assert s_lo <= s_hi + 1e-12
