import numpy as np
import pytest
import scipy.sparse as sp

from psdembed.corpus import CooccurrenceCounts, build_vocabulary, count_cooccurrences
from psdembed.stats import (
    PmiTarget,
    SmoothedBigrams,
    load_block,
    pmi_target,
    save_block,
    smooth_bigrams,
    symmetrize,
    symmetrized_core,
    unigram_distribution,
    weight_matrix,
)


def counts_from_docs(documents, window=2):
    tokens = [t for doc in documents for t in doc]
    vocab = build_vocabulary(tokens)
    return vocab, count_cooccurrences(documents, vocab, window)


def random_counts(seed=0, vocab_size=12, n_docs=40, doc_len=30, window=3):
    rng = np.random.default_rng(seed)
    words = [f"w{i:02d}" for i in range(vocab_size)]
    probs = 1.0 / np.arange(2, vocab_size + 2)
    probs /= probs.sum()
    documents = [
        [words[i] for i in rng.choice(vocab_size, size=doc_len, p=probs)]
        for _ in range(n_docs)
    ]
    return counts_from_docs(documents, window)


class TestUnigramDistribution:
    def make_counts(self, unigram_counts):
        n = len(unigram_counts)
        pairs = sp.csr_matrix((np.ones(1), ([0], [min(1, n - 1)])),
                              shape=(n, n))
        return CooccurrenceCounts(pairs, np.array(unigram_counts), 1)

    def test_direct_ratio(self):
        u = unigram_distribution(self.make_counts([3, 1]))
        assert u.tolist() == [0.75, 0.25]

    def test_single_word(self):
        u = unigram_distribution(self.make_counts([5]))
        assert u.tolist() == [1.0]

    def test_uniform(self):
        u = unigram_distribution(self.make_counts([2, 2]))
        assert u.tolist() == [0.5, 0.5]

    def test_zero_total_is_error(self):
        with pytest.raises(ValueError):
            unigram_distribution(self.make_counts([0, 0]))


class TestSmoothBigrams:
    def test_zero_smoothing_is_identity(self):
        _, counts = random_counts(seed=1)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 0.0)
        empirical = counts.pairs.toarray() / counts.total_pairs
        np.testing.assert_allclose(smoothed.dense(), empirical, atol=0)

    def test_full_backoff_is_unigram_product(self):
        _, counts = random_counts(seed=2)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 1.0)
        np.testing.assert_allclose(smoothed.dense(), np.outer(u, u), atol=0)

    @pytest.mark.parametrize("smoothing", [0.0, 0.02, 0.5, 1.0])
    def test_mass_is_preserved(self, smoothing):
        _, counts = random_counts(seed=3)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, smoothing)
        assert abs(smoothed.dense().sum() - 1.0) <= 1e-12

    def test_interpolation_is_entrywise_monotone(self):
        _, counts = random_counts(seed=4)
        u = unigram_distribution(counts)
        backoff = np.outer(u, u)
        previous = None
        for smoothing in np.linspace(0.0, 1.0, 9):
            gap = np.abs(smooth_bigrams(counts, u, smoothing).dense() - backoff)
            if previous is not None:
                assert (gap <= previous + 1e-15).all()
            previous = gap
        assert previous.max() <= 1e-15

    def test_rejects_bad_smoothing(self):
        _, counts = random_counts()
        u = unigram_distribution(counts)
        for bad in (-0.1, 1.1):
            with pytest.raises(ValueError):
                smooth_bigrams(counts, u, bad)

    def test_block_matches_dense(self):
        _, counts = random_counts(seed=5)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 0.02)
        dense = smoothed.dense()
        block = smoothed.block(range(2, 7), range(1, 11))
        np.testing.assert_array_equal(block, dense[2:7, 1:11])


class TestWeightMatrix:
    def handcrafted(self):
        # Observed off-diagonal values 0.4, 0.3, 0.2, 0.1; top 25% saturate,
        # so the cap sits at sqrt(0.4).
        empirical = sp.csr_matrix(
            (np.array([0.4, 0.3, 0.2, 0.1]),
             ([0, 1, 2, 3], [1, 0, 3, 2])),
            shape=(4, 4),
        )
        u = np.full(4, 0.25)
        return SmoothedBigrams(empirical, u, 0.0)

    def test_diagonal_is_zero(self):
        _, counts = random_counts(seed=6)
        u = unigram_distribution(counts)
        weights = weight_matrix(smooth_bigrams(counts, u, 0.02), 0.01)
        assert np.diagonal(weights.dense()).max() == 0.0

    def test_saturation_at_cut(self):
        weights = weight_matrix(self.handcrafted(), 0.25)
        assert weights.cut_value == pytest.approx(np.sqrt(0.4))
        dense = weights.dense()
        assert dense[0, 1] == 1.0

    def test_sqrt_scaling_below_cut(self):
        weights = weight_matrix(self.handcrafted(), 0.25)
        # 0.1 equals cut_value**2 / 4, so its weight is exactly 1/2.
        assert weights.dense()[3, 2] == pytest.approx(0.5)

    def test_range_and_block_consistency(self):
        _, counts = random_counts(seed=7)
        u = unigram_distribution(counts)
        weights = weight_matrix(smooth_bigrams(counts, u, 0.02), 0.05)
        dense = weights.dense()
        assert dense.min() >= 0.0 and dense.max() <= 1.0
        np.testing.assert_array_equal(
            weights.block(range(3, 9), range(0, 12)), dense[3:9, 0:12]
        )

    @pytest.mark.parametrize("cut_fraction", [0.02, 0.1, 0.3])
    def test_saturation_fraction_matches_cut(self, cut_fraction):
        _, counts = random_counts(seed=8, vocab_size=15, n_docs=60)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 0.02)
        weights = weight_matrix(smoothed, cut_fraction)
        observed = smoothed.observed_offdiagonal()
        saturated = int((np.sqrt(observed) >= weights.cut_value).sum())
        assert abs(saturated - cut_fraction * observed.size) <= 1.0

    def test_rejects_empty_observations(self):
        empirical = sp.csr_matrix((2, 2))
        smoothed = SmoothedBigrams(empirical, np.array([0.5, 0.5]), 0.5)
        with pytest.raises(ValueError):
            weight_matrix(smoothed, 0.1)

    def test_rejects_bad_cut_fraction(self):
        with pytest.raises(ValueError):
            weight_matrix(self.handcrafted(), 0.0)


class TestPmiTarget:
    def test_independence_gives_zero(self):
        _, counts = random_counts(seed=9)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 1.0)
        target = pmi_target(smoothed, u)
        np.testing.assert_allclose(target.dense(), 0.0, atol=1e-13)

    def test_log_ratio_value(self):
        empirical = sp.csr_matrix(
            np.array([[0.2, 0.5], [0.2, 0.1]])
        )
        smoothed = SmoothedBigrams(empirical, np.array([0.5, 0.5]), 0.0)
        target = pmi_target(smoothed, np.array([0.5, 0.5]))
        assert target.dense()[0, 1] == pytest.approx(np.log(2.0))

    def test_transpose_difference_cancels_unigrams(self):
        _, counts = random_counts(seed=10)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 0.02)
        target = pmi_target(smoothed, u).dense()
        joint = smoothed.dense()
        np.testing.assert_allclose(
            target - target.T, np.log(joint) - np.log(joint).T, atol=1e-12
        )

    def test_round_trip_recovers_joint(self):
        _, counts = random_counts(seed=11)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 0.02)
        target = pmi_target(smoothed, u).dense()
        reconstructed = np.exp(target) * np.outer(u, u)
        np.testing.assert_allclose(reconstructed, smoothed.dense(),
                                   rtol=1e-10, atol=0)

    def test_symmetric_joint_gives_symmetric_target(self):
        _, counts = random_counts(seed=12)
        sym_pairs = counts.pairs + counts.pairs.T
        counts = CooccurrenceCounts(sym_pairs, counts.unigram_counts,
                                    counts.window)
        u = unigram_distribution(counts)
        target = pmi_target(smooth_bigrams(counts, u, 0.02), u).dense()
        np.testing.assert_allclose(target, target.T, atol=1e-12)

    def test_zero_entries_rejected_with_hint(self):
        _, counts = random_counts(seed=13, vocab_size=14)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 0.0)
        with pytest.raises(ValueError, match="smooth"):
            pmi_target(smoothed, u)

    def test_conditional_block(self):
        _, counts = random_counts(seed=14)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 0.02)
        target = pmi_target(smoothed, u)
        conditional = target.conditional_block(range(0, 5), range(0, 12))
        np.testing.assert_allclose(
            conditional, smoothed.dense()[0:5] / u[0:5, None], rtol=1e-12
        )

    def test_at_matches_dense(self):
        _, counts = random_counts(seed=15)
        u = unigram_distribution(counts)
        target = pmi_target(smooth_bigrams(counts, u, 0.02), u)
        dense = target.dense()
        assert target.at(3, 7) == pytest.approx(dense[3, 7], rel=1e-12)


class TestSymmetrize:
    def test_symmetric_input_is_fixed_point(self):
        rng = np.random.default_rng(0)
        block = rng.standard_normal((4, 4))
        block = (block + block.T) / 2
        weights = rng.uniform(0.1, 1.0, (4, 4))
        weights = (weights + weights.T) / 2
        fused, weight_sum = symmetrize(block, block, weights, weights)
        np.testing.assert_allclose(fused, block, atol=1e-14)
        np.testing.assert_allclose(weight_sum, 2 * weights, atol=0)

    def test_one_sided_evidence_passes_through(self):
        rng = np.random.default_rng(1)
        pmi_ab = rng.standard_normal((3, 5))
        weights_ab = rng.uniform(0.2, 1.0, (3, 5))
        fused, weight_sum = symmetrize(
            pmi_ab, rng.standard_normal((5, 3)),
            weights_ab, np.zeros((5, 3)),
        )
        np.testing.assert_allclose(fused, pmi_ab, atol=0)
        np.testing.assert_allclose(weight_sum, weights_ab, atol=0)

    def test_weighted_mean_of_two_views(self):
        fused, weight_sum = symmetrize(
            np.array([[1.0]]), np.array([[3.0]]),
            np.array([[1.0]]), np.array([[1.0]]),
        )
        assert fused[0, 0] == 2.0
        assert weight_sum[0, 0] == 2.0

    def test_zero_weights_give_zero_target(self):
        fused, weight_sum = symmetrize(
            np.array([[5.0]]), np.array([[7.0]]),
            np.array([[0.0]]), np.array([[0.0]]),
        )
        assert fused[0, 0] == 0.0
        assert weight_sum[0, 0] == 0.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            symmetrize(np.zeros((2, 3)), np.zeros((2, 3)),
                       np.zeros((2, 3)), np.zeros((2, 3)))

    def test_core_result_is_symmetric_and_within_solver_range(self):
        _, counts = random_counts(seed=16)
        u = unigram_distribution(counts)
        smoothed = smooth_bigrams(counts, u, 0.02)
        weights = weight_matrix(smoothed, 0.05)
        target, fused = symmetrized_core(
            pmi_target(smoothed, u), weights, range(0, 8)
        )
        np.testing.assert_array_equal(target, target.T)
        np.testing.assert_array_equal(fused, fused.T)
        assert fused.min() >= 0.0 and fused.max() <= 1.0
        assert np.diagonal(fused).max() == 0.0


def test_block_file_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    values = rng.standard_normal((4, 6))
    path = tmp_path / "block.bin"
    save_block(path, values, rows=range(2, 6), cols=range(0, 6),
               vocab_size=10, smoothing=0.02, cut_value=0.3)
    loaded, header = load_block(path)
    np.testing.assert_array_equal(loaded, values)
    assert header["rows"] == [2, 6]
    assert header["cols"] == [0, 6]
    assert header["vocab_size"] == 10
    assert header["smoothing"] == 0.02


def test_block_file_rejects_other_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a block")
    with pytest.raises(ValueError):
        load_block(path)
