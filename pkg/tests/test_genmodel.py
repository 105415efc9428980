import numpy as np
import pytest
import scipy.sparse as sp

from psdembed.corpus import CooccurrenceCounts, build_vocabulary, count_cooccurrences
from psdembed.genmodel import (
    ModelHandle,
    ResidualView,
    bigram_joint,
    document_log_likelihood,
    interaction_information,
    model_perplexity_report,
    pointwise_interaction,
    trigram_distribution,
    window_conditional,
    window_joint,
)
from psdembed.stats import pmi_target, smooth_bigrams, unigram_distribution

from corpusgen import clustered_documents


@pytest.fixture(scope="module")
def fitted_model():
    """Small corpus statistics plus arbitrary embeddings."""
    _, documents = clustered_documents(
        n_docs=120, doc_len=40, vocab_size=12, n_clusters=4, seed=3
    )
    vocab = build_vocabulary(t for doc in documents for t in doc)
    counts = count_cooccurrences(documents, vocab, 3)
    unigrams = unigram_distribution(counts)
    smoothed = smooth_bigrams(counts, unigrams, 0.02)
    pmi = pmi_target(smoothed, unigrams)
    rng = np.random.default_rng(7)
    vectors = rng.standard_normal((4, len(vocab))) * 0.3
    model = ModelHandle(vectors, unigrams, pmi, window=3, vocab=vocab)
    return model, smoothed


class TestModelHandle:
    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            ModelHandle(np.zeros((3, 4)), np.ones(5) / 5)
        with pytest.raises(ValueError):
            ModelHandle(np.zeros((3, 4)), np.ones(4) / 4, window=0)

    def test_encode_rejects_unknown_token(self, fitted_model):
        model, _ = fitted_model
        with pytest.raises(ValueError, match="zzzz"):
            model.encode(["zzzz"])

    def test_encode_rejects_out_of_range_id(self, fitted_model):
        model, _ = fitted_model
        with pytest.raises(ValueError, match="99"):
            model.encode([99])

    def test_residuals_require_pmi(self):
        model = ModelHandle(np.zeros((2, 3)), np.ones(3) / 3)
        with pytest.raises(ValueError):
            ResidualView(model).at(0, 1)


class TestBigramJoint:
    def test_zero_interaction_is_independence(self):
        unigrams = np.array([0.3, 0.7])
        model = ModelHandle(np.zeros((2, 2)), unigrams,
                            pmi=np.zeros((2, 2)), window=2)
        assert bigram_joint(0, 1, model) == pytest.approx(0.21)

    def test_direct_evaluation(self):
        # One dimension, both vectors sqrt(log 2): inner product log 2, and
        # the attached target equals it so the residual vanishes.
        value = np.sqrt(np.log(2.0))
        vectors = np.array([[value, value]])
        pmi = np.full((2, 2), np.log(2.0))
        model = ModelHandle(vectors, np.array([0.5, 0.5]), pmi, window=2)
        assert bigram_joint(0, 1, model) == pytest.approx(0.5, rel=1e-12)

    def test_residuals_reproduce_smoothed_joint(self, fitted_model):
        model, smoothed = fitted_model
        for i in range(model.vocab_size):
            for j in range(model.vocab_size):
                assert bigram_joint(i, j, model) == pytest.approx(
                    smoothed.at(i, j), rel=1e-10
                )


class TestWindowConditional:
    def test_single_context_equals_bigram_conditional(self, fitted_model):
        model, _ = fitted_model
        for i in range(model.vocab_size):
            for j in range(model.vocab_size):
                conditional = window_conditional(j, [i], model)
                assert conditional == pytest.approx(
                    bigram_joint(i, j, model) / model.unigrams[i], rel=1e-10
                )

    def test_empty_context_is_unigram(self, fitted_model):
        model, _ = fitted_model
        assert window_conditional(4, [], model) == model.unigrams[4]

    def test_zero_model_returns_unigram(self):
        unigrams = np.array([0.25, 0.35, 0.4])
        model = ModelHandle(np.zeros((2, 3)), unigrams,
                            pmi=np.zeros((3, 3)), window=2)
        assert window_conditional(2, [0, 1], model) == pytest.approx(0.4)

    def test_two_context_words_factorize(self, fitted_model):
        model, _ = fitted_model
        focus, first, second = 2, 5, 9
        joint_context = window_conditional(focus, [first, second], model)
        lift_first = window_conditional(focus, [first], model) \
            / model.unigrams[focus]
        lift_second = window_conditional(focus, [second], model) \
            / model.unigrams[focus]
        expected = model.unigrams[focus] * lift_first * lift_second
        assert joint_context == pytest.approx(expected, rel=1e-10)

    def test_matches_ratio_of_window_joints(self, fitted_model):
        model, _ = fitted_model
        ids = [1, 7, 4]
        ratio = window_joint(ids, model) / window_joint(ids[:-1], model)
        assert window_conditional(4, [1, 7], model) == pytest.approx(
            ratio, rel=1e-10
        )

    def test_exact_normalization_sums_to_one(self, fitted_model):
        model, _ = fitted_model
        total = sum(
            window_conditional(w, [3, 8], model, exact_normalize=True)
            for w in range(model.vocab_size)
        )
        assert total == pytest.approx(1.0, rel=1e-12)

    def test_oversized_context_rejected(self, fitted_model):
        model, _ = fitted_model
        with pytest.raises(ValueError):
            window_conditional(0, [1, 2, 3, 4], model)


class TestDocumentLogLikelihood:
    def test_single_token_is_log_unigram(self, fitted_model):
        model, _ = fitted_model
        assert document_log_likelihood([5], model) == pytest.approx(
            np.log(model.unigrams[5])
        )

    def test_bigram_chain_identity(self, fitted_model):
        model, smoothed = fitted_model
        value = document_log_likelihood([1, 2], model)
        conditional = smoothed.at(1, 2) / model.unigrams[1]
        assert value == pytest.approx(
            np.log(model.unigrams[1]) + np.log(conditional), rel=1e-10
        )

    def test_telescoping(self, fitted_model):
        model, _ = fitted_model
        rng = np.random.default_rng(0)
        doc = rng.integers(0, model.vocab_size, size=9).tolist()
        for t in range(1, len(doc)):
            delta = document_log_likelihood(doc[:t + 1], model) \
                - document_log_likelihood(doc[:t], model)
            context = doc[max(0, t - model.window):t]
            assert delta == pytest.approx(
                np.log(window_conditional(doc[t], context, model)), rel=1e-9
            )

    def test_accepts_tokens_via_vocab(self, fitted_model):
        model, _ = fitted_model
        words = [model.vocab.words[i] for i in (0, 3)]
        by_word = document_log_likelihood(words, model)
        by_id = document_log_likelihood([0, 3], model)
        assert by_word == by_id

    def test_oov_token_is_named(self, fitted_model):
        model, _ = fitted_model
        with pytest.raises(ValueError, match="mystery"):
            document_log_likelihood(["mystery"], model)


class TestPointwiseInteraction:
    def test_product_distribution_is_zero(self):
        rng = np.random.default_rng(1)
        p1 = rng.dirichlet(np.ones(3))
        p2 = rng.dirichlet(np.ones(2))
        py = rng.dirichlet(np.ones(4))
        joint = np.einsum("i,j,k->ijk", p1, p2, py)
        table, expectation = pointwise_interaction(joint)
        np.testing.assert_allclose(table, 0.0, atol=1e-12)
        assert expectation == pytest.approx(0.0, abs=1e-12)

    def test_copy_channel_is_zero_on_support(self):
        rng = np.random.default_rng(2)
        p1 = rng.dirichlet(np.ones(3))
        p2 = rng.dirichlet(np.ones(3))
        joint = np.zeros((3, 3, 3))
        for i in range(3):
            for j in range(3):
                joint[i, j, i] = p1[i] * p2[j]
        table, expectation = pointwise_interaction(joint)
        supported = table[~np.isnan(table)]
        np.testing.assert_allclose(supported, 0.0, atol=1e-12)
        assert expectation == pytest.approx(0.0, abs=1e-12)

    def test_xor_gives_log_two_everywhere(self):
        joint = np.zeros((2, 2, 2))
        for x1 in range(2):
            for x2 in range(2):
                joint[x1, x2, x1 ^ x2] = 0.25
        table, expectation = pointwise_interaction(joint)
        supported = table[~np.isnan(table)]
        assert supported.size == 4
        np.testing.assert_allclose(supported, np.log(2.0), atol=1e-12)
        assert expectation == pytest.approx(np.log(2.0), abs=1e-12)

    def test_expectation_matches_mutual_information_route(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            joint = rng.dirichlet(np.ones(24)).reshape(2, 3, 4)
            _, expectation = pointwise_interaction(joint)
            assert expectation == pytest.approx(
                interaction_information(joint), abs=1e-10
            )

    def test_requested_zero_outcome_is_error(self):
        joint = np.zeros((2, 2, 2))
        joint[0, 0, 0] = 1.0
        with pytest.raises(ValueError, match="zero probability"):
            pointwise_interaction(joint, outcomes=[(1, 1, 1)])

    def test_bad_distributions_rejected(self):
        with pytest.raises(ValueError):
            pointwise_interaction(np.full((2, 2, 2), 0.25))
        with pytest.raises(ValueError):
            pointwise_interaction(np.full((2, 2), 0.25))


def test_trigram_distribution_hand_count():
    docs = [np.array([0, 1, 0, 1]), np.array([1, 0])]
    joint = trigram_distribution(docs, 2)
    assert joint[0, 1, 0] == pytest.approx(0.5)
    assert joint[1, 0, 1] == pytest.approx(0.5)
    assert joint.sum() == pytest.approx(1.0)


def test_trigram_distribution_requires_triples():
    with pytest.raises(ValueError):
        trigram_distribution([np.array([0, 1])], 2)


class TestPerplexityReport:
    def uniform_model(self, size=8):
        unigrams = np.full(size, 1.0 / size)
        pairs = sp.csr_matrix(np.ones((size, size)))
        counts = CooccurrenceCounts(pairs, np.full(size, 10), 2)
        smoothed = smooth_bigrams(counts, unigrams, 1.0)
        pmi = pmi_target(smoothed, unigrams)
        return ModelHandle(np.zeros((3, size)), unigrams, pmi, window=2)

    def test_uniform_zero_model_perplexity_is_vocab_size(self):
        model = self.uniform_model(size=8)
        rng = np.random.default_rng(4)
        docs = [rng.integers(0, 8, size=20).tolist() for _ in range(5)]
        report = model_perplexity_report(docs, model)
        assert report.perplexity(use_residuals=False) == pytest.approx(8.0)
        assert report.perplexity(use_residuals=True) == pytest.approx(8.0)

    def test_reports_both_modes_per_document(self, fitted_model):
        model, _ = fitted_model
        docs = [[0, 1, 2], [3, 4]]
        report = model_perplexity_report(docs, model)
        assert len(report.rows) == 2
        assert report.rows[0][1] == 3
        text = report.to_tsv()
        assert text.startswith("doc\ttokens\t")
        assert "#perplexity" in text

    def test_identical_samples_identical_reports(self, fitted_model):
        model, _ = fitted_model
        docs = [[2, 5, 1, 1], [7, 0]]
        first = model_perplexity_report(docs, model)
        second = model_perplexity_report(docs, model)
        assert first.rows == second.rows

    def test_empty_sample_rejected(self, fitted_model):
        model, _ = fitted_model
        with pytest.raises(ValueError):
            model_perplexity_report([], model)
        with pytest.raises(ValueError):
            model_perplexity_report([[]], model)
