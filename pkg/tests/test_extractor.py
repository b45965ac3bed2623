import numpy as np
import pytest
import torch

from mmrsum.encoder import build_vocab, init_encoder
from mmrsum.extractor import (
    DecodeState,
    PointerExtractor,
    advance_state,
    apply_guidance_logits,
    decode_step,
    episode_log_prob,
    extract_summary,
    extraction_logits,
    glimpse,
    hard_cut_allowed,
    initial_state,
    init_extractor,
    run_episode,
    soft_attention_rows,
    step_logits,
    summary_repr,
)
from mmrsum.mmr import MmrConfig, MmrScorer, fit_tfidf, mmr_extract
from mmrsum.synth import synth_corpus

from oracles import finite_difference_grads, max_relative_error


@pytest.fixture(scope="module")
def setup(tiny_dims):
    sets = synth_corpus(seed=13, n_sets=6, docs_per_set=2, sents_per_doc=4,
                        planted_per_set=2, duplicate_rate=0.25)
    vocab = build_vocab(sets)
    encoder = init_encoder(17, tiny_dims, vocab)
    model = fit_tfidf(sets)
    return sets, encoder, model


def fresh_extractor(tiny_dims, variant="vanilla", seed=23, **kw):
    return init_extractor(seed, tiny_dims, variant, **kw)


class TestSummaryRepr:
    def test_empty_is_trained_initial_state(self, tiny_dims):
        ext = fresh_extractor(tiny_dims)
        a = summary_repr([], ext)
        b = summary_repr([], ext)
        assert torch.equal(a, b)
        assert torch.equal(a, ext.summary_h0)

    def test_output_dim_and_determinism(self, tiny_dims, setup):
        sets, encoder, _ = setup
        ext = fresh_extractor(tiny_dims)
        A = encoder.encode_set(sets[0])
        rows = [A.rows[0], A.rows[3]]
        z1 = summary_repr(rows, ext)
        z2 = summary_repr(rows, ext)
        assert z1.shape == (tiny_dims.ctx_dim,)
        assert torch.equal(z1, z2)

    def test_matches_incremental_state(self, tiny_dims, setup):
        sets, encoder, _ = setup
        ext = fresh_extractor(tiny_dims)
        A = encoder.encode_set(sets[0])
        state = initial_state(ext)
        for action in (1, 4):
            state = advance_state(A, state, action, ext)
        assert torch.allclose(state.z, summary_repr([A.rows[1], A.rows[4]], ext))


class TestGlimpse:
    def test_alpha_sums_to_one(self, tiny_dims, setup):
        sets, encoder, _ = setup
        ext = fresh_extractor(tiny_dims)
        A = encoder.encode_set(sets[0])
        alpha, g = glimpse(A.rows, summary_repr([], ext), ext)
        assert alpha.detach().sum().item() == pytest.approx(1.0, abs=1e-6)
        assert g.shape == (tiny_dims.ctx_dim,)

    def test_identical_rows_uniform(self, tiny_dims):
        ext = fresh_extractor(tiny_dims)
        d = tiny_dims.ctx_dim
        rows = torch.ones(5, d, dtype=torch.float64) * 0.05
        alpha, _ = glimpse(rows, torch.zeros(d, dtype=torch.float64), ext)
        assert torch.allclose(alpha, torch.full((5,), 0.2, dtype=torch.float64))

    def test_glimpse_gradient_wrt_z(self, tiny_dims, setup):
        sets, encoder, _ = setup
        ext = fresh_extractor(tiny_dims)
        with torch.no_grad():
            A = encoder.encode_set(sets[0])
        z = torch.full((tiny_dims.ctx_dim,), 0.03, dtype=torch.float64,
                       requires_grad=True)

        def loss_fn():
            _, g = glimpse(A.rows, z, ext)
            return g.sum()

        loss = loss_fn()
        loss.backward()
        numeric = finite_difference_grads(loss_fn, [z])
        assert max_relative_error([z.grad], numeric) < 1e-4


class TestExtractionLogits:
    def test_masked_rows_probability_zero(self, tiny_dims, setup):
        sets, encoder, _ = setup
        ext = fresh_extractor(tiny_dims)
        A = encoder.encode_set(sets[0])
        _, g = glimpse(A.rows, summary_repr([], ext), ext)
        p = extraction_logits(A.rows, g, [0, 2], ext)
        probs = torch.softmax(p, dim=0).detach()
        assert probs[0] == 0.0
        assert probs[2] == 0.0
        assert probs.sum().item() == pytest.approx(1.0)

    def test_identical_rows_equal_logits(self, tiny_dims):
        ext = fresh_extractor(tiny_dims)
        d = tiny_dims.ctx_dim
        rows = torch.ones(4, d, dtype=torch.float64) * 0.07
        p = extraction_logits(rows, torch.zeros(d, dtype=torch.float64), [], ext)
        assert torch.allclose(p, p[0].expand(4))

    def test_log_softmax_gradient_wrt_w3(self, tiny_dims, setup):
        sets, encoder, _ = setup
        ext = fresh_extractor(tiny_dims)
        with torch.no_grad():
            A = encoder.encode_set(sets[0])
            _, g = glimpse(A.rows, summary_repr([], ext), ext)
        g = g.detach()

        def loss_fn():
            p = extraction_logits(A.rows, g, [], ext)
            return torch.log_softmax(p, dim=0)[3]

        loss = loss_fn()
        loss.backward()
        numeric = finite_difference_grads(loss_fn, [ext.w3])
        assert max_relative_error([ext.w3.grad.clone()], numeric) < 1e-4


class TestGuidance:
    def _logits_and_mmr(self, setup, tiny_dims, variant, extracted=(), **kw):
        sets, encoder, model = setup
        ds = sets[0]
        ext = fresh_extractor(tiny_dims, variant, **kw)
        A = encoder.encode_set(ds)
        scorer = MmrScorer(ds, model, MmrConfig())
        for j in extracted:
            scorer.advance(j)
        state = initial_state(ext)
        for j in extracted:
            state = advance_state(A, state, j, ext)
        m = torch.from_numpy(scorer.scores())
        ranking = scorer.ranking()
        return ds, ext, A, state, m, ranking

    def test_hard_cut_large_k_is_identity(self, setup, tiny_dims):
        ds, ext, A, state, m, ranking = self._logits_and_mmr(
            setup, tiny_dims, "hard_cut", k=len(setup[0][0].sentences) + 5
        )
        vanilla = fresh_extractor(tiny_dims, "vanilla")
        p_vanilla, _, _, _ = step_logits(A, initial_state(vanilla), vanilla)
        p_guided = apply_guidance_logits(p_vanilla, m, ranking, [], A.stop_index, ext)
        assert torch.equal(p_guided, p_vanilla)

    def test_hard_cut_k1_leaves_top_and_stop(self, setup, tiny_dims):
        ds, ext, A, state, m, ranking = self._logits_and_mmr(setup, tiny_dims, "hard_cut", k=1)
        logits, _, _, _ = step_logits(A, state, ext, m, ranking)
        finite = {int(j) for j in torch.isfinite(logits).nonzero().reshape(-1)}
        assert finite == {ranking[0], A.stop_index}

    def test_hard_cut_mask_is_topk_minus_extracted_plus_stop(self, setup, tiny_dims):
        for extracted in ([], [1], [1, 5]):
            ds, ext, A, state, m, ranking = self._logits_and_mmr(
                setup, tiny_dims, "hard_cut", extracted=extracted, k=3
            )
            logits, _, _, _ = step_logits(A, state, ext, m, ranking)
            finite = {int(j) for j in torch.isfinite(logits).nonzero().reshape(-1)}
            expected = hard_cut_allowed(ranking, 3, extracted) | {A.stop_index}
            assert finite == expected

    def test_soft_comb_beta_one_equals_vanilla(self, setup, tiny_dims):
        ds, ext, A, state, m, ranking = self._logits_and_mmr(
            setup, tiny_dims, "soft_comb", beta=1.0
        )
        p, _, _, _ = step_logits(A, state, ext, m, ranking)
        ext.variant = "vanilla"
        p_vanilla, _, _, _ = step_logits(A, state, ext)
        assert torch.equal(p, p_vanilla)

    def test_hard_comb_blends_ff(self, setup, tiny_dims):
        ds, ext, A, state, m, ranking = self._logits_and_mmr(
            setup, tiny_dims, "hard_comb", beta=0.25, k=4
        )
        logits, _, _, _ = step_logits(A, state, ext, m, ranking)
        ext.variant = "vanilla"
        p, _, _, _ = step_logits(A, state, ext)
        allowed = hard_cut_allowed(ranking, 4, [])
        for j in allowed:
            ff = ext.ff_scores(m[j].reshape(1))[0]
            expected = (0.25 * p[j] + 0.75 * ff).detach()
            assert logits.detach()[j].item() == pytest.approx(expected.item())
        assert logits.detach()[A.stop_index] == p.detach()[A.stop_index]

    def test_soft_attn_mu_sums_to_one(self, setup, tiny_dims):
        for extracted in ([], [2], [2, 7]):
            ds, ext, A, state, m, ranking = self._logits_and_mmr(
                setup, tiny_dims, "soft_attn", extracted=extracted
            )
            logits, alpha, g, mu = step_logits(A, state, ext, m, ranking)
            assert mu.detach().sum().item() == pytest.approx(1.0, abs=1e-6)
            for j in extracted:
                assert mu.detach()[j].item() == 0.0
            assert alpha.detach().sum().item() == pytest.approx(1.0, abs=1e-6)

    def test_soft_attn_mu_ranking_follows_ff(self, setup, tiny_dims):
        ds, ext, A, state, m, ranking = self._logits_and_mmr(setup, tiny_dims, "soft_attn")
        _, _, _, mu = step_logits(A, state, ext, m, ranking)
        with torch.no_grad():
            ff = ext.ff_scores(m)
        mu_order = np.argsort(-mu.detach().numpy(), kind="stable")
        ff_order = np.argsort(-ff.numpy(), kind="stable")
        assert list(mu_order) == list(ff_order)

    def test_soft_attn_stop_row_untouched(self, setup, tiny_dims):
        ds, ext, A, state, m, ranking = self._logits_and_mmr(setup, tiny_dims, "soft_attn")
        rows, mu = soft_attention_rows(A, m, [], ext)
        assert torch.equal(rows[A.stop_index], A.rows[A.stop_index])
        n = A.stop_index
        assert torch.allclose(rows[:n], A.rows[:n] * mu.unsqueeze(1))

    def test_guided_variant_requires_scores(self, setup, tiny_dims):
        sets, encoder, model = setup
        ext = fresh_extractor(tiny_dims, "hard_cut", k=2)
        A = encoder.encode_set(sets[0])
        with pytest.raises(ValueError):
            step_logits(A, initial_state(ext), ext)
        with pytest.raises(ValueError):
            run_episode(sets[0], A, ext, None, MmrConfig())

    def test_invalid_params_rejected(self, tiny_dims):
        with pytest.raises(ValueError):
            PointerExtractor(tiny_dims, "nope")
        with pytest.raises(ValueError):
            PointerExtractor(tiny_dims, "hard_cut", k=0)
        with pytest.raises(ValueError):
            PointerExtractor(tiny_dims, "soft_comb", beta=1.5)


class TestDecodeStep:
    def test_forced_stop_when_all_extracted(self, tiny_dims):
        sets = synth_corpus(seed=3, n_sets=1, docs_per_set=1, sents_per_doc=1,
                            planted_per_set=1, duplicate_rate=0.0)
        ds = sets[0]
        vocab = build_vocab(sets)
        encoder = init_encoder(2, tiny_dims, vocab)
        ext = fresh_extractor(tiny_dims)
        A = encoder.encode_set(ds)
        state = advance_state(A, initial_state(ext), 0, ext)
        action, _, _ = decode_step(A, state, ext, mode="greedy")
        assert action == A.stop_index

    def test_greedy_deterministic(self, setup, tiny_dims):
        sets, encoder, model = setup
        ext = fresh_extractor(tiny_dims, "soft_attn")
        ds = sets[1]
        A = encoder.encode_set(ds)
        a = extract_summary(ds, A, ext, model, MmrConfig(), mode="greedy")
        b = extract_summary(ds, A, ext, model, MmrConfig(), mode="greedy")
        assert a == b

    def test_sampling_reproducible_with_seed(self, setup, tiny_dims):
        sets, encoder, model = setup
        ext = fresh_extractor(tiny_dims, "soft_comb")
        ds = sets[1]
        A = encoder.encode_set(ds)
        outs = []
        for _ in range(2):
            rng = torch.Generator()
            rng.manual_seed(99)
            outs.append(extract_summary(ds, A, ext, model, MmrConfig(),
                                        mode="sample", rng=rng))
        assert outs[0] == outs[1]

    def test_sampling_never_picks_masked(self, setup, tiny_dims):
        sets, encoder, model = setup
        ext = fresh_extractor(tiny_dims, "hard_cut", k=2)
        ds = sets[2]
        A = encoder.encode_set(ds)
        rng = torch.Generator()
        rng.manual_seed(7)
        for _ in range(20):
            result = run_episode(ds, A, ext, model, MmrConfig(), mode="sample", rng=rng)
            assert len(result.extracted) == len(set(result.extracted))


class TestEpisodeEquivalences:
    def test_vanilla_equals_hard_cut_infinite_k(self, setup, tiny_dims):
        sets, encoder, model = setup
        for ds in sets:
            A = encoder.encode_set(ds)
            van = fresh_extractor(tiny_dims, "vanilla")
            hc = fresh_extractor(tiny_dims, "hard_cut", k=None)
            r_v = run_episode(ds, A, van, None, MmrConfig(), mode="greedy")
            r_h = run_episode(ds, A, hc, model, MmrConfig(), mode="greedy")
            assert r_v.extracted == r_h.extracted
            for sv, sh in zip(r_v.states, r_h.states):
                assert torch.equal(sv.logits, sh.logits)

    def test_hard_cut_k1_no_stop_equals_mmr(self, setup, tiny_dims):
        sets, encoder, model = setup
        cfg = MmrConfig()
        for ds in sets:
            A = encoder.encode_set(ds)
            hc1 = fresh_extractor(tiny_dims, "hard_cut", k=1)
            order = extract_summary(ds, A, hc1, model, cfg,
                                    mode="greedy", allow_stop=False)
            assert order == mmr_extract(ds, cfg, model)

    def test_hard_cut_k1_with_stop_is_mmr_prefix(self, setup, tiny_dims):
        sets, encoder, model = setup
        cfg = MmrConfig()
        for seed in (23, 57):
            for ds in sets:
                A = encoder.encode_set(ds)
                hc1 = fresh_extractor(tiny_dims, "hard_cut", seed=seed, k=1)
                order = extract_summary(ds, A, hc1, model, cfg, mode="greedy")
                reference = mmr_extract(ds, cfg, model)
                assert order == reference[: len(order)]

    def test_word_limit_never_exceeded_by_more_than_last_sentence(
        self, setup, tiny_dims
    ):
        sets, encoder, model = setup
        cfg = MmrConfig(word_limit=25)
        for ds in sets:
            A = encoder.encode_set(ds)
            ext = fresh_extractor(tiny_dims, "soft_attn")
            order = extract_summary(ds, A, ext, model, cfg, allow_stop=False)
            words = [ds.sentences[j].word_count for j in order]
            assert sum(words[:-1]) < 25


class TestEndToEndGradients:
    def _grad_check(self, setup, tiny_dims, variant, **kw):
        sets, encoder, model = setup
        ds = sets[0]
        ext = fresh_extractor(tiny_dims, variant, **kw)
        actions = [1, 3]
        params = (
            [p for _, p in sorted(encoder.named_parameters())]
            + [p for _, p in sorted(ext.named_parameters())]
        )

        def loss_fn():
            A = encoder.encode_set(ds)
            return episode_log_prob(ds, A, ext, actions, model, MmrConfig())

        encoder.zero_grad()
        ext.zero_grad()
        loss = loss_fn()
        loss.backward()
        analytic = [
            p.grad.clone() if p.grad is not None else torch.zeros_like(p)
            for p in params
        ]
        numeric = finite_difference_grads(loss_fn, params)
        assert max_relative_error(analytic, numeric) < 1e-4

    def test_two_step_log_prob_vanilla(self, setup, tiny_dims):
        self._grad_check(setup, tiny_dims, "vanilla")

    def test_two_step_log_prob_soft_attn(self, setup, tiny_dims):
        self._grad_check(setup, tiny_dims, "soft_attn")
