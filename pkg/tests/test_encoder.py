import torch
import pytest

from mmrsum.corpus import build_document_set
from mmrsum.encoder import (
    INIT_RANGE,
    Dims,
    build_vocab,
    init_encoder,
)
from mmrsum.synth import synth_corpus

from oracles import finite_difference_grads, max_relative_error


def toy_set():
    return build_document_set(
        "toy",
        [
            ("d1", ["the cat sat on the mat.", "a dog ran far away today."]),
            ("d2", ["the mat was warm and red."]),
        ],
        ["the cat sat on the warm mat."],
    )


class TestVocab:
    def test_ordering_freq_then_token(self):
        ds = build_document_set("v", [("d", ["a a b."])], ["r."])
        vocab = build_vocab([ds], min_count=1)
        assert vocab.token_to_id == {"a": 2, "b": 3}
        assert vocab.size == 4

    def test_min_count_threshold(self):
        ds = build_document_set("v", [("d", ["a a b."])], ["r."])
        vocab = build_vocab([ds], min_count=2)
        assert vocab.lookup("a") == 2
        assert vocab.lookup("b") == 1  # unk

    def test_deterministic(self, small_sets):
        assert build_vocab(small_sets) == build_vocab(small_sets)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            build_vocab([])


class TestInit:
    def test_same_seed_identical(self, tiny_dims, small_sets):
        vocab = build_vocab(small_sets)
        a = init_encoder(5, tiny_dims, vocab)
        b = init_encoder(5, tiny_dims, vocab)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_different_seeds_differ(self, tiny_dims, small_sets):
        vocab = build_vocab(small_sets)
        a = init_encoder(5, tiny_dims, vocab)
        b = init_encoder(6, tiny_dims, vocab)
        assert any(
            not torch.equal(pa, pb) for pa, pb in zip(a.parameters(), b.parameters())
        )

    def test_entries_within_range(self, tiny_dims, small_sets):
        vocab = build_vocab(small_sets)
        enc = init_encoder(5, tiny_dims, vocab)
        for p in enc.parameters():
            assert p.abs().max() <= INIT_RANGE

    def test_dims_validation(self):
        with pytest.raises(ValueError):
            Dims(emb_dim=0)


class TestEncodeSentence:
    def test_output_dim(self, tiny_dims):
        ds = toy_set()
        enc = init_encoder(1, tiny_dims, build_vocab([ds]))
        for tokens in (("the", "cat"), ("a",), tuple(f"w{i}" for i in range(9))):
            vec = enc.encode_sentence(tokens)
            assert vec.shape == (tiny_dims.sent_dim,)
            assert torch.isfinite(vec).all()

    def test_deterministic(self, tiny_dims):
        ds = toy_set()
        enc = init_encoder(1, tiny_dims, build_vocab([ds]))
        a = enc.encode_sentence(("the", "cat", "sat"))
        b = enc.encode_sentence(("the", "cat", "sat"))
        assert torch.equal(a, b)

    def test_single_token_padding_path(self, tiny_dims):
        ds = toy_set()
        enc = init_encoder(1, tiny_dims, build_vocab([ds]))
        vec = enc.encode_sentence(("cat",))
        assert torch.isfinite(vec).all()

    def test_batching_does_not_change_vectors(self, tiny_dims):
        # same sentence, alone vs batched next to a longer one
        ds = toy_set()
        enc = init_encoder(1, tiny_dims, build_vocab([ds]))
        alone = enc.encode_sentences([("the", "cat")])
        batched = enc.encode_sentences(
            [("the", "cat"), tuple(f"w{i}" for i in range(12))]
        )
        assert torch.equal(alone[0], batched[0])

    def test_empty_rejected(self, tiny_dims):
        ds = toy_set()
        enc = init_encoder(1, tiny_dims, build_vocab([ds]))
        with pytest.raises(ValueError):
            enc.encode_sentence(())


class TestEncodeSet:
    def test_shape(self, tiny_dims, small_sets):
        enc = init_encoder(2, tiny_dims, build_vocab(small_sets))
        ds = small_sets[0]
        A = enc.encode_set(ds)
        assert A.rows.shape == (len(ds.sentences) + 1, tiny_dims.ctx_dim)
        assert A.stop_index == len(ds.sentences)
        assert torch.isfinite(A.rows).all()

    def test_determinism(self, tiny_dims, small_sets):
        enc = init_encoder(2, tiny_dims, build_vocab(small_sets))
        a = enc.encode_set(small_sets[0])
        b = enc.encode_set(small_sets[0])
        assert torch.equal(a.rows, b.rows)

    def test_per_document_independence(self, tiny_dims):
        base = toy_set()
        changed = build_document_set(
            "toy2",
            [
                ("d1", ["the cat sat on the mat.", "a dog ran far away today."]),
                ("d2", ["something else entirely new here."]),
            ],
            ["ref."],
        )
        enc = init_encoder(3, tiny_dims, build_vocab([base, changed]))
        rows_base = enc.encode_set(base).rows
        rows_changed = enc.encode_set(changed).rows
        # d1 has sentences 0, 1; d2 starts at 2
        assert torch.equal(rows_base[0], rows_changed[0])
        assert torch.equal(rows_base[1], rows_changed[1])
        assert not torch.equal(rows_base[2], rows_changed[2])

    def test_document_permutation_permutes_row_blocks(self, tiny_dims):
        d1 = ("d1", ["the cat sat on the mat.", "a dog ran far away today."])
        d2 = ("d2", ["the mat was warm and red."])
        fwd = build_document_set("a", [d1, d2], ["r."])
        rev = build_document_set("b", [d2, d1], ["r."])
        enc = init_encoder(3, tiny_dims, build_vocab([fwd]))
        A_fwd = enc.encode_set(fwd).rows
        A_rev = enc.encode_set(rev).rows
        assert torch.equal(A_fwd[0:2], A_rev[1:3])
        assert torch.equal(A_fwd[2], A_rev[0])
        assert torch.equal(A_fwd[3], A_rev[3])  # STOP row unchanged


class TestGradients:
    def test_encoder_probe_matches_finite_differences(self, tiny_dims):
        ds = toy_set()
        enc = init_encoder(4, tiny_dims, build_vocab([ds]))
        params = [p for _, p in sorted(enc.named_parameters())]

        def loss_fn():
            return enc.encode_set(ds).rows.sum()

        loss = loss_fn()
        loss.backward()
        analytic = [p.grad.clone() for p in params]
        numeric = finite_difference_grads(loss_fn, params)
        assert max_relative_error(analytic, numeric) < 1e-4
