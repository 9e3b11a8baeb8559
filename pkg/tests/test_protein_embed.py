import numpy as np
import pytest

from linker.errors import AlphabetError, FormatError, SequenceMismatch
from linker.protein_embed import (
    ALPHABET,
    FallbackEmbedder,
    ProteinSequence,
    load_embeddings,
    load_protein,
    read_fasta,
    sequence_hash,
    write_embeddings,
)
from linker.tensorcore import backward, sum_


def test_sequence_alphabet_checked():
    ProteinSequence("ok", "ACDEFGHIKLMNPQRSTVWYX")
    with pytest.raises(AlphabetError):
        ProteinSequence("bad", "ACDB")
    with pytest.raises(AlphabetError):
        ProteinSequence("empty", "")


def test_fasta_single(tmp_path):
    p = tmp_path / "a.fasta"
    p.write_text(">prot1 some description\nMKLV\nGGH\n")
    recs = read_fasta(p)
    assert len(recs) == 1
    assert recs[0].id == "prot1"
    assert recs[0].residues == "MKLVGGH"


def test_fasta_multichain_concatenates_with_x(tmp_path):
    p = tmp_path / "ab.fasta"
    p.write_text(">chainA\nMKL\n>chainB\nVGH\n")
    seq = load_protein(p)
    assert seq.residues == "MKLXVGH"
    assert seq.id == "chainA"


def test_fasta_garbage_rejected(tmp_path):
    p = tmp_path / "bad.fasta"
    p.write_text("MKLV\n")
    with pytest.raises(FormatError):
        read_fasta(p)
    empty = tmp_path / "empty.fasta"
    empty.write_text("")
    with pytest.raises(FormatError):
        read_fasta(empty)


class TestLnkeFormat:
    def test_round_trip_bit_identical(self, tmp_path):
        seq = ProteinSequence("p", "MKLV")
        m = np.random.default_rng(0).normal(size=(4, 960)).astype(np.float32)
        path = tmp_path / "p.lnke"
        write_embeddings(path, seq, m)
        got = load_embeddings(path, seq)
        assert got.source == "file"
        assert got.matrix.shape == (4, 960)
        assert np.array_equal(got.matrix, m.astype(np.float64))

    def test_sequence_hash_mismatch(self, tmp_path):
        seq = ProteinSequence("p", "MKLV")
        path = tmp_path / "p.lnke"
        write_embeddings(path, seq, np.zeros((4, 8), dtype=np.float32))
        with pytest.raises(SequenceMismatch):
            load_embeddings(path, ProteinSequence("q", "MKLA"))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.lnke"
        path.write_bytes(b"NOPE" + b"\x00" * 60)
        with pytest.raises(FormatError):
            load_embeddings(path, ProteinSequence("p", "MKLV"))

    def test_truncated_payload(self, tmp_path):
        seq = ProteinSequence("p", "MKLV")
        path = tmp_path / "p.lnke"
        write_embeddings(path, seq, np.zeros((4, 8), dtype=np.float32))
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(FormatError):
            load_embeddings(path, seq)

    def test_row_count_must_match_sequence(self, tmp_path):
        seq = ProteinSequence("p", "MKLV")
        with pytest.raises(SequenceMismatch):
            write_embeddings(tmp_path / "x.lnke", seq, np.zeros((3, 8)))

    def test_hash_is_of_residue_text(self):
        import hashlib
        assert sequence_hash("MKLV") == hashlib.sha256(b"MKLV").digest()


class TestFallbackEmbedder:
    def test_shapes(self):
        emb = FallbackEmbedder(d=16, seed=1)
        out = emb.embed(ProteinSequence("p", "M"))
        assert out.shape == (1, 16)
        out = emb.embed(ProteinSequence("p", "MKLVH"))
        assert out.shape == (5, 16)

    def test_homopolymer_rows_identical(self):
        emb = FallbackEmbedder(d=8, seed=2)
        out = emb.embed(ProteinSequence("p", "AAAA")).data
        assert np.allclose(out[2], out[3])
        assert np.allclose(out[0], out[1])

    def test_context_dependence(self):
        # same residue, different neighbours -> different rows
        emb = FallbackEmbedder(d=8, seed=3)
        out = emb.embed(ProteinSequence("p", "KAK")).data
        out2 = emb.embed(ProteinSequence("p", "VAV")).data
        assert not np.allclose(out[1], out2[1])

    def test_gradient_only_for_present_residues(self):
        emb = FallbackEmbedder(d=4, seed=4)
        loss = sum_(emb.embed(ProteinSequence("p", "MK")))
        backward(loss)
        g = emb.table.grad
        present = {ALPHABET.index("M"), ALPHABET.index("K")}
        for row in range(len(ALPHABET)):
            if row in present:
                assert np.abs(g[row]).sum() > 0
            else:
                assert np.abs(g[row]).sum() == 0

    def test_invalid_residue_blocked(self):
        with pytest.raises(AlphabetError):
            ProteinSequence("p", "MZ")
