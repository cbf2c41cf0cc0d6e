import numpy as np
import pytest

import novocap.autodiff as ad
from novocap.errors import EmbeddingFormatError, MissingEmbeddingError
from novocap.vocab import BOS, EOS, UNK, UNK_ID, EmbeddingTable, Vocabulary


@pytest.fixture
def vocab():
    return Vocabulary(["cat", "dog"])


@pytest.fixture
def table_file(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 0.1 0.2\ndog 0.3 0.4\n", encoding="utf-8")
    return path


def test_reserved_tokens_pinned(vocab):
    assert vocab.tokens[:3] == [BOS, EOS, UNK]
    assert vocab.id("cat") == 3 and vocab.id("dog") == 4


def test_round_trip_all_tokens(vocab):
    for tok in vocab.tokens:
        assert vocab.token(vocab.id(tok)) == tok


def test_duplicate_token_rejected():
    with pytest.raises(ValueError):
        Vocabulary(["cat", "cat"])


def test_unknown_token_and_bad_id(vocab):
    with pytest.raises(KeyError):
        vocab.id("zebra")
    with pytest.raises(IndexError):
        vocab.token(len(vocab))
    assert vocab.encode(["cat", "zebra"]) == [3, UNK_ID]


def test_load_assigns_rows_by_id(table_file, vocab):
    table = EmbeddingTable.load(table_file, vocab)
    assert table.matrix.shape == (5, 2)
    assert table.matrix.data[3].tolist() == [0.1, 0.2]
    assert table.matrix.data[4].tolist() == [0.3, 0.4]


def test_load_order_independent(tmp_path, vocab, table_file):
    flipped = tmp_path / "flipped.txt"
    flipped.write_text("dog 0.3 0.4\ncat 0.1 0.2\n", encoding="utf-8")
    a = EmbeddingTable.load(table_file, vocab, seed=3)
    b = EmbeddingTable.load(flipped, vocab, seed=3)
    assert np.array_equal(a.matrix.data, b.matrix.data)


def test_load_missing_token_named(table_file):
    vocab = Vocabulary(["cat", "dog", "zebra"])
    with pytest.raises(MissingEmbeddingError) as exc:
        EmbeddingTable.load(table_file, vocab)
    assert "zebra" in str(exc.value)


def test_load_inconsistent_width_reports_line(tmp_path, vocab):
    path = tmp_path / "bad.txt"
    path.write_text("cat 0.1 0.2\ndog 0.3\n", encoding="utf-8")
    with pytest.raises(EmbeddingFormatError) as exc:
        EmbeddingTable.load(path, vocab)
    assert ":2:" in str(exc.value)


def test_load_duplicate_line_rejected(tmp_path, vocab):
    path = tmp_path / "dup.txt"
    path.write_text("cat 0.1 0.2\ncat 0.5 0.6\ndog 0.3 0.4\n", encoding="utf-8")
    with pytest.raises(EmbeddingFormatError):
        EmbeddingTable.load(path, vocab)


def test_reserved_rows_seeded(tmp_path, table_file, vocab):
    a = EmbeddingTable.load(table_file, vocab, seed=11)
    b = EmbeddingTable.load(table_file, vocab, seed=11)
    c = EmbeddingTable.load(table_file, vocab, seed=12)
    assert np.array_equal(a.matrix.data[:3], b.matrix.data[:3])
    assert not np.array_equal(a.matrix.data[:3], c.matrix.data[:3])
    assert (np.abs(a.matrix.data[:3]) <= 0.1).all()


def test_empty_content_vocab(tmp_path):
    path = tmp_path / "only.txt"
    path.write_text("stray 1.0 2.0 3.0\n", encoding="utf-8")
    table = EmbeddingTable.load(path, Vocabulary([]))
    assert table.matrix.shape == (3, 3)
    assert np.isfinite(table.matrix.data).all()


def test_embed_returns_row(table_file, vocab):
    table = EmbeddingTable.load(table_file, vocab)
    assert table.embed(3).data.tolist() == [0.1, 0.2]
    assert table.embed(3).data.tolist() == table.embed(3).data.tolist()
    with pytest.raises(IndexError):
        table.embed(len(vocab))


def test_project_dot_products(table_file, vocab):
    table = EmbeddingTable.load(table_file, vocab)
    logits = table.project(ad.Tensor([1.0, 1.0])).data
    assert logits[3] == pytest.approx(0.3)
    assert logits[4] == pytest.approx(0.7)
    with pytest.raises(Exception):
        table.project(ad.Tensor([1.0, 1.0, 1.0]))


def test_project_zero_vector_uniform(table_file, vocab):
    table = EmbeddingTable.load(table_file, vocab)
    probs = ad.softmax(table.project(ad.Tensor([0.0, 0.0]))).data
    assert np.allclose(probs, 1.0 / len(vocab))


def test_project_argmax_on_orthonormal_rows():
    vocab = Vocabulary(["a", "b", "c"])
    table = EmbeddingTable(vocab, np.eye(6)[: len(vocab)], frozen=True)
    for idx in range(len(vocab)):
        logits = table.project(table.embed(idx)).data
        assert int(np.argmax(logits)) == idx


def test_tied_storage_shared_after_update():
    vocab = Vocabulary(["a", "b"])
    table = EmbeddingTable(vocab, np.random.default_rng(0).normal(size=(5, 4)),
                           frozen=False)
    h = ad.Tensor(np.ones(4))
    loss = -ad.log(ad.pick(ad.softmax(table.project(h)), 3)) \
        + ad.tsum(table.embed(3) * table.embed(3))
    loss.backward()
    table.matrix.data -= 0.1 * table.matrix.grad
    out_row = table.project(ad.Tensor(np.ones(4)))  # reads same storage
    assert np.array_equal(table.embed(3).data, table.matrix.data[3])
    assert out_row.data[3] == pytest.approx(table.matrix.data[3].sum())


def test_nearest_neighbors_duplicate_orthogonal_and_brute_force():
    vocab = Vocabulary(["w0", "w1", "w2", "w3"])
    mat = np.zeros((7, 3))
    mat[3] = [1.0, 0.0, 0.0]
    mat[4] = [1.0, 0.0, 0.0]      # duplicate of w0
    mat[5] = [0.0, 1.0, 0.0]      # orthogonal
    mat[6] = [0.6, 0.8, 0.0]
    table = EmbeddingTable(vocab, mat)

    ranked = table.nearest_neighbors("w0", 3)
    assert ranked[0] == ("w1", pytest.approx(1.0))

    # orthogonal gives similarity 0; ties (zero-vector reserved rows) break by id
    ranked = table.nearest_neighbors("w2", 6)
    sims = dict(ranked)
    assert sims["w0"] == pytest.approx(0.0)
    zeros = [tok for tok, s in ranked if s == 0.0]
    ids = [vocab.id(t) for t in zeros]
    assert ids == sorted(ids)

    # brute-force cosine oracle over the whole vocabulary
    def cosine(u, v):
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        return float(u @ v / (nu * nv)) if nu and nv else 0.0

    query = vocab.id("w3")
    expect = sorted((i for i in range(len(vocab)) if i != query),
                    key=lambda i: (-cosine(mat[query], mat[i]), i))
    got = [vocab.id(tok) for tok, _ in table.nearest_neighbors("w3", 3)]
    assert got == expect[:3]


def test_nearest_neighbors_errors():
    vocab = Vocabulary(["a", "b"])
    table = EmbeddingTable(vocab, np.eye(5))
    with pytest.raises(KeyError):
        table.nearest_neighbors("missing", 2)
    with pytest.raises(ValueError):
        table.nearest_neighbors("a", 5)
