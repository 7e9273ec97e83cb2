import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from fianet.encoders import TextEncoder, VisualEncoder, Vocabulary
from fianet.errors import EmptyText, ShapeError


def test_pyramid_shapes_480():
    enc = VisualEncoder()
    pyramid = enc.encode_image(torch.zeros(1, 3, 480, 480))
    assert [s.shape[-1] for s in pyramid.stages] == [120, 60, 30, 15]
    assert pyramid.channels == (32, 64, 128, 256)


def test_pyramid_shapes_smallest():
    pyramid = VisualEncoder().encode_image(torch.zeros(1, 3, 32, 32))
    assert [s.shape[-1] for s in pyramid.stages] == [8, 4, 2, 1]


def test_pyramid_shapes_rectangular():
    pyramid = VisualEncoder().encode_image(torch.zeros(1, 3, 480, 320))
    assert [tuple(s.shape[-2:]) for s in pyramid.stages] == [
        (120, 80), (60, 40), (30, 20), (15, 10)
    ]


def test_indivisible_input_rejected():
    with pytest.raises(ShapeError):
        VisualEncoder().encode_image(torch.zeros(1, 3, 100, 96))


def test_pyramid_values_finite():
    pyramid = VisualEncoder().encode_image(torch.rand(2, 3, 96, 96))
    assert all(torch.isfinite(s).all() for s in pyramid.stages)


@settings(max_examples=10, deadline=None)
@given(h=st.integers(1, 4), w=st.integers(1, 4))
def test_pyramid_shape_law_property(h, w):
    H, W = 32 * h, 32 * w
    # 6-channel stages use a single norm group, so the degenerate 1x1
    # stage-4 grid at 32x32 input stays valid.
    pyramid = VisualEncoder(channels=(6, 6, 6, 6)).eval().encode_image(
        torch.zeros(1, 3, H, W)
    )
    for i, stage in enumerate(pyramid.stages, start=1):
        assert stage.shape[-2:] == (H // 2 ** (i + 1), W // 2 ** (i + 1))


def _vocab():
    return Vocabulary.from_texts(["the gray van", "road marking near a tree"])


def test_tokenize_known_and_oov():
    vocab = _vocab()
    assert vocab.tokenize("van") == [vocab._ids["van"]]
    assert vocab.tokenize("") == [vocab.unk_id]
    assert len(vocab.tokenize("the gray van")) == 3
    assert vocab.tokenize("zeppelin") == [vocab.unk_id]


def test_vocab_file_round_trip(tmp_path):
    vocab = _vocab()
    vocab.to_file(tmp_path / "vocab.txt")
    again = Vocabulary.from_file(tmp_path / "vocab.txt")
    assert again.tokens == vocab.tokens


def test_text_mask_layout():
    enc = TextEncoder(vocab_size=10, dim=8, max_len=8)
    feats = enc.encode_text([[3, 4, 5, 6, 7]], pad_to=8)
    assert feats.mask.tolist() == [[True] * 5 + [False] * 3]
    assert feats.embeddings.shape == (1, 8, 8)


def test_text_single_token():
    enc = TextEncoder(vocab_size=10, dim=8, max_len=8)
    feats = enc.encode_text([[3]], pad_to=1)
    assert feats.embeddings.shape == (1, 1, 8)
    assert feats.mask.tolist() == [[True]]


def test_text_determinism():
    enc = TextEncoder(vocab_size=10, dim=8, max_len=8)
    a = enc.encode_text([[1, 2, 3]]).embeddings
    b = enc.encode_text([[1, 2, 3]]).embeddings
    assert torch.equal(a, b)


def test_text_padding_does_not_leak():
    # Real-token embeddings are identical however far the batch is padded.
    enc = TextEncoder(vocab_size=10, dim=8, max_len=8)
    short = enc.encode_text([[1, 2, 3]], pad_to=3)
    long = enc.encode_text([[1, 2, 3]], pad_to=8)
    assert torch.allclose(short.embeddings, long.embeddings[:, :3], atol=1e-6)
    assert torch.all(long.embeddings[:, 3:] == 0)


def test_empty_text_rejected():
    enc = TextEncoder(vocab_size=10, dim=8, max_len=8)
    with pytest.raises(EmptyText):
        enc.encode_text([[]])
    with pytest.raises(EmptyText):
        enc.encode_text([])
