import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lessnoisy.channels import (
    BroadcastChannel,
    ChannelMatrix,
    binary_entropy,
    bsc,
    compose,
    compose_all,
    constant_channel,
    entropy,
    identity,
    mutual_information,
    output_distribution,
    prob_vector,
    product_channel,
    projection_channel,
    validate_channel,
)
from lessnoisy.errors import AlphabetOverflow, DimensionMismatch, NegativeEntry, RowSumNotOne, ValidationError

from conftest import C1, channels, prob_vectors


def test_validate_identity_and_bsc():
    assert validate_channel([[1, 0], [0, 1]]) == identity(2)
    assert validate_channel([[0.9, 0.1], [0.1, 0.9]]) == bsc(0.1)


def test_row_sum_error_names_row():
    with pytest.raises(RowSumNotOne) as exc:
        validate_channel([[0.9, 0.2], [0.1, 0.9]])
    assert exc.value.row == 0
    assert exc.value.total == pytest.approx(1.1)
    assert "row 0" in str(exc.value)


@pytest.mark.parametrize("rows", [[[1.2, -0.2], [0, 1]], [[0.5, np.nan], [0, 1]], [[]], [1, 0], [[1, 0], [1]]])
def test_validate_rejects_bad_matrices(rows):
    with pytest.raises(ValidationError):
        validate_channel(rows)


def test_negative_entry_is_reported():
    with pytest.raises(NegativeEntry, match="row 0, column 1"):
        validate_channel([[1.2, -0.2], [0, 1]])


def test_rows_are_read_only():
    w = bsc(0.1)
    with pytest.raises(ValueError):
        w.rows[0, 0] = 0.5


def test_prob_vector_rejects_bad_sums():
    with pytest.raises(ValidationError):
        prob_vector([0.5, 0.6])
    with pytest.raises(ValidationError):
        prob_vector([1.5, -0.5])


def test_broadcast_channel_checks():
    with pytest.raises(ValidationError):
        BroadcastChannel((bsc(0.1),))
    with pytest.raises(DimensionMismatch):
        BroadcastChannel((bsc(0.1), identity(3)))
    bc = BroadcastChannel((bsc(0.1), bsc(0.2)))
    assert bc.k == len(bc) == 2 and bc.input_size == 2 and bc[1] == bsc(0.2)


def test_output_distribution_examples():
    np.testing.assert_allclose(output_distribution([0.5, 0.5], identity(2)), [0.5, 0.5])
    np.testing.assert_allclose(output_distribution([1, 0], bsc(0.1)), [0.9, 0.1])
    np.testing.assert_allclose(output_distribution([0.5, 0.5], bsc(0.1)), [0.5, 0.5])
    with pytest.raises(DimensionMismatch):
        output_distribution([1 / 3] * 3, bsc(0.1))


def test_mutual_information_examples():
    assert mutual_information([0.5, 0.5], identity(2)) == pytest.approx(1.0, abs=1e-12)
    assert mutual_information([0.5, 0.5], bsc(0.5)) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information([0.5, 0.5], bsc(0.1)) == pytest.approx(0.5310044064107188, abs=1e-12)
    assert C1 == pytest.approx(0.53100, abs=5e-6)


def test_entropy_conventions():
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.25] * 4) == pytest.approx(2.0)
    assert binary_entropy(0.5) == pytest.approx(1.0)
    # 0.1 log 0.1 + 0.9 log 0.9 by hand
    assert binary_entropy(0.1) == pytest.approx(-(0.1 * np.log2(0.1) + 0.9 * np.log2(0.9)), abs=1e-15)


def test_compose_examples():
    w = bsc(0.3)
    assert compose(w, identity(2)) == w
    np.testing.assert_allclose(compose(bsc(0.1), bsc(1 / 8)).rows, bsc(0.2).rows, atol=1e-15)
    np.testing.assert_allclose(compose(bsc(0.2), bsc(1 / 6)).rows, bsc(0.3).rows, atol=1e-15)
    with pytest.raises(DimensionMismatch):
        compose(bsc(0.1), identity(3))


def test_product_channel_examples():
    w = bsc(0.25)
    assert product_channel([w]) == w
    pair = product_channel([identity(2), identity(2)])
    np.testing.assert_array_equal(pair.rows, [[1, 0, 0, 0], [0, 0, 0, 1]])
    np.testing.assert_allclose(product_channel([bsc(0.1), bsc(0.2)]).rows[0], [0.72, 0.18, 0.08, 0.02])


def test_product_channel_cap():
    with pytest.raises(AlphabetOverflow):
        product_channel([identity(4)] * 3, max_alphabet=63)


def test_projection_channel_marginalises():
    prod = product_channel([bsc(0.1), bsc(0.2), bsc(0.3)])
    keep_last = compose(prod, projection_channel([2, 2, 2], [2]))
    np.testing.assert_allclose(keep_last.rows, bsc(0.3).rows, atol=1e-15)


def test_constant_channel():
    c = constant_channel(3, [0.2, 0.8])
    assert c.shape == (3, 2)
    assert mutual_information([1 / 3] * 3, c) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_output_distribution_sums_to_one(data):
    w = data.draw(channels())
    p = data.draw(prob_vectors(w.input_size))
    assert abs(output_distribution(p, w).sum() - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_mutual_information_bounds(data):
    w = data.draw(channels())
    p = data.draw(prob_vectors(w.input_size))
    i = mutual_information(p, w)
    assert i >= 0
    assert i <= min(entropy(p), np.log2(w.output_size)) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_data_processing(data):
    w1 = data.draw(channels())
    w2 = data.draw(channels(nx=w1.output_size))
    p = data.draw(prob_vectors(w1.input_size))
    assert mutual_information(p, compose(w1, w2)) <= mutual_information(p, w1) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_compose_associative(data):
    a = data.draw(channels())
    b = data.draw(channels(nx=a.output_size))
    c = data.draw(channels(nx=b.output_size))
    np.testing.assert_allclose(compose(compose(a, b), c).rows, compose(a, compose(b, c)).rows, atol=1e-12)
    np.testing.assert_allclose(compose_all([a, b, c]).rows, compose(a, compose(b, c)).rows, atol=1e-12)


def test_channel_equality_and_hash():
    assert ChannelMatrix([[1.0, 0.0]]) == ChannelMatrix(np.array([[1.0, 0.0]]))
    assert len({bsc(0.1), bsc(0.1), bsc(0.2)}) == 2


def test_near_stochastic_input_is_renormalised():
    w = validate_channel([[0.5, 0.5 + 5e-10], [0.2, 0.8 - 5e-10]])
    assert np.all(np.abs(w.rows.sum(axis=1) - 1) <= 1e-12)
    assert abs(prob_vector([0.3, 0.7 + 5e-10]).sum() - 1) <= 1e-12
