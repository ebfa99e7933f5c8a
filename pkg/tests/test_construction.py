from fractions import Fraction

import numpy as np
import pytest

from coopldpc.construction import (
    CodeSpec, ConstructionFailed, assemble, build_root_matrix, build_subcode, encode, length_quantum,
    load_code, node_degree_counts, relay_reencode, round_length, save_code,
)
from coopldpc.degree import DegreePoly, get_preset
from coopldpc.gf2 import dense_rank, syndrome


def four_cycles(H):
    a = H.to_csr().astype(np.int64)
    overlap = (a @ a.T).toarray()
    np.fill_diagonal(overlap, 0)
    return int((overlap > 1).sum() // 2)


def test_length_lattice():
    assert length_quantum(Fraction(2, 3)) == 6
    assert length_quantum(Fraction(9, 10)) == 40
    assert round_length(1250, Fraction(2, 3)) == 1248
    with pytest.raises(ValueError):
        round_length(4, Fraction(2, 3))


def test_node_degree_counts_sum():
    counts = node_degree_counts(get_preset("scenario1").lam1, 400)
    assert sum(counts.values()) == 400


@pytest.mark.parametrize("fixture", ["regular_code", "irregular_code"])
def test_structure(fixture, request):
    code = request.getfixturevalue(fixture)
    q, m = code.q, code.m
    assert code.N == 1200 and code.K == 2 * q and code.Rc == Fraction(1, 3) and code.beta == Fraction(1, 2)
    dense = code.H.to_dense()
    cc, bc = code.check_classes, code.bit_classes
    # root checks: identity on the root class, nothing else from the root's frame
    np.testing.assert_array_equal(dense[cc["3c"], bc["1i"]], np.eye(q, dtype=np.uint8))
    np.testing.assert_array_equal(dense[cc["4c"], bc["2i"]], np.eye(q, dtype=np.uint8))
    assert not dense[cc["3c"], bc["1p"]].any() and not dense[cc["3c"], bc["p1"]].any()
    assert not dense[cc["4c"], bc["2p"]].any() and not dense[cc["4c"], bc["p2"]].any()
    # subcode checks see only their own frame
    assert not dense[cc["1c"], code.frame2].any() and not dense[cc["2c"], code.frame1].any()
    # square blocks are invertible
    assert dense_rank(dense[cc["1c"], bc["p1"]]) == m
    assert dense_rank(dense[cc["2c"], bc["p2"]]) == m
    assert dense_rank(dense[cc["3c"], bc["2p"]]) == q
    assert dense_rank(dense[cc["4c"], bc["1p"]]) == q
    assert dense.max() == 1


def test_regular_degrees(regular_code):
    dense = regular_code.H.to_dense()
    bc = regular_code.bit_classes
    sub = dense[regular_code.check_classes["1c"]]
    assert (sub.sum(1) == 9).all()
    for cls in ("1i", "1p", "p1"):
        assert (sub[:, bc[cls]].sum(0) == 3).all()
    root = dense[regular_code.check_classes["4c"]]
    assert (root.sum(1) == 6).all()
    assert (root[:, bc["1i"]].sum(0) == 2).all()  # 3 root-part edges, one of them is the root edge in 3c
    assert (root[:, bc["1p"]].sum(0) == 3).all()


def test_irregular_degree_profile(irregular_code):
    lam1 = get_preset("scenario1").lam1
    sub = irregular_code.H_1s.to_dense()
    degs = sub.sum(0)
    expected = node_degree_counts(lam1, irregular_code.q)
    got = np.bincount(degs[: irregular_code.q], minlength=max(expected) + 1)
    for d, n in expected.items():
        assert got[d] == n


def test_four_cycle_removal_reduces_cycles():
    ens = get_preset("regular3936")
    plain = assemble(CodeSpec(ens, 1200, seed=3))
    clean = assemble(CodeSpec(ens, 1200, seed=3, remove_4cycles=True))
    assert four_cycles(clean.H) < four_cycles(plain.H) / 5


@pytest.mark.parametrize("fixture", ["regular_code", "irregular_code"])
def test_encode_and_relay(fixture, request, rng):
    code = request.getfixturevalue(fixture)
    info = rng.integers(0, 2, (50, code.K))
    cw = encode(code, info)
    assert not syndrome(code.H, cw.T).any()
    np.testing.assert_array_equal(cw[:, code.info_positions], info)
    relay = relay_reencode(code, cw[:, : 2 * code.q])
    np.testing.assert_array_equal(relay, cw[:, code.frame2])
    np.testing.assert_array_equal(encode(code, info[0]), cw[0])


def test_encode_is_linear(regular_code, rng):
    a, b = rng.integers(0, 2, (2, regular_code.K))
    np.testing.assert_array_equal(encode(regular_code, a ^ b), encode(regular_code, a) ^ encode(regular_code, b))


def test_seed_reproducible():
    ens = get_preset("scenario1")
    a = assemble(CodeSpec(ens, 600, seed=5))
    b = assemble(CodeSpec(ens, 600, seed=5))
    c = assemble(CodeSpec(ens, 600, seed=6))
    assert a.manifest_hash() == b.manifest_hash() != c.manifest_hash()


def test_save_load_roundtrip(tmp_path, irregular_code):
    save_code(irregular_code, tmp_path / "code")
    back = load_code(tmp_path / "code")
    assert back.manifest_hash() == irregular_code.manifest_hash()
    assert back.H == irregular_code.H
    # move one edge of the last check to another column in both lists
    path = tmp_path / "code" / "H_2.alist"
    lines = path.read_text().splitlines()
    last = [int(v) for v in lines[-1].split()]
    new = next(c for c in range(1, irregular_code.H_2.n_cols + 1) if c not in last)
    last[0] = new
    lines[-1] = " ".join(map(str, last))
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        load_code(tmp_path / "code")


def test_standalone_builders():
    ens = get_preset("regular3936")
    H = build_subcode(ens.lam1, ens.rho1, 900, seed=1)
    assert H.shape == (300, 900) and (H.row_weights() == 9).all()
    H2 = build_root_matrix(ens.lam2, ens.rho2, 400, seed=1)
    assert H2.shape == (400, 800) and (H2.row_weights() == 6).all()


def test_failure_names_block():
    # three degree-3 columns cannot fit a single check row without repeated edges
    with pytest.raises(ConstructionFailed) as info:
        build_subcode(DegreePoly.regular(3), DegreePoly.regular(9), 3, seed=0, rate=Fraction(2, 3), max_retries=3)
    assert info.value.block == "H_1s"
    with pytest.raises(ConstructionFailed) as info:
        assemble(CodeSpec(get_preset("regular3936"), 6, seed=0, max_retries=3))
    assert info.value.block


def test_spec_validation():
    with pytest.raises(ValueError):
        assemble(CodeSpec(get_preset("regular3936"), 1201))
    with pytest.raises(ValueError):
        CodeSpec(get_preset("regular3936"), 1200, subcode_rate=Fraction(1, 2)).validate()


def test_regular_code_roundtrip(tmp_path, regular_code):
    save_code(regular_code, tmp_path)
    assert load_code(tmp_path).manifest_hash() == regular_code.manifest_hash()
