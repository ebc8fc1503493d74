import itertools
import math

import numpy as np
import pytest

from ghz_forge import states
from ghz_forge.states import (
    EmptyTypicalSetError,
    LocalUnitary,
    PureState,
    StateFileError,
    StateValidationError,
    apply_local_unitary,
    asymmetric_w,
    distribution_of,
    dump_state,
    family,
    ghz,
    ghz_p,
    hadamard,
    parse_state_text,
    permutation_superposition,
    rohrlich,
    support_of,
    tensor_power,
    truncate_to_typical,
    w,
)


def test_distribution_of_ghz():
    d = distribution_of(ghz(2))
    assert d.probs == pytest.approx({(0, 0, 0): 0.5, (1, 1, 1): 0.5})


def test_distribution_of_w3_uniform():
    d = distribution_of(w(3))
    assert set(d.probs) == {(1, 0, 0), (0, 1, 0), (0, 0, 1)}
    for p in d.probs.values():
        assert p == pytest.approx(1.0 / 3.0)


def test_distribution_of_asymmetric_w():
    d = distribution_of(asymmetric_w(0.2))
    assert d.probs[(1, 0, 0)] == pytest.approx(0.2)
    assert d.probs[(0, 1, 0)] == pytest.approx(0.2)
    assert d.probs[(0, 0, 1)] == pytest.approx(0.6)


def test_unnormalized_state_rejected():
    with pytest.raises(StateValidationError):
        PureState(2, (2, 2), {(0, 0): 0.5, (1, 1): 0.5})


def test_support_of_w3_and_ghz_r():
    assert support_of(w(3)).elements == {(1, 0, 0), (0, 1, 0), (0, 0, 1)}
    assert support_of(ghz(4)).elements == {(i, i, i) for i in range(4)}


def test_support_singleton():
    st = PureState(3, (3, 3, 3), {(2, 1, 0): 1.0})
    assert support_of(st).elements == {(2, 1, 0)}


def test_identity_unitary_is_noop():
    st = rohrlich(0.3)
    out = apply_local_unitary(st, LocalUnitary(1, np.eye(2)))
    assert out.amps == pytest.approx(st.amps)


def test_hadamard_on_rohrlich_half_gives_ghz_distribution():
    out = apply_local_unitary(rohrlich(0.5), hadamard(0))
    d = distribution_of(out)
    assert len(d.probs) == 2
    assert sorted(d.probs.values()) == pytest.approx([0.5, 0.5])


def test_hadamard_is_involution():
    st = asymmetric_w(0.17)
    twice = apply_local_unitary(apply_local_unitary(st, hadamard(0)), hadamard(0))
    assert set(twice.amps) == set(st.amps)
    for idx, a in st.amps.items():
        assert twice.amps[idx] == pytest.approx(a, abs=1e-12)


def test_unitary_dimension_mismatch():
    with pytest.raises(StateValidationError):
        apply_local_unitary(permutation_superposition(3), hadamard(0))


def test_non_unitary_matrix_rejected():
    with pytest.raises(StateValidationError):
        LocalUnitary(0, np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_family_asymmetric_w_third_recovers_w3():
    a = asymmetric_w(1.0 / 3.0)
    b = w(3)
    for idx in b.amps:
        assert a.amps[idx] == pytest.approx(b.amps[idx], abs=1e-15)


def test_family_rohrlich_zero_is_epr_bc():
    st = rohrlich(0.0)
    # A is pinned at |1>, B-C hold a maximally entangled pair
    assert set(st.amps) == {(1, 0, 0), (1, 1, 1)}
    assert abs(st.amps[(1, 0, 0)]) == pytest.approx(1 / math.sqrt(2))
    assert st.amps[(1, 1, 1)] == pytest.approx(-1 / math.sqrt(2))


def test_family_rohrlich_keeps_minus_sign():
    st = rohrlich(0.4)
    assert st.amps[(1, 1, 1)].real < 0


def test_family_permutation_superposition():
    st = permutation_superposition(3)
    assert len(st.amps) == 6
    for sigma in itertools.permutations(range(3)):
        assert st.amps[sigma] == pytest.approx(1 / math.sqrt(6))


def test_family_parameter_ranges():
    with pytest.raises(StateValidationError):
        asymmetric_w(0.6)
    with pytest.raises(StateValidationError):
        rohrlich(-0.1)
    with pytest.raises(StateValidationError):
        family("nope", 1)


def test_family_dispatch_ghz_forms():
    assert len(family("ghz", 3).amps) == 3
    assert distribution_of(family("ghz", [0.25, 0.75])).probs[(1, 1, 1)] == pytest.approx(0.75)


def test_family_total_mass():
    for name, param in [
        ("ghz", 5),
        ("w", 4),
        ("asymmetric_w", 0.41),
        ("rohrlich", 0.77),
        ("permutation", 4),
    ]:
        assert distribution_of(family(name, param)).total() == pytest.approx(1.0, abs=1e-12)


def test_permutation_unitary_permutes_support():
    st = w(3)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = apply_local_unitary(st, LocalUnitary(2, swap))
    assert support_of(out).elements == {(1, 0, 1), (0, 1, 1), (0, 0, 0)}


def test_tensor_power_diagonal():
    sq = tensor_power(ghz(2), 2)
    assert support_of(sq).elements == {(i, i, i) for i in range(4)}


# ---------------------------------------------------------------------------
# typical truncation


def test_truncate_ghz_keeps_everything():
    for n in (1, 3, 6):
        res = truncate_to_typical(ghz(2), n, delta=0.1)
        assert res.retained_mass == pytest.approx(1.0, abs=1e-12)
        assert len(res.state.amps) == 2**n


def _w3_mass_by_enumeration(n, delta, eps):
    """Oracle: scan all 3^n sequences over the W3 support symbols."""
    symbols = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    window = delta - math.log2(1.0 - eps) / n
    marg_surprisal = {}  # mask -> per-symbol surprisal of the J-marginal
    marg_entropy = {}
    for mask in range(1, 8):
        sites = [j for j in range(3) if mask >> j & 1]
        counts = {}
        for sym in symbols:
            key = tuple(sym[j] for j in sites)
            counts[key] = counts.get(key, 0) + 1
        probs = {key: c / 3.0 for key, c in counts.items()}
        marg_entropy[mask] = -sum(p * math.log2(p) for p in probs.values())
        marg_surprisal[mask] = [
            -math.log2(probs[tuple(sym[j] for j in sites)]) for sym in symbols
        ]
    mass = 0.0
    count = 0
    for seq in itertools.product(range(3), repeat=n):
        ok = all(
            abs(sum(marg_surprisal[mask][s] for s in seq) / n - marg_entropy[mask])
            <= window + 1e-12
            for mask in range(1, 8)
        )
        if ok:
            mass += (1.0 / 3.0) ** n
            count += 1
    return mass, count


def test_truncate_w3_n8_matches_enumeration():
    res = truncate_to_typical(w(3), 8, delta=0.2, eps=0.1)
    mass, count = _w3_mass_by_enumeration(8, 0.2, 0.1)
    assert res.retained_mass == pytest.approx(mass, abs=1e-12)
    assert len(res.state.amps) == count
    assert res.retained_mass >= 0.5


def test_truncate_w3_delta_to_zero_empties():
    with pytest.raises(EmptyTypicalSetError) as err:
        truncate_to_typical(w(3), 8, delta=1e-9, eps=0.1)
    assert err.value.retained_mass == 0.0
    assert err.value.n == 8


def test_truncate_mass_trend_w3():
    m6 = truncate_to_typical(w(3), 6, delta=0.2).retained_mass
    m12 = truncate_to_typical(w(3), 12, delta=0.2).retained_mass
    assert m12 >= m6 - 0.05


def test_truncate_renormalizes():
    res = truncate_to_typical(w(3), 8, delta=0.2)
    total = math.fsum(abs(a) ** 2 for a in res.state.amps.values())
    assert total == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# state files


def test_state_file_roundtrip(tmp_path):
    st = rohrlich(0.3)
    path = tmp_path / "r.json"
    states.save_state(st, path)
    back = states.load_state(path)
    assert back.amps == pytest.approx(st.amps)


def test_state_file_bad_json_reports_position():
    with pytest.raises(StateFileError, match=r"line \d+, column \d+"):
        parse_state_text('{"k": 3, "dims": [2,2,2], "amps": [}')


def test_state_file_missing_field_reports_name():
    with pytest.raises(StateFileError, match="amps"):
        parse_state_text('{"k": 3, "dims": [2, 2, 2]}')


def test_state_file_bad_record_reports_path():
    text = '{"k": 1, "dims": [2], "amps": [{"idx": [0], "re": 1.0}]}'
    with pytest.raises(StateFileError, match=r"amps\[0\]"):
        parse_state_text(text)


def test_dump_state_is_parseable():
    st = w(4)
    assert parse_state_text(dump_state(st)).amps == pytest.approx(st.amps)
