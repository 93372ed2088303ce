"""State algebra and projector-family properties."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tsmu.errors import GridMismatchError, PartitionError, UsageError
from tsmu.grid import (
    GridSpec,
    Projector,
    WaveFunction,
    apply_projector,
    inner_product,
    linear_combine,
    make_projector_family,
    masked_norm_sq,
    norm_sq,
    normalized,
    validate_family,
)

UNIT_GRID = GridSpec(8, 8, 8.0, 8.0)  # dx = dy = 1 so quadrature weights drop out


def _state(grid, amps, t=0.0):
    return WaveFunction(grid, amps, t)


def _zero(grid):
    return np.zeros(grid.shape, dtype=np.complex128)


def _random_state(grid, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return _state(grid, a)


class TestInnerProduct:
    def test_hand_value_single_cell(self):
        # one occupied cell: conj(1+1i) * (2+0i) * dx*dy = 2 - 2i
        a = _zero(UNIT_GRID)
        b = _zero(UNIT_GRID)
        a[3, 4, 1] = 1.0 + 1.0j
        b[3, 4, 1] = 2.0
        assert inner_product(_state(UNIT_GRID, a), _state(UNIT_GRID, b)) == 2.0 - 2.0j

    def test_normalized_state_with_itself(self):
        psi = normalized(_random_state(UNIT_GRID, 1))
        assert inner_product(psi, psi) == pytest.approx(1.0 + 0.0j, abs=1e-12)

    def test_detector_level_orthogonality(self):
        a = _zero(UNIT_GRID)
        b = _zero(UNIT_GRID)
        a[:, :, 1] = 1.0
        b[:, :, 2] = 1.0 - 0.5j
        assert inner_product(_state(UNIT_GRID, a), _state(UNIT_GRID, b)) == 0.0

    @given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
    def test_conjugate_symmetry(self, seed_a, seed_b):
        grid = GridSpec(8, 9, 1.0, 2.0)
        a, b = _random_state(grid, seed_a), _random_state(grid, seed_b)
        lhs = inner_product(a, b)
        rhs = inner_product(b, a)
        assert lhs == pytest.approx(rhs.conjugate(), rel=1e-12, abs=1e-15)

    def test_grid_mismatch(self):
        a = _random_state(GridSpec(8, 8), 0)
        b = _random_state(GridSpec(8, 9), 0)
        with pytest.raises(GridMismatchError):
            inner_product(a, b)


class TestNormSq:
    def test_zero_state(self):
        assert norm_sq(_state(UNIT_GRID, _zero(UNIT_GRID))) == 0.0

    def test_three_four_five(self):
        a = _zero(UNIT_GRID)
        a[0, 0, 0] = 3.0
        a[5, 2, 2] = 4.0j
        assert norm_sq(_state(UNIT_GRID, a)) == 25.0

    def test_normalized(self):
        assert norm_sq(normalized(_random_state(UNIT_GRID, 7))) == pytest.approx(1.0, abs=1e-13)


class TestLinearCombine:
    def test_identity(self):
        a = _random_state(UNIT_GRID, 3)
        out = linear_combine([(1.0, a)])
        assert np.array_equal(out.amps, a.amps)

    def test_cancellation(self):
        a = _random_state(UNIT_GRID, 4)
        out = linear_combine([(1.0, a), (-1.0, a)])
        assert norm_sq(out) == 0.0

    def test_probe_cell(self):
        a = _zero(UNIT_GRID)
        b = _zero(UNIT_GRID)
        a[2, 2, 0] = 1.0
        b[2, 2, 0] = 1.0j
        out = linear_combine([(2.0, _state(UNIT_GRID, a)), (3.0, _state(UNIT_GRID, b))])
        assert out.amps[2, 2, 0] == 2.0 + 3.0j

    def test_empty_is_usage_error(self):
        with pytest.raises(UsageError):
            linear_combine([])

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            linear_combine([(1.0, _random_state(GridSpec(8, 8), 0)), (1.0, _random_state(GridSpec(9, 8), 0))])


class TestProjectors:
    def test_full_space_identity(self):
        psi = _random_state(UNIT_GRID, 11)
        full = make_projector_family(UNIT_GRID, "identity")[0]
        assert np.array_equal(apply_projector(full, psi).amps, psi.amps)

    def test_idempotent(self):
        psi = _random_state(UNIT_GRID, 12)
        p = make_projector_family(UNIT_GRID, "y-bins", delta=2.0)[1]
        once = apply_projector(p, psi)
        twice = apply_projector(p, once)
        assert np.array_equal(once.amps, twice.amps)

    def test_disjoint_bins_annihilate(self):
        psi = _random_state(UNIT_GRID, 13)
        fam = make_projector_family(UNIT_GRID, "y-bins", delta=2.0)
        assert norm_sq(apply_projector(fam[0], apply_projector(fam[2], psi))) == 0.0

    def test_two_places_at_once_probability_is_zero(self):
        psi = normalized(_random_state(UNIT_GRID, 14))
        fam = make_projector_family(UNIT_GRID, "y-bins", delta=1.0)
        for first in fam[:3]:
            projected = apply_projector(first, psi)
            for second in fam:
                if second.label != first.label:
                    assert norm_sq(apply_projector(second, projected)) == 0.0

    def test_uniform_two_bins_projection_halves_norm(self):
        amps = _zero(UNIT_GRID)
        amps[:, 0:4, 0] = 1.0  # uniform over exactly two 2-row bins
        psi = _state(UNIT_GRID, amps)
        fam = make_projector_family(UNIT_GRID, "y-bins", delta=2.0)
        assert norm_sq(apply_projector(fam[0], psi)) == pytest.approx(norm_sq(psi) / 2, rel=1e-14)

    def test_self_adjoint(self):
        a, b = _random_state(UNIT_GRID, 15), _random_state(UNIT_GRID, 16)
        p = make_projector_family(UNIT_GRID, "slit-sides", y_split=4.0)[0]
        lhs = inner_product(apply_projector(p, a), b)
        rhs = inner_product(a, apply_projector(p, b))
        assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-15)

    def test_masked_norm_matches_projection(self):
        psi = _random_state(UNIT_GRID, 17)
        for p in make_projector_family(UNIT_GRID, "detector-levels"):
            assert masked_norm_sq(p, psi) == pytest.approx(norm_sq(apply_projector(p, psi)), rel=1e-13)

    def test_shape_mismatch(self):
        psi = _random_state(GridSpec(8, 9), 0)
        p = make_projector_family(UNIT_GRID, "detector-levels")[0]
        with pytest.raises(GridMismatchError):
            apply_projector(p, psi)


@st.composite
def grid_and_split(draw):
    nx = draw(st.integers(8, 12))
    ny = draw(st.integers(8, 14))
    grid = GridSpec(nx, ny, 1.0, 1.0)
    k = draw(st.integers(1, ny))
    return grid, k * grid.dy


class TestFamilies:
    @given(grid_and_split(), st.integers(0, 2**32 - 1))
    def test_family_resolves_identity_and_pythagoras(self, grid_delta, seed):
        grid, delta = grid_delta
        psi = _random_state(grid, seed)
        fam = make_projector_family(grid, "y-bins", delta=delta)
        total = linear_combine([(1.0, apply_projector(p, psi)) for p in fam])
        assert np.array_equal(total.amps, psi.amps)
        assert sum(norm_sq(apply_projector(p, psi)) for p in fam) == pytest.approx(
            norm_sq(psi), rel=1e-12
        )

    def test_bin_count_uses_ceiling(self):
        grid = GridSpec(8, 10, 1.0, 1.0)
        fam = make_projector_family(grid, "y-bins", delta=3 * grid.dy)
        assert len(fam) == 4  # ceil(10 / 3), last bin one row

    def test_detector_family(self):
        fam = make_projector_family(UNIT_GRID, "detector-levels")
        assert [p.label for p in fam] == ["m=0", "m=1", "m=2"]

    def test_slit_family_masks_follow_geometry(self):
        grid = GridSpec(8, 8, 1.0, 1.0)
        upper, lower = make_projector_family(grid, "slit-sides", y_split=0.5)
        assert upper.mask[:, 4:, :].all() and not upper.mask[:, :4, :].any()
        assert lower.mask[:, :4, :].all() and not lower.mask[:, 4:, :].any()

    def test_delta_not_multiple_of_dy(self):
        with pytest.raises(PartitionError):
            make_projector_family(GridSpec(8, 8, 1.0, 1.0), "y-bins", delta=0.3)

    def test_overlap_rejected(self):
        grid = GridSpec(8, 8, 1.0, 1.0)
        ones = np.ones(grid.shape, dtype=bool)
        with pytest.raises(PartitionError):
            validate_family(grid, [Projector("identity", "a", ones), Projector("identity", "b", ones)])

    def test_gap_rejected(self):
        grid = GridSpec(8, 8, 1.0, 1.0)
        partial = np.zeros(grid.shape, dtype=bool)
        partial[:, :4, :] = True
        with pytest.raises(PartitionError):
            validate_family(grid, [Projector("y-interval", "half", partial)])

    def test_unknown_kind(self):
        with pytest.raises(PartitionError):
            make_projector_family(UNIT_GRID, "momentum-bins")


class TestWaveFunction:
    def test_rejects_nan(self):
        amps = _zero(UNIT_GRID)
        amps[0, 0, 0] = np.nan
        with pytest.raises(UsageError):
            _state(UNIT_GRID, amps)

    def test_rejects_wrong_shape(self):
        with pytest.raises(GridMismatchError):
            WaveFunction(UNIT_GRID, np.zeros((8, 8, 2), dtype=np.complex128))

    def test_amplitudes_frozen(self):
        psi = _random_state(UNIT_GRID, 21)
        with pytest.raises(ValueError):
            psi.amps[0, 0, 0] = 1.0

    def test_grid_invariants(self):
        with pytest.raises(GridMismatchError):
            GridSpec(4, 8)
        with pytest.raises(GridMismatchError):
            GridSpec(8, 8, -1.0, 1.0)
