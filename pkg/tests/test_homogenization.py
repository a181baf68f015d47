"""Tests for the two-stage homogenization of wrinkled laminates."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from wrinkle_ndt.app import run_stiffness
from wrinkle_ndt.core.config import load_preset
from wrinkle_ndt.core.errors import ConfigError, HomogenizationSingularityError
from wrinkle_ndt.core.geometry import STUDY_RATIOS, WrinkleDescriptor
from wrinkle_ndt.core.homogenization import (
    A_GROUP,
    B_GROUP,
    Discretization,
    check_convergence,
    entrywise_change,
    frobenius_change,
    homogenize_strip,
    homogenize_wrinkle,
    horizontal_average,
    oracle_fine_average,
    partition_horizontal,
    partition_vertical,
    strip_centers,
    strip_stiffness_profile,
    thickness_rule,
)
from wrinkle_ndt.core.laminate import CARBON_EPOXY, Layup, Ply, stiffness_from_engineering
from wrinkle_ndt.core.rotation import rotate_theta


def make_layup(angles, thickness=0.25):
    return Layup(tuple(Ply(float(a), thickness, CARBON_EPOXY) for a in angles))


def mixed_average_oracle(stiffnesses, fractions, stress_group, strain_group):
    """
    Solve the layered mixed problem directly: the stress_group stresses are
    shared by every layer, the strain_group strains are shared, and the
    stress_group strains average to the macroscopic value.
    """
    n = len(stiffnesses)
    stress_group, strain_group = list(stress_group), list(strain_group)
    c_star = np.zeros((6, 6))
    for column in range(6):
        macro = np.zeros(6)
        macro[column] = 1.0
        size = 3 * n + 3
        lhs = np.zeros((size, size))
        rhs = np.zeros(size)
        for k, (c, f) in enumerate(zip(stiffnesses, fractions)):
            rows = slice(3 * k, 3 * k + 3)
            lhs[rows, 3 * k:3 * k + 3] = c[np.ix_(stress_group, stress_group)]
            lhs[rows, 3 * n:] = -np.eye(3)
            rhs[rows] = -c[np.ix_(stress_group, strain_group)] @ macro[strain_group]
            lhs[3 * n:, 3 * k:3 * k + 3] = f * np.eye(3)
        rhs[3 * n:] = macro[stress_group]
        solution = np.linalg.solve(lhs, rhs)

        stress = np.zeros(6)
        stress[stress_group] = solution[3 * n:]
        for k, (c, f) in enumerate(zip(stiffnesses, fractions)):
            strain = macro.copy()
            strain[stress_group] = solution[3 * k:3 * k + 3]
            stress[strain_group] += f * (c @ strain)[strain_group]
        c_star[:, column] = stress
    return c_star


@pytest.fixture
def cbar():
    return stiffness_from_engineering(CARBON_EPOXY)


class TestPartitions:
    """Tests for partition_vertical() and partition_horizontal()."""

    def test_diagonal_blocks(self):
        c = np.diag(np.arange(1.0, 7.0))
        vertical = partition_vertical(c)
        assert_allclose(vertical.C_aa, np.diag([3.0, 4.0, 5.0]))
        assert_allclose(vertical.C_bb, np.diag([1.0, 2.0, 6.0]))
        assert_allclose(vertical.C_ab, 0.0)
        horizontal = partition_horizontal(c)
        assert_allclose(horizontal.C_ee, np.diag([1.0, 5.0, 6.0]))
        assert_allclose(horizontal.C_ff, np.diag([2.0, 3.0, 4.0]))

    def test_identity_blocks(self):
        vertical = partition_vertical(np.eye(6))
        assert_allclose(vertical.C_aa, np.eye(3))
        assert_allclose(vertical.C_bb, np.eye(3))

    def test_assemble_round_trip(self, cbar):
        rotated = rotate_theta(cbar.values, np.radians(30))
        assert_allclose(partition_vertical(rotated).assemble(), rotated)
        assert_allclose(partition_horizontal(rotated).assemble(), rotated)


class TestThicknessRule:
    """Tests for thickness_rule() and strip_centers()."""

    def test_weights_sum_to_height(self):
        layup = make_layup([0, 90, 90, 0])
        z, weights, owners = thickness_rule(layup, 4)
        assert weights.sum() == pytest.approx(layup.height, rel=1e-14)
        assert len(z) == 16
        assert list(np.unique(owners)) == [0, 1, 2, 3]

    def test_ply_crossing_midsurface_is_split(self):
        layup = make_layup([0, 0, 0], thickness=1.0)
        z, weights, owners = thickness_rule(layup, 3)
        assert len(z) == 12
        assert np.count_nonzero(owners == 1) == 6
        assert not np.any(z == 0.0)
        assert weights.sum() == pytest.approx(3.0, rel=1e-14)

    def test_strip_centers(self):
        assert_allclose(strip_centers(8.0, 4), [-3.0, -1.0, 1.0, 3.0])


class TestHomogenizeStrip:
    """Tests for homogenize_strip()."""

    def test_homogeneous_stack(self, cbar):
        layup = make_layup([0] * 4)
        result = homogenize_strip(layup, [cbar] * 4)
        assert_allclose(result.values, cbar.values, rtol=1e-12, atol=1e-12)

    def test_cross_ply_matches_direct_solve(self, cbar):
        layup = make_layup([0, 90, 0, 90, 90, 0, 90, 0])
        plies = [rotate_theta(cbar.values, np.radians(p.theta)) for p in layup.plies]
        result = homogenize_strip(layup, plies)
        fractions = [p.thickness / layup.height for p in layup.plies]
        expected = mixed_average_oracle(plies, fractions, A_GROUP, B_GROUP)
        assert_allclose(result.values, expected, rtol=1e-9, atol=1e-9)

    def test_unequal_plies_match_direct_solve(self, cbar):
        layup = Layup((Ply(0.0, 0.1, CARBON_EPOXY), Ply(45.0, 0.3, CARBON_EPOXY), Ply(-30.0, 0.6, CARBON_EPOXY)))
        plies = [rotate_theta(cbar.values, np.radians(p.theta)) for p in layup.plies]
        result = homogenize_strip(layup, plies)
        expected = mixed_average_oracle(plies, [0.1, 0.3, 0.6], A_GROUP, B_GROUP)
        assert_allclose(result.values, expected, rtol=1e-9, atol=1e-9)

    def test_axial_stiffness_between_plies(self, cbar):
        layup = make_layup([0, 90, 90, 0])
        plies = [rotate_theta(cbar.values, np.radians(p.theta)) for p in layup.plies]
        result = homogenize_strip(layup, plies)
        assert plies[1][0, 0] < result[0, 0] < plies[0][0, 0]

    def test_callable_stiffness(self, cbar):
        layup = make_layup([0] * 4)
        result = homogenize_strip(layup, lambda k, z: np.broadcast_to(cbar.values, (len(z), 6, 6)))
        assert_allclose(result.values, cbar.values, rtol=1e-12)

    def test_wrong_ply_count(self, cbar):
        with pytest.raises(ConfigError, match="ply stiffnesses"):
            homogenize_strip(make_layup([0, 0]), [cbar])

    def test_singular_block_reports_ply(self, cbar):
        singular = np.diag([1.0, 1.0, 0.0, 1.0, 1.0, 1.0])
        with pytest.raises(HomogenizationSingularityError) as excinfo:
            homogenize_strip(make_layup([0, 0]), [cbar.values, singular], x=1.5)
        assert excinfo.value.ply == 1
        assert excinfo.value.x == 1.5


class TestHorizontalAverage:
    """Tests for horizontal_average()."""

    def test_identical_strips(self, cbar):
        strips = np.broadcast_to(cbar.values, (32, 6, 6))
        assert_allclose(horizontal_average(strips), cbar.values, rtol=1e-12)

    def test_matches_direct_solve(self, cbar):
        strips = np.stack([rotate_theta(cbar.values, np.radians(a)) for a in (0, 30, 60, 90)])
        expected = mixed_average_oracle(list(strips), [0.25] * 4, (0, 4, 5), (1, 2, 3))
        assert_allclose(horizontal_average(strips), expected, rtol=1e-9, atol=1e-9)

    def test_order_independent(self, cbar):
        strips = np.stack([rotate_theta(cbar.values, np.radians(a)) for a in (0, 15, 45, 80)])
        assert_allclose(horizontal_average(strips[::-1]), horizontal_average(strips), rtol=1e-12)

    def test_singular_strip_reports_position(self, cbar):
        strips = np.stack([cbar.values] * 4)
        strips[2] = 0.0
        x = strip_centers(5.0, 4)
        with pytest.raises(HomogenizationSingularityError, match="strip 2") as excinfo:
            horizontal_average(strips, x)
        assert excinfo.value.x == pytest.approx(x[2])
        assert "x=" in str(excinfo.value)


class TestHomogenizeWrinkle:
    """Tests for homogenize_wrinkle() and the strip profile."""

    def test_flat_unidirectional_equals_ply(self, cbar):
        layup = make_layup([0] * 8)
        result = homogenize_wrinkle(layup, WrinkleDescriptor(0.0, 5.0, 2.0))
        assert result.allclose(cbar, rtol=1e-9)

    def test_flat_is_x_independent(self, cbar):
        layup = make_layup([0, 90, 0, 90, 90, 0, 90, 0])
        plies = [rotate_theta(cbar.values, np.radians(p.theta)) for p in layup.plies]
        result = homogenize_wrinkle(layup, WrinkleDescriptor(0.0, 5.0, 2.0))
        assert result.allclose(homogenize_strip(layup, plies), rtol=1e-10)

    def test_wrinkle_reduces_axial_stiffness(self, cbar):
        layup = make_layup([0] * 30)
        result = homogenize_wrinkle(layup, WrinkleDescriptor(1.0, 8.3, 7.5))
        assert result[0, 0] < cbar[0, 0]
        assert np.linalg.eigvalsh(result.values).min() > 0

    def test_axial_modulus_decreases_with_severity(self):
        layup = make_layup([0] * 30)
        moduli = []
        for ratio in STUDY_RATIOS:
            c = homogenize_wrinkle(layup, WrinkleDescriptor(ratio * 5.0, 5.0, 7.5))
            moduli.append(1.0 / np.linalg.inv(c.values)[0, 0])
        assert all(b < a for a, b in zip(moduli, moduli[1:]))

    def test_no_normal_to_zx_coupling(self):
        """Misalignment is odd along the wavelength, so its couplings average out."""
        result = homogenize_wrinkle(make_layup([0] * 8), WrinkleDescriptor(0.5, 5.0, 2.0)).values
        scale = np.abs(result).max()
        for i in (0, 1, 2, 5):
            assert abs(result[i, 4]) < 1e-10 * scale

    def test_continuous_at_zero_amplitude(self):
        layup = make_layup([0, 90, 0, 90, 90, 0, 90, 0])
        flat = homogenize_wrinkle(layup, WrinkleDescriptor(0.0, 5.0, 2.0))
        tiny = homogenize_wrinkle(layup, WrinkleDescriptor(5e-6, 5.0, 2.0))
        assert entrywise_change(flat, tiny) < 1e-6

    def test_strip_profile_is_mirror_symmetric(self):
        layup = make_layup([0] * 8)
        x, strips = strip_stiffness_profile(layup, WrinkleDescriptor(0.5, 5.0, 2.0), Discretization(64, 4))
        assert_allclose(x, -x[::-1], atol=1e-14)
        flip = np.diag([1.0, 1.0, 1.0, -1.0, -1.0, 1.0])
        assert_allclose(strips[::-1], flip @ strips @ flip, rtol=1e-10, atol=1e-10)

    def test_workers_do_not_change_result(self):
        layup = make_layup([0, 90, 45, -45, -45, 45, 90, 0])
        wrinkle = WrinkleDescriptor(0.75, 5.0, 2.0)
        serial = homogenize_wrinkle(layup, wrinkle)
        parallel = homogenize_wrinkle(layup, wrinkle, workers=4)
        assert np.array_equal(serial.values, parallel.values)

    def test_too_few_strips(self):
        with pytest.raises(ConfigError, match="n_strips"):
            homogenize_wrinkle(make_layup([0] * 8), WrinkleDescriptor(0.5, 5.0, 2.0), Discretization(8, 4))

    def test_height_mismatch(self):
        with pytest.raises(ConfigError, match="does not match"):
            homogenize_wrinkle(make_layup([0] * 8), WrinkleDescriptor(0.5, 5.0, 3.0))

    @pytest.mark.parametrize("value", [0, -4, 2.5])
    def test_invalid_discretization(self, value):
        with pytest.raises(ConfigError):
            Discretization(n_strips=value)


class TestConvergence:
    """Tests for check_convergence() and the fine reference run."""

    def test_cross_ply_converged(self):
        layup = make_layup([0, 90, 0, 90, 90, 0, 90, 0])
        report = check_convergence(layup, WrinkleDescriptor(2.5, 5.0, 2.0))
        assert report.converged
        assert report.max_entry_change < 1e-3
        assert report.frobenius_change < 1e-3
        assert report.fine == Discretization(512, 8)

    def test_severe_quasi_isotropic_converged(self):
        layup = make_layup([0, 90, 45, -45, 0] * 3 + [0, -45, 45, 90, 0] * 3)
        report = check_convergence(layup, WrinkleDescriptor(2.5, 5.0, 7.5))
        assert report.converged

    def test_close_to_fine_reference(self):
        layup = make_layup([0, 90, 0, 90, 90, 0, 90, 0])
        wrinkle = WrinkleDescriptor(2.5, 5.0, 2.0)
        reference = oracle_fine_average(layup, wrinkle)
        assert entrywise_change(reference, homogenize_wrinkle(layup, wrinkle)) < 1e-3

    def test_reference_rejects_coarse_settings(self):
        with pytest.raises(ConfigError):
            oracle_fine_average(make_layup([0] * 8), WrinkleDescriptor(0.5, 5.0, 2.0), n_strips=256)

    def test_unconverged_logs_warning(self, caplog):
        layup = make_layup([0] * 8)
        with caplog.at_level("WARNING"):
            report = check_convergence(layup, WrinkleDescriptor(2.5, 5.0, 2.0), Discretization(16, 1), tolerance=1e-12)
        assert not report.converged
        assert "not converged" in caplog.text


class TestChangeMetrics:
    """Tests for entrywise_change() and frobenius_change()."""

    def test_small_entry_change_is_caught(self):
        a = np.diag([100.0, 1.0])
        b = np.diag([100.0, 1.1])
        assert entrywise_change(a, b) == pytest.approx(0.1)
        assert frobenius_change(a, b) == pytest.approx(0.1 / np.hypot(100.0, 1.0))

    def test_negligible_entries_ignored(self):
        a = np.array([[100.0, 1e-9], [1e-9, 50.0]])
        b = np.array([[100.0, 3e-9], [3e-9, 50.0]])
        assert entrywise_change(a, b) == 0.0
        assert frobenius_change(a, b) < 1e-10

    def test_report_needs_both_bounds(self):
        report = check_convergence(make_layup([0] * 8), WrinkleDescriptor(0.5, 5.0, 2.0))
        fields = report.to_dict()
        assert fields["max_entry_change"] == report.max_entry_change
        assert fields["frobenius_change"] == report.frobenius_change
        assert fields["converged"] is True
        loose = type(report)(report.coarse, report.fine, 2e-3, 5e-4, 1e-3)
        assert not loose.converged


STUDY_PRESETS = [
    "xply8-a050",
    "xply8-a075",
    "xply16-a050",
    "xply16-a100",
    "quasi30-a100",
    "quasi30-a175",
    "quasi30-a250",
]


class TestStudyConfigurations:
    """Default discretization against the fine reference for the built-in runs."""

    @pytest.mark.parametrize("preset", STUDY_PRESETS)
    def test_default_discretization_converged(self, preset):
        cfg = load_preset(preset)
        report = check_convergence(cfg.layup, cfg.wrinkle, cfg.discretization, cfg.tolerance)
        assert report.converged
        assert report.frobenius_change < 1e-3

    @pytest.mark.parametrize("preset", ["xply8-a050", "quasi30-a250"])
    def test_run_stiffness_matches_fine_reference(self, preset):
        cfg = load_preset(preset)
        reference = oracle_fine_average(cfg.layup, cfg.wrinkle)
        report = run_stiffness(cfg)
        result = np.array(report["effective_stiffness_GPa"])
        assert entrywise_change(reference, result) < 1e-3
        assert frobenius_change(reference, result) < 1e-3
        assert report["convergence"]["converged"] is True

    def test_specimen_ii_softer_than_flat_ply(self, cbar):
        cfg = load_preset("specimen-II")
        reference = oracle_fine_average(cfg.layup, cfg.wrinkle, workers=4)
        result = homogenize_wrinkle(cfg.layup, cfg.wrinkle, cfg.discretization)
        assert reference[0, 0] < cbar[0, 0]
        assert result[0, 0] == pytest.approx(reference[0, 0], rel=1e-3)
