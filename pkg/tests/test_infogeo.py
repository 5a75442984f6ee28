"""Fisher matrices, SLD operators, and the Bures-distance bound."""

import numpy as np
import pytest
from scipy.stats import poisson as poisson_dist

from qtomo import (
    ContractError,
    IllPosedBoundError,
    ProjectorSet,
    RankKParams,
    classical_fisher,
    cr_bound_bures,
    empirical_covariance,
    fidelity,
    fisher_bundle,
    fisher_from_rates,
    local_bures_quadratic,
    make_preset,
    param_count,
    project_to_rank,
    random_params,
    sld_fisher,
    sld_fisher_matrices,
    sld_operators,
    sld_operators_matrices,
    to_state,
)
from qtomo.infogeo import cr_bound_from_matrices
from qtomo.measure import product_ket
from qtomo.param import canonical_theta, d_rho_all


def brute_force_fisher(rates, rate_jac, pmf_cut=1e-16):
    """Poisson-expectation oracle: sum over outcomes of pmf * score^2."""
    rates = np.asarray(rates, float)
    rate_jac = np.asarray(rate_jac, float)
    n = rate_jac.shape[1]
    J = np.zeros((n, n))
    for v, m in enumerate(rates):
        # per-channel scores are independent, so cross-channel terms vanish
        # and the total is the sum of single-channel expectations
        kmax = int(m) + 10
        while poisson_dist.pmf(kmax, m) > pmf_cut:
            kmax += 10
        ks = np.arange(kmax + 1)
        pmf = poisson_dist.pmf(ks, m)
        score_scale = ks / m - 1.0
        ev = float(np.sum(pmf * score_scale**2))
        J += ev * np.outer(rate_jac[v], rate_jac[v])
    return J


def qubit_family(theta):
    rho = np.diag([(1.0 + theta) / 2.0, (1.0 - theta) / 2.0]).astype(complex)
    drho = np.diag([0.5, -0.5]).astype(complex)
    return rho, drho


class TestClassicalFisher:
    def test_single_channel_toy(self):
        # one projector, one parameter, M = C t theta
        ct, theta = 800.0, 0.3
        rates = np.array([ct * theta])
        jac = np.array([[ct]])
        J = fisher_from_rates(rates, jac)
        assert abs(J[0, 0] - ct / theta) < 1e-9
        brute = brute_force_fisher(rates, jac)
        assert abs(J[0, 0] - brute[0, 0]) < 1e-7 * J[0, 0]

    def test_two_projector_brute_force(self):
        kets = np.zeros((2, 4), dtype=complex)
        kets[0, 0] = 1.0
        kets[1] = product_ket("DD")
        ps = ProjectorSet(("A", "B"), kets)
        p = random_params(2, 123)
        scale = np.sqrt(4.0 / to_state(p)[1])  # keep rates at most ~5
        p = RankKParams(2, p.theta * scale)
        from qtomo._backend import active

        kern = active()
        rates = kern.expected_rates(p.theta, 2, ps.kets, 1.0)
        assert np.all(rates <= 5.0)
        jac = kern.rate_jacobian(p.theta, 2, ps.kets, 1.0)
        J = classical_fisher(p, ps, 1.0)
        brute = brute_force_fisher(rates, jac)
        assert np.max(np.abs(J - brute)) < 1e-7

    def test_time_doubling_is_exact(self, projectors):
        p = random_params(3, 9)
        J1 = classical_fisher(p, projectors, 1.7)
        J2 = classical_fisher(p, projectors, 3.4)
        np.testing.assert_array_equal(J2, 2.0 * J1)

    def test_scale_reparametrization_invariance(self, projectors):
        # C enters through the factor scale: theta -> s theta doubles the
        # rate fourfold but leaves the coordinate Fisher matrix unchanged,
        # so J / (C t) carries the entire exposure dependence.
        p = random_params(2, 10)
        J = classical_fisher(p, projectors, 1.0)
        p2 = RankKParams(2, p.theta * 2.0)
        J_scaled = classical_fisher(p2, projectors, 1.0)
        np.testing.assert_allclose(J_scaled, J, rtol=1e-12)

    def test_symmetric_psd(self, projectors):
        for k in (1, 2, 3, 4):
            p = random_params(k, 40 + k)
            J = classical_fisher(p, projectors, 2.0)
            assert np.max(np.abs(J - J.T)) < 1e-9
            assert np.linalg.eigvalsh(J).min() > -1e-8


class TestSld:
    def test_qubit_family_operator(self):
        for theta in (0.0, 0.3, -0.5):
            rho, drho = qubit_family(theta)
            (L,) = sld_operators_matrices(rho, [drho])
            expected = np.diag([1.0 / (1.0 + theta), -1.0 / (1.0 - theta)])
            np.testing.assert_allclose(L, expected, atol=1e-10)

    def test_qubit_family_fisher(self):
        for theta in (0.0, 0.5, -0.5):
            rho, drho = qubit_family(theta)
            J = sld_fisher_matrices(rho, [drho])
            assert abs(J[0, 0] - 1.0 / (1.0 - theta * theta)) < 1e-8

    def test_isotropic_state_gives_four_times_derivative(self):
        rng = np.random.default_rng(50)
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        A = a + a.conj().T
        A -= np.trace(A) * np.eye(4) / 4.0
        (L,) = sld_operators_matrices(np.eye(4) / 4.0, [A])
        np.testing.assert_allclose(L, 4.0 * A, atol=1e-10)

    @pytest.mark.parametrize("k", [4])
    def test_defining_equation_residual(self, k):
        for seed in range(50):
            p = random_params(k, 900 + seed)
            rho, _ = to_state(p)
            ops = sld_operators(p)
            derivs = d_rho_all(p)
            for L, d in zip(ops, derivs):
                residual = d - 0.5 * (L @ rho.matrix + rho.matrix @ L)
                assert np.linalg.norm(residual) < 1e-8

    def test_scale_direction_is_null(self):
        for k in (2, 4):
            p = random_params(k, 60 + k)
            J = sld_fisher(p)
            direction = p.theta / np.linalg.norm(p.theta)
            assert np.linalg.norm(J @ direction) < 1e-8 * max(1.0, np.abs(J).max())

    def test_local_bures_expansion_matches_fidelity(self):
        # second-order agreement for the highly entangled preset
        preset = make_preset("HES")
        p0 = project_to_rank(preset.rho, 2)
        J = sld_fisher(p0)
        rng = np.random.default_rng(61)
        n = param_count(2)
        for _ in range(10):
            direction = rng.standard_normal(n)
            quad = 0.25 * direction @ J @ direction
            target = 10.0 ** rng.uniform(-5, -3)
            delta = direction * np.sqrt(target / quad)
            theta = canonical_theta(p0.theta + delta, 2)
            rho2, _ = to_state(RankKParams(2, theta))
            measured = 2.0 * (1.0 - fidelity(preset.rho, rho2))
            predicted = 0.25 * delta @ J @ delta
            assert abs(measured - predicted) <= 0.05 * measured


class TestLocalBuresQuadratic:
    def test_zero_covariance(self):
        assert local_bures_quadratic(np.eye(3), np.zeros((3, 3))) == 0.0

    def test_identity_trace(self):
        assert local_bures_quadratic(np.eye(5), np.eye(5)) == 5.0 / 4.0

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            local_bures_quadratic(np.eye(3), np.eye(4))


class TestCrBound:
    def test_halves_when_exposure_doubles(self, projectors):
        p0 = project_to_rank(make_preset("VNMS").rho, 4)
        b1 = cr_bound_bures(p0, projectors, 2500.0)
        b2 = cr_bound_bures(p0, projectors, 5000.0)
        assert b2 == b1 / 2.0

    def test_scalar_toy(self):
        j_s, j_tilde, ct = 3.0, 0.75, 100.0
        value = cr_bound_from_matrices(np.array([[j_s]]), np.array([[j_tilde]]), ct)
        assert abs(value - j_s / (4.0 * ct * j_tilde)) < 1e-15

    def test_positive_for_presets(self, projectors, presets):
        for preset in presets.values():
            p0 = project_to_rank(preset.rho, preset.k_true)
            assert cr_bound_bures(p0, projectors, 1000.0) > 0.0

    def test_monotone_under_projector_superset(self, projectors):
        extra = ("LL", "LH", "LV", "DL")
        kets = np.vstack([projectors.kets] + [product_ket(lab) for lab in extra])
        ps20 = ProjectorSet(projectors.labels + extra, kets)
        for name in ("VNMS", "HES"):
            preset = make_preset(name)
            p0 = project_to_rank(preset.rho, preset.k_true)
            assert cr_bound_bures(p0, ps20, 1000.0) <= cr_bound_bures(p0, projectors, 1000.0)

    def test_ill_posed_when_null_space_informative(self):
        J_sld = np.diag([2.0, 1.0])
        J_tilde = np.diag([1.0, 0.0])  # second direction unmeasured but informative
        with pytest.raises(IllPosedBoundError):
            cr_bound_from_matrices(J_sld, J_tilde, 10.0)

    def test_shared_null_space_cancels(self):
        J_sld = np.diag([2.0, 0.0])
        J_tilde = np.diag([0.5, 0.0])
        value = cr_bound_from_matrices(J_sld, J_tilde, 10.0)
        assert abs(value - 2.0 / (0.5 * 40.0)) < 1e-12

    def test_scale_invariance_of_bound(self, projectors):
        # the bound depends on the state and exposure, not the theta gauge
        p0 = project_to_rank(make_preset("HES").rho, 2)
        p1 = RankKParams(2, p0.theta * 3.0)
        b0 = cr_bound_bures(p0, projectors, 1000.0)
        b1 = cr_bound_bures(p1, projectors, 1000.0)
        assert abs(b0 - b1) < 1e-10 * b0


class TestEmpiricalCovariance:
    def test_zero_when_all_estimates_equal_truth(self):
        p0 = random_params(2, 5)
        V = empirical_covariance([p0, p0, p0], p0)
        assert np.all(V == 0.0)

    def test_two_symmetric_samples(self):
        p0 = random_params(2, 6)
        delta = np.full(p0.theta.size, 0.01)
        delta[:2] = 0.0  # keep diagonals nonnegative
        a = RankKParams(2, p0.theta + delta)
        b = RankKParams(2, p0.theta - delta)
        V = empirical_covariance([a, b], p0)
        np.testing.assert_allclose(V, np.outer(delta, delta), atol=1e-15)

    def test_mixed_ranks_rejected(self):
        with pytest.raises(ContractError):
            empirical_covariance([random_params(2, 1), random_params(3, 1)], random_params(2, 0))

    def test_needs_two_samples(self):
        p = random_params(1, 2)
        with pytest.raises(ContractError):
            empirical_covariance([p], p)


class TestFisherBundle:
    def test_exact_factorization_and_json(self, projectors):
        p0 = project_to_rank(make_preset("VNMS").rho, 4)
        bundle = fisher_bundle(p0, projectors, 2500.0)
        np.testing.assert_array_equal(bundle.fisher, 2500.0 * bundle.fisher_normalized)
        assert np.max(np.abs(bundle.fisher - bundle.fisher.T)) < 1e-9
        obj = bundle.to_json()
        assert set(obj) == {"k", "Ct", "J", "J_sld", "cr_bound"}
        assert obj["k"] == 4
        assert obj["cr_bound"] == cr_bound_bures(p0, projectors, 2500.0)

    def test_sld_null_along_scale(self, projectors):
        p0 = project_to_rank(make_preset("HES").rho, 2)
        bundle = fisher_bundle(p0, projectors, 1000.0)
        direction = p0.theta / np.linalg.norm(p0.theta)
        assert np.linalg.norm(bundle.fisher_sld @ direction) < 1e-8


@pytest.mark.slow
class TestAsymptoticAttainment:
    def test_covariance_and_local_expansion(self, projectors):
        """Estimator spread matches inverse Fisher information at high exposure."""
        from qtomo import FitOptions, derive_seed, mle_fit, sample_counts
        from qtomo.param import canonical_theta

        preset = make_preset("VNMS")
        C, t = 500.0, 20.0
        p0 = project_to_rank(preset.rho, 4)
        theta0 = RankKParams(4, canonical_theta(p0.theta * np.sqrt(C), 4))
        hats, halves = [], []
        for trial in range(120):
            rec = sample_counts(preset.rho, C, t, projectors, derive_seed(31337, trial))
            fit = mle_fit(rec, projectors, 4, FitOptions(seed=trial))
            hats.append(fit.theta_hat)
            halves.append(1.0 - fidelity(preset.rho, to_state(fit.theta_hat)[0]))
        V = empirical_covariance(hats, theta0)
        J = classical_fisher(theta0, projectors, t)
        J_inv = np.linalg.inv(J)
        # aggregate attainment over the identified subspace; per-direction
        # ratios carry 13% sampling noise at this trial count, so individual
        # directions only get a gross-sanity band
        assert abs(np.trace(V) - np.trace(J_inv)) <= 0.20 * np.trace(J_inv)
        w, u = np.linalg.eigh(J)
        for idx in range(16):
            direction = u[:, idx]
            ratio = (direction @ V @ direction) / (direction @ J_inv @ direction)
            assert 0.5 <= ratio <= 2.0
        # plugging the sampled covariance into the local quadratic form
        # reproduces the mean Bures distance
        J_sld = sld_fisher(theta0)
        predicted_bures = local_bures_quadratic(J_sld, V)
        mean_bures = 2.0 * float(np.mean(halves))
        assert abs(predicted_bures - mean_bures) <= 0.15 * mean_bures


@pytest.mark.xfail(
    reason="per-setting Poisson channels can carry more per-exposure information "
    "than the single-copy quantum bound; the ordering fails already for the "
    "isotropic state on the default set",
    strict=False,
)
def test_classical_at_most_quantum_information(projectors):
    p = project_to_rank(make_preset("VNMS").rho, 4)
    _, c_rate = to_state(p)
    J_tilde = classical_fisher(p, projectors, 1.0) / c_rate
    J_sld = sld_fisher(p)
    w, u = np.linalg.eigh(J_sld)
    for idx in np.flatnonzero(w > 1e-8):
        direction = u[:, idx]
        assert direction @ J_tilde @ direction <= direction @ J_sld @ direction + 1e-8
