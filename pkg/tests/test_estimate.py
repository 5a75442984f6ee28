"""Maximum-likelihood fitting and AIC rank selection."""

import numpy as np
import pytest

from qtomo import (
    ContractError,
    CountRecord,
    DensityMatrix,
    FitOptions,
    NoInformationError,
    NotInformationallyCompleteError,
    ProjectorSet,
    aic,
    expected_counts,
    fidelity,
    linear_inversion_init,
    maice_fit,
    make_preset,
    mle_fit,
    param_count,
    random_params,
    sample_counts,
    to_state,
)

ISO = DensityMatrix(np.eye(4) / 4.0)
PHI_PLUS_KET = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
PHI_PLUS = DensityMatrix(np.outer(PHI_PLUS_KET, PHI_PLUS_KET.conj()))


def noiseless_record(rho, C, t, ps):
    return CountRecord(np.round(expected_counts(rho, C, t, ps)).astype(int), t)


class TestAic:
    def test_arithmetic(self):
        assert aic(-100.0, 4) == 232.0
        assert aic(-100.0, 1) == 214.0

    def test_monotone_in_rank_at_equal_likelihood(self):
        values = [aic(-55.5, k) for k in (1, 2, 3, 4)]
        assert values == sorted(values)
        assert len(set(values)) == 4

    def test_bit_exact_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            ll = float(rng.normal(scale=1e4))
            k = int(rng.integers(1, 5))
            assert aic(ll, k) == -2.0 * ll + 2.0 * param_count(k)


class TestLinearInversion:
    def test_noiseless_isotropic(self, projectors):
        rec = noiseless_record(ISO, 40_000.0, 1.0, projectors)
        est = linear_inversion_init(rec, projectors)
        assert np.linalg.norm(est.matrix - ISO.matrix) < 1e-8

    def test_noiseless_bell(self, projectors):
        rec = noiseless_record(PHI_PLUS, 40_000.0, 1.0, projectors)
        est = linear_inversion_init(rec, projectors)
        assert fidelity(est, PHI_PLUS) >= 1.0 - 1e-8

    def test_noisy_output_is_valid_state(self, projectors):
        rec = sample_counts(PHI_PLUS, 1000.0, 1.0, projectors, seed=4)
        est = linear_inversion_init(rec, projectors)  # construction validates
        assert est.dim == 4

    def test_incomplete_set_rejected(self):
        kets = np.zeros((2, 4), dtype=complex)
        kets[0, 0] = kets[1, 1] = 1.0
        ps = ProjectorSet(("A", "B"), kets)
        with pytest.raises(NotInformationallyCompleteError):
            linear_inversion_init(CountRecord(np.array([3, 5]), 1.0), ps)


class TestMleFit:
    def test_noiseless_isotropic_rank4(self, projectors):
        rec = noiseless_record(ISO, 1e6, 1.0, projectors)
        fit = mle_fit(rec, projectors, 4, FitOptions(seed=0))
        rho_hat, _ = to_state(fit.theta_hat)
        assert fidelity(rho_hat, ISO) >= 0.99999
        assert fit.aic == -2.0 * fit.log_lf + 2.0 * 16

    def test_pure_state_rank1(self, projectors):
        hh = np.zeros((4, 4), dtype=complex)
        hh[0, 0] = 1.0
        rho = DensityMatrix(hh)
        rec = sample_counts(rho, 1e5, 1.0, projectors, seed=21)
        fit = mle_fit(rec, projectors, 1, FitOptions(seed=1))
        rho_hat, _ = to_state(fit.theta_hat)
        assert fidelity(rho_hat, rho) >= 0.999

    def test_predicted_total_matches_observed(self, projectors):
        rec = sample_counts(make_preset("VNMS").rho, 500.0, 20.0, projectors, seed=31)
        fit = mle_fit(rec, projectors, 4, FitOptions(seed=2))
        rho_hat, c_hat = to_state(fit.theta_hat)
        predicted = expected_counts(rho_hat, c_hat, rec.t, projectors).sum()
        assert abs(predicted - rec.total) <= 0.02 * rec.total

    def test_result_beats_every_start(self, projectors):
        from qtomo.measure import MU_FLOOR
        from qtomo._backend import active
        from scipy.special import gammaln

        rec = sample_counts(make_preset("HES").rho, 500.0, 2.0, projectors, seed=77)
        fit = mle_fit(rec, projectors, 2, FitOptions(seed=7))
        kern = active()
        counts = rec.counts.astype(float)
        lg = float(gammaln(counts + 1.0).sum())
        for j in range(1, 5):
            from qtomo import derive_seed

            start = random_params(2, derive_seed(7, 2, j))
            f0 = -kern.neg_loglik(start.theta, 2, projectors.kets, counts, rec.t, MU_FLOOR, lg)
            assert fit.log_lf >= f0 - 1e-9

    def test_zero_counts_rejected(self, projectors):
        with pytest.raises(NoInformationError):
            mle_fit(CountRecord(np.zeros(16), 1.0), projectors, 2, FitOptions())

    def test_extra_start_rank_mismatch(self, projectors):
        rec = sample_counts(ISO, 500.0, 1.0, projectors, seed=1)
        with pytest.raises(ContractError):
            mle_fit(rec, projectors, 3, FitOptions(), extra_starts=(random_params(2, 0),))

    def test_deterministic(self, projectors):
        rec = sample_counts(make_preset("APSS").rho, 500.0, 1.0, projectors, seed=8)
        a = mle_fit(rec, projectors, 2, FitOptions(seed=3))
        b = mle_fit(rec, projectors, 2, FitOptions(seed=3))
        np.testing.assert_array_equal(a.theta_hat.theta, b.theta_hat.theta)
        assert a.log_lf == b.log_lf
        assert a.best_start_index == b.best_start_index


class TestMaice:
    def test_deterministic_bit_for_bit(self, projectors):
        rec = sample_counts(make_preset("HES").rho, 500.0, 1.0, projectors, seed=9)
        a = maice_fit(rec, projectors, FitOptions(seed=5))
        b = maice_fit(rec, projectors, FitOptions(seed=5))
        assert a.selected_k == b.selected_k
        assert a.C_hat == b.C_hat
        for fa, fb in zip(a.fits, b.fits):
            assert fa.log_lf == fb.log_lf
            assert fa.aic == fb.aic
            np.testing.assert_array_equal(fa.theta_hat.theta, fb.theta_hat.theta)
        np.testing.assert_array_equal(a.rho_hat.matrix, b.rho_hat.matrix)

    def test_nested_likelihoods_and_selection(self, projectors):
        opts = FitOptions(seed=11)
        for seed in (0, 1, 2):
            rec = sample_counts(make_preset("VNMS").rho, 500.0, 2.0, projectors, seed=seed)
            res = maice_fit(rec, projectors, opts)
            for k in (2, 3, 4):
                prev = res.fits[k - 2]
                assert res.fits[k - 1].log_lf >= prev.log_lf - opts.f_tol * abs(prev.log_lf)
            assert res.selected_k == min(
                (f.k for f in res.fits if f.aic == min(x.aic for x in res.fits))
            )
            for f in res.fits:
                assert f.aic >= -2.0 * f.log_lf + 2.0 * 7

    @pytest.mark.slow
    def test_pure_product_state_selects_rank1(self, projectors):
        hv = np.zeros((4, 4), dtype=complex)
        hv[1, 1] = 1.0
        rho = DensityMatrix(hv)
        wins = 0
        trials = 100
        for trial in range(trials):
            rec = sample_counts(rho, 500.0, 20.0, projectors, seed=9000 + trial)
            res = maice_fit(rec, projectors, FitOptions(seed=trial))
            wins += res.selected_k == 1
        assert wins >= 0.9 * trials

    @pytest.mark.slow
    def test_isotropic_selects_rank4_majority(self, projectors):
        wins = 0
        trials = 50
        for trial in range(trials):
            rec = sample_counts(ISO, 500.0, 20.0, projectors, seed=9500 + trial)
            res = maice_fit(rec, projectors, FitOptions(seed=trial))
            wins += res.selected_k == 4
        assert wins > trials / 2

    @pytest.mark.slow
    def test_fidelity_improves_with_exposure(self, projectors):
        rho = make_preset("VNMS").rho
        means = []
        for t, n in ((0.2, 12), (2.0, 12), (20.0, 12)):
            fs = []
            for trial in range(n):
                rec = sample_counts(rho, 500.0, t, projectors, seed=7000 + trial)
                fit = mle_fit(rec, projectors, 4, FitOptions(seed=trial))
                fs.append(fidelity(to_state(fit.theta_hat)[0], rho))
            means.append(np.mean(fs))
        assert means[0] < means[1] < means[2]


class TestFitReport:
    def test_json_schema(self, tmp_path, projectors):
        from qtomo.estimate import write_fit_report
        import json

        rec = sample_counts(ISO, 500.0, 0.5, projectors, seed=13)
        res = maice_fit(rec, projectors, FitOptions(seed=1))
        path = tmp_path / "report.json"
        write_fit_report(res, path)
        obj = json.loads(path.read_text())
        assert set(obj) == {"selected_k", "fits", "rho_hat", "C_hat"}
        assert [f["k"] for f in obj["fits"]] == [1, 2, 3, 4]
        assert set(obj["fits"][0]) == {"k", "log_lf", "aic", "converged"}
        DensityMatrix.from_json(obj["rho_hat"])
