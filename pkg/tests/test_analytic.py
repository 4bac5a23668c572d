import cmath
import logging
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qinterf.analytic import (
    Lemma1Params,
    format_diagnostics,
    interference_diagnostics,
    lemma1_amplitudes,
    lemma1_classical,
    lemma1_quantum,
    multi_cluster_classical,
    multi_cluster_quantum,
    quadrature_oracle,
    wrap_phase,
)
from qinterf.errors import DegenerateFieldError
from qinterf.estimators import EvaluationGrid
from qinterf.synthesis import ClusterSpec, MixtureModel

GRID = EvaluationGrid.regular(-14.0, 18.0, 160)


def direct_quantum(p, y):
    """|sum_k sqrt(n_k) e^{i phi_k} G_s(y - mu_k)|^2 with s = sigma^2 + i hbar lam^2, plain complex math."""
    s = complex(p.sigma**2, p.hbar * p.lam**2)
    out = []
    for v in y:
        z = 0j
        for w, mu, phi in ((p.n1, p.mu1, p.phi1), (p.n2, p.mu2, p.phi2)):
            z += math.sqrt(w) * cmath.exp(1j * phi) * cmath.exp(-((v - mu) ** 2) / (2 * s)) / cmath.sqrt(2 * math.pi * s)
        out.append(abs(z) ** 2)
    return np.array(out)


def grid_normalize(raw, grid):
    return raw / np.dot(raw, grid.weights)


class TestParams:
    def test_reference_widths(self):
        p = Lemma1Params.figure3()
        assert p.mu2 == 4.0 and p.n2 == 0.5
        assert p.sigma_alpha_sq == pytest.approx(5.6)
        assert p.sigma_ihbar_sq == pytest.approx(4.0 + 6.4j)
        assert p.sigma_hbar_r_sq == pytest.approx(7.12)
        assert p.delta_phi == pytest.approx(-np.pi)

    def test_real_width_is_modulus_form(self):
        p = Lemma1Params.figure3(sigma=1.3, hbar=0.77, lam=2.2)
        assert p.sigma_hbar_r_sq == pytest.approx(abs(p.sigma_ihbar_sq) ** 2 / (2 * p.sigma**2))

    @pytest.mark.parametrize("bad", [dict(n1=0.0), dict(n1=1.0), dict(sigma=0.0), dict(hbar=-1.0), dict(delta_mu=np.nan)])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            Lemma1Params.figure3(**bad)


def test_wrap_phase():
    np.testing.assert_allclose(wrap_phase(np.array([0.0, np.pi, -np.pi, 3 * np.pi, 1.5 * np.pi])),
                               [0.0, np.pi, np.pi, np.pi, -0.5 * np.pi], atol=1e-15)


class TestClassical:
    def test_matches_mixture_of_gaussians(self):
        p = Lemma1Params.figure3(n1=0.3)
        y = GRID.coords()
        raw = 0.3 * np.exp(-y**2 / 11.2) + 0.7 * np.exp(-((y - 4) ** 2) / 11.2)
        np.testing.assert_allclose(lemma1_classical(p, GRID).values, grid_normalize(raw, GRID), rtol=1e-12)

    def test_quadrature_oracle(self):
        p = Lemma1Params.figure3(delta_mu=7.0, alpha=2.0)
        g = EvaluationGrid.regular(-12.0, 19.0, 40)
        a = lemma1_classical(p, g).values
        b = quadrature_oracle("classical", p, g).values
        assert np.max(np.abs(a - b)) / np.max(a) < 1e-9

    def test_rejects_2d_grid(self):
        with pytest.raises(ValueError):
            lemma1_classical(Lemma1Params.figure3(), EvaluationGrid(((0, 1, 2), (0, 1, 2))))


class TestQuantum:
    @pytest.mark.parametrize("kw", [{}, dict(delta_mu=0.0, phi2=0.5), dict(n1=0.2, phi2=1.0), dict(hbar=2.0, delta_mu=9.0)])
    def test_derived_matches_direct_complex_arithmetic(self, kw):
        p = Lemma1Params.figure3(**kw)
        ref = grid_normalize(direct_quantum(p, GRID.coords()), GRID)
        np.testing.assert_allclose(lemma1_quantum(p, GRID).values, ref, rtol=1e-10, atol=1e-14)

    def test_derived_matches_quadrature(self):
        p = Lemma1Params.figure3()
        a = lemma1_quantum(p, GRID).values
        b = quadrature_oracle("quantum", p, GRID).values
        assert np.max(np.abs(a - b)) / np.max(a) < 1e-8

    def test_coincident_clusters_opposite_phase_cancel(self):
        # equal weights, same mean, phase difference pi: the amplitude is identically zero
        p = Lemma1Params.figure3(delta_mu=0.0)
        assert np.max(direct_quantum(p, GRID.coords())) < 1e-30
        with pytest.raises(DegenerateFieldError):
            lemma1_quantum(p, GRID)

    def test_cross_term_envelope_at_midpoint(self):
        p = Lemma1Params.figure3(delta_mu=6.0)
        g1, g2 = lemma1_amplitudes(p)
        m = np.array([p.mu1 + 3.0])
        cross = 2 * (g1(m) * np.conj(g2(m))).real
        s = p.sigma_ihbar_sq
        env = math.exp(-p.sigma**2 * 36.0 / (4 * abs(s) ** 2))
        # at the midpoint the two propagated Gaussians have equal modulus
        base = 2 * math.sqrt(p.n1 * p.n2) * abs(g1(m) / math.sqrt(p.n1)) ** 2
        assert abs(cross) <= base * 1.0000001
        assert abs(g1(m) / math.sqrt(p.n1)) ** 2 == pytest.approx(
            math.exp(-9.0 / (2 * p.sigma_hbar_r_sq)) / (2 * math.pi * abs(s)), rel=1e-12)
        assert env == pytest.approx(math.exp(-9.0 / (2 * p.sigma_hbar_r_sq)), rel=1e-12)

    def test_printed_form_is_literal_display(self):
        p = Lemma1Params.figure3(delta_mu=3.0, n1=0.4, phi2=2.0)
        y = GRID.coords()
        var = p.sigma_hbar_r_sq
        cos = math.cos(-9.0 / (2 * 0.4 * 16) + (0.0 - 2.0))
        env = math.exp(-9.0 / (4 * 4.0)) / math.sqrt(2 * math.pi * 8.0)

        def g(u):
            return np.exp(-u**2 / (2 * var)) / math.sqrt(2 * math.pi * var)

        raw = 0.4 * g(y) + 0.6 * g(y - 3.0) + 2 * math.sqrt(0.24) * g(y - 1.5) * env * cos
        fld = lemma1_quantum(p, GRID, form="literal")
        assert fld.clamp_mass == 0.0
        np.testing.assert_allclose(fld.values, grid_normalize(raw, GRID), rtol=1e-12)

    def test_printed_form_clamps_negative(self, caplog):
        # a narrow cluster makes the envelope density exceed the direct terms
        p = Lemma1Params.figure3(sigma=0.25, delta_mu=0.1, lam=1.0)
        with caplog.at_level(logging.WARNING):
            fld = lemma1_quantum(p, GRID, form="literal")
        assert fld.clamp_mass > 1e-6
        assert "clamped negative mass" in caplog.text
        assert np.all(fld.values >= 0)
        assert fld.integral() == pytest.approx(1.0, abs=1e-12)

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            lemma1_quantum(Lemma1Params.figure3(), GRID, form="other")

    def test_sqrt_amplitude_oracle_uses_doubled_variance(self):
        # sqrt(G_sigma) is proportional to G_{sqrt(2) sigma}
        p = Lemma1Params.figure3(delta_mu=6.0)
        a = quadrature_oracle("quantum", p, GRID, psi0="sqrt").values
        q = Lemma1Params.figure3(delta_mu=6.0, sigma=2.0 * math.sqrt(2.0))
        ref = grid_normalize(direct_quantum(q, GRID.coords()), GRID)
        assert np.max(np.abs(a - ref)) / np.max(ref) < 1e-8


class TestMultiCluster:
    def test_two_cluster_agrees_with_lemma(self):
        p = Lemma1Params.figure3(n1=0.35, delta_mu=5.0, phi2=2.5)
        model = MixtureModel.two_cluster_1d(mu2=5.0, n1=0.35, phases=(0.0, 2.5))
        eta = [[16.0]]
        np.testing.assert_allclose(multi_cluster_quantum(model, 0.4, eta, GRID).values,
                                   lemma1_quantum(p, GRID).values, rtol=1e-10, atol=1e-15)
        np.testing.assert_allclose(multi_cluster_classical(model, 10.0, eta, GRID).values,
                                   lemma1_classical(p, GRID).values, rtol=1e-12)

    def test_three_cluster_2d_direct(self):
        model = MixtureModel((
            ClusterSpec(0.2, [0.0, 0.0], [[1.0, 0.3], [0.3, 2.0]], 0.0),
            ClusterSpec(0.5, [3.0, 1.0], [[1.5, 0.0], [0.0, 1.0]], 1.0),
            ClusterSpec(0.3, [-2.0, 3.0], np.eye(2), 4.0),
        ))
        eta = np.array([[2.0, 0.4], [0.4, 1.0]])
        g = EvaluationGrid(((-7.0, 8.0, 30), (-5.0, 8.0, 26)))
        y = g.nodes
        raw = np.zeros(g.size, dtype=complex)
        for c in model.clusters:
            cov = c.cov + 0.5j * eta
            prec = np.linalg.inv(cov)
            u = y - c.mean
            q = np.einsum("ni,ij,nj->n", u, prec, u)
            raw += math.sqrt(c.weight) * np.exp(1j * c.phase) * np.exp(-0.5 * q) / np.sqrt(np.linalg.det(2 * np.pi * cov))
        ref = grid_normalize(np.abs(raw) ** 2, g)
        np.testing.assert_allclose(multi_cluster_quantum(model, 0.5, eta, g).values, ref, rtol=1e-9, atol=1e-14)


class TestDiagnostics:
    def test_reference_configuration(self):
        d = interference_diagnostics(Lemma1Params.figure3())
        # -16 / (2 * 0.4 * 16) - pi = -1.25 - pi, wrapped to pi - 1.25
        assert d.phase_arg == pytest.approx(np.pi - 1.25)
        assert d.cosine == pytest.approx(math.cos(np.pi - 1.25))
        assert d.term_sign == "negative"
        assert d.window_holds and not d.on_boundary
        assert d.hbar_threshold_pi == pytest.approx(1 / np.pi)
        assert d.hbar_threshold_2pi == pytest.approx(1 / (2 * np.pi))
        assert d.above_threshold_pi and d.above_threshold_2pi
        assert d.envelope_ratio == pytest.approx(math.exp(-1.0))
        assert d.envelope == pytest.approx(math.exp(-1.0) / math.sqrt(16 * np.pi))

    def test_zero_sign(self):
        # phase_arg = pi/2 exactly: dmu^2 / (2 hbar lam^2) = pi/2 with phases (0, pi)
        lam, dmu = 4.0, 4.0
        hbar = dmu**2 / (np.pi * lam**2)
        d = interference_diagnostics(Lemma1Params.figure3(hbar=hbar))
        assert d.term_sign == "zero"
        assert d.on_boundary and not d.window_holds

    def test_positive_when_in_phase_and_close(self):
        d = interference_diagnostics(Lemma1Params.figure3(phi2=0.0, delta_mu=0.5))
        assert d.term_sign == "positive"

    def test_separated_envelope(self):
        d = interference_diagnostics(Lemma1Params.figure3(delta_mu=20.0))
        assert d.envelope_ratio == pytest.approx(math.exp(-25.0))
        assert d.envelope_ratio < 1e-5

    def test_format(self):
        text = format_diagnostics(interference_diagnostics(Lemma1Params.figure3()))
        kv = dict(line.split("=", 1) for line in text.splitlines())
        assert kv["term_sign"] == "negative"
        assert kv["window_holds"] == "true"
        assert float(kv["hbar_threshold_pi"]) == pytest.approx(1 / np.pi)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(0.05, 5.0), st.floats(0.5, 8.0), st.floats(-10.0, 10.0))
def test_sign_matches_cosine_of_wrapped_argument(dmu, hbar, lam, dphi):
    d = interference_diagnostics(Lemma1Params.figure3(delta_mu=dmu, hbar=hbar, lam=lam, phi1=dphi, phi2=0.0))
    raw = -dmu**2 / (2 * hbar * lam**2) + dphi
    assert -np.pi < d.phase_arg <= np.pi
    assert math.cos(d.phase_arg) == pytest.approx(math.cos(raw), abs=1e-9 * max(1.0, abs(raw)))
    assume(abs(math.cos(raw)) > 1e-6)
    assert d.term_sign == ("negative" if math.cos(raw) < 0 else "positive")


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 20.0), st.floats(0.5, 8.0), st.floats(0.01, 0.99))
def test_threshold_rule_first_branch(dmu, lam, frac):
    # with phases (0, pi), hbar above dmu^2 / (pi lam^2) keeps |arg| past pi/2
    thr = dmu**2 / (np.pi * lam**2)
    above = interference_diagnostics(Lemma1Params.figure3(delta_mu=dmu, lam=lam, hbar=thr / frac))
    assert above.window_holds and above.term_sign == "negative"
    # just below the threshold (inside the next half-turn) the window fails
    below = Lemma1Params.figure3(delta_mu=dmu, lam=lam, hbar=thr / (1 + 2 * frac))
    d = interference_diagnostics(below)
    assert not d.window_holds and d.term_sign == "positive"


class TestLimits:
    def test_classical_large_alpha_is_raw_mixture(self):
        p = Lemma1Params.figure3(alpha=1e9)
        y = GRID.coords()
        raw = 0.5 * np.exp(-y**2 / 8) / math.sqrt(8 * math.pi) + 0.5 * np.exp(-((y - 4) ** 2) / 8) / math.sqrt(8 * math.pi)
        assert np.max(np.abs(lemma1_classical(p, GRID).values - grid_normalize(raw, GRID))) < 1e-6

    def test_coincident_in_phase_collapses(self):
        p = Lemma1Params.figure3(delta_mu=0.0, phi2=0.0)
        y = GRID.coords()
        single = grid_normalize(np.exp(-((y - p.mu1) ** 2) / (2 * 7.12)), GRID)
        np.testing.assert_allclose(lemma1_quantum(p, GRID).values, single, rtol=1e-10)
        q = quadrature_oracle("quantum", p, GRID).values
        assert np.max(np.abs(q - single)) < 1e-8

    def test_quadrature_symmetric_when_coincident(self):
        p = Lemma1Params.figure3(delta_mu=0.0, phi2=0.0, mu1=2.0)
        g = EvaluationGrid.regular(-14.0, 18.0, 160)
        v = quadrature_oracle("quantum", p, g).values
        assert np.max(np.abs(v - v[::-1])) < 1e-9

    def test_quadrature_reference_two_maxima(self):
        from qinterf.detection import count_peaks

        assert count_peaks(quadrature_oracle("quantum", Lemma1Params.figure3(), GRID)).count == 2

    @pytest.mark.parametrize("form", ["derived", "literal"])
    @pytest.mark.parametrize("phi2", [0.0, np.pi])
    def test_equal_weights_symmetric_about_midpoint(self, form, phi2):
        p = Lemma1Params.figure3(mu1=-1.0, phi2=phi2)
        g = EvaluationGrid.regular(-16.0, 18.0, 170)  # symmetric about mu1 + dmu/2 = 1
        v = lemma1_quantum(p, g, form=form).values
        assert np.max(np.abs(v - v[::-1])) < 1e-9
        c = lemma1_classical(p, g).values
        assert np.max(np.abs(c - c[::-1])) < 1e-9

    def test_generic_phase_breaks_midpoint_symmetry(self):
        # reflection conjugates the cross product, so only sin(dphi) = 0 is symmetric
        p = Lemma1Params.figure3(mu1=-1.0, phi2=1.3)
        g = EvaluationGrid.regular(-16.0, 18.0, 170)
        v = lemma1_quantum(p, g).values
        q = quadrature_oracle("quantum", p, g).values
        assert np.max(np.abs(v - q)) < 1e-8
        assert np.max(np.abs(v - v[::-1])) > 1e-3

    def test_in_phase_coincident_diagnostics(self):
        d = interference_diagnostics(Lemma1Params.figure3(delta_mu=0.0, phi2=0.0))
        assert d.phase_arg == 0.0 and d.cosine == 1.0 and d.term_sign == "positive"


class TestMultiClusterExamples:
    def test_single_cluster(self):
        model = MixtureModel((ClusterSpec(1.0, [1.0], [[4.0]], 2.0),))
        y = GRID.coords()
        c = multi_cluster_classical(model, 10.0, [[16.0]], GRID).values
        np.testing.assert_allclose(c, grid_normalize(np.exp(-((y - 1) ** 2) / 11.2), GRID), rtol=1e-12)
        q = multi_cluster_quantum(model, 0.4, [[16.0]], GRID).values
        np.testing.assert_allclose(q, grid_normalize(np.exp(-((y - 1) ** 2) / 14.24), GRID), rtol=1e-10)

    def test_coincident_equal_phase_clusters(self):
        model = MixtureModel(tuple(ClusterSpec(w, [1.0], [[4.0]], 0.7) for w in (0.2, 0.3, 0.5)))
        one = MixtureModel((ClusterSpec(1.0, [1.0], [[4.0]], 0.7),))
        a = multi_cluster_quantum(model, 0.4, [[16.0]], GRID).values
        b = multi_cluster_quantum(one, 0.4, [[16.0]], GRID).values
        assert np.max(np.abs(a - b)) < 1e-10

    def test_classical_matches_large_sample(self):
        from qinterf.estimators import classical_density, default_grid
        from qinterf.synthesis import sample_mixture

        model = MixtureModel.two_cluster_1d(mu2=4.0)
        d = sample_mixture(model, 20_000, 0)
        g = default_grid(d.points, [[16.0]])
        emp = classical_density(d, 10.0, [[16.0]], g).values
        ref = multi_cluster_classical(model, 10.0, [[16.0]], g).values
        assert np.max(np.abs(emp - ref)) < 0.02 * ref.max()

    def test_three_clusters_match_large_sample_peaks(self):
        from qinterf.detection import count_peaks
        from qinterf.estimators import PhaseStrategy, assign_phases, default_grid, quantum_amplitude, quantum_density
        from qinterf.synthesis import stratified_sample

        model = MixtureModel(tuple(ClusterSpec(1 / 3, [m], [[4.0]], ph) for m, ph in ((0, 0), (4, np.pi), (8, 0))))
        d = stratified_sample(model, (10_000, 10_000, 10_000), 0)
        g = default_grid(d.points, [[16.0]])
        pa = assign_phases(d, PhaseStrategy.per_cluster([0.0, np.pi, 0.0]))
        emp = count_peaks(quantum_density(quantum_amplitude(d, 0.4, [[16.0]], pa, g)))
        ref = count_peaks(multi_cluster_quantum(model, 0.4, [[16.0]], g))
        assert emp.count == ref.count == 3
        for a, b in zip(emp.locations, ref.locations):
            assert abs(a[0] - b[0]) <= g.spacing[0]

    def test_two_cluster_maxima_match_lemma(self):
        from qinterf.detection import count_peaks

        model = MixtureModel.two_cluster_1d(mu2=4.0)
        a = count_peaks(multi_cluster_quantum(model, 0.4, [[16.0]], GRID))
        b = count_peaks(lemma1_quantum(Lemma1Params.figure3(), GRID))
        assert a.locations == b.locations
