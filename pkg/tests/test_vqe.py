"""Ansatz preparation, analytic gradients, and optimization drivers."""

import numpy as np
import pytest

from z2vqe import dual_engine as de, spectra, vqe
from z2vqe.lattice import build_lattice


def _fd_gradient(geom, spec, params, lam, eps=1e-6):
    grad = np.zeros_like(params)
    for i in range(params.size):
        up, dn = params.copy(), params.copy()
        up[i] += eps
        dn[i] -= eps
        if spec.kind in ("dva", "beta_only") and i == 0:
            dn[i] = max(dn[i], 0.0)
        grad[i] = (vqe.energy(geom, spec, up, lam)
                   - vqe.energy(geom, spec, dn, lam)) / (up[i] - dn[i])
    return grad


def _random_params(spec, rng):
    p = 0.4 * rng.standard_normal(spec.n_params)
    if spec.kind in ("dva", "beta_only"):
        p[0] = rng.uniform(0.1, 0.9)
    return p


@pytest.mark.parametrize("kind,layers", [("dva", 1), ("dva", 3),
                                         ("hva_e", 2), ("hva_b", 2),
                                         ("beta_only", 1)])
def test_adjoint_gradient_vs_finite_difference(kind, layers):
    g = build_lattice(3)
    spec = vqe.AnsatzSpec(kind, layers)
    rng = np.random.default_rng(5)
    for _ in range(4):
        params = _random_params(spec, rng)
        lam = rng.uniform(0.5, 5.0)
        e, grad = vqe.energy_and_gradient(g, spec, params, lam)
        assert e == pytest.approx(vqe.energy(g, spec, params, lam), abs=1e-12)
        fd = _fd_gradient(g, spec, params, lam)
        scale = max(1.0, np.linalg.norm(fd))
        assert np.linalg.norm(grad - fd) / scale < 1e-6


@pytest.mark.parametrize("kind,layers", [("dva", 2), ("hva_e", 2),
                                         ("hva_b", 2)])
def test_shift_rule_vs_adjoint(kind, layers):
    g = build_lattice(2)
    spec = vqe.AnsatzSpec(kind, layers)
    rng = np.random.default_rng(9)
    for _ in range(4):
        params = _random_params(spec, rng)
        lam = rng.uniform(0.5, 5.0)
        _, grad = vqe.energy_and_gradient(g, spec, params, lam)
        shift = vqe.parameter_shift_gradient(g, spec, params, lam)
        assert np.allclose(shift.gradient, grad, atol=1e-10)


def test_expectation_budget():
    # per gradient: 2 evaluations per plaquette term, 1 per link term
    g = build_lattice(3)
    spec = vqe.AnsatzSpec("dva", 2)
    shift = vqe.parameter_shift_gradient(
        g, spec, np.array([0.3, 0.2, 0.1, 0.05]), 2.0)
    assert shift.n_expectations == 4 * g.n_plaquettes + 2 * g.n_links


def test_initial_beta_slope():
    # d<H>/d(beta) at beta = 0 from the reference state is -2*lam*N_p
    g = build_lattice(3)
    spec = vqe.AnsatzSpec("beta_only")
    lam = 1.9
    _, grad = vqe.energy_and_gradient(g, spec, np.array([0.0]), lam)
    assert grad[0] == pytest.approx(-2.0 * lam * g.n_plaquettes, abs=1e-9)


def test_prepare_reference_limits():
    g = build_lattice(3)
    z = vqe.prepare(g, vqe.AnsatzSpec("dva", 1), np.array([0.0, 0.0]))
    assert np.allclose(z.amplitudes, de.init_reference(g).amplitudes)
    # large beta drives the dissipative layer onto the uniform state
    u = vqe.prepare(g, vqe.AnsatzSpec("beta_only"), np.array([8.0]))
    assert de.magnetic_expectation(u) == pytest.approx(g.n_plaquettes,
                                                       rel=1e-6)


def test_wrap_angles_and_bounds():
    spec = vqe.AnsatzSpec("dva", 2)
    wrapped = vqe.wrap_angles(spec, np.array([0.4, 4.0, -4.0, 0.1]))
    assert wrapped[0] == pytest.approx(0.4)  # beta untouched
    assert np.all(wrapped[1:] > -np.pi) and np.all(wrapped[1:] <= np.pi)
    lo, hi = vqe.parameter_bounds(spec)[0]
    assert (lo, hi) == (0.0, 1.0)


def test_minimize_reaches_exact_at_d2():
    g = build_lattice(2)
    spec = vqe.AnsatzSpec("dva", 2)
    lam = 2.5
    e_ref, _ = spectra.ground_state(g, lam)
    best = np.inf
    rng = np.random.default_rng(0)
    for _ in range(12):
        res = vqe.minimize_energy(g, spec, lam,
                                  _random_params(spec, rng))
        best = min(best, float(res.fun))
    assert abs(best - e_ref) / abs(e_ref) < 1e-9


def test_beta_only_optimum_matches_scan():
    g = build_lattice(3)
    lam = 2.0
    beta, e = vqe.beta_only_optimum(g, lam)
    grid = np.linspace(0.0, 1.0, 2001)
    es = [vqe.energy(g, vqe.AnsatzSpec("beta_only"), np.array([b]), lam)
          for b in grid]
    assert e <= min(es) + 1e-9
    assert abs(beta - grid[int(np.argmin(es))]) < 1e-3


def test_sweep_shapes_and_warm_start_quality():
    g = build_lattice(2)
    spec = vqe.AnsatzSpec("dva", 2)
    preset = vqe.SweepPreset(n_lambda=6, lam_max=5.0, n_starts=8)
    result = vqe.sweep(g, spec, preset=preset, seed=1)
    assert result.energies.shape == (6,)
    assert result.params.shape == (6, 4)
    for lam, e in zip(result.lambdas, result.energies):
        ref, _ = spectra.ground_state(g, float(lam))
        assert abs(e - ref) / abs(ref) < 1e-8
