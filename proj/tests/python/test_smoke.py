"""Smoke tests for the python bindings: each module surface is touched once
with a known-good value; deep numerics live in the C++ suites."""

import math

import pytest

import peaklab as pk


@pytest.fixture(scope="module")
def km():
    return pk.KernelModel()


def test_kernel_construction_and_validation(km):
    assert km.alpha == 0.5 and km.beta == 1.5
    assert km.K_coag(4.0, 4.0) == pytest.approx(km.k_rate(4.0) / 8.0, rel=1e-15)
    assert km.K_coag(1.0, 2.0) == 0.0  # support boundary
    with pytest.raises(ValueError):
        pk.KernelModel(alpha=1.5)


def test_stationary_profile_mass_round_trip(km):
    A = pk.solve_A_for_mass(km, 1.0)
    assert A == pytest.approx(2.8017934295587, abs=1e-9)
    prof = pk.profile(km, A)
    assert prof["mass"] == pytest.approx(1.0, rel=1e-8)
    assert prof["recurrence_residual"] < 1e-12
    lo, hi = prof["window"]
    assert prof["n"][0] == lo and prof["n"][-1] == hi


def test_weak_residual_bank_on_profile(km):
    A = pk.solve_A_for_mass(km, 1.0)
    prof = pk.profile(km, A)
    grid = [float(n) for n in prof["n"]]
    rel = pk.weak_residual_bank(km, grid, prof["a"])
    assert set(rel) == set(pk.test_bank_names())
    assert max(rel.values()) < 1e-8
    # a plainly non-stationary measure leaves a visible residual
    r = pk.weak_residual(km, [0.0, 0.5], [0.6, 0.9], lambda x: math.cos(1.3 * x + 0.2))
    assert r["relative"] > 1e-3


def test_linear_evolve_conserves_weighted_mean(km):
    A = pk.solve_A_for_mass(km, 1.0)
    win = (-25, 12)
    y0 = [1.0 if n % 2 == 0 else -1.0 for n in range(win[0], win[1] + 1)]
    out = pk.linear_evolve(km, A, win, y0, [0.0, 0.5, 1.0], tol=1e-10)
    assert len(out["states"]) == 3
    drift = max(abs(w - out["wmean"][0]) for w in out["wmean"])
    assert drift <= 1e-10 * max(1.0, abs(out["wmean"][0]))


def test_peaks_evolve_conserves_mass(km):
    A = pk.solve_A_for_mass(km, 1.0)
    win = (-40, 7)
    prof = pk.profile(km, A, window=win)
    b0 = [a * (1.0 + 0.01 * math.sin(0.8 * n + 0.3)) for n, a in zip(prof["n"], prof["a"])]
    out = pk.peaks_evolve(km, win, 0.0, b0, [0.0, 0.5, 1.0], tol=1e-9)
    drift = max(abs(m - out["mass"][0]) for m in out["mass"])
    assert drift <= 1e-10 * out["mass"][0]
    dec = pk.peaks_decompose(km, win, 0.0, out["states"][-1])
    assert dec["A"] == pytest.approx(A, rel=1e-2)


def test_fundsol_residue_matches_ode(km):
    n0 = pk.fundsol_check_n0(km)
    ell = n0 + 1
    t = 2.0 * 4.0 / km.gamma_rate(2.0**ell)
    a = pk.fundsol_psi(km, ell + 3, ell, t)
    b = pk.fundsol_psi_ode(km, ell + 3, ell, t)
    assert a == pytest.approx(b, rel=1e-7)
    assert pk.fundsol_psi_integral_check(km, ell + 8, ell) == pytest.approx(1.0, abs=1e-8)


def test_mild_evolve_conserves_mass(km):
    A = pk.solve_A_for_mass(km, 1.0)
    prof = pk.profile(km, A)
    sel = [(n, a) for n, a in zip(prof["n"], prof["a"]) if -2 <= n <= 2]
    out = pk.mild_evolve(km, [float(n) for n, _ in sel], [a for _, a in sel],
                         R=40.0, T=0.2, tol=1e-8)
    drift = max(abs(m - out["mass"][0]) for m in out["mass"])
    assert drift <= 1e-7 * out["mass"][0]
    assert len(out["states"][-1]["x"]) > len(sel)  # fragmentation spawned sites
    with pytest.raises(ValueError):
        pk.mild_evolve(km, [0.0], [1.0], R=1.0, T=0.2)


def test_norm_theta_definition():
    # two sites: n = -1 carries weight 2^{-1}, n = 2 carries 2^{2 theta}
    val = pk.norm_theta([4.0, 0.0, 0.0, 0.5], (-1, 2), 1.0)
    assert val == pytest.approx(4.0 * 0.5 + 0.5 * 4.0, rel=1e-15)
