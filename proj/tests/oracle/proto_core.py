#!/usr/bin/env python3
"""Shared numpy prototype of the lattice machinery, used by the oracle
scripts that freeze reference values for the linearized-evolution and
peak-dynamics tests.  Double precision throughout, same formulas as the
production code but an independent implementation path (numpy/scipy)."""

import numpy as np

LN2 = np.log(2.0)


class Kernel:
    def __init__(self, alpha=0.5, beta=1.5, k0=1.0, gamma0=1.0, rho=0.0):
        self.alpha, self.beta, self.k0, self.gamma0, self.rho = alpha, beta, k0, gamma0, rho

    def k(self, xi):
        return self.k0 + xi ** (self.alpha + 1.0)

    def g(self, xi):
        return self.gamma0 + xi ** self.beta

    def ln_zeta(self, n):
        xi = 2.0 ** (np.asarray(n, dtype=float) + self.rho)
        return np.log(LN2) - np.log(xi) + np.log(self.k(xi)) - np.log(self.g(2 * xi))

    def zeta(self, n):
        return np.exp(self.ln_zeta(n))

    def ln_theta(self, n):
        # cancelled form, safe at both tails
        n = np.asarray(n, dtype=float)
        xi = 2.0 ** (n + self.rho)
        xi1 = 2.0 ** (n + 1.0 + self.rho)
        ab = self.alpha + 1.0
        return (np.log1p(xi1 ** ab / self.k0) - np.log1p(xi ** ab / self.k0)
                + np.log1p((2 * xi) ** self.beta / self.gamma0)
                - np.log1p((2 * xi1) ** self.beta / self.gamma0))

    def tail_sums(self, nlo, nhi, jhi=420):
        """T[n] = sum_{j=n+1}^{inf} 2^{-j} ln theta_{j-1} for n in [nlo,nhi]."""
        T = {}
        acc = 0.0
        js = np.arange(jhi, nlo, -1)
        terms = 2.0 ** (-js) * self.ln_theta(js - 1)
        Tarr = np.cumsum(terms)
        # Tarr[i] = sum_{j=js[0]..js[i]} ; T(n) = sum_{j=n+1..jhi}
        for i, j in enumerate(js):
            T[j - 1] = Tarr[i]
        T[jhi] = 0.0
        return T

    def theta_series(self, lo=-600, hi=600):
        js = np.arange(lo, hi + 1)
        return float(np.sum(2.0 ** (-js.astype(float)) * self.ln_theta(js - 1)))


class Profile:
    """Stationary peak-amplitude profile on window [nlo, nhi], log-space."""

    def __init__(self, K, A, nlo=-40, nhi=16):
        self.K, self.A, self.nlo, self.nhi = K, A, nlo, nhi
        self.n = np.arange(nlo, nhi + 1)
        T = K.tail_sums(nlo, nhi)
        self.Ts = np.array([T[n] for n in self.n])
        self.log_alpha = -(A + self.Ts) * 2.0 ** self.n.astype(float)
        self.ln_zeta = K.ln_zeta(self.n)
        self.log_a = LN2 + self.log_alpha - self.ln_zeta
        self.alpha = np.exp(self.log_alpha)
        self.a = np.exp(self.log_a)

    def mass(self):
        return float(np.sum(2.0 ** (self.n + self.K.rho) * self.a))


def solve_A_for_mass(K, M, nlo=-40, nhi=16, tol=1e-11):
    lo, hi = 1e-6, 1e6
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if Profile(K, mid, nlo, nhi).mass() > M:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < tol:
            break
    return float(np.sqrt(lo * hi))


def sigma_seq(K, prof_AM, n):
    """sigma_n = 8 alpha_n(A_M) gamma(2^{n+1+rho})/gamma(2^{n+rho})  (rho=0 default)."""
    i = n - prof_AM.nlo
    al = np.exp(prof_AM.log_alpha[i])
    xi = 2.0 ** (n + K.rho)
    return 8.0 * al * K.g(2 * xi) / K.g(xi)


def build_L(K, prof_AM, nlo, nhi):
    """Tridiagonal matrix of L on window with copy (Neumann) ghost closure."""
    ns = np.arange(nlo, nhi + 1)
    N = len(ns)
    g = K.g(2.0 ** (ns + K.rho))
    sig = sigma_seq(K, prof_AM, ns)
    Lm = np.zeros((N, N))
    for i in range(N):
        c = g[i] / 4.0
        Lm[i, i] += -c * (1.0 + sig[i])
        if i - 1 >= 0:
            Lm[i, i - 1] += c
        else:
            Lm[i, i] += c  # ghost y_{nlo-1} = y_{nlo}
        if i + 1 < N:
            Lm[i, i + 1] += c * sig[i]
        else:
            Lm[i, i] += c * sig[i]  # ghost y_{nhi+1} = y_{nhi}
    return Lm, ns, g, sig


def norm_theta(y, ns, theta):
    w = np.where(ns <= 0, 2.0 ** ns.astype(float), 2.0 ** (theta * ns.astype(float)))
    left = np.max(np.abs(y[ns <= 0]) * w[ns <= 0]) if np.any(ns <= 0) else 0.0
    right = np.max(np.abs(y[ns > 0]) * w[ns > 0]) if np.any(ns > 0) else 0.0
    return left + right


def weighted_mean(y, prof, ns):
    i = ns - prof.nlo
    w = 2.0 ** (2.0 * ns) * np.exp(prof.log_a[i])
    return float(np.sum(w * y) / np.sum(w))
