#pragma once

// Small shared numeric helpers: compensated summation, tridiagonal solve,
// least squares on a line, deterministic RNG, graded Simpson quadrature.

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace peaklab::detail {

// Neumaier variant of compensated summation.
struct KahanSum {
    double s = 0.0;
    double c = 0.0;
    void add(double x) {
        double t = s + x;
        if (std::fabs(s) >= std::fabs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

// Thomas algorithm, destroys nothing; diag/sub/super sized n, sub[0] and
// super[n-1] ignored.  Returns false on a zero pivot.
inline bool solve_tridiag(const std::vector<double>& sub,
                          const std::vector<double>& diag,
                          const std::vector<double>& super,
                          std::vector<double>& rhs,
                          std::vector<double>& scratch) {
    size_t n = diag.size();
    scratch.resize(n);
    double piv = diag[0];
    if (piv == 0.0)
        return false;
    scratch[0] = super[0] / piv;
    rhs[0] /= piv;
    for (size_t i = 1; i < n; ++i) {
        piv = diag[i] - sub[i] * scratch[i - 1];
        if (piv == 0.0)
            return false;
        scratch[i] = (i + 1 < n ? super[i] : 0.0) / piv;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / piv;
    }
    for (size_t i = n - 1; i-- > 0;)
        rhs[i] -= scratch[i] * rhs[i + 1];
    return true;
}

// OLS fit y ~ c0 + c1 x; returns {c0, c1, rms residual}.
struct LineFit {
    double c0 = 0.0, c1 = 0.0, rms = 0.0;
};
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double det = double(n) * sxx - sx * sx;
    LineFit f;
    f.c1 = (double(n) * sxy - sx * sy) / det;
    f.c0 = (sy - f.c1 * sx) / double(n);
    double ss = 0;
    for (size_t i = 0; i < n; ++i) {
        double r = y[i] - f.c0 - f.c1 * x[i];
        ss += r * r;
    }
    f.rms = std::sqrt(ss / double(n));
    return f;
}

// splitmix64-seeded xoshiro-free deterministic generator: we only need
// reproducible uniforms across platforms, so use the raw splitmix64 stream.
struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed) {}
    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() { // in [0,1)
        return double(next_u64() >> 11) * 0x1.0p-53;
    }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
};

// Composite Simpson on a graded time integral
//   I = integral_0^t F(tau) dtau,  substitution u = tau^p, p = 1 - 1/beta,
// which absorbs an integrable tau^{-1/beta} singularity of F at tau = 0.
// F is sampled at tau(u_q) on nq (odd, >= 3) equispaced u nodes; sink is
// called as sink(weight, tau) and accumulates weight * F(tau) itself.
inline void graded_simpson(double t, double beta, int nq,
                           const std::function<void(double, double)>& sink) {
    double p = 1.0 - 1.0 / beta;
    double umax = std::pow(t, p);
    double h = umax / double(nq - 1);
    for (int q = 0; q < nq; ++q) {
        double u = h * double(q);
        double simpson = (q == 0 || q == nq - 1) ? 1.0 : (q % 2 == 1 ? 4.0 : 2.0);
        double tau = (u == 0.0) ? 0.0 : std::pow(u, 1.0 / p);
        double jac = (u == 0.0) ? 0.0 : (1.0 / p) * std::pow(u, 1.0 / p - 1.0);
        double w = simpson * h / 3.0 * jac;
        if (w != 0.0)
            sink(w, tau);
    }
}

} // namespace peaklab::detail
