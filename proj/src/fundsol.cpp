#include "peaklab/fundsol.hpp"
#include "peaklab/errors.hpp"

#include "detail/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace peaklab {
namespace fundsol {

namespace {

// ln gamma(2^n), stable for any n
double ln_gam(const KernelModel& km, int n) {
    const double x = km.beta * double(n) * M_LN2;
    const double lg0 = std::log(km.gamma0);
    if (x > lg0) return x + std::log1p(km.gamma0 * std::exp(-x));
    return lg0 + std::log1p(std::exp(x) / km.gamma0);
}

double gam(const KernelModel& km, int n) { return km.gamma_rate(std::exp2(double(n))); }

constexpr int kCancelCap = 24;
constexpr double kConditionCap = 1e8;

void check_pair(const KernelModel& km, int n, int ell) {
    km.validate();
    if (n - ell > kCancelCap)
        throw precision_error("fundsol: n - ell = " + std::to_string(n - ell) +
                              " exceeds the double-precision cancellation cap " +
                              std::to_string(kCancelCap));
}

} // namespace

int check_n0(const KernelModel& km, int range) {
    km.validate();
    if (range < 2) throw validation_error("check_n0: range too small");
    const double lo = std::log(0.5), hi = std::log(1.5);
    for (int n0 = -40; n0 <= 80; ++n0) {
        bool ok = true;
        for (int n = n0; n <= n0 + range && ok; ++n) {
            if (!(ln_gam(km, n + 1) > ln_gam(km, n))) ok = false;
            for (int m = n0; m <= n0 + range && ok; ++m) {
                if (m == n) continue;
                const double d = ln_gam(km, n) - ln_gam(km, m) - km.beta * double(n - m) * M_LN2;
                if (!(d >= lo && d <= hi)) ok = false;
            }
        }
        if (ok) return n0;
    }
    throw validation_error("check_n0: no admissible threshold in [-40, 80]");
}

void FundSolSpec::validate() const {
    if (ell < n0) throw validation_error("FundSolSpec: ell below the admissibility threshold n0");
    if (win.lo < ell) throw validation_error("FundSolSpec: window must start at or above ell");
}

std::vector<double> residue_coeffs(const KernelModel& km, int n, int ell) {
    check_pair(km, n, ell);
    if (n < ell) return {};
    std::vector<double> g(size_t(n - ell + 1));
    for (int k = ell; k <= n; ++k) g[size_t(k - ell)] = gam(km, k);
    std::vector<double> c(g.size());
    for (size_t k = 0; k < g.size(); ++k) {
        double prod = g[k] / g[0];
        for (size_t j = 0; j < g.size(); ++j) {
            if (j == k) continue;
            prod /= 1.0 - g[k] / g[j];
        }
        c[k] = prod;
    }
    return c;
}

double psi(const KernelModel& km, int n, int ell, double t) {
    check_pair(km, n, ell);
    if (!(t >= 0.0) || !std::isfinite(t)) throw validation_error("psi: t must be finite and >= 0");
    if (t == 0.0) return n == ell ? 1.0 : 0.0;
    if (n < ell) return 0.0;

    const std::vector<double> c = residue_coeffs(km, n, ell);
    detail::KahanSum acc, mag;
    for (int k = ell; k <= n; ++k) {
        const double term = c[size_t(k - ell)] * std::exp(-gam(km, k) * t / 4.0);
        acc.add(term);
        mag.add(std::abs(term));
    }
    const double v = acc.value();
    if (!(mag.value() <= kConditionCap * std::abs(v)))
        throw precision_error("psi: cancellation condition " + std::to_string(mag.value() / std::abs(v)) +
                              " exceeds 1e8 at n=" + std::to_string(n) + " ell=" + std::to_string(ell));
    return v;
}

double psi_by_ode(const KernelModel& km, int n, int ell, double t, double tol) {
    check_pair(km, n, ell);
    if (!(t >= 0.0) || !std::isfinite(t))
        throw validation_error("psi_by_ode: t must be finite and >= 0");
    if (!(tol > 0.0)) throw validation_error("psi_by_ode: tol must be positive");
    if (t == 0.0) return n == ell ? 1.0 : 0.0;
    if (n < ell) return 0.0;

    const size_t m = size_t(n - ell + 1);
    std::vector<double> rate(m);
    for (int k = ell; k <= n; ++k) rate[size_t(k - ell)] = gam(km, k) / 4.0;

    // (I - c L) x = r by forward substitution; L is lower bidiagonal
    auto solve = [&](double c, const std::vector<double>& r, std::vector<double>& x) {
        for (size_t i = 0; i < m; ++i) {
            const double up = (i > 0) ? c * rate[i] * x[i - 1] : 0.0;
            x[i] = (r[i] + up) / (1.0 + c * rate[i]);
        }
    };
    const double gst = 2.0 - std::sqrt(2.0);
    const double d = gst / 2.0;
    const double c1 = 1.0 / (gst * (2.0 - gst));
    const double c2 = (1.0 - gst) * (1.0 - gst) / (gst * (2.0 - gst));
    std::vector<double> r(m), x1(m), tmp(m);
    auto step = [&](const std::vector<double>& y, double dt, std::vector<double>& out) {
        const double c = d * dt;
        for (size_t i = 0; i < m; ++i) {
            const double Ly = rate[i] * ((i > 0 ? y[i - 1] : 0.0) - y[i]);
            r[i] = y[i] + c * Ly;
        }
        solve(c, r, x1);
        for (size_t i = 0; i < m; ++i) r[i] = c1 * x1[i] - c2 * y[i];
        solve(c, r, out);
    };

    std::vector<double> y(m, 0.0), big(m), half(m), mid(m);
    y[0] = 1.0;
    double tc = 0.0, dt = std::min(t / 4.0, 1e-3 / (rate.back() + 1.0));
    long steps = 0;
    while (tc < t) {
        if (++steps > 20000000) throw integration_error("psi_by_ode: step budget exhausted");
        const double h = std::min(dt, t - tc);
        step(y, h, big);
        step(y, 0.5 * h, mid);
        step(mid, 0.5 * h, half);
        double est = 0.0, ymax = 0.0;
        for (size_t i = 0; i < m; ++i) {
            est = std::max(est, std::abs(big[i] - half[i]));
            ymax = std::max(ymax, std::abs(y[i]));
        }
        // cap the demand at the roundoff floor of the stage solves; the
        // pulse front carries O(1) content at the fastest rates, where a
        // pure error-per-unit-time target would chase estimator noise
        const double target = tol * h + 64.0 * std::numeric_limits<double>::epsilon() * ymax;
        if (est <= target) {
            y = half;
            tc += h;
        }
        dt = h * ((est > 0.0) ? std::clamp(0.9 * std::cbrt(target / est), 0.2, 5.0) : 5.0);
        if (dt < 1e-16 * std::max(1.0, t))
            throw integration_error("psi_by_ode: step underflow");
    }
    return y[m - 1];
}

double psi_integral_check(const KernelModel& km, int n, int ell) {
    check_pair(km, n, ell);
    if (n < ell) throw validation_error("psi_integral_check: requires n >= ell");
    const std::vector<double> c = residue_coeffs(km, n, ell);
    const double gl = gam(km, ell);
    detail::KahanSum acc, mag;
    for (int k = ell; k <= n; ++k) {
        const double term = c[size_t(k - ell)] * gl / gam(km, k);
        acc.add(term);
        mag.add(std::abs(term));
    }
    const double v = acc.value();
    if (!(mag.value() <= kConditionCap * std::abs(v)))
        throw precision_error("psi_integral_check: cancellation condition exceeds 1e8");
    return v;
}

namespace {

// prod_{j >= ell, j != k} (1 - g_k/g_j)^{-1}, truncated once the remaining
// factors are within ~1e-16 of 1 (their product is then < 1e-15 away from 1)
double tail_product(const KernelModel& km, int ell, int k, double gk) {
    double prod = 1.0;
    for (int j = ell;; ++j) {
        if (j == k) continue;
        const double r = gk / gam(km, j);
        if (j > k && r < 1e-16) break;
        prod /= 1.0 - r;
        if (j > k + 4000) throw convergence_error("fundsol: product truncation never reached");
    }
    return prod;
}

// shared k-series for psi_inf and dbeta_psi; pow2 selects gamma(2^k)^2
double limit_series(const KernelModel& km, int ell, double t, bool pow2, const char* who) {
    km.validate();
    if (!(t > 0.0) || !std::isfinite(t)) throw validation_error(std::string(who) + ": t must be positive");
    const double gl = gam(km, ell);
    detail::KahanSum acc, mag;
    int quiet = 0;
    for (int k = ell;; ++k) {
        const double gk = gam(km, k);
        const double amp = pow2 ? gk * gk / gl : gk / gl;
        const double term = amp * tail_product(km, ell, k, gk) * std::exp(-gk * t / 4.0);
        acc.add(term);
        mag.add(std::abs(term));
        quiet = (std::abs(term) <= 1e-17 * (std::abs(acc.value()) + 1e-300)) ? quiet + 1 : 0;
        if (quiet >= 3) break;
        if (k - ell > 400) throw convergence_error(std::string(who) + ": series did not settle");
    }
    const double v = acc.value();
    if (!(mag.value() <= kConditionCap * std::abs(v)))
        throw precision_error(std::string(who) + ": cancellation condition exceeds 1e8");
    return v;
}

} // namespace

double psi_inf(const KernelModel& km, int ell, double t) {
    return limit_series(km, ell, t, false, "psi_inf");
}

double dbeta_psi(const KernelModel& km, int ell, double t) {
    const double s = limit_series(km, ell, t, true, "dbeta_psi");
    return -s / (std::exp2(km.beta) - 1.0);
}

Trajectory duhamel_solve(const KernelModel& km,
                         const std::function<double(double)>& lambda_fn,
                         const std::function<LatticeSeq(double)>& source_r,
                         const LatticeSeq& y0,
                         const std::vector<double>& t_grid,
                         int nq) {
    km.validate();
    y0.check_finite();
    const Window win = y0.win;
    if (win.lo != check_n0(km) + 1)
        throw validation_error("duhamel_solve: window must start at n0 + 1");
    if (win.size() > kCancelCap + 1)
        throw precision_error("duhamel_solve: window wider than the cancellation cap allows");
    if (t_grid.empty() || t_grid[0] != 0.0)
        throw validation_error("duhamel_solve: t_grid must start at 0");
    for (size_t i = 0; i + 1 < t_grid.size(); ++i)
        if (!(t_grid[i] < t_grid[i + 1]))
            throw validation_error("duhamel_solve: t_grid must be strictly increasing");
    if (nq < 5 || nq % 2 == 0) throw validation_error("duhamel_solve: nq must be odd and >= 5");

    const int m = win.size();
    // rows[n - lo][ell - lo] = residue coefficients for Psi_n^{(ell)}
    std::vector<std::vector<std::vector<double>>> rows(static_cast<size_t>(m));
    for (int n = win.lo; n <= win.hi; ++n) {
        rows[size_t(n - win.lo)].resize(size_t(n - win.lo + 1));
        for (int ell = win.lo; ell <= n; ++ell)
            rows[size_t(n - win.lo)][size_t(ell - win.lo)] = residue_coeffs(km, n, ell);
    }
    std::vector<double> gtab(static_cast<size_t>(m));
    for (int k = win.lo; k <= win.hi; ++k) gtab[size_t(k - win.lo)] = gam(km, k);

    // Psi_n^{(ell)}(tau) from the cached coefficients; no condition guard here,
    // near-cancelling values enter the integrals with matching small weight.
    auto psi_cached = [&](int n, int ell, double tau) {
        if (n < ell) return 0.0;
        if (tau == 0.0) return n == ell ? 1.0 : 0.0;
        const std::vector<double>& c = rows[size_t(n - win.lo)][size_t(ell - win.lo)];
        detail::KahanSum acc;
        for (int k = ell; k <= n; ++k)
            acc.add(c[size_t(k - ell)] * std::exp(-gtab[size_t(k - win.lo)] * tau / 4.0));
        return acc.value();
    };

    const double pref = gtab[0] / 4.0;
    Trajectory tr;
    tr.times = t_grid;
    for (double t : t_grid) {
        std::vector<double> y(size_t(m), 0.0);
        for (int n = win.lo; n <= win.hi; ++n) {
            detail::KahanSum acc;
            for (int ell = win.lo; ell <= n; ++ell)
                acc.add(psi_cached(n, ell, t) * y0.at(ell));
            y[size_t(n - win.lo)] = acc.value();
        }
        if (t > 0.0 && (lambda_fn || source_r)) {
            std::vector<detail::KahanSum> acc(static_cast<size_t>(m));
            detail::graded_simpson(t, km.beta, nq, [&](double w, double tau) {
                const double lam = lambda_fn ? lambda_fn(t - tau) : 0.0;
                LatticeSeq r(win);
                if (source_r) {
                    r = source_r(t - tau);
                    if (!(r.win == win)) throw validation_error("duhamel_solve: source window mismatch");
                }
                for (int n = win.lo; n <= win.hi; ++n) {
                    double v = 0.0;
                    if (lambda_fn) v += pref * psi_cached(n, win.lo, tau) * lam;
                    if (source_r)
                        for (int ell = win.lo; ell <= n; ++ell)
                            v += psi_cached(n, ell, tau) * r.at(ell);
                    acc[size_t(n - win.lo)].add(w * v);
                }
            });
            for (int i = 0; i < m; ++i) y[size_t(i)] += acc[size_t(i)].value();
        }
        LatticeSeq s(win, y);
        tr.states.push_back(s);
        tr.wmean.push_back(std::numeric_limits<double>::quiet_NaN());
        tr.norm0.push_back(norm_theta(s, 0.0));
        tr.s_limit.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    return tr;
}

} // namespace fundsol
} // namespace peaklab
