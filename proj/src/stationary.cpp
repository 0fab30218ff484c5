#include "peaklab/stationary.hpp"
#include "peaklab/errors.hpp"

#include "detail/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace peaklab {

namespace {

double series_term(const KernelModel& km, double rho, long j) {
    return std::exp2(-double(j)) * ln_theta(km, int(j) - 1, rho);
}

void check_rho(double rho) {
    if (!(rho >= 0.0 && rho < 1.0))
        throw validation_error("rho must lie in [0,1)");
}

} // namespace

ThetaSeries theta_series(const KernelModel& km, double rho, double tol) {
    km.validate();
    check_rho(rho);
    if (!(tol > 0.0)) throw validation_error("theta_series: tol must be positive");

    const long cap = 100000;
    detail::KahanSum acc;
    ThetaSeries out;

    // Right tail: terms shrink at least geometrically (ratio <= 1/2 once the
    // layer ratios flatten), so four consecutive sub-threshold terms bound the
    // remainder by ~2x the threshold.
    int streak = 0;
    for (long j = 1;; ++j) {
        if (j > cap) throw convergence_error("theta_series: right tail did not converge");
        const double t = series_term(km, rho, j);
        acc.add(t);
        out.J2 = int(j);
        streak = (std::abs(t) < 0.25 * tol && j >= 4) ? streak + 1 : 0;
        if (streak >= 4) break;
    }
    // Left tail: |term_j| ~ 2^{(min(alpha,beta-1)) j} as j -> -infinity, a
    // slower geometric decay, so demand a longer sub-threshold streak.
    streak = 0;
    for (long j = 0;; --j) {
        if (j < -cap) throw convergence_error("theta_series: left tail did not converge");
        const double t = series_term(km, rho, j);
        acc.add(t);
        out.J1 = int(-j);
        streak = (std::abs(t) < 0.25 * tol && j <= -4) ? streak + 1 : 0;
        if (streak >= 6) break;
    }
    out.value = acc.value();
    return out;
}

std::vector<double> tail_sums(const KernelModel& km, double rho, Window win) {
    km.validate();
    check_rho(rho);

    // Locate a top index past which the remainder is below ~1e-18.
    long jtop = win.hi + 1;
    int streak = 0;
    for (long j = win.hi + 1;; ++j) {
        if (j > win.hi + 2000) throw convergence_error("tail_sums: series top not found");
        const double t = series_term(km, rho, j);
        streak = (std::abs(t) < 1e-18) ? streak + 1 : 0;
        jtop = j;
        if (streak >= 4) break;
    }

    // One backward compensated pass fills every tail in the window.
    std::vector<double> T(win.size(), 0.0);
    detail::KahanSum acc;
    for (long j = jtop; j >= long(win.lo) + 1; --j) {
        acc.add(series_term(km, rho, j));
        const long n = j - 1;
        if (n <= win.hi) T[size_t(n - win.lo)] = acc.value();
    }
    return T;
}

std::vector<double> alpha_values(const KernelModel& km, double A, double rho, Window win) {
    if (!(A > 0.0) || !std::isfinite(A)) throw validation_error("alpha_values: A must be positive");
    const std::vector<double> T = tail_sums(km, rho, win);
    std::vector<double> out(win.size());
    for (int n = win.lo; n <= win.hi; ++n) {
        const size_t i = size_t(n - win.lo);
        out[i] = std::exp(-(A + T[i]) * std::exp2(double(n)));
    }
    return out;
}

PeakProfile profile_from_A(const KernelModel& km, double A, double rho, Window win) {
    km.validate();
    check_rho(rho);
    if (!(A > 0.0) || !std::isfinite(A)) throw validation_error("profile_from_A: A must be positive");
    if (win.hi < win.lo + 1) throw validation_error("profile_from_A: window needs at least two sites");

    // Tails on a one-site-enlarged window provide the truncation estimate.
    const Window ext{win.lo - 1, win.hi + 1};
    const std::vector<double> Text = tail_sums(km, rho, ext);

    PeakProfile p;
    p.kernel = km;
    p.kernel.rho = rho;
    p.win = win;
    p.A = A;
    p.rho = rho;
    p.Theta = theta_series(km, rho, 1e-12).value;

    const size_t m = size_t(win.size());
    p.log_a.resize(m);
    p.log_alpha.resize(m);
    p.log_E.resize(m);
    p.lnzeta.resize(m);
    p.a.resize(m);
    p.alpha_seq.resize(m);

    auto site_log_a = [&](int n) {
        const double T = Text[size_t(n - ext.lo)];
        const double p2 = std::exp2(double(n));
        return M_LN2 - p2 * T - ln_zeta(km, n, rho) - A * p2;
    };

    detail::KahanSum msum;
    for (int n = win.lo; n <= win.hi; ++n) {
        const size_t i = size_t(n - win.lo);
        const double p2 = std::exp2(double(n));
        p.lnzeta[i] = ln_zeta(km, n, rho);
        p.log_E[i] = -p2 * Text[size_t(n - ext.lo)];
        p.log_alpha[i] = p.log_E[i] - A * p2;
        p.log_a[i] = M_LN2 + p.log_alpha[i] - p.lnzeta[i];
        p.a[i] = std::exp(p.log_a[i]);
        p.alpha_seq[i] = std::exp(p.log_alpha[i]);
        msum.add(std::exp((double(n) + rho) * M_LN2 + p.log_a[i]));
    }
    p.mass = msum.value();

    // Neglected-mass estimate: the left mass terms approach ratio 1/4, the
    // right terms decay super-geometrically once past the mode.
    const double mlo = std::exp((double(win.lo) - 1.0 + rho) * M_LN2 + site_log_a(win.lo - 1));
    const double mhi = std::exp((double(win.hi) + 1.0 + rho) * M_LN2 + site_log_a(win.hi + 1));
    const double tail = mlo * (4.0 / 3.0) * 1.5 + mhi * 2.0;
    if (!(tail <= 1e-10 * p.mass)) {
        const Window sug = auto_window(km, A, rho);
        throw precision_error("profile_from_A: window [" + std::to_string(win.lo) + "," +
                              std::to_string(win.hi) + "] truncates more than 1e-10 of the mass; use [" +
                              std::to_string(sug.lo) + "," + std::to_string(sug.hi) + "]");
    }
    return p;
}

double PeakProfile::max_recurrence_residual() const {
    // log u_n = ln2 + log_E_n - ln zeta_n is bounded on the lattice and the
    // A 2^n parts of  ln(zeta_n a_n^2 / a_{n+1})  cancel exactly, so the
    // check never multiplies A by 2^n.
    double worst = 0.0;
    for (size_t i = 0; i + 1 < log_a.size(); ++i) {
        const double lu0 = M_LN2 + log_E[i] - lnzeta[i];
        const double lu1 = M_LN2 + log_E[i + 1] - lnzeta[i + 1];
        worst = std::max(worst, std::abs(std::expm1(lnzeta[i] + 2.0 * lu0 - lu1)));
    }
    return worst;
}

double PeakProfile::max_ratio_residual() const {
    double worst = 0.0;
    for (size_t i = 0; i + 1 < log_a.size(); ++i) {
        const double lu0 = M_LN2 + log_E[i] - lnzeta[i];
        const double lu1 = M_LN2 + log_E[i + 1] - lnzeta[i + 1];
        const double d = (lu1 - lu0) - M_LN2 - log_E[i];
        worst = std::max(worst, std::abs(2.0 * alpha_seq[i] * std::expm1(d)));
    }
    return worst;
}

Window auto_window(const KernelModel& km, double A, double rho) {
    km.validate();
    check_rho(rho);
    if (!(A > 0.0) || !std::isfinite(A)) throw validation_error("auto_window: A must be positive");

    Window w{-40, 16};
    for (int pass = 0; pass < 400; ++pass) {
        const Window ext{w.lo - 1, w.hi + 1};
        const std::vector<double> T = tail_sums(km, rho, ext);
        auto mass_term = [&](int n) {
            const double p2 = std::exp2(double(n));
            const double la = M_LN2 - p2 * T[size_t(n - ext.lo)] - ln_zeta(km, n, rho) - A * p2;
            return std::exp((double(n) + rho) * M_LN2 + la);
        };
        detail::KahanSum s;
        for (int n = w.lo; n <= w.hi; ++n) s.add(mass_term(n));
        const double S = s.value();
        const double tl = mass_term(w.lo - 1) * (4.0 / 3.0) * 1.5;
        const double mh = mass_term(w.hi);
        const double mh1 = mass_term(w.hi + 1);
        const bool right_decaying = mh1 <= 0.55 * mh || mh1 == 0.0;
        const bool left_ok = tl <= 0.5e-10 * S;
        const bool right_ok = right_decaying && mh1 * 2.0 <= 0.5e-10 * S;
        if (left_ok && right_ok) return w;
        if (!left_ok) w.lo -= 8;
        if (!right_ok) w.hi += 8;
        if (w.lo < -1200 || w.hi > 1200)
            throw precision_error("auto_window: no window with 1e-10 mass tails");
    }
    throw convergence_error("auto_window: did not settle");
}

double mass_of(const KernelModel& km, double A, double rho) {
    const Window w = auto_window(km, A, rho);
    const std::vector<double> T = tail_sums(km, rho, w);
    detail::KahanSum s;
    for (int n = w.lo; n <= w.hi; ++n) {
        const size_t i = size_t(n - w.lo);
        const double p2 = std::exp2(double(n));
        const double log_alpha = -(A + T[i]) * p2;
        s.add(std::exp((double(n) + rho + 1.0) * M_LN2 - ln_zeta(km, n, rho) + log_alpha));
    }
    return s.value();
}

double solve_A_for_mass(const KernelModel& km, double M, double rho, double tol) {
    km.validate();
    check_rho(rho);
    if (!(M > 0.0) || !std::isfinite(M)) throw validation_error("solve_A_for_mass: mass must be positive");
    if (!(tol > 0.0)) throw validation_error("solve_A_for_mass: tol must be positive");

    double lo = 1e-6, hi = 1e6;
    while (mass_of(km, lo, rho) < M) {
        lo *= 0.01;
        if (lo < 1e-12) throw validation_error("solve_A_for_mass: mass too large for the A range");
    }
    while (mass_of(km, hi, rho) > M) {
        hi *= 100.0;
        if (hi > 1e12) throw validation_error("solve_A_for_mass: mass too small for the A range");
    }

    // mass_of is strictly decreasing in A; bisect on ln A.
    double mid = std::sqrt(lo * hi);
    for (int it = 0; it < 200; ++it) {
        mid = std::sqrt(lo * hi);
        const double m = mass_of(km, mid, rho);
        if (std::abs(m - M) <= tol * M) return mid;
        if (m > M) lo = mid; else hi = mid;
        if ((hi - lo) <= 1e-15 * mid) break;
    }
    if (std::abs(mass_of(km, mid, rho) - M) <= tol * M) return mid;
    throw convergence_error("solve_A_for_mass: bisection stalled before reaching tol");
}

TailFit fit_tail_constants(const PeakProfile& p) {
    if (p.win.lo > -20 || p.win.hi < 12)
        throw validation_error("fit_tail_constants: window must cover [-20,12]");

    TailFit f;
    {
        // a_n / 2^n against 2^n: intercept a_{-inf}, slope a_{-inf} A0
        std::vector<double> x, y;
        for (int n = p.win.lo; n < p.win.lo + 6; ++n) {
            x.push_back(std::exp2(double(n)));
            y.push_back(std::exp(p.log_a_at(n) - double(n) * M_LN2));
        }
        const detail::LineFit lf = detail::fit_line(x, y);
        f.a_minus_inf_hat = lf.c0;
        f.A0_hat = lf.c1 / lf.c0;
        f.resid_left = lf.rms;
    }
    {
        // ln a_n - (beta-alpha) n ln2 against 2^n: intercept ln a_inf, slope -A
        std::vector<double> x, y;
        const double slope_shift = (p.kernel.beta - p.kernel.alpha) * M_LN2;
        for (int n = p.win.hi - 5; n <= p.win.hi; ++n) {
            x.push_back(std::exp2(double(n)));
            y.push_back(p.log_a_at(n) - slope_shift * double(n));
        }
        const detail::LineFit lf = detail::fit_line(x, y);
        f.a_inf_hat = std::exp(lf.c0);
        f.A_hat = -lf.c1;
        f.resid_right = lf.rms;
    }
    return f;
}

double a_minus_inf(const KernelModel& km, double rho) {
    km.validate();
    check_rho(rho);
    return km.gamma0 * std::exp2(rho + 1.0) / (km.k0 * M_LN2);
}

double a_inf(const KernelModel& km, double rho) {
    km.validate();
    check_rho(rho);
    return std::exp2(km.beta + (km.beta - km.alpha) * (rho + 1.0)) / M_LN2;
}

} // namespace peaklab
