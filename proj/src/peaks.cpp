#include "peaklab/peaks.hpp"
#include "peaklab/errors.hpp"
#include "peaklab/linear.hpp"
#include "peaklab/stationary.hpp"

#include "detail/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

namespace peaklab {
namespace peaks {

PeakState PeakState::make(const KernelModel& km, Window win, double rho, std::vector<double> b) {
    km.validate();
    if (!(rho >= 0.0 && rho < 1.0)) throw validation_error("PeakState: rho must lie in [0,1)");
    if (b.size() != size_t(win.size())) throw validation_error("PeakState: value count != window size");
    for (size_t i = 0; i < b.size(); ++i)
        if (!(b[i] >= 0.0) || !std::isfinite(b[i]))
            throw validation_error("PeakState: negative or non-finite amplitude at site " +
                                   std::to_string(win.lo + int(i)));
    PeakState s;
    s.win = win;
    s.rho = rho;
    s.b = std::move(b);
    detail::KahanSum acc;
    for (int n = win.lo; n <= win.hi; ++n)
        acc.add(std::exp2(double(n) + rho) * s.b[size_t(n - win.lo)]);
    s.mass = acc.value();
    return s;
}

namespace {

// window tables for the b-system right-hand side
struct BTables {
    Window win;
    int m;
    std::vector<double> g0, g1, zm, zc; // gamma(xi_n), gamma(xi_{n+1}), zeta_{n-1}, zeta_n

    BTables(const KernelModel& km, Window w, double rho) : win(w), m(w.size()) {
        g0.resize(static_cast<size_t>(m));
        g1.resize(static_cast<size_t>(m));
        zm.resize(static_cast<size_t>(m));
        zc.resize(static_cast<size_t>(m));
        KernelModel k2 = km;
        k2.rho = rho;
        for (int n = w.lo; n <= w.hi; ++n) {
            const size_t i = size_t(n - w.lo);
            g0[i] = km.gamma_rate(k2.xi_node(n));
            g1[i] = km.gamma_rate(k2.xi_node(n + 1));
            zm[i] = zeta(km, n - 1, rho);
            zc[i] = zeta(km, n, rho);
        }
    }

    void rhs(const std::vector<double>& b, std::vector<double>& out) const {
        for (int i = 0; i < m; ++i) {
            const size_t u = size_t(i);
            double v = 0.0;
            if (i > 0) v += g0[u] / 4.0 * (zm[u] * b[u - 1] * b[u - 1] - b[u]);
            if (i < m - 1) v -= g1[u] / 2.0 * (zc[u] * b[u] * b[u] - b[u + 1]);
            out[u] = v;
        }
    }

    // tridiagonal Jacobian of rhs at state x
    void jac(const std::vector<double>& x, std::vector<double>& sub, std::vector<double>& diag,
             std::vector<double>& sup) const {
        for (int i = 0; i < m; ++i) {
            const size_t u = size_t(i);
            sub[u] = (i > 0) ? g0[u] / 2.0 * zm[u] * x[u - 1] : 0.0;
            diag[u] = ((i > 0) ? -g0[u] / 4.0 : 0.0) + ((i < m - 1) ? -g1[u] * zc[u] * x[u] : 0.0);
            sup[u] = (i < m - 1) ? g1[u] / 2.0 : 0.0;
        }
    }
};

// Newton solve of x - c rhs(x) = r; returns false when it stalls
bool newton_stage(const BTables& tb, double c, const std::vector<double>& r,
                  std::vector<double>& x) {
    const size_t m = size_t(tb.m);
    std::vector<double> f(m), sub(m), diag(m), sup(m), g(m), scratch(m);
    for (int it = 0; it < 30; ++it) {
        tb.rhs(x, f);
        double scale = 1.0, gmax = 0.0;
        for (size_t i = 0; i < m; ++i) {
            g[i] = x[i] - c * f[i] - r[i];
            scale = std::max(scale, std::abs(x[i]));
            gmax = std::max(gmax, std::abs(g[i]));
        }
        tb.jac(x, sub, diag, sup);
        for (size_t i = 0; i < m; ++i) {
            sub[i] *= -c;
            diag[i] = 1.0 - c * diag[i];
            sup[i] *= -c;
            g[i] = -g[i];
        }
        if (!detail::solve_tridiag(sub, diag, sup, g, scratch)) return false;
        double dmax = 0.0;
        for (size_t i = 0; i < m; ++i) {
            x[i] += g[i];
            dmax = std::max(dmax, std::abs(g[i]));
        }
        if (dmax <= 1e-13 * scale) return true;
    }
    return false;
}

// one TR-BDF2 step of size dt; returns false on Newton failure
bool trbdf2_b(const BTables& tb, const std::vector<double>& b, double dt,
              std::vector<double>& out) {
    const double gst = 2.0 - std::sqrt(2.0);
    const double d = gst / 2.0;
    const double c1 = 1.0 / (gst * (2.0 - gst));
    const double c2 = (1.0 - gst) * (1.0 - gst) / (gst * (2.0 - gst));
    const size_t m = size_t(tb.m);
    const double c = d * dt;

    std::vector<double> fb(m), r(m), x1(m);
    tb.rhs(b, fb);
    for (size_t i = 0; i < m; ++i) r[i] = b[i] + c * fb[i];
    x1 = b;
    if (!newton_stage(tb, c, r, x1)) return false;

    for (size_t i = 0; i < m; ++i) r[i] = c1 * x1[i] - c2 * b[i];
    out = x1;
    return newton_stage(tb, c, r, out);
}

} // namespace

LatticeSeq rhs_b(const KernelModel& km, const PeakState& s) {
    km.validate();
    const BTables tb(km, s.win, s.rho);
    std::vector<double> out(size_t(tb.m));
    tb.rhs(s.b, out);
    return LatticeSeq(s.win, std::move(out));
}

PeakTrajectory evolve_b_grid(const KernelModel& km, const PeakState& b0,
                             const std::vector<double>& t_out, double tol) {
    km.validate();
    if (!(tol > 0.0)) throw validation_error("evolve_b: tol must be positive");
    if (t_out.empty() || t_out[0] != 0.0)
        throw validation_error("evolve_b: output grid must start at 0");
    for (size_t i = 0; i + 1 < t_out.size(); ++i)
        if (!(t_out[i] < t_out[i + 1]) || !std::isfinite(t_out[i + 1]))
            throw validation_error("evolve_b: output grid must be finite and strictly increasing");

    const BTables tb(km, b0.win, b0.rho);
    const size_t m = size_t(tb.m);
    std::vector<double> b = b0.b, big(m), half(m), mid(m);

    PeakTrajectory tr;
    tr.times = t_out;
    auto record = [&](const std::vector<double>& state) {
        PeakState s = PeakState::make(km, b0.win, b0.rho, state);
        tr.mass.push_back(s.mass);
        tr.states.push_back(std::move(s));
    };
    record(b);

    const double t_final = t_out.back();
    double dt = std::min(1e-6, (t_out.size() > 1 ? t_out[1] : t_final) / 4.0);
    if (!(dt > 0.0)) dt = 1e-6;
    long steps = 0;

    for (size_t gi = 1; gi < t_out.size(); ++gi) {
        double t = t_out[gi - 1];
        const double t_end = t_out[gi];
        while (t < t_end) {
            if (++steps > 20000000) throw integration_error("evolve_b: step budget exhausted");
            const double h = std::min(dt, t_end - t);
            const bool ok = trbdf2_b(tb, b, h, big) && trbdf2_b(tb, b, 0.5 * h, mid) &&
                            trbdf2_b(tb, mid, 0.5 * h, half);
            if (!ok) {
                dt = 0.3 * h;
            } else {
                double est = 0.0, bmax = 0.0;
                double minv = 0.0;
                int minsite = b0.win.lo;
                for (size_t i = 0; i < m; ++i) {
                    est = std::max(est, std::abs(big[i] - half[i]));
                    bmax = std::max(bmax, std::abs(b[i]));
                    if (half[i] < minv) {
                        minv = half[i];
                        minsite = b0.win.lo + int(i);
                    }
                }
                // near a stationary state the doubling estimate bottoms out at
                // the roundoff of the six Newton-stage solves, on the same
                // max(1, |x|) scale Newton stops on; without the floor the
                // controller rejects forever and dt underflows
                const double target = tol * h + 256.0 * std::numeric_limits<double>::epsilon() *
                                                    std::max(1.0, bmax);
                if (minv < 0.0) {
                    // negativity is grounds for rejection, never for clipping
                    dt = 0.5 * h;
                } else if (est <= target) {
                    b = half;
                    t += h;
                    dt = h * ((est > 0.0) ? std::clamp(0.9 * std::cbrt(target / est), 0.2, 5.0) : 5.0);
                } else {
                    dt = h * std::clamp(0.9 * std::cbrt(target / est), 0.2, 5.0);
                }
                if (minv < 0.0 && dt < 1e-13 * std::max(1.0, t_final))
                    throw integration_error("evolve_b: persistent negativity at site " +
                                            std::to_string(minsite));
            }
            if (dt < 1e-13 * std::max(1.0, t_final))
                throw integration_error("evolve_b: step underflow at t = " + std::to_string(t));
        }
        record(b);
    }
    return tr;
}

PeakTrajectory evolve_b(const KernelModel& km, const PeakState& b0, double T, double tol) {
    if (!(T > 0.0) || !std::isfinite(T)) throw validation_error("evolve_b: T must be positive");
    std::vector<double> grid(81);
    for (int i = 0; i <= 80; ++i) grid[size_t(i)] = T * double(i) / 80.0;
    return evolve_b_grid(km, b0, grid, tol);
}

Decomposition decompose(const KernelModel& km, const PeakState& s) {
    km.validate();
    if (s.win.size() < 6) throw validation_error("decompose: window needs at least 6 sites");
    for (int n = s.win.hi - 5; n <= s.win.hi; ++n)
        if (!(s.at(n) > 0.0))
            throw validation_error("decompose: right tail not strictly positive at site " +
                                   std::to_string(n));

    const std::vector<double> T = tail_sums(km, s.rho, s.win);
    auto log_E = [&](int n) { return -std::exp2(double(n)) * T[size_t(n - s.win.lo)]; };

    // A_hat(n) = -2^{-n} ln(b_n zeta_n / (2 E_n)), then one Richardson step
    // in 2^{-n} per adjacent pair
    double ahat[6];
    for (int j = 0; j < 6; ++j) {
        const int n = s.win.hi - 5 + j;
        ahat[j] = -std::exp2(-double(n)) *
                  (std::log(s.at(n)) + ln_zeta(km, n, s.rho) - M_LN2 - log_E(n));
    }
    double ext[5], lo = std::numeric_limits<double>::infinity(), hi = -lo;
    detail::KahanSum acc;
    for (int j = 0; j < 5; ++j) {
        ext[j] = 2.0 * ahat[j + 1] - ahat[j];
        acc.add(ext[j]);
        lo = std::min(lo, ext[j]);
        hi = std::max(hi, ext[j]);
    }
    const double A = acc.value() / 5.0;
    const double spread = hi - lo;
    if (!(A > 0.0) || !(spread <= 1e-3 * std::abs(A)))
        throw decomposition_error("decompose: tail parameter extrapolants spread " +
                                  std::to_string(spread) + " exceeds 1e-3 |A|");

    Decomposition d;
    d.A = A;
    d.residual = spread;
    d.eps = LatticeSeq(s.win);
    d.y = LatticeSeq(s.win);
    for (int n = s.win.lo; n <= s.win.hi; ++n) {
        const double log_a = M_LN2 + log_E(n) - ln_zeta(km, n, s.rho) - A * std::exp2(double(n));
        const double e = (s.at(n) > 0.0) ? std::expm1(std::log(s.at(n)) - log_a) : -1.0;
        d.eps.at(n) = e;
        d.y.at(n) = std::exp2(-double(n)) * e;
    }
    return d;
}

namespace {

// h with precomputed alpha tables; ghosts copy the edge values
void h_eval(const KernelModel& km, double rho, Window win, const std::vector<double>& y,
            const std::vector<double>& alpha_A, const std::vector<double>& alpha_M,
            std::vector<double>& out) {
    KernelModel k2 = km;
    k2.rho = rho;
    const int m = win.size();
    for (int i = 0; i < m; ++i) {
        const size_t u = size_t(i);
        const int n = win.lo + i;
        const double gn = km.gamma_rate(k2.xi_node(n));
        const double gn1 = km.gamma_rate(k2.xi_node(n + 1));
        const double ym = (i > 0) ? y[u - 1] : y[u];
        const double yp = (i < m - 1) ? y[u + 1] : y[u];
        const double quad = std::exp2(double(n)) * gn / 4.0 *
                            (0.25 * ym * ym - 4.0 * alpha_A[u] * (gn1 / gn) * y[u] * y[u]);
        const double lin = 2.0 * gn1 * (alpha_M[u] - alpha_A[u]) * (y[u] - yp);
        out[u] = quad + lin;
    }
}

} // namespace

LatticeSeq h_seq(const KernelModel& km, const LatticeSeq& y, double A, double A_M, double rho) {
    km.validate();
    if (!(A_M > 0.0)) throw validation_error("h_seq: A_M must be positive");
    if (!(A >= 0.5 * A_M))
        throw validation_error("h_seq: hypothesis A >= A_M/2 violated");
    const std::vector<double> alpha_A = alpha_values(km, A, rho, y.win);
    const std::vector<double> alpha_M = alpha_values(km, A_M, rho, y.win);
    std::vector<double> out(size_t(y.win.size()));
    h_eval(km, rho, y.win, y.v, alpha_A, alpha_M, out);
    return LatticeSeq(y.win, std::move(out));
}

std::vector<double> picard_time_grid(double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw validation_error("picard_time_grid: T must be positive");
    std::vector<double> ts{0.0};
    for (double t = 1e-4; t < T; t *= 1.3) ts.push_back(t);
    if (ts.back() < T) ts.push_back(T);
    return ts;
}

namespace {

struct Interpolant {
    const std::vector<double>& t;
    const std::vector<std::vector<double>>& Y;
    const std::vector<double>& L;
    const std::vector<double>& A;

    // piecewise-linear state, Lambda, A at time s
    void eval(double s, std::vector<double>& y, double& lam, double& a) const {
        size_t k = size_t(std::upper_bound(t.begin(), t.end(), s) - t.begin());
        if (k == 0) {
            y = Y[0];
            lam = L[0];
            a = A[0];
            return;
        }
        if (k >= t.size()) {
            y = Y.back();
            lam = L.back();
            a = A.back();
            return;
        }
        const double w = (s - t[k - 1]) / (t[k] - t[k - 1]);
        const size_t m = Y[0].size();
        y.resize(m);
        for (size_t i = 0; i < m; ++i) y[i] = (1.0 - w) * Y[k - 1][i] + w * Y[k][i];
        lam = (1.0 - w) * L[k - 1] + w * L[k];
        a = (1.0 - w) * A[k - 1] + w * A[k];
    }
};

std::vector<double> cumtrapz_from(double A0, const std::vector<double>& t,
                                  const std::vector<double>& L) {
    std::vector<double> A(t.size());
    A[0] = A0;
    for (size_t i = 1; i < t.size(); ++i)
        A[i] = A[i - 1] + 0.5 * (L[i - 1] + L[i]) * (t[i] - t[i - 1]);
    return A;
}

} // namespace

FixedPointState picard_fixed_point(const KernelModel& km, const LatticeSeq& y0, double A0,
                                   double M, const std::vector<double>& t_grid,
                                   int max_sweeps, double delta0, int jobs) {
    km.validate();
    y0.check_finite();
    if (!(A0 > 0.0)) throw validation_error("picard_fixed_point: A0 must be positive");
    if (!(M > 0.0)) throw validation_error("picard_fixed_point: M must be positive");
    if (max_sweeps < 2) throw validation_error("picard_fixed_point: max_sweeps must be >= 2");
    if (t_grid.size() < 3 || t_grid[0] != 0.0)
        throw validation_error("picard_fixed_point: t_grid must start at 0 with >= 3 nodes");
    for (size_t i = 0; i + 1 < t_grid.size(); ++i)
        if (!(t_grid[i] < t_grid[i + 1]))
            throw validation_error("picard_fixed_point: t_grid must be strictly increasing");

    const Window win = y0.win;
    const double beta = km.beta;
    const double A_M = solve_A_for_mass(km, M, 0.0, 1e-12);

    // admissibility
    if (!(norm_theta(y0, 1.0) <= delta0))
        throw validation_error("picard_fixed_point: ||y0||_1 exceeds delta0");
    if (!(std::abs(A0 - A_M) <= delta0))
        throw validation_error("picard_fixed_point: |A0 - A_M| exceeds delta0");

    // stationary tables at A0 and A_M on the window
    const std::vector<double> T = tail_sums(km, 0.0, win);
    const int m = win.size();
    std::vector<double> log_E(static_cast<size_t>(m)), lnz(static_cast<size_t>(m)), alpha_M(static_cast<size_t>(m));
    for (int n = win.lo; n <= win.hi; ++n) {
        const size_t i = size_t(n - win.lo);
        const double p2 = std::exp2(double(n));
        log_E[i] = -p2 * T[i];
        lnz[i] = ln_zeta(km, n, 0.0);
        alpha_M[i] = std::exp(log_E[i] - A_M * p2);
    }

    // mass constraint M = sum 2^n a_n(A0) (1 + 2^n y0_n)
    {
        detail::KahanSum acc;
        for (int n = win.lo; n <= win.hi; ++n) {
            const size_t i = size_t(n - win.lo);
            const double p2 = std::exp2(double(n));
            const double log_a0 = M_LN2 + log_E[i] - A0 * p2 - lnz[i];
            acc.add(std::exp(double(n) * M_LN2 + log_a0) * (1.0 + p2 * y0.at(n)));
        }
        if (!(std::abs(acc.value() - M) <= 1e-8 * M))
            throw validation_error("picard_fixed_point: initial data violates the mass constraint");
    }

    const linear::Operator op = linear::build_operator(km, win, A_M, 0.0);

    // decay rate for the g(t) envelope: fitted on a deterministic run of the
    // linearized problem for the same M
    double nu_fit;
    {
        const Window fw{-25, 12};
        const linear::Operator fop = linear::build_operator(km, fw, A_M, 0.0);
        LatticeSeq yf(fw);
        for (int n = fw.lo; n <= fw.hi; ++n) yf.at(n) = ((n & 1) == 0) ? 1.0 : -1.0;
        std::vector<double> tg;
        for (int i = 0; i <= 20; ++i) tg.push_back(0.5 * double(i));
        const Trajectory tr = linear::evolve(fop, yf, tg, 1e-8);
        nu_fit = linear::fit_decay_rate(tr, linear::weighted_mean(fop, yf), 0.0, 1.0, 10.0);
        if (!(nu_fit > 0.0)) throw convergence_error("picard_fixed_point: fitted decay rate not positive");
    }

    const size_t nt = t_grid.size();
    std::vector<double> g_env(nt);
    g_env[0] = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < nt; ++i)
        g_env[i] = (1.0 + std::pow(t_grid[i], -(beta - 1.0) / beta)) *
                   std::exp(-nu_fit * t_grid[i] / 2.0);

    const double pref = (1.0 - std::exp2(beta)) / 4.0;
    const double evolve_tol = 1e-10;
    const int nq = 65;

    auto semigroup = [&](const std::vector<double>& w, double tau) {
        LatticeSeq v(win, w);
        if (tau <= 0.0) return v;
        return linear::evolve(op, v, std::vector<double>{0.0, tau}, evolve_tol).states[1];
    };

    auto h_at = [&](const std::vector<double>& y, double A) {
        if (!(A >= 0.5 * A_M))
            throw validation_error("picard_fixed_point: A(t) fell below A_M/2");
        std::vector<double> alpha_A(static_cast<size_t>(m)), out(static_cast<size_t>(m));
        for (int n = win.lo; n <= win.hi; ++n) {
            const size_t i = size_t(n - win.lo);
            alpha_A[i] = std::exp(log_E[i] - A * std::exp2(double(n)));
        }
        h_eval(km, 0.0, win, y, alpha_A, alpha_M, out);
        return out;
    };

    // iterate: constant-in-t initial guess (y0, 0)
    std::vector<std::vector<double>> Y(nt, y0.v), Ynew(nt);
    std::vector<double> L(nt, 0.0), Lnew(nt), A_path;

    FixedPointState fps;
    fps.t_grid = t_grid;
    fps.A_M = A_M;
    fps.nu_fit = nu_fit;

    int nthreads = jobs > 0 ? jobs : int(std::thread::hardware_concurrency());
    nthreads = std::clamp(nthreads, 1, 16);

    double prev_diff = std::numeric_limits<double>::infinity();
    int rising = 0;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        A_path = cumtrapz_from(A0, t_grid, L);
        const Interpolant it{t_grid, Y, L, A_path};

        // t = 0: the y map is the identity on the initial data
        Ynew[0] = y0.v;
        Lnew[0] = pref * linear::D_beta_inf(y0, beta).value;

        std::atomic<size_t> next{1};
        std::exception_ptr eptr;
        std::mutex emu;
        auto worker = [&]() {
            std::vector<double> ys, v(static_cast<size_t>(m)), hv;
            try {
                for (size_t i; (i = next.fetch_add(1)) < nt;) {
                    const double t = t_grid[i];
                    const LatticeSeq Sy0 = semigroup(y0.v, t);
                    const double sinf0 = linear::extrapolate_S_inf(Sy0, beta).value;
                    std::vector<double> acc_y(size_t(m), 0.0);
                    double acc_d = 0.0;
                    detail::graded_simpson(t, beta, nq, [&](double w, double tau) {
                        double lam, a;
                        it.eval(t - tau, ys, lam, a);
                        hv = h_at(ys, a);
                        for (int q = 0; q < m; ++q) {
                            const size_t u = size_t(q);
                            v[u] = lam * std::exp2(double(win.lo + q)) * ys[u] + hv[u];
                        }
                        const LatticeSeq Sv = semigroup(v, tau);
                        const double sinf = linear::extrapolate_S_inf(Sv, beta).value;
                        for (size_t u = 0; u < size_t(m); ++u) acc_y[u] += w * (Sv.v[u] - sinf);
                        acc_d += w * linear::D_beta_inf(Sv, beta).value;
                    });
                    std::vector<double> yn(static_cast<size_t>(m));
                    for (size_t u = 0; u < size_t(m); ++u) yn[u] = (Sy0.v[u] - sinf0) + acc_y[u];
                    Ynew[i] = std::move(yn);
                    Lnew[i] = pref * (linear::D_beta_inf(Sy0, beta).value + acc_d);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lk(emu);
                if (!eptr) eptr = std::current_exception();
            }
        };
        std::vector<std::thread> pool;
        for (int k = 0; k < nthreads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        if (eptr) std::rethrow_exception(eptr);

        // X-norm distance between sweeps, weighted by the envelope
        double dy = 0.0, dl = 0.0;
        for (size_t i = 1; i < nt; ++i) {
            LatticeSeq d(win);
            for (size_t u = 0; u < size_t(m); ++u) d.v[u] = Ynew[i][u] - Y[i][u];
            dy = std::max(dy, norm_theta(d, beta) / g_env[i]);
            dl = std::max(dl, std::abs(Lnew[i] - L[i]) / g_env[i]);
        }
        const double diff = dy + dl;
        fps.sweep_diffs.push_back(diff);
        if (sweep >= 2) {
            const double factor = diff / prev_diff;
            fps.contraction_factors.push_back(factor);
            rising = (factor >= 1.0) ? rising + 1 : 0;
            if (rising >= 2)
                throw contraction_error(
                    "picard_fixed_point: expansion on two consecutive sweeps; shrink the initial "
                    "data or delta0");
        }
        Y = Ynew;
        L = Lnew;
        fps.sweeps = sweep;
        prev_diff = diff;
        if (diff < 1e-8) break;
        if (sweep == max_sweeps)
            throw convergence_error("picard_fixed_point: sweep budget exhausted before 1e-8");
    }

    fps.Lambda_path = L;
    fps.A_path = cumtrapz_from(A0, t_grid, L);
    fps.y_path.times = t_grid;
    for (size_t i = 0; i < nt; ++i) {
        LatticeSeq s(win, Y[i]);
        fps.y_path.states.push_back(s);
        fps.y_path.wmean.push_back(linear::weighted_mean(op, s));
        fps.y_path.norm0.push_back(norm_theta(s, 0.0));
        fps.y_path.s_limit.push_back(linear::extrapolate_S_inf(s, beta).value);
    }
    return fps;
}

MainTheoremReport verify_main_theorem(const KernelModel& km, const PeakState& b0,
                                      double T, double tol) {
    km.validate();
    const PeakTrajectory tr = evolve_b(km, b0, T, tol);
    MainTheoremReport rep;
    rep.M = b0.mass;
    rep.A_M = solve_A_for_mass(km, b0.mass, b0.rho, 1e-12);
    rep.times = tr.times;
    rep.mass = tr.mass;

    const double beta = km.beta;
    for (const PeakState& s : tr.states) {
        const Decomposition d = decompose(km, s);
        rep.A_path.push_back(d.A);
        double left = 0.0, right = 0.0;
        for (int n = s.win.lo; n <= s.win.hi; ++n) {
            const double e = std::abs(d.eps.at(n));
            if (n <= 0) left = std::max(left, e);
            if (n >= 0) right = std::max(right, std::exp2((beta - 1.0) * double(n)) * e);
        }
        rep.envelope.push_back(left + right);
    }

    std::vector<double> xs, ys;
    const double t_fit = std::max(1.0, T / 4.0);
    for (size_t i = 0; i < tr.times.size(); ++i) {
        if (tr.times[i] < t_fit || !(rep.envelope[i] > 0.0)) continue;
        xs.push_back(tr.times[i]);
        ys.push_back(std::log(rep.envelope[i]));
    }
    rep.nu_hat = (xs.size() >= 2) ? -detail::fit_line(xs, ys).c1 : 0.0;
    rep.terminal_A_gap = std::abs(rep.A_path.back() - rep.A_M);
    double drift = 0.0;
    for (double ms : tr.mass) drift = std::max(drift, std::abs(ms - tr.mass[0]));
    rep.mass_drift = drift / tr.mass[0];
    return rep;
}

} // namespace peaks
} // namespace peaklab
