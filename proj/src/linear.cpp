#include "peaklab/linear.hpp"
#include "peaklab/errors.hpp"

#include "detail/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace peaklab {
namespace linear {

double Operator::weight(int n) const {
    return std::exp(2.0 * (double(n) + rho) * M_LN2 + log_a[size_t(n - win.lo)]);
}

Operator build_operator(const KernelModel& km, Window win, double A_M, double rho) {
    km.validate();
    if (!(A_M > 0.0) || !std::isfinite(A_M)) throw validation_error("build_operator: A_M must be positive");
    if (win.hi < win.lo + 1) throw validation_error("build_operator: window needs at least two sites");

    Operator op;
    op.kernel = km;
    op.kernel.rho = rho;
    op.win = win;
    op.A_M = A_M;
    op.rho = rho;

    const std::vector<double> T = tail_sums(km, rho, win);
    const size_t m = size_t(win.size());
    op.gam.resize(m);
    op.sig.resize(m);
    op.log_a.resize(m);
    op.sub.resize(m);
    op.diag.resize(m);
    op.sup.resize(m);

    for (int n = win.lo; n <= win.hi; ++n) {
        const size_t i = size_t(n - win.lo);
        const double xi = op.kernel.xi_node(n);
        const double xi1 = op.kernel.xi_node(n + 1);
        const double p2 = std::exp2(double(n));
        const double log_alpha = -(A_M + T[i]) * p2;
        op.gam[i] = km.gamma_rate(xi);
        op.sig[i] = 8.0 * std::exp(log_alpha) * km.gamma_rate(xi1) / km.gamma_rate(xi);
        op.log_a[i] = M_LN2 + log_alpha - ln_zeta(km, n, rho);
    }
    for (size_t i = 0; i < m; ++i) {
        const double c = op.gam[i] / 4.0;
        op.sub[i] = c;
        // sigma below machine epsilon cannot move any state by an ulp but
        // would spoil the exact cancellation against the diagonal, so the
        // coupling is flushed to zero
        const double s = op.sig[i] >= std::numeric_limits<double>::epsilon() ? op.sig[i] : 0.0;
        op.sup[i] = c * s;
        // the diagonal is the exact negative of the row's stored neighbors
        // (ghosts y_{lo-1} = y_lo, y_{hi+1} = y_hi already folded), so row
        // sums vanish in floating point and constants are exact equilibria
        op.diag[i] = -((i > 0 ? op.sub[i] : 0.0) + (i + 1 < m ? op.sup[i] : 0.0));
    }
    return op;
}

double sigma(const KernelModel& km, int n, double A_M) {
    km.validate();
    if (!(A_M > 0.0) || !std::isfinite(A_M)) throw validation_error("sigma: A_M must be positive");
    const Window w{n, n};
    const double T = tail_sums(km, 0.0, w)[0];
    const double alpha = std::exp(-(A_M + T) * std::exp2(double(n)));
    return 8.0 * alpha * km.gamma_rate(std::exp2(double(n) + 1.0)) / km.gamma_rate(std::exp2(double(n)));
}

std::vector<double> sigma_seq(const PeakProfile& p) {
    std::vector<double> s(size_t(p.win.size()));
    for (int n = p.win.lo; n <= p.win.hi; ++n) {
        const size_t i = size_t(n - p.win.lo);
        const double xi = p.kernel.xi_node(n);
        const double xi1 = p.kernel.xi_node(n + 1);
        s[i] = 8.0 * p.alpha_seq[i] * p.kernel.gamma_rate(xi1) / p.kernel.gamma_rate(xi);
    }
    return s;
}

LatticeSeq apply(const Operator& op, const LatticeSeq& y) {
    if (!(y.win == op.win)) throw validation_error("apply: window mismatch");
    const int m = y.size();
    LatticeSeq out(y.win);
    // difference form: neighbor gaps vanish identically on constants, so
    // L 1 = 0 holds exactly instead of up to coefficient roundoff
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        if (i > 0) acc += op.sub[size_t(i)] * (y.v[size_t(i - 1)] - y.v[size_t(i)]);
        if (i < m - 1) acc += op.sup[size_t(i)] * (y.v[size_t(i + 1)] - y.v[size_t(i)]);
        out.v[size_t(i)] = acc;
    }
    return out;
}

LatticeSeq L_apply(const KernelModel& km, const LatticeSeq& y, double A_M) {
    return apply(build_operator(km, y.win, A_M, 0.0), y);
}

double weighted_mean(const Operator& op, const LatticeSeq& y) {
    if (!(y.win == op.win)) throw validation_error("weighted_mean: window mismatch");
    detail::KahanSum num, den;
    for (int n = op.win.lo; n <= op.win.hi; ++n) {
        const double w = op.weight(n);
        num.add(w * y.at(n));
        den.add(w);
    }
    return num.value() / den.value();
}

double weighted_mean(const LatticeSeq& y, const PeakProfile& p) {
    if (!(y.win == p.win)) throw validation_error("weighted_mean: window mismatch");
    detail::KahanSum num, den;
    for (int n = p.win.lo; n <= p.win.hi; ++n) {
        const double w = std::exp(2.0 * (double(n) + p.rho) * M_LN2 + p.log_a_at(n));
        num.add(w * y.at(n));
        den.add(w);
    }
    return num.value() / den.value();
}

namespace {

// TR-BDF2 with the classic gamma = 2 - sqrt(2); both stages share the
// matrix I - d dt L with d = 1 - 1/sqrt(2).
struct Stepper {
    const Operator& op;
    size_t m;
    std::vector<double> msub, mdiag, msup, rhs, scratch, ly, ystar;
    double built_dt = -1.0;

    explicit Stepper(const Operator& o)
        : op(o), m(size_t(o.win.size())), msub(m), mdiag(m), msup(m), rhs(m), scratch(m), ly(m), ystar(m) {}

    void build(double dt) {
        const double d = 1.0 - 1.0 / std::sqrt(2.0);
        const double c = d * dt;
        for (size_t i = 0; i < m; ++i) {
            msub[i] = -c * op.sub[i];
            mdiag[i] = 1.0 - c * op.diag[i];
            msup[i] = -c * op.sup[i];
        }
        built_dt = dt;
    }

    void mul_L(const std::vector<double>& y, std::vector<double>& out) const {
        // difference form, as in apply(): constants are annihilated exactly
        for (size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            if (i > 0) acc += op.sub[i] * (y[i - 1] - y[i]);
            if (i + 1 < m) acc += op.sup[i] * (y[i + 1] - y[i]);
            out[i] = acc;
        }
    }

    void step(const std::vector<double>& y, double dt, std::vector<double>& out) {
        const double d = 1.0 - 1.0 / std::sqrt(2.0);
        const double g = 2.0 - std::sqrt(2.0);
        const double c1 = 1.0 / (g * (2.0 - g));
        const double c2 = (1.0 - g) * (1.0 - g) / (g * (2.0 - g));
        if (dt != built_dt) build(dt);

        mul_L(y, ly);
        for (size_t i = 0; i < m; ++i) rhs[i] = y[i] + d * dt * ly[i];
        if (!detail::solve_tridiag(msub, mdiag, msup, rhs, scratch))
            throw integration_error("evolve: singular stage matrix");
        ystar = rhs;

        for (size_t i = 0; i < m; ++i) rhs[i] = c1 * ystar[i] - c2 * y[i];
        if (!detail::solve_tridiag(msub, mdiag, msup, rhs, scratch))
            throw integration_error("evolve: singular stage matrix");
        out = rhs;
    }
};

void check_grid(const std::vector<double>& t_grid) {
    if (t_grid.empty() || t_grid[0] != 0.0)
        throw validation_error("evolve: t_grid must start at 0");
    for (size_t i = 0; i + 1 < t_grid.size(); ++i)
        if (!(t_grid[i] < t_grid[i + 1]) || !std::isfinite(t_grid[i + 1]))
            throw validation_error("evolve: t_grid must be finite and strictly increasing");
}

} // namespace

Trajectory evolve(const Operator& op, const LatticeSeq& y0,
                  const std::vector<double>& t_grid, double tol) {
    if (!(y0.win == op.win)) throw validation_error("evolve: window mismatch");
    if (!(tol > 0.0)) throw validation_error("evolve: tol must be positive");
    check_grid(t_grid);
    y0.check_finite();

    Stepper st(op);
    const size_t m = st.m;
    std::vector<double> y = y0.v, ybig(m), yhalf(m), ytmp(m);

    Trajectory tr;
    auto record = [&](const std::vector<double>& state) {
        LatticeSeq s(op.win, state);
        tr.states.push_back(s);
        tr.wmean.push_back(weighted_mean(op, s));
        tr.norm0.push_back(norm_theta(s, 0.0));
        double slim = std::numeric_limits<double>::quiet_NaN();
        try {
            slim = extrapolate_S_inf(s, op.kernel.beta).value;
        } catch (const error&) {
        }
        tr.s_limit.push_back(slim);
    };
    tr.times = t_grid;
    record(y);

    const double t_final = t_grid.back();
    double dt = std::min(1e-6, (t_grid.size() > 1 ? (t_grid[1] - t_grid[0]) : t_final) / 4.0);
    if (!(dt > 0.0)) dt = 1e-6;
    long steps = 0;

    for (size_t gi = 1; gi < t_grid.size(); ++gi) {
        double t = t_grid[gi - 1];
        const double t_end = t_grid[gi];
        while (t < t_end) {
            if (++steps > 20000000)
                throw integration_error("evolve: step budget exhausted");
            const double h = std::min(dt, t_end - t);
            st.step(y, h, ybig);
            st.step(y, 0.5 * h, ytmp);
            st.step(ytmp, 0.5 * h, yhalf);
            double est = 0.0, ymax = 0.0;
            size_t worst = 0;
            for (size_t i = 0; i < m; ++i) {
                const double e = std::abs(ybig[i] - yhalf[i]);
                ymax = std::max(ymax, std::abs(y[i]));
                if (e > est) {
                    est = e;
                    worst = i;
                }
            }
            // the step-doubling estimate bottoms out at the roundoff of the
            // stage solves, so the demand is capped there: without the floor,
            // data with O(1) content in the stiffest modes would push h into
            // a region where est is pure noise and never accepts
            const double target = tol * h + 64.0 * std::numeric_limits<double>::epsilon() * ymax;
            if (est <= target) {
                y = yhalf;
                t += h;
            }
            const double fac = (est > 0.0)
                                   ? std::clamp(0.9 * std::cbrt(target / est), 0.2, 5.0)
                                   : 5.0;
            dt = h * fac;
            if (dt < 1e-13 * std::max(1.0, t_final))
                throw integration_error("evolve: step underflow near site " +
                                        std::to_string(op.win.lo + int(worst)));
        }
        record(y);
    }
    return tr;
}

Trajectory evolve(const KernelModel& km, const LatticeSeq& y0, double A_M,
                  const std::vector<double>& t_grid, double tol, double rho) {
    return evolve(build_operator(km, y0.win, A_M, rho), y0, t_grid, tol);
}

TailLimit extrapolate_S_inf(const LatticeSeq& y, double beta) {
    if (y.size() < 4) throw validation_error("extrapolate_S_inf: need at least 4 sites");
    if (!(beta > 1.0 && beta < 2.0)) throw validation_error("extrapolate_S_inf: beta out of range");
    const double w = std::exp2(beta);
    double p[3];
    for (int j = 0; j < 3; ++j) {
        const int n = y.win.hi - j;
        p[j] = (w * y.at(n) - y.at(n - 1)) / (w - 1.0);
    }
    TailLimit out;
    out.value = (p[0] + p[1] + p[2]) / 3.0;
    out.spread = std::max({p[0], p[1], p[2]}) - std::min({p[0], p[1], p[2]});
    return out;
}

TailLimit D_beta_inf(const LatticeSeq& y, double beta) {
    if (y.size() < 5) throw validation_error("D_beta_inf: need at least 5 sites");
    const TailLimit yinf = extrapolate_S_inf(y, beta);
    double c[3];
    for (int j = 1; j <= 3; ++j) {
        const int n = y.win.hi - j;
        c[j - 1] = std::exp2(beta * double(n)) * (y.at(n) - yinf.value);
    }
    TailLimit out;
    out.value = (c[0] + c[1] + c[2]) / 3.0;
    out.spread = std::max({c[0], c[1], c[2]}) - std::min({c[0], c[1], c[2]});
    return out;
}

double poincare_ratio(const LatticeSeq& y, const PeakProfile& p) {
    if (!(y.win == p.win)) throw validation_error("poincare_ratio: window mismatch");
    const double mbar = weighted_mean(y, p);
    detail::KahanSum num, den;
    for (int n = p.win.lo; n <= p.win.hi; ++n) {
        const double w = std::exp(2.0 * (double(n) + p.rho) * M_LN2 + p.log_a_at(n));
        const double d = y.at(n) - mbar;
        num.add(w * d * d);
        if (n < p.win.hi) {
            const double wg = std::exp(2.0 * (double(n) + p.rho) * M_LN2 + p.log_a_at(n + 1)) *
                              p.kernel.gamma_rate(p.kernel.xi_node(n + 1));
            const double dv = y.at(n + 1) - y.at(n);
            den.add(wg * dv * dv);
        }
    }
    if (!(den.value() > 0.0))
        throw validation_error("poincare_ratio: constant input, zero difference energy");
    return num.value() / den.value();
}

double fit_decay_rate(const Trajectory& tr, double mbar, double theta, double t0, double t1) {
    std::vector<double> xs, ys;
    for (size_t i = 0; i < tr.times.size(); ++i) {
        const double t = tr.times[i];
        if (t < t0 || t > t1) continue;
        LatticeSeq d = tr.states[i];
        for (double& v : d.v) v -= mbar;
        const double nrm = norm_theta(d, theta);
        if (!(nrm > 0.0)) continue;
        xs.push_back(t);
        ys.push_back(std::log(nrm));
    }
    if (xs.size() < 2) throw validation_error("fit_decay_rate: fewer than 2 grid times in [t0,t1]");
    return -detail::fit_line(xs, ys).c1;
}

} // namespace linear
} // namespace peaklab
