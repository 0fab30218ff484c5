#include "peaklab/measures.hpp"
#include "peaklab/errors.hpp"

#include "detail/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace peaklab {
namespace measures {

GridMeasure GridMeasure::make(std::vector<double> grid, std::vector<double> weights,
                              MeasureKind kind) {
    if (grid.size() != weights.size())
        throw validation_error("GridMeasure: grid and weight counts differ");
    for (size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i]))
            throw validation_error("GridMeasure: non-finite grid position");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw validation_error("GridMeasure: grid must be strictly increasing");
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
            throw validation_error("GridMeasure: weights must be nonnegative and finite");
    }
    GridMeasure g;
    g.grid = std::move(grid);
    g.weights = std::move(weights);
    g.kind = kind;
    return g;
}

GridMeasure to_log(const GridMeasure& f) {
    std::vector<double> x(f.size()), w(f.size());
    for (size_t i = 0; i < f.size(); ++i) {
        if (!(f.grid[i] > 0.0))
            throw validation_error("to_log: support must be strictly positive");
        x[i] = std::log2(f.grid[i]);
        w[i] = f.weights[i] / M_LN2;
    }
    return GridMeasure::make(std::move(x), std::move(w), f.kind);
}

GridMeasure from_log(const GridMeasure& g) {
    std::vector<double> xi(g.size()), m(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
        xi[i] = std::exp2(g.grid[i]);
        m[i] = g.weights[i] * M_LN2;
    }
    return GridMeasure::make(std::move(xi), std::move(m), g.kind);
}

GridMeasure measure_from_peaks(const peaks::PeakState& s) {
    std::vector<double> x(s.b.size()), w = s.b;
    for (int n = s.win.lo; n <= s.win.hi; ++n) x[size_t(n - s.win.lo)] = double(n) + s.rho;
    return GridMeasure::make(std::move(x), std::move(w), MeasureKind::atomic);
}

double norm_g(const GridMeasure& g) {
    std::map<long, double> cells;
    detail::KahanSum right;
    for (size_t i = 0; i < g.size(); ++i) {
        const double x = g.grid[i];
        if (x >= 0.0)
            right.add(g.weights[i]);
        else
            cells[long(std::floor(x))] += g.weights[i];
    }
    double sup = 0.0;
    for (const auto& [n, w] : cells) sup = std::max(sup, std::exp2(double(-n)) * w);
    return sup + right.value();
}

double moment(const GridMeasure& g, double r) {
    detail::KahanSum acc;
    for (size_t i = 0; i < g.size(); ++i) acc.add(std::exp2(r * g.grid[i]) * g.weights[i]);
    return acc.value();
}

std::vector<TestFunction> test_bank() {
    std::vector<TestFunction> bank;
    bank.push_back({"mass", [](double x) { return std::exp2(x); }});
    bank.push_back({"number", [](double) { return 1.0; }});
    for (double c : {-16.0, -8.0, 0.0, 4.0, 8.0}) {
        bank.push_back({"bump_at_" + std::to_string(int(c)), [c](double x) {
                            const double u = (x - c) / 2.0;
                            if (std::abs(u) >= 1.0) return 0.0;
                            return std::exp(1.0 - 1.0 / (1.0 - u * u));
                        }});
    }
    bank.push_back({"ramp_smooth", [](double x) {
                        const double p = std::exp2(x);
                        return p / (1.0 + p);
                    }});
    bank.push_back({"ramp_piecewise", [](double x) {
                        return std::clamp((x + 1.0) / 2.0, 0.0, 1.0);
                    }});
    return bank;
}

namespace {

void check_growth(const GridMeasure& g, const TestFunction& phi) {
    if (g.size() == 0) return;
    const double lo = g.grid.front(), hi = g.grid.back();
    for (double x : {lo - 10.0, lo, 0.5 * (lo + hi), hi, hi + 1.0}) {
        const double v = phi.f(x);
        if (!std::isfinite(v) || std::abs(v) > 1e6 * (1.0 + std::exp2(x)))
            throw validation_error("weak_residual: test function '" + phi.name +
                                   "' violates the growth condition");
    }
}

} // namespace

WeakResidual weak_residual(const KernelModel& km, const GridMeasure& g,
                           const TestFunction& phi) {
    km.validate();
    check_growth(g, phi);
    detail::KahanSum acc;
    double scale = 0.0;
    auto put = [&](double term) {
        acc.add(term);
        scale = std::max(scale, std::abs(term));
    };
    const size_t N = g.size();
    // coagulation: pairs with |x_i - x_j| < 1 (the kernel cutoff support)
    for (size_t i = 0; i < N; ++i) {
        if (g.weights[i] == 0.0) continue;
        const double xi = std::exp2(g.grid[i]);
        for (size_t j = i; j < N && g.grid[j] - g.grid[i] < 1.0; ++j) {
            if (g.weights[j] == 0.0) continue;
            const double eta = std::exp2(g.grid[j]);
            const double K = km.K_coag(xi, eta);
            if (K == 0.0) continue;
            const double mult = (i == j) ? 1.0 : 2.0;
            const double c = mult * (M_LN2 / 2.0) * K * g.weights[i] * g.weights[j];
            put(c * (phi.f(std::log2(xi + eta)) - phi.f(g.grid[i]) - phi.f(g.grid[j])));
        }
    }
    // fragmentation: halving shift x -> x-1
    for (size_t i = 0; i < N; ++i) {
        if (g.weights[i] == 0.0) continue;
        const double c = km.gamma_rate(std::exp2(g.grid[i])) / 4.0 * g.weights[i];
        put(-c * (phi.f(g.grid[i]) - 2.0 * phi.f(g.grid[i] - 1.0)));
    }
    return {acc.value(), scale};
}

double psi_R(double xi, double R) {
    if (!(R > 1.0)) throw validation_error("psi_R: R must exceed 1");
    if (xi <= R - 1.0) return 1.0;
    if (xi >= R) return 0.0;
    const double s = xi - (R - 1.0);
    return (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s);
}

namespace {

// append/merge an atom into a sorted grid under construction
void deposit(std::map<double, double>& atoms, double x, double w) {
    if (w == 0.0) return;
    auto it = atoms.lower_bound(x - 1e-9);
    if (it != atoms.end() && std::abs(it->first - x) < 1e-9)
        it->second += w;
    else
        atoms.emplace(x, w);
}

bool has_site(const std::map<double, double>& atoms, double x) {
    auto it = atoms.lower_bound(x - 1e-9);
    return it != atoms.end() && std::abs(it->first - x) < 1e-9;
}

} // namespace

TruncatedOps truncated_operators(const KernelModel& km, const GridMeasure& g, double R) {
    km.validate();
    if (!(R > 1.0)) throw validation_error("truncated_operators: R must exceed 1");
    const size_t N = g.size();
    TruncatedOps ops;
    ops.A_field.assign(N, 0.0);
    std::map<double, double> gain;

    std::vector<double> xi(N), psi(N);
    for (size_t i = 0; i < N; ++i) {
        xi[i] = std::exp2(g.grid[i]);
        psi[i] = psi_R(xi[i], R);
    }
    for (size_t i = 0; i < N; ++i) {
        detail::KahanSum conv;
        for (size_t j = 0; j < N; ++j) {
            if (std::abs(g.grid[j] - g.grid[i]) >= 1.0) continue;
            conv.add(km.K_coag(xi[i], xi[j]) * g.weights[j]);
        }
        ops.A_field[i] = (M_LN2 * conv.value() + km.gamma_rate(xi[i]) / 4.0) * psi[i];
    }
    for (size_t i = 0; i < N; ++i) {
        if (g.weights[i] == 0.0) continue;
        // fragmentation source at x-1
        deposit(gain, g.grid[i] - 1.0,
                km.gamma_rate(xi[i]) / 2.0 * psi[i] * g.weights[i]);
        // coagulation targets; the cutoff rides on each pair member separately
        for (size_t j = i; j < N && g.grid[j] - g.grid[i] < 1.0; ++j) {
            if (g.weights[j] == 0.0) continue;
            const double K = km.K_coag(xi[i], xi[j]);
            if (K == 0.0) continue;
            const double ps = (i == j) ? psi[i] : (psi[i] + psi[j]);
            deposit(gain, std::log2(xi[i] + xi[j]),
                    (M_LN2 / 2.0) * K * ps * g.weights[i] * g.weights[j]);
        }
    }
    std::vector<double> gx, gw;
    for (const auto& [x, w] : gain) {
        gx.push_back(x);
        gw.push_back(w);
    }
    ops.B_measure = GridMeasure::make(std::move(gx), std::move(gw), MeasureKind::atomic);
    return ops;
}

namespace {

struct MildSystem {
    const KernelModel& km;
    double R;
    std::vector<double> x, xi, psi, gam;

    MildSystem(const KernelModel& k, std::vector<double> xs, double Rv) : km(k), R(Rv) {
        x = std::move(xs);
        const size_t N = x.size();
        xi.resize(N);
        psi.resize(N);
        gam.resize(N);
        for (size_t i = 0; i < N; ++i) {
            xi[i] = std::exp2(x[i]);
            psi[i] = psi_R(xi[i], R);
            gam[i] = km.gamma_rate(xi[i]);
        }
    }

    // loss field A_i[w] and gain G_i[w] on the fixed support
    void fields(const std::vector<double>& w, std::vector<double>& A,
                std::vector<double>& G) const {
        const size_t N = x.size();
        A.assign(N, 0.0);
        G.assign(N, 0.0);
        for (size_t i = 0; i < N; ++i) {
            double conv = 0.0;
            const size_t j0 = size_t(std::lower_bound(x.begin(), x.end(), x[i] - 1.0) -
                                     x.begin());
            for (size_t j = j0; j < N && x[j] - x[i] < 1.0; ++j) {
                if (std::abs(x[j] - x[i]) >= 1.0) continue;
                conv += km.K_coag(xi[i], xi[j]) * w[j];
            }
            A[i] = (M_LN2 * conv + gam[i] / 4.0) * psi[i];
        }
        for (size_t i = 0; i < N; ++i) {
            if (w[i] == 0.0) continue;
            // fragmentation lands exactly one unit down; find the site if present
            const double tf = x[i] - 1.0;
            const auto itf = std::lower_bound(x.begin(), x.end(), tf - 1e-9);
            if (itf != x.end() && std::abs(*itf - tf) < 1e-9)
                G[size_t(itf - x.begin())] += gam[i] / 2.0 * psi[i] * w[i];
            for (size_t j = i; j < N && x[j] - x[i] < 1.0; ++j) {
                if (w[j] == 0.0) continue;
                const double K = km.K_coag(xi[i], xi[j]);
                if (K == 0.0) continue;
                const double tc = std::log2(xi[i] + xi[j]);
                const auto itc = std::lower_bound(x.begin(), x.end(), tc - 1e-9);
                if (itc == x.end() || std::abs(*itc - tc) >= 1e-9) continue;
                const double ps = (i == j) ? psi[i] : (psi[i] + psi[j]);
                G[size_t(itc - x.begin())] +=
                    (M_LN2 / 2.0) * K * ps * w[i] * w[j];
            }
        }
    }
};

// Picard iteration of the mild map on one subinterval with nt nodes.
// A and G are frozen from the previous iterate (piecewise-constant midpoint
// exponent, piecewise-linear gain), so each update is an exact integral.
// Returns false when the sweep fails to contract.
bool mild_interval(const MildSystem& sys, const std::vector<double>& w0, double h_total,
                   int nt, double tol, std::vector<std::vector<double>>& W) {
    const size_t N = w0.size();
    std::vector<double> nw(N); // norm weights: 2^{-floor(x)} left of 0, else 1
    for (size_t i = 0; i < N; ++i)
        nw[i] = sys.x[i] < 0.0 ? std::exp2(-std::floor(sys.x[i])) : 1.0;
    const size_t Q = size_t(nt);
    const double h = h_total / double(nt - 1);
    W.assign(Q, w0);
    std::vector<std::vector<double>> A(Q), G(Q);
    std::vector<std::vector<double>> Wn(Q);
    double prev = std::numeric_limits<double>::infinity();
    int rising = 0;
    for (int sweep = 0; sweep < 80; ++sweep) {
        for (size_t q = 0; q < Q; ++q) sys.fields(W[q], A[q], G[q]);
        for (size_t q = 0; q < Q; ++q) Wn[q].assign(N, 0.0);
        Wn[0] = w0;
        for (size_t i = 0; i < N; ++i) {
            double I = 0.0;      // accumulated exponent
            double part = 0.0;   // integral term, carried forward
            Wn[0][i] = w0[i];
            for (size_t p = 0; p + 1 < Q; ++p) {
                const double abar = 0.5 * (A[p][i] + A[p + 1][i]);
                const double z = abar * h;
                double phi1, phi2; // int e^{-abar(h-s)} ds, int e^{-abar(h-s)} s ds
                if (std::abs(z) > 1e-5) {
                    phi1 = -std::expm1(-z) / abar;
                    phi2 = (h - phi1) / abar;
                } else {
                    phi1 = h * (1.0 - z / 2.0 + z * z / 6.0);
                    phi2 = h * h * (0.5 - z / 3.0 + z * z / 8.0);
                }
                const double g0 = G[p][i], g1 = (G[p + 1][i] - G[p][i]) / h;
                const double seg = g0 * phi1 + g1 * phi2;
                part = part * std::exp(-z) + seg;
                I += z;
                Wn[p + 1][i] = w0[i] * std::exp(-I) + part;
            }
        }
        double diff = 0.0;
        for (size_t q = 0; q < Q; ++q) {
            double d = 0.0;
            for (size_t i = 0; i < N; ++i)
                d = std::max(d, nw[i] * std::abs(Wn[q][i] - W[q][i]));
            diff = std::max(diff, d);
        }
        W.swap(Wn);
        if (diff < tol) return true;
        rising = (diff > prev) ? rising + 1 : 0;
        if (rising >= 2) return false;
        prev = diff;
    }
    return false;
}

} // namespace

MeasureTrajectory mild_picard_step(const KernelModel& km, const GridMeasure& g0, double R,
                                   double T, double tol, double theta) {
    km.validate();
    if (!(R > 1.0)) throw validation_error("mild_picard_step: R must exceed 1");
    if (!(T > 0.0) || !std::isfinite(T))
        throw validation_error("mild_picard_step: T must be positive");
    if (!(tol > 0.0)) throw validation_error("mild_picard_step: tol must be positive");
    if (!(theta > km.beta + 1.0))
        throw validation_error("mild_picard_step: theta must exceed beta + 1");
    if (!std::isfinite(norm_g(g0)) || !std::isfinite(moment(g0, theta)))
        throw validation_error("mild_picard_step: initial norm or theta-moment not finite");

    const double M_tot = moment(g0, 1.0);
    const double mass_floor = 1e-18 * (M_tot + 1e-300);

    // live support
    std::map<double, double> atoms;
    for (size_t i = 0; i < g0.size(); ++i) deposit(atoms, g0.grid[i], g0.weights[i]);
    if (atoms.empty()) atoms.emplace(0.0, 0.0);

    MeasureTrajectory tr;
    auto record = [&](double t) {
        std::vector<double> gx, gw;
        for (const auto& [x, w] : atoms) {
            gx.push_back(x);
            gw.push_back(std::max(w, 0.0));
        }
        GridMeasure g = GridMeasure::make(std::move(gx), std::move(gw), MeasureKind::atomic);
        tr.times.push_back(t);
        tr.mass.push_back(moment(g, 1.0));
        tr.norms.push_back(norm_g(g));
        tr.states.push_back(std::move(g));
    };
    record(0.0);

    double t = 0.0;
    double h_try = T;
    const double h_min = std::max(1e-9 * T, 1e-12);
    int guard = 0;
    while (t < T) {
        if (++guard > 2000000) throw convergence_error("mild_picard_step: interval budget exhausted");
        double h = std::min(h_try, T - t);

        // close the support under the fragmentation shift and the coagulation
        // targets before integrating: a gain aimed at an absent atom would be
        // dropped, which leaks mass.  Each candidate channel is gated by an
        // upper bound on the mass it could move during this interval, and
        // freshly implied sites carry that bound as a stand-in weight so the
        // cascade is followed until every frontier channel is below the
        // floor, not just one generation out.
        std::map<double, double> est(atoms);
        std::vector<double> frontier;
        for (const auto& [x, w] : atoms)
            if (w > 0.0) frontier.push_back(x);
        while (!frontier.empty()) {
            std::map<double, double> born;
            for (double x : frontier) {
                const double w = est.find(x)->second;
                if (w <= 0.0) continue;
                const double xiv = std::exp2(x);
                const double ps = psi_R(xiv, R);
                if (ps <= 0.0) continue;
                const double gm = km.gamma_rate(xiv);
                const double dw_frag = gm / 2.0 * ps * w * h;
                if (dw_frag * std::exp2(x - 1.0) >= mass_floor &&
                    !has_site(est, x - 1.0))
                    deposit(born, x - 1.0, dw_frag);
                for (const auto& [y, u] : est) {
                    if (u <= 0.0 || std::abs(y - x) >= 1.0) continue;
                    const double K = km.K_coag(xiv, std::exp2(y));
                    if (K == 0.0) continue;
                    const double target = std::log2(xiv + std::exp2(y));
                    const double dw_coag = M_LN2 * K * (ps + 1.0) * w * u * h;
                    if (dw_coag * std::exp2(target) >= mass_floor &&
                        !has_site(est, target))
                        deposit(born, target, dw_coag);
                }
            }
            frontier.clear();
            for (const auto& [x, w] : born) {
                est.emplace(x, w);
                frontier.push_back(x);
            }
            if (est.size() > 20000)
                throw precision_error("mild_picard_step: support closure exceeded 20000 atoms");
        }
        for (const auto& [x, w] : est)
            if (!has_site(atoms, x)) atoms.emplace(x, 0.0);

        std::vector<double> xs, w0;
        for (const auto& [x, w] : atoms) {
            xs.push_back(x);
            w0.push_back(w);
        }
        const MildSystem sys(km, xs, R);

        // contract on [t, t+h]; refine nodes until the halved-step answer moves
        // less than the per-interval share of tol
        std::vector<std::vector<double>> W;
        bool ok = false;
        double used_h = h;
        while (true) {
            int nt = 9;
            ok = mild_interval(sys, w0, used_h, nt, 1e-3 * tol, W);
            if (ok) {
                while (nt < 4097) {
                    std::vector<std::vector<double>> W2;
                    const int nt2 = 2 * nt - 1;
                    if (!mild_interval(sys, w0, used_h, nt2, 1e-3 * tol, W2)) {
                        ok = false;
                        break;
                    }
                    double dmax = 0.0;
                    for (size_t i = 0; i < w0.size(); ++i) {
                        const double nwi =
                            xs[i] < 0.0 ? std::exp2(-std::floor(xs[i])) : 1.0;
                        dmax = std::max(dmax, nwi * std::abs(W2.back()[i] - W.back()[i]));
                    }
                    W.swap(W2);
                    nt = nt2;
                    if (dmax <= 0.3 * tol * (used_h / T) * (M_tot + 1.0)) break;
                }
            }
            if (ok) break;
            used_h *= 0.5;
            if (used_h < h_min)
                throw convergence_error(
                    "mild_picard_step: repeated contraction failure below the minimum interval");
        }

        size_t idx = 0;
        for (auto& [x, w] : atoms) w = std::max(W.back()[idx++], 0.0);
        t += used_h;
        record(t);
        h_try = (used_h < h) ? used_h * 1.5 : h_try * 1.5;
    }
    return tr;
}

MomentBoundReport moment_bound_report(const MeasureTrajectory& tr, double theta) {
    if (tr.states.empty()) throw validation_error("moment_bound_report: empty trajectory");
    MomentBoundReport rep{0.0, 0.0, 0.0, theta};
    for (const GridMeasure& g : tr.states) {
        rep.sup_norm = std::max(rep.sup_norm, norm_g(g));
        rep.sup_moment_theta = std::max(rep.sup_moment_theta, moment(g, theta));
        rep.sup_moment_1 = std::max(rep.sup_moment_1, moment(g, 1.0));
    }
    if (!std::isfinite(rep.sup_norm) || !std::isfinite(rep.sup_moment_theta))
        throw precision_error("moment_bound_report: non-finite supremum");
    return rep;
}

} // namespace measures
} // namespace peaklab
