#pragma once

#include "peaklab/kernels.hpp"
#include "peaklab/lattice.hpp"
#include "peaklab/stationary.hpp"

#include <vector>

namespace peaklab {
namespace linear {

// Window realization of the linearized operator
//   (L y)_n = (gamma(xi_n)/4) [ y_{n-1} - y_n - sigma_n (y_n - y_{n+1}) ]
// around the stationary profile with tail parameter A_M, closed with
// discrete Neumann ghosts y_{lo-1} := y_{lo}, y_{hi+1} := y_{hi}.
//
// The closure keeps the row sums of L zero, so constants stay exact
// equilibria and the weighted mean below is conserved exactly by any
// one-step rational time scheme.
struct Operator {
    KernelModel kernel;
    Window win;
    double A_M = 0.0;
    double rho = 0.0;
    std::vector<double> gam;    // gamma(xi_n), xi_n = 2^{n+rho}
    std::vector<double> sig;    // sigma_n = 8 alpha_n(A_M) gamma(xi_{n+1})/gamma(xi_n)
    std::vector<double> log_a;  // stationary log-amplitudes, for the weights
    std::vector<double> sub, diag, sup; // closed tridiagonal rows of L

    // w_n = 2^{2(n+rho)} a_n; satisfies w^T L = 0 on the closed window
    double weight(int n) const;
};

Operator build_operator(const KernelModel& km, Window win, double A_M, double rho = 0.0);

// sigma_n at a single site (rho = 0 lattice)
double sigma(const KernelModel& km, int n, double A_M);
// sigma over a profile's window, using its A and rho
std::vector<double> sigma_seq(const PeakProfile& p);

LatticeSeq apply(const Operator& op, const LatticeSeq& y);
// one-shot variant on the rho = 0 lattice
LatticeSeq L_apply(const KernelModel& km, const LatticeSeq& y, double A_M);

// m_bar = sum 2^{2n} a_n y_n / sum 2^{2n} a_n
double weighted_mean(const Operator& op, const LatticeSeq& y);
double weighted_mean(const LatticeSeq& y, const PeakProfile& p);

// Solves dy/dt = L y at the requested times (t_grid[0] must be 0) with
// TR-BDF2 substepping; the step-doubling error estimate is kept below
// tol * dt (error per unit time).  L-stable, so the 2^{beta n} stiffness
// at the right edge only costs accuracy-limited steps.
Trajectory evolve(const Operator& op, const LatticeSeq& y0,
                  const std::vector<double>& t_grid, double tol);
Trajectory evolve(const KernelModel& km, const LatticeSeq& y0, double A_M,
                  const std::vector<double>& t_grid, double tol, double rho = 0.0);

// Right-tail limit under the model y_n ~ y_inf + c 2^{-beta n}: each index
// pair gives (2^beta y_{n+1} - y_n)/(2^beta - 1); value is the mean over the
// last three pairs, spread the max-min disagreement.  The extraction never
// refuses: on data outside the tail regime (rough transients near t = 0)
// spread is the caller's measure of how little the value means.
struct TailLimit {
    double value = 0.0;
    double spread = 0.0;
};
TailLimit extrapolate_S_inf(const LatticeSeq& y, double beta);

// Rate coefficient c of the 2^{-beta n} approach: mean of 2^{beta n}(y_n - y_inf)
// over the three sites below the window edge (the edge site carries the
// closure error and is excluded).
TailLimit D_beta_inf(const LatticeSeq& y, double beta);

// [sum 2^{2n} a_n (y_n - m_bar)^2] / [sum 2^{2n} gamma(xi_{n+1}) a_{n+1} (y_{n+1}-y_n)^2]
double poincare_ratio(const LatticeSeq& y, const PeakProfile& p);

// nu_hat = - d/dt ln ||y(t) - m_bar||_theta fitted on grid times in [t0, t1]
double fit_decay_rate(const Trajectory& tr, double mbar, double theta, double t0, double t1);

} // namespace linear
} // namespace peaklab
