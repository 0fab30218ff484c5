#pragma once

#include "peaklab/kernels.hpp"
#include "peaklab/lattice.hpp"

#include <vector>

namespace peaklab {

// Value of the absolutely convergent series sum_j 2^{-j} ln theta_{j-1,rho}
// with recorded truncation indices: terms kept for j in [-J1, J2].
struct ThetaSeries {
    double value = 0.0;
    int J1 = 0;
    int J2 = 0;
};
ThetaSeries theta_series(const KernelModel& km, double rho, double tol);

// T(n) = sum_{j >= n+1} 2^{-j} ln theta_{j-1,rho} for every n in win,
// truncated when the neglected tail is below ~1e-15.  Index i = n - win.lo.
std::vector<double> tail_sums(const KernelModel& km, double rho, Window win);

// alpha_n(A) = exp(-A 2^n) * E_n,  E_n = exp(-2^n T(n))
std::vector<double> alpha_values(const KernelModel& km, double A, double rho, Window win);

// Stationary amplitude profile a_n = 2 alpha_n(A) / zeta_n on a window.
//
// The primary representation is logarithmic: for large A the amplitudes
// underflow doubles a few sites right of the mode, while every invariant
// (positivity, recurrence, ratio identity) is exact in log space.  The
// split  log a_n = log_u_n - A 2^n  with  log_u = ln2 + log_E - ln zeta
// keeps the A-independent factor bounded, so residuals are evaluated
// without ever forming the huge -A 2^n terms twice.
struct PeakProfile {
    KernelModel kernel;
    Window win;
    double A = 0.0;
    double rho = 0.0;
    double mass = 0.0;  // windowed sum of 2^{n+rho} a_n
    double Theta = 0.0; // full layer-ratio series, for the serialized header

    std::vector<double> log_a;      // ln a_n (always finite)
    std::vector<double> log_alpha;  // ln alpha_n(A)
    std::vector<double> log_E;      // -2^n T(n), bounded on the whole lattice
    std::vector<double> lnzeta;     // ln zeta_{n,rho}
    std::vector<double> a;          // exp(log_a); may flush to 0 far right
    std::vector<double> alpha_seq;  // exp(log_alpha)

    double log_a_at(int n) const { return log_a[size_t(n - win.lo)]; }
    double a_at(int n) const { return a[size_t(n - win.lo)]; }
    double alpha_at(int n) const { return alpha_seq[size_t(n - win.lo)]; }

    // max_n |zeta_n a_n^2 / a_{n+1} - 1|, evaluated in the bounded split
    double max_recurrence_residual() const;
    // max_n |a_{n+1}/a_n - 2 alpha_n|
    double max_ratio_residual() const;
};

PeakProfile profile_from_A(const KernelModel& km, double A, double rho, Window win);

// window on which the mass series has both relative tails below 1e-10
Window auto_window(const KernelModel& km, double A, double rho);

// M(A) = sum_n 2^{n+rho+1} alpha_n(A) / zeta_n on the auto window
double mass_of(const KernelModel& km, double A, double rho);

// inverse of mass_of by bisection on ln A; |mass_of(A) - M|/M < tol
double solve_A_for_mass(const KernelModel& km, double M, double rho, double tol);

// OLS fits of the two tail laws on the outermost 6 window points each:
//   left:  a_n / 2^n   ~ a_minus_inf (1 + A0 2^n)
//   right: ln a_n      ~ ln a_inf + (beta-alpha) n ln2 - A 2^n
struct TailFit {
    double a_minus_inf_hat = 0.0;
    double A0_hat = 0.0;
    double a_inf_hat = 0.0;
    double A_hat = 0.0;
    double resid_left = 0.0;
    double resid_right = 0.0;
};
TailFit fit_tail_constants(const PeakProfile& p);

// closed-form tail constants for cross-checks
double a_minus_inf(const KernelModel& km, double rho); // gamma0 2^{rho+1}/(k0 ln2)
double a_inf(const KernelModel& km, double rho);       // 2^beta 2^{(beta-alpha)(rho+1)}/ln2

} // namespace peaklab
