#pragma once

#include "peaklab/kernels.hpp"
#include "peaklab/lattice.hpp"

#include <functional>
#include <vector>

namespace peaklab {
namespace fundsol {

// Smallest n0 such that on [n0, n0+range] the fragmentation rates are
// strictly increasing and every ordered pair (n, m) satisfies
//   (1/2) 2^{beta(n-m)} <= gamma(2^n)/gamma(2^m) <= (3/2) 2^{beta(n-m)}.
int check_n0(const KernelModel& km, int range = 60);

// Source description for the simplified (sigma-free) lattice system.
struct FundSolSpec {
    int ell = 0;
    int n0 = 0;
    Window win;
    void validate() const; // ell >= n0 and win.lo >= ell
};

// Residue coefficients c_k, k = ell..n, of
//   Psi_n^{(ell)}(t) = sum_k c_k exp(-gamma(2^k) t / 4),
//   c_k = [gamma(2^k)/gamma(2^ell)] prod_{j != k} (1 - gamma(2^k)/gamma(2^j))^{-1}.
// The products alternate in sign and grow before the super-geometric decay
// wins, so n - ell is capped at 24 in double precision.
std::vector<double> residue_coeffs(const KernelModel& km, int n, int ell);

// Psi_n^{(ell)}(t); t = 0 returns the Kronecker delta by definition.
// Throws precision_error when the compensated-sum condition number
// sum|terms| / |result| exceeds 1e8.
double psi(const KernelModel& km, int n, int ell, double t);

// (gamma(2^ell)/4) * integral of Psi_n^{(ell)} over [0, inf), termwise
// exact; contract: equals 1 to 1e-8
double psi_integral_check(const KernelModel& km, int n, int ell);

// the same value by direct stiff integration of the lower-bidiagonal system
//   d Psi_m/dt = (gamma(2^m)/4)(Psi_{m-1} - Psi_m),  Psi(0) = delta_ell,
// an independent check path for the residue formula
double psi_by_ode(const KernelModel& km, int n, int ell, double t, double tol = 1e-10);

// limit of psi as n -> infinity, with the infinite products truncated when
// the remaining factors differ from 1 by less than ~1e-15
double psi_inf(const KernelModel& km, int ell, double t);

// rate coefficient of the 2^{-beta n} approach of psi to psi_inf:
//   -(2^beta - 1)^{-1} sum_k [gamma(2^k)^2/gamma(2^ell)] prod'(...) e^{-gamma(2^k)t/4}
double dbeta_psi(const KernelModel& km, int ell, double t);

// y_n(t) = (gamma(2^{l0})/4) int_0^t Psi_n^{(l0)}(t-s) lambda(s) ds
//        + sum_l Psi_n^{(l)}(t) y0_l
//        + int_0^t sum_l Psi_n^{(l)}(t-s) r_l(s) ds,   l0 = win.lo = n0 + 1.
// Integrals use the graded substitution u = (t-s)^{1-1/beta} with a
// composite Simpson rule on nq nodes.  lambda_fn and source_r may be null.
Trajectory duhamel_solve(const KernelModel& km,
                         const std::function<double(double)>& lambda_fn,
                         const std::function<LatticeSeq(double)>& source_r,
                         const LatticeSeq& y0,
                         const std::vector<double>& t_grid,
                         int nq = 129);

} // namespace fundsol
} // namespace peaklab
