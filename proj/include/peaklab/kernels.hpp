#pragma once

#include <cmath>

namespace peaklab {

// Rate model for near-diagonal coagulation and halving fragmentation:
//   k(xi)     = k0 + xi^(alpha+1)
//   gamma(xi) = gamma0 + xi^beta
//   Q(s)      = max(0, 1 - 9 s^2)
//   K(xi,eta) = k((xi+eta)/2) Q(2 eta/(xi+eta) - 1) / (xi+eta)
// rho shifts the dyadic lattice: node n lives at xi = 2^(n+rho).
struct KernelModel {
    double alpha = 0.5;
    double beta = 1.5;
    double k0 = 1.0;
    double gamma0 = 1.0;
    double rho = 0.0;

    // throws validation_error unless
    // alpha in (0,1), beta in (1,2), k0 > 0, gamma0 > 0, rho in [0,1)
    void validate() const;

    double k_rate(double xi) const;     // xi > 0
    double gamma_rate(double xi) const; // xi > 0
    static double cutoff_Q(double s);
    double K_coag(double xi, double eta) const; // zero unless xi/2 < eta < 2 xi

    double xi_node(int n) const { return std::exp2(double(n) + rho); }
};

// Lattice coefficients of the amplitude recurrence a_{n+1} = zeta_n a_n^2,
//   zeta(n) = ln2 * k(2^{n+rho}) / (2^{n+rho} * gamma(2^{n+rho+1})),
// and the layer ratio theta_n = 2 zeta_{n+1} / zeta_n.
// rho is passed explicitly; KernelModel::rho is ignored by these.
double ln_zeta(const KernelModel& km, int n, double rho);
double zeta(const KernelModel& km, int n, double rho);

// ln theta_n in the cancelled form
//   log1p(xi_{n+1}^{a+1}/k0) - log1p(xi_n^{a+1}/k0)
// + log1p((2 xi_n)^b/g0)     - log1p((2 xi_{n+1})^b/g0).
// The naive log(2 zeta_{n+1}/zeta_n) loses every significant digit at both
// lattice tails, and the 2^{-j} weights of the series built on it amplify
// that noise without bound; this form is exact up to a few ulp everywhere.
double ln_theta(const KernelModel& km, int n, double rho);
double theta_coeff(const KernelModel& km, int n, double rho);

} // namespace peaklab
