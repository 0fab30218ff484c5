#include "peaklab/kernels.hpp"
#include "peaklab/errors.hpp"

#include <cmath>
#include <string>

namespace peaklab {

namespace {

double require_positive(double xi, const char* who) {
    if (!(xi > 0.0) || !std::isfinite(xi))
        throw validation_error(std::string(who) + ": argument must be positive, got " +
                               std::to_string(xi));
    return xi;
}

} // namespace

void KernelModel::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw validation_error("KernelModel: alpha must lie in (0,1)");
    if (!(beta > 1.0 && beta < 2.0))
        throw validation_error("KernelModel: beta must lie in (1,2)");
    if (!(k0 > 0.0))
        throw validation_error("KernelModel: k0 must be positive");
    if (!(gamma0 > 0.0))
        throw validation_error("KernelModel: gamma0 must be positive");
    if (!(rho >= 0.0 && rho < 1.0))
        throw validation_error("KernelModel: rho must lie in [0,1)");
}

double KernelModel::k_rate(double xi) const {
    require_positive(xi, "k_rate");
    return k0 + std::pow(xi, alpha + 1.0);
}

double KernelModel::gamma_rate(double xi) const {
    require_positive(xi, "gamma_rate");
    return gamma0 + std::pow(xi, beta);
}

double KernelModel::cutoff_Q(double s) {
    double q = 1.0 - 9.0 * s * s;
    return q > 0.0 ? q : 0.0;
}

double KernelModel::K_coag(double xi, double eta) const {
    require_positive(xi, "K_coag");
    require_positive(eta, "K_coag");
    double sum = xi + eta;
    double q = cutoff_Q(2.0 * eta / sum - 1.0);
    if (q == 0.0)
        return 0.0;
    return k_rate(0.5 * sum) * q / sum;
}

double ln_zeta(const KernelModel& km, int n, double rho) {
    // ln(ln2) - (n+rho) ln2 + ln k(xi) - ln gamma(2 xi), with the rate logs
    // taken as ln(base) + log1p(power/base) so both lattice tails stay exact
    double e = double(n) + rho;
    double ab = km.alpha + 1.0;
    double ln_k = std::log(km.k0) + std::log1p(std::exp2(ab * e) / km.k0);
    double ln_g = std::log(km.gamma0) + std::log1p(std::exp2(km.beta * (e + 1.0)) / km.gamma0);
    return std::log(M_LN2) - e * M_LN2 + ln_k - ln_g;
}

double zeta(const KernelModel& km, int n, double rho) {
    return std::exp(ln_zeta(km, n, rho));
}

double ln_theta(const KernelModel& km, int n, double rho) {
    double e = double(n) + rho;
    double ab = km.alpha + 1.0;
    double b = km.beta;
    return std::log1p(std::exp2(ab * (e + 1.0)) / km.k0)
         - std::log1p(std::exp2(ab * e) / km.k0)
         + std::log1p(std::exp2(b * (e + 1.0)) / km.gamma0)
         - std::log1p(std::exp2(b * (e + 2.0)) / km.gamma0);
}

double theta_coeff(const KernelModel& km, int n, double rho) {
    return std::exp(ln_theta(km, n, rho));
}

} // namespace peaklab
