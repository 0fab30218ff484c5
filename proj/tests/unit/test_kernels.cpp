#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "peaklab/errors.hpp"
#include "peaklab/kernels.hpp"

#include <cmath>

using namespace peaklab;

// Frozen oracle values below were computed with 50-digit arithmetic from the
// defining formulas and rounded to 17 significant digits.

TEST_CASE("parameter validation") {
    KernelModel km;
    CHECK_NOTHROW(km.validate());

    auto bad = [](auto&& mutate) {
        KernelModel m;
        mutate(m);
        CHECK_THROWS_AS(m.validate(), validation_error);
    };
    bad([](KernelModel& m) { m.alpha = 0.0; });
    bad([](KernelModel& m) { m.alpha = 1.0; });
    bad([](KernelModel& m) { m.alpha = -0.2; });
    bad([](KernelModel& m) { m.beta = 1.0; });
    bad([](KernelModel& m) { m.beta = 2.0; });
    bad([](KernelModel& m) { m.k0 = 0.0; });
    bad([](KernelModel& m) { m.k0 = -1.0; });
    bad([](KernelModel& m) { m.gamma0 = 0.0; });
    bad([](KernelModel& m) { m.rho = 1.0; });
    bad([](KernelModel& m) { m.rho = -0.1; });
    bad([](KernelModel& m) { m.alpha = std::nan(""); });
}

TEST_CASE("rate functions at simple arguments") {
    KernelModel km; // alpha=1/2, beta=3/2, k0=gamma0=1
    CHECK(km.k_rate(1.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(km.k_rate(4.0) == doctest::Approx(1.0 + 8.0).epsilon(1e-15));
    CHECK(km.gamma_rate(1.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(km.gamma_rate(4.0) == doctest::Approx(9.0).epsilon(1e-15));

    KernelModel alt;
    alt.alpha = 0.25;
    alt.beta = 1.75;
    alt.k0 = 0.7;
    alt.gamma0 = 2.0;
    alt.validate();
    CHECK(alt.k_rate(16.0) == doctest::Approx(0.7 + std::pow(16.0, 1.25)).epsilon(1e-15));
    CHECK(alt.gamma_rate(16.0) == doctest::Approx(2.0 + std::pow(16.0, 1.75)).epsilon(1e-15));
}

TEST_CASE("selection factor support") {
    KernelModel km;
    CHECK(km.cutoff_Q(0.0) == doctest::Approx(1.0));
    CHECK(km.cutoff_Q(0.2) == doctest::Approx(1.0 - 9.0 * 0.04).epsilon(1e-15));
    CHECK(km.cutoff_Q(1.0 / 3.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(km.cutoff_Q(-1.0 / 3.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(km.cutoff_Q(0.5) == 0.0);
    CHECK(km.cutoff_Q(-2.0) == 0.0);
}

TEST_CASE("coagulation kernel: diagonal value and support window") {
    KernelModel km;
    // K(xi, xi) = k(xi) / (2 xi)
    for (double xi : {0.25, 1.0, 3.0, 64.0}) {
        CHECK(km.K_coag(xi, xi) ==
              doctest::Approx(km.k_rate(xi) / (2.0 * xi)).epsilon(1e-14));
    }
    // vanishes outside eta in (xi/2, 2 xi); the endpoint values are zero up
    // to roundoff in the Q argument
    CHECK(std::abs(km.K_coag(1.0, 0.5)) < 1e-14);
    CHECK(std::abs(km.K_coag(1.0, 2.0)) < 1e-14);
    CHECK(km.K_coag(1.0, 0.49) == 0.0);
    CHECK(km.K_coag(1.0, 2.01) == 0.0);
    CHECK(km.K_coag(1.0, 0.51) > 0.0);
    CHECK(km.K_coag(1.0, 1.9) > 0.0);
    // symmetry
    CHECK(km.K_coag(1.0, 1.3) == doctest::Approx(km.K_coag(1.3, 1.0)).epsilon(1e-15));
}

TEST_CASE("lattice nodes") {
    KernelModel km;
    CHECK(km.xi_node(0) == doctest::Approx(1.0));
    km.rho = 0.5;
    CHECK(km.xi_node(3) == doctest::Approx(std::pow(2.0, 3.5)).epsilon(1e-15));
    km.rho = 0.25;
    CHECK(km.xi_node(-2) == doctest::Approx(std::pow(2.0, -1.75)).epsilon(1e-15));
}

TEST_CASE("recurrence coefficient zeta against frozen values") {
    KernelModel km;
    CHECK(zeta(km, 0, 0.0) == doctest::Approx(0.36210545896489974).epsilon(1e-15));
    CHECK(zeta(km, 1, 0.0) == doctest::Approx(0.14742574819427998).epsilon(1e-15));
    CHECK(zeta(km, 0, 0.5) == doctest::Approx(0.22832443935592814).epsilon(1e-15));

    KernelModel alt;
    alt.alpha = 0.25;
    alt.beta = 1.75;
    alt.k0 = 0.7;
    alt.gamma0 = 2.0;
    CHECK(zeta(alt, 0, 0.0) == doctest::Approx(0.21969448824444584).epsilon(1e-15));
}

TEST_CASE("zeta matches its definition ln2 k(xi_n) / (xi_n gamma(xi_{n+1}))") {
    KernelModel km;
    for (int n = -12; n <= 12; n += 3) {
        for (double rho : {0.0, 0.25, 0.5, 0.75}) {
            const double xi = std::exp2(double(n) + rho);
            const double direct = M_LN2 * km.k_rate(xi) / (xi * km.gamma_rate(2.0 * xi));
            CHECK(zeta(km, n, rho) == doctest::Approx(direct).epsilon(1e-14));
            CHECK(std::exp(ln_zeta(km, n, rho)) ==
                  doctest::Approx(zeta(km, n, rho)).epsilon(1e-14));
        }
    }
}

TEST_CASE("amplitude-ratio coefficient theta against frozen values") {
    KernelModel km;
    CHECK(theta_coeff(km, 0, 0.0) == doctest::Approx(0.81426968052735446).epsilon(1e-15));
    CHECK(theta_coeff(km, -1, 0.0) == doctest::Approx(0.77190564267067028).epsilon(1e-15));
    CHECK(theta_coeff(km, 3, 0.5) == doctest::Approx(0.98933480966883747).epsilon(1e-15));
}

TEST_CASE("theta identities") {
    KernelModel km;
    for (int n = -6; n <= 8; n += 2) {
        // theta_n = 2 zeta_{n+1} / zeta_n
        CHECK(theta_coeff(km, n, 0.0) ==
              doctest::Approx(2.0 * zeta(km, n + 1, 0.0) / zeta(km, n, 0.0)).epsilon(1e-13));
        CHECK(std::exp(ln_theta(km, n, 0.0)) ==
              doctest::Approx(theta_coeff(km, n, 0.0)).epsilon(1e-14));
    }
    // theta -> 1 in both tails (k0/gamma0 dominate on the left, the pure
    // powers cancel against the prefactor 2 on the right), so ln theta -> 0;
    // the compensated form must keep digits there instead of returning the
    // cancellation noise of a naive ratio
    CHECK(std::abs(ln_theta(km, -40, 0.0)) < 1e-5);
    CHECK(std::abs(ln_theta(km, 40, 0.0)) < 1e-5);
    CHECK(std::abs(ln_theta(km, 20, 0.0)) < std::abs(ln_theta(km, 15, 0.0)));
    CHECK(std::abs(ln_theta(km, -41, 0.0)) < std::abs(ln_theta(km, -40, 0.0)));
}
