#include "tomo/povm.hpp"
#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace tomo;
using Catch::Approx;

namespace {

// Independent construction of the efficiency-corrected point operator as an
// explicit dense Kraus sum over the loss operators at tau = eta.
fock::Matrix kraus_sum_point_operator(double x, double theta, int t, double eta) {
    const auto psi = fock::wavefunctions(x, t);
    fock::Matrix projector = (psi * psi.transpose()).cast<fock::Complex>();
    const fock::Matrix rotated = fock::rotate_operator(projector, theta);
    fock::Matrix out = fock::Matrix::Zero(t + 1, t + 1);
    for (const auto& e : states::loss_kraus_operators(eta, t))
        out += e.adjoint() * rotated * e;
    return out;
}

}  // namespace

TEST_CASE("point_povm at unit efficiency is the rotated projector density", "[povm]") {
    const int t = 6;
    const double x = 0.8;
    const auto psi = fock::wavefunctions(x, t);

    const auto ideal = povm::point_povm(x, 0.0, t, 1.0);
    for (int m = 0; m <= t; ++m)
        for (int n = 0; n <= t; ++n)
            CHECK(ideal(m, n).real() == Approx(psi[m] * psi[n]).margin(1e-14));

    // rotation oracle: rotate_operator applied to the theta = 0 operator
    const double theta = 1.1;
    const auto rotated = povm::point_povm(x, theta, t, 1.0);
    const auto oracle = fock::rotate_operator(ideal, theta);
    CHECK((rotated - oracle).cwiseAbs().maxCoeff() < 1e-13);
    for (int m = 0; m <= t; ++m)
        for (int n = 0; n <= t; ++n) {
            const fock::Complex expected =
                psi[m] * psi[n] * std::polar(1.0, (m - n) * theta);
            CHECK(std::abs(rotated(m, n) - expected) < 1e-13);
        }
}

TEST_CASE("point_povm equals the explicit Kraus sum", "[povm]") {
    const int t = 9;
    for (double eta : {1.0, 0.9, 0.6}) {
        for (double x : {-2.3, 0.0, 1.7}) {
            for (double theta : {0.0, 0.9, 2.8}) {
                const auto fast = povm::point_povm(x, theta, t, eta);
                const auto oracle = kraus_sum_point_operator(x, theta, t, eta);
                CHECK((fast - oracle).cwiseAbs().maxCoeff() < 1e-8);
                CHECK(fock::is_hermitian(fast, 1e-12));
                CHECK(fock::min_eigenvalue(fast) > -1e-10);
            }
        }
    }
}

TEST_CASE("efficiency duality: Tr(Pi_eta rho) = Tr(Pi_ideal loss(rho))", "[povm]") {
    const int t = 8;
    rng::Stream stream(314);
    for (int trial = 0; trial < 8; ++trial) {
        const auto rho = test_helpers::random_density(t + 1, stream);
        const double x = stream.uniform(-3.0, 3.0);
        const double theta = stream.uniform(0.0, std::numbers::pi);
        const double eta = stream.uniform(0.5, 1.0);
        const double lhs = (povm::point_povm(x, theta, t, eta) * rho.matrix()).trace().real();
        const double rhs = (povm::point_povm(x, theta, t, 1.0) *
                            states::apply_loss(rho, eta).matrix())
                               .trace()
                               .real();
        CHECK(lhs == Approx(rhs).margin(1e-8));
    }
}

TEST_CASE("point density normalizes to one over the quadrature axis", "[povm]") {
    const int t = 6;
    fock::Matrix vac = fock::Matrix::Zero(t + 1, t + 1);
    vac(0, 0) = 1.0;
    const fock::DensityMatrix vacuum(vac);
    const double integral = test_helpers::adaptive_simpson(
        [&](double x) {
            return (povm::point_povm(x, 0.0, t, 0.9) * vacuum.matrix()).trace().real();
        },
        -10.0, 10.0, 1e-9);
    CHECK(integral == Approx(1.0).margin(1e-6));
}

TEST_CASE("integrated_povm completeness and vacuum symmetry", "[povm]") {
    const int t = 10;
    const int order = povm::default_quadrature_order(t);

    // completeness over the effective support, split into subintervals so the
    // quadrature stays accurate
    for (double eta : {1.0, 0.9}) {
        fock::Matrix sum = fock::Matrix::Zero(t + 1, t + 1);
        const int pieces = 24;
        for (int k = 0; k < pieces; ++k) {
            const double a = -12.0 + 24.0 * k / pieces;
            const double b = -12.0 + 24.0 * (k + 1) / pieces;
            sum += povm::integrated_povm(a, b, 0.7, t, eta, order);
        }
        CHECK((sum - fock::Matrix::Identity(t + 1, t + 1)).cwiseAbs().maxCoeff() < 1e-6);
    }

    fock::Matrix vac = fock::Matrix::Zero(t + 1, t + 1);
    vac(0, 0) = 1.0;
    const auto half_line = povm::integrated_povm(0.0, 12.0, 0.0, t, 1.0, order);
    CHECK((half_line * vac).trace().real() == Approx(0.5).margin(1e-6));

    CHECK_THROWS_AS(povm::integrated_povm(0.0, 1.0, 0.0, t, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(povm::integrated_povm(1.0, 0.0, 0.0, t, 1.0, 20), std::invalid_argument);
}

TEST_CASE("integrated_povm matches an adaptive-quadrature oracle", "[povm]") {
    const int t = 7;
    rng::Stream stream(2718);
    const auto rho = test_helpers::random_density(t + 1, stream);
    for (const auto& [a, b] : {std::pair{-1.5, -0.2}, std::pair{0.3, 1.9}, std::pair{-0.4, 0.4}}) {
        for (double eta : {1.0, 0.9}) {
            const double theta = stream.uniform(0.0, std::numbers::pi);
            const auto op = povm::integrated_povm(a, b, theta, t, eta,
                                                  povm::default_quadrature_order(t));
            const double direct = (op * rho.matrix()).trace().real();
            const double oracle = test_helpers::adaptive_simpson(
                [&](double x) {
                    return (povm::point_povm(x, theta, t, eta) * rho.matrix()).trace().real();
                },
                a, b, 1e-10);
            CHECK(direct == Approx(oracle).margin(1e-7));
        }
    }
}

TEST_CASE("center operator approximates the integral at small widths", "[povm]") {
    const int t = 6;
    const double eta = 0.9, theta = 0.4;

    // Taylor consistency at width 1e-3
    const auto center = povm::center_povm_for_bin(0.6, 0.601, theta, t, eta);
    const auto integral = povm::integrated_povm(0.6, 0.601, theta, t, eta, 20);
    CHECK((center - integral).cwiseAbs().maxCoeff() < 1e-7);

    // vacuum density at the origin: width * pi^(-1/2)
    fock::Matrix vac = fock::Matrix::Zero(t + 1, t + 1);
    vac(0, 0) = 1.0;
    const double width = 1e-3;
    const auto origin = povm::center_povm_for_bin(-width / 2, width / 2, 0.0, t, 1.0);
    CHECK((origin * vac).trace().real() ==
          Approx(width / std::sqrt(std::numbers::pi)).epsilon(1e-6));
    CHECK(width / std::sqrt(std::numbers::pi) == Approx(width * 0.56419).epsilon(1e-4));

    // vacuum is phase invariant
    const double p0 = (povm::center_povm_for_bin(-1.0, 1.0, 0.0, t, 1.0) * vac).trace().real();
    for (double theta2 : {0.3, 1.2, 2.9})
        CHECK((povm::center_povm_for_bin(-1.0, 1.0, theta2, t, 1.0) * vac).trace().real() ==
              Approx(p0).margin(1e-12));
}

TEST_CASE("build_bin_operator_set skips empty bins and caches", "[povm]") {
    binning::PhaseHistogram hist;
    hist.theta = 0.3;
    hist.edges = {-1.0, -0.5, 0.0, 0.5, 1.0};
    hist.counts = {3, 0, 2, 1};
    hist.n_samples = 6;

    povm::OperatorCache cache;
    const auto set =
        povm::build_bin_operator_set({hist}, povm::BinOperatorMode::integral, 5, 0.9, &cache);
    REQUIRE(set.phases.size() == 1);
    CHECK(set.total_operators() == 3);  // the empty bin is skipped
    CHECK(cache.size() == 3);
    for (const auto& bin : set.phases[0].bins) {
        CHECK(fock::is_hermitian(*bin.op, 1e-12));
        CHECK(fock::min_eigenvalue(*bin.op) > -1e-10);
    }

    // second build with identical edges hits the cache
    const auto set2 =
        povm::build_bin_operator_set({hist}, povm::BinOperatorMode::integral, 5, 0.9, &cache);
    CHECK(cache.size() == 3);
    CHECK(set2.phases[0].bins[0].op.get() == set.phases[0].bins[0].op.get());
}

TEST_CASE("bin set completeness with tails in integral mode", "[povm]") {
    const int t = 5;
    const double eta = 0.9;
    const double xmax = sampling::quadrature_range(t);
    const int order = povm::default_quadrature_order(t);

    // contiguous bins covering [-xmax, xmax] plus two tail operators
    fock::Matrix sum = fock::Matrix::Zero(t + 1, t + 1);
    const int nbins = 40;
    for (int k = 0; k < nbins; ++k) {
        const double a = -xmax + 2 * xmax * k / nbins;
        const double b = -xmax + 2 * xmax * (k + 1) / nbins;
        sum += povm::integrated_povm(a, b, 1.3, t, eta, order);
    }
    sum += povm::integrated_povm(-xmax - 6.0, -xmax, 1.3, t, eta, order);
    sum += povm::integrated_povm(xmax, xmax + 6.0, 1.3, t, eta, order);
    CHECK((sum - fock::Matrix::Identity(t + 1, t + 1)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("center and integral traces agree to 2% at width 0.05", "[povm]") {
    const int t = 10;
    const auto prepared = states::prepare_state(
        {states::StateKind::cat, 1.0, 1.0, 0, t, 0.95});
    const double theta = 0.471;
    for (double a = -2.0; a < 2.0; a += 0.45) {
        const double b = a + 0.05;
        const double pc = (povm::center_povm_for_bin(a, b, theta, t, 0.9) *
                           prepared.rho.matrix()).trace().real();
        const double pi = (povm::integrated_povm(a, b, theta, t, 0.9,
                                                 povm::default_quadrature_order(t)) *
                           prepared.rho.matrix()).trace().real();
        CHECK(std::abs(pc - pi) <= 0.02 * std::max(pi, 1e-9));
    }
}
