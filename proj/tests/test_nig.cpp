#include <cmath>

#include "belle/edl.hpp"
#include "belle/nig.hpp"
#include "belle/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace belle;

namespace {

NIGParams random_params(RngStream& rng, size_t d) {
    std::vector<double> raw(4 * d);
    for (auto& v : raw) v = rng.uniform(-3.0, 3.0);
    return constrain_raw(raw);
}

}  // namespace

TEST_SUITE_BEGIN("nig");

TEST_CASE("constrain_raw maps zeros onto the softplus fixture") {
    NIGParams p = constrain_raw({0.0, 0.0, 0.0, 0.0});
    const double ln2 = std::log(2.0);
    CHECK(p.gamma[0] == doctest::Approx(0.0));
    CHECK(p.nu[0] == doctest::Approx(ln2 + 1e-6).epsilon(1e-12));
    CHECK(p.alpha[0] == doctest::Approx(1.0 + 1e-6 + ln2).epsilon(1e-12));
    CHECK(p.beta[0] == doctest::Approx(ln2 + 1e-6).epsilon(1e-12));
}

TEST_CASE("constrain_raw softplus asymptote") {
    NIGParams p = constrain_raw({0.0, 20.0, 0.0, 0.0});
    CHECK(p.nu[0] == doctest::Approx(20.0).epsilon(1e-7));
}

TEST_CASE("constrain_raw satisfies the constraints over random raws") {
    RngStream rng(100, 0);
    for (int rep = 0; rep < 10000; ++rep) {
        std::vector<double> raw(8);
        for (auto& v : raw) v = rng.uniform(-5.0, 5.0);
        NIGParams p = constrain_raw(raw);
        CHECK_NOTHROW(p.validate());
    }
    // extreme raws stay feasible and finite
    for (double e : {-30.0, 30.0}) {
        NIGParams p = constrain_raw({e, e, e, e});
        CHECK_NOTHROW(p.validate());
    }
}

TEST_CASE("constrain_raw rejects non-finite input") {
    CHECK_THROWS_AS(constrain_raw({0.0, std::numeric_limits<double>::infinity(), 0.0, 0.0}),
                    NumericError);
    CHECK_THROWS_AS(constrain_raw({1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("predictive fixtures") {
    NIGParams p{{0.0}, {1.0}, {2.0}, {1.0}};
    StudentTParams st = predictive(p);
    CHECK(st.loc[0] == doctest::Approx(0.0));
    CHECK(st.scale_sq[0] == doctest::Approx(1.0));
    CHECK(st.dof[0] == doctest::Approx(4.0));

    NIGParams q{{1.0}, {2.0}, {3.0}, {6.0}};
    StudentTParams st2 = predictive(q);
    CHECK(st2.scale_sq[0] == doctest::Approx(3.0));
    CHECK(st2.dof[0] == doctest::Approx(6.0));

    // nu -> infinity collapses the mean uncertainty: scale_sq -> beta/alpha
    NIGParams r{{0.0}, {1e12}, {2.0}, {5.0}};
    CHECK(predictive(r).scale_sq[0] == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("predictive scale is strictly monotone in beta") {
    RngStream rng(7, 1);
    for (int rep = 0; rep < 200; ++rep) {
        NIGParams p = random_params(rng, 1);
        NIGParams q = p;
        q.beta[0] *= 1.5;
        CHECK(predictive(q).scale_sq[0] > predictive(p).scale_sq[0]);
    }
}

TEST_CASE("student_t_log_pdf fixture and symmetry") {
    StudentTParams st{{0.0}, {1.0}, {4.0}};
    CHECK(student_t_log_pdf({0.0}, st) == doctest::Approx(std::log(0.375)).epsilon(1e-12));
    CHECK(std::log(0.375) == doctest::Approx(-0.9808292530117262).epsilon(1e-12));

    RngStream rng(3, 2);
    for (int rep = 0; rep < 100; ++rep) {
        const double a = rng.uniform(0.0, 5.0);
        StudentTParams s{{rng.uniform(-2, 2)}, {rng.uniform(0.2, 3.0)}, {rng.uniform(2.5, 30.0)}};
        CHECK(student_t_log_pdf({s.loc[0] + a}, s) ==
              doctest::Approx(student_t_log_pdf({s.loc[0] - a}, s)).epsilon(1e-12));
    }
}

TEST_CASE("student_t_log_pdf approaches the Gaussian limit for large dof") {
    StudentTParams st{{0.0}, {1.0}, {1e8}};
    CHECK(student_t_log_pdf({0.0}, st) ==
          doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-6));
}

TEST_CASE("student_t_log_pdf sums over dimensions") {
    StudentTParams st{{0.0, 1.0}, {1.0, 2.0}, {4.0, 6.0}};
    StudentTParams d0{{0.0}, {1.0}, {4.0}};
    StudentTParams d1{{1.0}, {2.0}, {6.0}};
    CHECK(student_t_log_pdf({0.3, -0.4}, st) ==
          doctest::Approx(student_t_log_pdf({0.3}, d0) + student_t_log_pdf({-0.4}, d1)));
}

TEST_CASE("nig_log_density: domain, positivity, mode in mu") {
    NIGParams p{{0.5}, {1.3}, {2.2}, {0.8}};
    CHECK_THROWS_AS(nig_log_density(0.0, 0.0, p), ValueError);
    CHECK_THROWS_AS(nig_log_density(0.0, -1.0, p), ValueError);

    RngStream rng(4, 4);
    for (int rep = 0; rep < 200; ++rep) {
        const double v = nig_log_density(rng.uniform(-4, 4), rng.uniform(0.05, 10.0), p);
        CHECK(std::isfinite(v));  // positive density everywhere on the domain
    }
    // for fixed sigma2 the density peaks at mu = gamma
    const double s2 = 0.7;
    const double at_mode = nig_log_density(p.gamma[0], s2, p);
    for (double off : {-1.0, -0.1, 0.1, 1.0}) {
        CHECK(nig_log_density(p.gamma[0] + off, s2, p) < at_mode);
    }
}

TEST_CASE("nig_log_density integrates to one (quadrature oracle)") {
    const double mass = oracle::nig_normalization(0.0, 1.0, 2.0, 1.0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    const double mass2 = oracle::nig_normalization(0.7, 2.4, 3.1, 0.6);
    CHECK(mass2 == doctest::Approx(1.0).epsilon(1e-6));

    // the library's log density agrees pointwise with the oracle's raw form
    NIGParams p{{0.7}, {2.4}, {3.1}, {0.6}};
    for (double mu : {-0.5, 0.7, 1.9}) {
        for (double s2 : {0.1, 0.9, 4.0}) {
            CHECK(nig_log_density(mu, s2, p) ==
                  doctest::Approx(std::log(oracle::nig_joint_pdf(mu, s2, 0.7, 2.4, 3.1, 0.6)))
                      .epsilon(1e-9));
        }
    }
}

TEST_CASE("marginalized NIG equals the Student-t predictive (quadrature oracle)") {
    // the y = 0 fixture: closed form 0.375
    const double m0 = oracle::nig_marginal_pdf(0.0, 0.0, 1.0, 2.0, 1.0);
    CHECK(m0 == doctest::Approx(0.375).epsilon(1e-7));
    NIGParams p{{0.0}, {1.0}, {2.0}, {1.0}};
    StudentTParams st = predictive(p);
    for (double y : {0.0, 0.8, -1.7, 3.0}) {
        const double quad = oracle::nig_marginal_pdf(y, 0.0, 1.0, 2.0, 1.0);
        CHECK(student_t_log_pdf({y}, st) == doctest::Approx(std::log(quad)).epsilon(1e-6));
    }
}

TEST_CASE("consistency: nll equals the negative Student-t log density") {
    RngStream rng(9, 9);
    double worst = 0.0;
    for (int rep = 0; rep < 2000; ++rep) {
        NIGParams p = random_params(rng, 4);
        std::vector<double> y(4);
        for (auto& v : y) v = rng.uniform(-6.0, 6.0);
        const double lhs = edl::nll(y, p);
        const double rhs = -student_t_log_pdf(y, predictive(p));
        worst = std::max(worst, std::fabs(lhs - rhs));
    }
    CHECK(worst < 1e-8);
}

TEST_SUITE_END();
