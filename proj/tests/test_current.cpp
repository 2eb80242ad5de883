#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "rwre/current.hpp"
#include "rwre/errors.hpp"

using namespace rwre;

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

CurrentSpec make_spec(const std::string& model, int n, std::vector<CurrentPoint> pts) {
    CurrentSpec s;
    s.model = preset(model);
    s.n = n;
    s.points = std::move(pts);
    return s;
}

LimitParams unit_params() { return LimitParams{0.5, 0.25, 1.0, 1.0}; }

}  // namespace

TEST_CASE("psi closed form and degenerate limit") {
    CHECK(psi(1.0, 0.0) == doctest::Approx(kInvSqrt2Pi).epsilon(1e-14));
    CHECK(psi(0.0, -2.0) == 2.0);
    CHECK(psi(0.0, 2.0) == 0.0);
    for (double nu2 : {0.0, 0.1, 1.0, 7.5})
        for (double x : {-3.0, -0.4, 0.0, 0.9, 5.0})
            CHECK(psi(nu2, x) - psi(nu2, -x) == doctest::Approx(-x).epsilon(1e-12));
    CHECK(psi(1e-14, -1.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(psi(-1.0, 0.0), ConfigError);
}

TEST_CASE("limit covariance examples") {
    const auto p = unit_params();
    CHECK(limit_cov(p, {1, 0}, {1, 0}) == doctest::Approx(kInvSqrt2Pi).epsilon(1e-12));
    // Var = 2 rho sigma sqrt(t) / sqrt(2 pi) when rho0 = sigma0^2 = rho.
    const LimitParams q{0.0, 0.7, 2.0, 2.0};
    CHECK(limit_cov(q, {3, 0}, {3, 0}) == doctest::Approx(2 * 2.0 * std::sqrt(0.7 * 3) * kInvSqrt2Pi));
    for (double q0 : {-1.0, 0.0, 2.5})
        for (double r : {-2.0, 0.3}) CHECK(gamma1(p, {0, q0}, {1.5, r}) == doctest::Approx(0.0).epsilon(1e-15));
    // Far apart in space only the dynamic part decorrelates; the initial-law
    // part keeps the particles initially between the two observers.
    CHECK(std::abs(gamma1(p, {1, 0}, {1, 60})) < 1e-12);
    CHECK(std::abs(gamma1(p, {1, 0}, {1, -60})) < 1e-12);
    CHECK(gamma2(p, {1, 0.5}, {1, 60}) == doctest::Approx(psi(0.25, -0.5)).epsilon(1e-12));
    CHECK(limit_cov(p, {0.7, 0.2}, {1.3, -0.4}) == doctest::Approx(limit_cov(p, {1.3, -0.4}, {0.7, 0.2})));
}

TEST_CASE("limit covariance Gram matrices are positive semidefinite") {
    const auto p = unit_params();
    CounterRng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<CurrentPoint> pts(10);
        for (auto& x : pts) x = {3.0 * rng.uniform(), 4.0 * rng.uniform() - 2.0};
        Eigen::MatrixXd g(10, 10);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) g(i, j) = limit_cov(p, pts[i], pts[j]);
        CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
}

TEST_CASE("Brownian-integral oracle matches the closed form") {
    const auto p = unit_params();
    const std::vector<CurrentPoint> grid{{0.5, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {2.0, -1.0}, {0.25, 0.5}};
    double worst = 0.0;
    for (const auto& a : grid)
        for (const auto& b : grid) {
            const auto o = limit_cov_bm_oracle(p, a, b);
            worst = std::max(worst, std::abs(o.cov - limit_cov(p, a, b)));
            CHECK(o.gamma1 == doctest::Approx(gamma1(p, a, b)).epsilon(1e-6));
            CHECK(o.gamma2 == doctest::Approx(gamma2(p, a, b)).epsilon(1e-6));
        }
    CHECK(worst < 1e-6);
    // Same Brownian point: Gamma1 reduces to Psi at twice the variance.
    const auto same = limit_cov_bm_oracle(p, {1.3, 0.4}, {1.3, 0.4});
    CHECK(same.gamma1 == doctest::Approx(psi(2 * 0.25 * 1.3, 0.0)).epsilon(1e-8));
}

TEST_CASE("limit parameters follow the initial law") {
    auto s = make_spec("lazy-u", 400, {{1, 0}});
    auto p = limit_params(s);
    CHECK(p.v == doctest::Approx(0.5));
    CHECK(p.sigma2 == doctest::Approx(0.25));
    CHECK(p.rho0 == 1.0);
    CHECK(p.sigma0_2 == 1.0);
    s.initial.kind = InitialLaw::Kind::deterministic;
    s.initial.count = 3;
    p = limit_params(s);
    CHECK(p.rho0 == 3.0);
    CHECK(p.sigma0_2 == 0.0);
    const auto o = observer(s, {1, 0});
    CHECK(o.steps == 400);
    CHECK(o.front == 200);
}

TEST_CASE("spec validation") {
    auto s = make_spec("lazy-u", 400, {{1, 0}});
    CHECK_NOTHROW(s.validate());
    s.points[0].t = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = make_spec("sym-dirichlet-2d", 400, {{1, 0}});
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = make_spec("lazy-u", 0, {{1, 0}});
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("backward sweep equals path enumeration") {
    for (const char* model : {"flip-3", "lazy-u", "sym-dirichlet"}) {
        CAPTURE(std::string(model));
        auto s = make_spec(model, 16, {{0.5, 0.0}, {0.5, 0.6}, {0.75, -0.4}});
        s.clamp_k = 50.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const EnvField field(s.model, seed);
            for (const auto& pt : s.points) {
                const double sweep = quenched_mean(s, field, pt);
                const double brute = quenched_mean_bruteforce(s, field, pt);
                CHECK(std::abs(sweep - brute) < 1e-12);
            }
        }
    }
}

TEST_CASE("backward sweep with the default clamp matches an unclamped sweep") {
    auto s = make_spec("lazy-u", 400, {{1, 0}, {1, 2}, {0.5, -1}});
    const EnvField field(s.model, 9);
    for (const auto& pt : s.points) {
        s.clamp_k = 8.0;
        const double clamped = quenched_mean(s, field, pt);
        s.clamp_k = 1e6;
        const double full = quenched_mean(s, field, pt);
        CHECK(std::abs(clamped - full) < 1e-10);
    }
}

TEST_CASE("backward sweep with a past-dependent initial law matches enumeration") {
    auto s = make_spec("flip-3", 12, {{0.5, 0.3}});
    s.initial.kind = InitialLaw::Kind::invariant;
    s.initial.rho = 1.5;
    s.initial.depth = 6;
    s.clamp_k = 50.0;
    const EnvField field(s.model, 3);
    CHECK(std::abs(quenched_mean(s, field, s.points[0]) - quenched_mean_bruteforce(s, field, s.points[0])) < 1e-12);
    const auto params = limit_params(s);
    CHECK(params.rho0 == 1.5);
    CHECK(params.sigma0_2 == 1.5);
}

TEST_CASE("deterministic shift field: quenched mean is rho floor(r sqrt n)") {
    auto s = make_spec("right-shift", 100, {{1, 0.55}, {0.5, 2.0}, {2, 0.1}});
    s.initial.rho = 2.5;
    const EnvField field(s.model, 1);
    for (const auto& pt : s.points)
        CHECK(quenched_mean(s, field, pt) == doctest::Approx(2.5 * std::floor(pt.r * 10.0 + 1e-9)).epsilon(1e-14));
}

TEST_CASE("deterministic field and profile: Ybar vanishes identically") {
    auto s = make_spec("right-shift", 64, {{1, 0.5}, {0.5, 1.0}});
    s.initial.kind = InitialLaw::Kind::deterministic;
    s.initial.count = 2;
    const auto res = mc_current_cov(s, 20, 4);
    for (std::size_t a = 0; a < 2; ++a) {
        CHECK(res.mean[a] == 0.0);
        for (std::size_t b = 0; b < 2; ++b) CHECK(res.empirical[a][b] == 0.0);
    }
    const EnvField field(s.model, 1);
    CounterRng init(1), jumps(2);
    const auto one = simulate_current(s, field, init, jumps);
    CHECK(one.y[0] == 2.0 * 4);  // floor(0.5 * 8) sites, 2 particles each
    CHECK(one.y[1] == 2.0 * 8);
}

TEST_CASE("zero initial particles give zero current") {
    auto s = make_spec("lazy-u", 100, {{1, 0}, {1, 1}});
    s.initial.rho = 0.0;
    const EnvField field(s.model, 5);
    CounterRng init(1), jumps(2);
    const auto out = simulate_current(s, field, init, jumps);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(out.y[i] == 0.0);
        CHECK(out.quenched_mean[i] == 0.0);
        CHECK(out.ybar[i] == 0.0);
    }
}

TEST_CASE("simulated current agrees with its quenched mean on a fixed environment") {
    auto s = make_spec("flip-3", 64, {{1, 0}, {1, 0.5}});
    const EnvField field(s.model, 21);
    double sum[2] = {0, 0}, sumsq[2] = {0, 0};
    const int reps = 4000;
    for (int r = 0; r < reps; ++r) {
        CounterRng init(derive_seed(8, "init", r)), jumps(derive_seed(8, "jumps", r));
        const auto out = simulate_current(s, field, init, jumps);
        for (int i = 0; i < 2; ++i) {
            sum[i] += out.y[i] - out.quenched_mean[i];
            sumsq[i] += (out.y[i] - out.quenched_mean[i]) * (out.y[i] - out.quenched_mean[i]);
        }
    }
    for (int i = 0; i < 2; ++i) {
        const double mean = sum[i] / reps;
        const double se = std::sqrt((sumsq[i] / reps - mean * mean) / reps);
        CHECK(std::abs(mean) < 4 * se);
    }
}

TEST_CASE("Monte Carlo covariance: centering and a coarse variance check") {
    auto s = make_spec("lazy-u", 100, {{1, 0}, {1, 1}});
    const auto res = mc_current_cov(s, 2000, 11);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(res.mean[i]) < 4 * res.mean_se[i]);
    const double target = limit_cov(res.params, {1, 0}, {1, 0});
    CHECK(std::abs(res.empirical[0][0] - target) < std::max(0.15 * target, 4 * res.se[0][0]));
    CHECK(res.se[0][1] > 0.0);
    // Identical under a different thread count.
    const auto again = mc_current_cov(s, 2000, 11, 3);
    CHECK(again.empirical[0][1] == res.empirical[0][1]);
}

TEST_CASE("n^{1/4} scaling: Var Ybar(1,0) is roughly n-independent") {
    auto s = make_spec("lazy-u", 100, {{1, 0}});
    const auto small = mc_current_cov(s, 3000, 31);
    s.n = 400;
    const auto large = mc_current_cov(s, 3000, 32);
    const double ratio = large.empirical[0][0] / small.empirical[0][0];
    const double ratio_se = ratio * std::hypot(small.se[0][0] / small.empirical[0][0],
                                               large.se[0][0] / large.empirical[0][0]);
    MESSAGE("Var ratio n=400/n=100: " << ratio << " (SE " << ratio_se << ")");
    CHECK(std::abs(ratio - 1.0) <= 0.15);
}
