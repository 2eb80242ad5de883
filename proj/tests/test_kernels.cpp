#include "doctest.h"

#include <chrono>
#include <cmath>

#include "rwre/errors.hpp"
#include "rwre/kernels.hpp"

using namespace rwre;

namespace {

double at(const KernelRow& r, int y) { return r.at(site1(y)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST_CASE("kernels of LAZY-U") {
    const auto k = build_kernels(preset("lazy-u"));
    CHECK(at(k.q.origin, 0) == doctest::Approx(2.0 / 3));
    CHECK(at(k.q.origin, 1) == doctest::Approx(1.0 / 6));
    CHECK(at(k.q.origin, -1) == doctest::Approx(1.0 / 6));
    CHECK(at(k.qbar.row, 0) == doctest::Approx(0.5));
    CHECK(at(k.qbar.row, 1) == doctest::Approx(0.25));
    CHECK(at(k.h, 0) == doctest::Approx(1.0 / 6));
    CHECK(at(k.h, -1) == doctest::Approx(-1.0 / 12));
    CHECK(k.q(site1(0), site1(1)) == doctest::Approx(1.0 / 6));
    CHECK(k.q(site1(3), site1(4)) == doctest::Approx(0.25));
    CHECK(k.qbar.symmetric());
    CHECK(k.q.symmetric());
}

TEST_CASE("kernels of FLIP-3 and the deterministic shift") {
    const auto k = build_kernels(preset("flip-3"));
    CHECK(at(k.p.row, -1) == doctest::Approx(0.45));
    CHECK(at(k.q.origin, 0) == doctest::Approx(0.66));
    CHECK(at(k.q.origin, 1) == doctest::Approx(0.09));
    CHECK(at(k.q.origin, 2) == doctest::Approx(0.08));
    CHECK(at(k.qbar.row, 0) == doctest::Approx(0.415));
    CHECK(at(k.qbar.row, -2) == doctest::Approx(0.2025));
    CHECK(at(k.h, 0) == doctest::Approx(0.245));
    CHECK(std::abs(at(k.h, 1)) < 1e-15);
    CHECK(at(k.h, 2) == doctest::Approx(-0.1225));

    const auto det = build_kernels(preset("right-shift"));
    CHECK(det.trivial());
    CHECK(at(det.q.origin, 0) == 1.0);
    CHECK(at(det.qbar.row, 0) == 1.0);
}

TEST_CASE("h sums to zero and is even on every fixture") {
    for (std::string name : {"lazy-u", "flip-3", "sym-dirichlet", "sym-dirichlet-2d", "star-3d", "pm1"}) {
        CAPTURE(name);
        const auto k = build_kernels(preset(name));
        CHECK(std::abs(k.h.sum()) < 1e-14);
        for (std::size_t i = 0; i < k.h.offsets.size(); ++i)
            CHECK(std::abs(k.h.values[i] - k.h.at(-k.h.offsets[i])) < 1e-14);
        CHECK(std::abs(k.q.origin.sum() - 1.0) < 1e-12);
        CHECK(std::abs(k.qbar.row.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("characteristic functions are ordered on a dense grid") {
    for (std::string name : {"lazy-u", "flip-3", "sym-dirichlet", "sym-dirichlet-2d"}) {
        CAPTURE(name);
        const auto spec = preset(name);
        const CharFn cf(build_kernels(spec));
        CHECK(cf.lambda({0, 0, 0}) == doctest::Approx(1.0));
        CHECK(cf.lambda_bar({0, 0, 0}) == doctest::Approx(1.0));
        const int M = spec.dim == 1 ? 2000 : 200;
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < (spec.dim == 1 ? 1 : M); ++j) {
                const Theta th{-M_PI + (i + 0.5) * 2 * M_PI / M, -M_PI + (j + 0.5) * 2 * M_PI / M, 0.0};
                const double l = cf.lambda(th), lb = cf.lambda_bar(th);
                REQUIRE(lb <= l + 1e-14);
                REQUIRE(l <= 1.0 + 1e-14);
                REQUIRE(lb < 1.0);
            }
    }
}

TEST_CASE("beta closed forms and duality") {
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(std::abs(beta(preset("lazy-u"), BetaMethod::fourier) - 2.0 / 3) < 1e-10);
    CHECK(std::abs(beta(preset("lazy-u"), BetaMethod::probabilistic) - 2.0 / 3) < 1e-8);
    CHECK(beta(preset("right-shift"), BetaMethod::fourier) == 1.0);
    CHECK(beta(preset("right-shift"), BetaMethod::probabilistic) == 1.0);
    CHECK(std::abs(beta(preset("sym-dirichlet"), BetaMethod::fourier) - 6.0 / 7) < 1e-10);
    CHECK(std::abs(beta(preset("sym-dirichlet-2d"), BetaMethod::fourier) - 5.0 / 6) < 1e-10);
    CHECK(std::abs(beta(preset("star-3d"), BetaMethod::fourier) - 7.0 / 8) < 1e-10);
    const double bf = beta(preset("flip-3"), BetaMethod::fourier);
    const double bp = beta(preset("flip-3"), BetaMethod::probabilistic);
    MESSAGE("flip-3 beta: " << bf << " vs " << bp);
    CHECK(std::abs(bf - bp) < 1e-8);
    CHECK(bf > 0.0);
    CHECK(bf <= 1.0);
    MESSAGE("beta suite took " << seconds_since(t0) << " s");
}

TEST_CASE("beta refuses span-2 walks") {
    CHECK_THROWS_AS(beta(preset("pm1"), BetaMethod::fourier), AssumptionError);
    CHECK_THROWS_AS(cov_limit(preset("pm1"), {site1(1)}), AssumptionError);
}

TEST_CASE("potential kernel of the lazy walk is 2|x|") {
    const auto k = build_kernels(preset("lazy-u"));
    std::vector<Site> xs;
    for (int x = -10; x <= 10; ++x) xs.push_back(site1(x));
    const auto t = potential_kernel_checked(k.qbar, xs, 1e-8);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CAPTURE(xs[i][0]);
        CHECK(std::abs(t.partial_sums[i] - 2.0 * std::abs(xs[i][0])) < 1e-8);
        CHECK(std::abs(t.fourier[i] - 2.0 * std::abs(xs[i][0])) < 1e-8);
    }
}

TEST_CASE("potential kernel in d = 3 agrees across methods") {
    const auto t0 = std::chrono::steady_clock::now();
    const auto k = build_kernels(preset("star-3d"));
    const std::vector<Site> xs{{0, 0, 0}, {1, 0, 0}, {0, 1, 1}, {2, 0, 0}, {1, 1, 1}, {2, -1, 0}};
    const auto t = potential_kernel_checked(k.qbar, xs, 1e-6);
    CHECK(t.partial_sums[0] == 0.0);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        MESSAGE(to_string(xs[i], 3) << ": " << t.partial_sums[i] << " " << t.fourier[i]);
        CHECK(t.partial_sums[i] > 0.0);
    }
    MESSAGE("d=3 potential kernel took " << seconds_since(t0) << " s");
}

TEST_CASE("green partial sums") {
    const auto k = build_kernels(preset("lazy-u"));
    const auto g0 = green_partial(k.q, 0, {{site1(0), site1(0)}, {site1(2), site1(0)}, {site1(1), site1(1)}});
    CHECK(g0[0] == 1.0);
    CHECK(g0[1] == 0.0);
    CHECK(g0[2] == 1.0);
    const auto g1 = green_partial(k.q, 1, {{site1(0), site1(0)}, {site1(1), site1(0)}});
    CHECK(g1[0] == doctest::Approx(5.0 / 3));
    CHECK(g1[1] == doctest::Approx(0.25));
    CHECK_THROWS_AS(green_partial(k.q, 1000, {{site1(0), site1(0)}}, 100), BudgetError);

    const double ratio = green_ratio_max(k, 500, [] {
        std::vector<Site> xs;
        for (int x = -10; x <= 10; ++x) xs.push_back(site1(x));
        return xs;
    }());
    MESSAGE("max G_N/Gbar_N over |x|<=10, N<=500: " << ratio);
    CHECK(std::isfinite(ratio));
}

TEST_CASE("exact covariance recursion") {
    const auto lazy = preset("lazy-u");
    const auto c1 = cov_exact_N(lazy, 1, {site1(0), site1(1), site1(-1)});
    CHECK(c1[0] == doctest::Approx(1.0 / 6));
    CHECK(c1[1] == doctest::Approx(-1.0 / 12));
    const auto c2 = cov_exact_N(lazy, 2, {site1(0)});
    CHECK(c2[0] == doctest::Approx(17.0 / 72));
    for (int N : {1, 5, 40})
        for (double v : cov_exact_N(preset("right-shift"), N, {site1(0), site1(3)})) CHECK(v == 0.0);

    // Matches the Green-function form sum_y h(y) G_{N-1}(y, m).
    const auto k = build_kernels(preset("flip-3"));
    for (int m : {0, 1, 3}) {
        std::vector<GreenTarget> targets;
        for (const auto& y : k.h.offsets) targets.push_back({y, site1(m)});
        const auto g = green_partial(k.q, 6, targets);
        double c = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) c += k.h.values[i] * g[i];
        CHECK(cov_exact_N(preset("flip-3"), 7, {site1(m)})[0] == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("C_N(0) increases toward Var f for LAZY-U") {
    const auto series = cov_exact_series(build_kernels(preset("lazy-u")), 2000, {site1(0)});
    for (std::size_t n = 1; n < series.size(); ++n) REQUIRE(series[n][0] >= series[n - 1][0] - 1e-15);
    MESSAGE("C_2000(0) = " << series.back()[0]);
    CHECK(std::abs(series.back()[0] - 0.5) <= 0.05);
}

TEST_CASE("limit covariances") {
    const auto lazy = cov_limit(preset("lazy-u"), {site1(0), site1(1), site1(2), site1(3), site1(4), site1(5)});
    CHECK(lazy.var_f == doctest::Approx(0.5));
    CHECK(lazy.values[0] == doctest::Approx(0.5));
    for (std::size_t i = 1; i < lazy.values.size(); ++i) CHECK(std::abs(lazy.values[i]) <= 1e-10);

    const auto flip = cov_limit(preset("flip-3"), {site1(1), site1(2), site1(3), site1(4), site1(5)});
    for (std::size_t i = 0; i < flip.values.size(); ++i) {
        MESSAGE("flip-3 m=" << i + 1 << " fourier " << flip.values[i] << " prob " << flip.probabilistic[i]);
        CHECK(std::abs(flip.values[i] - flip.probabilistic[i]) <= 1e-8);
    }
    CHECK(std::abs(flip.values[1]) > 1e-4);

    const auto det = cov_limit(preset("right-shift"), {site1(1)});
    CHECK(det.values[0] == 0.0);
    CHECK(det.var_f == 0.0);
}
