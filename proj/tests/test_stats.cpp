#include "doctest.h"

#include <cmath>
#include <random>

#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

TEST_CASE("sample moments of a small data set") {
    SampleMoments m;
    for (double x : {1.0, 2.0, 3.0, 4.0}) m.add(x);
    CHECK(m.count() == 4);
    CHECK(m.mean() == doctest::Approx(2.5));
    CHECK(m.variance() == doctest::Approx(5.0 / 3.0));
    CHECK(m.se_mean() == doctest::Approx(std::sqrt(5.0 / 12.0)));
    // Central moments mu2 = 1.25, mu4 = 2.5625: sqrt((mu4 - mu2^2) / 4) = 0.5.
    CHECK(m.variance_se() == doctest::Approx(0.5));
}

TEST_CASE("variance standard error is calibrated for Gaussian data") {
    const int n = 2000, batches = 400;
    SampleMoments spread, reported;
    for (int b = 0; b < batches; ++b) {
        CounterRng rng(derive_seed(3, "stats-batch", b));
        std::normal_distribution<double> g;
        SampleMoments m;
        for (int i = 0; i < n; ++i) m.add(g(rng));
        spread.add(m.variance());
        reported.add(m.variance_se());
    }
    const double expected = std::sqrt(2.0 / n);
    CHECK(reported.mean() == doctest::Approx(expected).epsilon(0.03));
    CHECK(std::sqrt(spread.variance()) == doctest::Approx(expected).epsilon(0.12));
}

TEST_CASE("within_se honours the floor") {
    CHECK(within_se(1.0, 1.0, 0.0));
    CHECK(within_se(1.0 + 1e-13, 1.0, 0.0));
    CHECK_FALSE(within_se(1.1, 1.0, 0.02));
    CHECK(within_se(1.07, 1.0, 0.02));
}

TEST_CASE("replica results do not depend on the thread count") {
    auto job = [](std::size_t r) {
        CounterRng rng(derive_seed(9, "replica", r));
        return rng.uniform();
    };
    const auto one = run_replicas(200, 1, job);
    const auto four = run_replicas(200, 4, job);
    CHECK(one == four);
    CHECK_THROWS_AS(run_replicas(10, 3, [](std::size_t r) -> int {
                        if (r == 7) throw std::runtime_error("boom");
                        return 0;
                    }),
                    std::runtime_error);
}
