#include "doctest.h"

#include <random>

#include "rwre/particles.hpp"
#include "rwre/stats.hpp"

using namespace rwre;

TEST_CASE("split_jumps conserves particles") {
    CounterRng rng(3);
    const std::vector<double> probs{0.2, 0.5, 0.3};
    std::vector<Count> out(3);
    for (Count n : {0, 1, 5, 16, 17, 100, 100000}) {
        split_jumps(n, probs, rng, out);
        CHECK(out[0] + out[1] + out[2] == n);
    }
    // Large-count path has the right mean.
    SampleMoments m;
    for (int r = 0; r < 2000; ++r) {
        split_jumps(1000, probs, rng, out);
        m.add(static_cast<double>(out[1]));
    }
    CHECK(within_se(m.mean(), 500.0, m.se_mean()));
}

TEST_CASE("quenched step basics") {
    const EnvField det(preset("right-shift"), 1);
    const JumpNoise noise(5);
    OccupancyConfig empty(Box::interval(-5, 5), 0);
    CHECK(step_quenched(empty, det, noise).total() == 0);

    OccupancyConfig c(Box::interval(0, 9), 0);
    for (int x = 0; x < 10; ++x) c[site1(x)] = x;
    const auto n = step_quenched(c, det, noise);
    for (int x = 1; x < 10; ++x) CHECK(n[site1(x)] == x - 1);
    CHECK(n[site1(0)] == 0);
    CHECK(n.outflow == 9);
    CHECK(n.total() + n.outflow == c.total());
    CHECK(n.time == 1);
}

TEST_CASE("single particle follows the realized environment") {
    const EnvField lazy(preset("lazy-u"), 21);
    const double u = lazy.kernel_at(4, site1(2)).prob(site1(1));
    SampleMoments right;
    for (std::uint64_t r = 0; r < 100000; ++r) {
        OccupancyConfig c(Box::interval(0, 5), 4);
        c[site1(2)] = 1;
        const auto n = step_quenched(c, lazy, JumpNoise(derive_seed(1, "single", r)));
        right.add(static_cast<double>(n[site1(3)]));
    }
    CHECK(within_se(right.mean(), u, right.se_mean()));
}

TEST_CASE("conservation with outflow") {
    const EnvField field(preset("flip-3"), 2);
    CounterRng rng(4);
    OccupancyConfig c(Box::interval(-10, 10), 0);
    for (auto& v : c.counts) v = std::poisson_distribution<Count>(3.0)(rng);
    const Count start = c.total();
    for (int t = 0; t < 30; ++t) {
        c = step_quenched(c, field, JumpNoise(7));
        CHECK(c.total() + c.outflow == start);
    }
}

namespace {

CoupledConfig random_pair(const Box& w, CounterRng& rng, double a, double b) {
    OccupancyConfig eta(w, 0), zeta(w, 0);
    for (auto& v : eta.counts) v = std::poisson_distribution<Count>(a)(rng);
    for (auto& v : zeta.counts) v = std::poisson_distribution<Count>(b)(rng);
    return CoupledConfig::from_pair(eta, zeta);
}

}  // namespace

TEST_CASE("coupling without discrepancies is the plain dynamics") {
    const EnvField field(preset("flip-3"), 8);
    const JumpNoise noise(12);
    CounterRng rng(1);
    OccupancyConfig eta(Box::interval(-15, 15), 0);
    for (auto& v : eta.counts) v = std::poisson_distribution<Count>(2.0)(rng);
    auto coupled = CoupledConfig::from_pair(eta, eta);
    for (int t = 0; t < 20; ++t) {
        coupled = coupled_step(coupled, field, noise);
        eta = step_quenched(eta, field, noise);
        for (std::size_t i = 0; i < eta.counts.size(); ++i) {
            REQUIRE(coupled.plus[i] == 0);
            REQUIRE(coupled.minus[i] == 0);
            REQUIRE(coupled.xi[i] == eta.counts[i]);
        }
    }
}

TEST_CASE("opposite discrepancies merge when they land together") {
    const EnvField field(preset("lazy-u"), 3);
    int merged = 0, apart = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        CoupledConfig c(Box::interval(-3, 3), 0);
        c.plus[c.window.index(site1(0))] = 1;
        c.minus[c.window.index(site1(0))] = 1;
        const auto n = coupled_step(c, field, JumpNoise(s));
        Count xi = 0, p = 0, m = 0;
        for (std::size_t i = 0; i < n.xi.size(); ++i) {
            xi += n.xi[i];
            p += n.plus[i];
            m += n.minus[i];
            REQUIRE(std::min(n.plus[i], n.minus[i]) == 0);
        }
        if (xi == 1) {
            CHECK(p == 0);
            CHECK(m == 0);
            ++merged;
        } else {
            CHECK(p == 1);
            CHECK(m == 1);
            ++apart;
        }
    }
    CHECK(merged > 0);
    CHECK(apart > 0);
}

TEST_CASE("coupled step invariants") {
    const EnvField field(preset("flip-3"), 6);
    CounterRng rng(2);
    auto c = random_pair(Box::interval(-20, 20), rng, 1.0, 1.5);
    Count plus0 = 0, minus0 = 0;
    for (std::size_t i = 0; i < c.xi.size(); ++i) {
        plus0 += c.plus[i];
        minus0 += c.minus[i];
    }
    for (int t = 0; t < 25; ++t) {
        c = coupled_step(c, field, JumpNoise(99));
        Count p = 0, m = 0;
        const auto eta = c.eta(), zeta = c.zeta();
        for (std::size_t i = 0; i < c.xi.size(); ++i) {
            REQUIRE(std::min(c.plus[i], c.minus[i]) == 0);
            REQUIRE(eta.counts[i] - zeta.counts[i] == c.plus[i] - c.minus[i]);
            p += c.plus[i];
            m += c.minus[i];
        }
        CHECK((p + c.outflow_plus) - (m + c.outflow_minus) == plus0 - minus0);
    }
}

TEST_CASE("shift equivariance of the coupled dynamics") {
    const auto spec = preset("flip-3");
    const EnvField field(spec, 17);
    const JumpNoise noise(23);
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> shift(-500, 500);
    for (int trial = 0; trial < 100; ++trial) {
        const long long a = shift(gen);
        const Site u = site1(shift(gen));
        CounterRng rng(static_cast<std::uint64_t>(trial));
        auto base = random_pair(Box::interval(-8, 8), rng, 1.0, 2.0);
        base.time = 0;
        // The shifted run starts at the same absolute space-time point.
        CoupledConfig moved = base;
        moved.window = base.window.shifted(-u);
        moved.time = 0;
        const auto sf = field.shifted(a, u);
        const auto sn = noise.shifted(a, u);
        auto c0 = base, c1 = moved;
        c0.time = a;
        for (int t = 0; t < 5; ++t) {
            c0 = coupled_step(c0, field, noise);
            c1 = coupled_step(c1, sf, sn);
        }
        REQUIRE(c0.xi == c1.xi);
        REQUIRE(c0.plus == c1.plus);
        REQUIRE(c0.minus == c1.minus);
    }
}

TEST_CASE("eta marginal of the coupling matches the plain dynamics in law") {
    const EnvField field(preset("flip-3"), 40);
    const Box w = Box::interval(-6, 6);
    CounterRng init(10);
    const auto start = random_pair(w, init, 1.0, 2.0);
    const auto eta0 = start.eta();
    std::vector<SampleMoments> coupled(w.size()), plain(w.size());
    for (std::uint64_t r = 0; r < 10000; ++r) {
        auto c = start;
        auto e = eta0;
        for (int t = 0; t < 3; ++t) {
            c = coupled_step(c, field, JumpNoise(derive_seed(1, "coupled", r)));
            e = step_quenched(e, field, JumpNoise(derive_seed(1, "plain", r)));
        }
        const auto ce = c.eta();
        for (std::size_t i = 0; i < w.size(); ++i) {
            coupled[i].add(static_cast<double>(ce.counts[i]));
            plain[i].add(static_cast<double>(e.counts[i]));
        }
    }
    for (std::size_t i = 0; i < w.size(); ++i)
        CHECK(within_se(coupled[i].mean(), plain[i].mean(), std::hypot(coupled[i].se_mean(), plain[i].se_mean())));
}

TEST_CASE("identical initial laws produce no discrepancies") {
    const PairSampler same = [](CounterRng& rng) {
        const Count n = std::poisson_distribution<Count>(1.0)(rng);
        return std::pair{n, n};
    };
    DiscrepancyOptions o;
    o.horizon = 50;
    o.replicas = 20;
    const auto prof = discrepancy_profile(preset("lazy-u"), same, o);
    for (double v : prof.minus_mean) CHECK(v == 0.0);
    for (double v : prof.plus_mean) CHECK(v == 0.0);
}

TEST_CASE("discrepancies decay in a short d = 1 run") {
    const PairSampler pair = [](CounterRng& rng) {
        const Count eta = std::poisson_distribution<Count>(1.0)(rng);
        const Count zeta = rng.uniform() < 0.5 ? 2 : 0;
        return std::pair{eta, zeta};
    };
    DiscrepancyOptions o;
    o.horizon = 100;
    o.replicas = 400;
    const auto prof = discrepancy_profile(preset("lazy-u"), pair, o);
    MESSAGE("E beta-: t=0 " << prof.minus_mean[0] << ", t=100 " << prof.minus_mean[100]);
    CHECK(prof.minus_mean[100] < prof.minus_mean[0]);
    CHECK(prof.max_increase_z() < 4.0);
    // Equal densities: the two discrepancy species stay balanced in mean.
    CHECK(within_se(prof.plus_mean[100], prof.minus_mean[100], std::hypot(prof.plus_se[100], prof.minus_se[100])));
}
