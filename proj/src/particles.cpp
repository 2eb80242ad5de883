#include "rwre/particles.hpp"

#include <cmath>
#include <random>

#include "rwre/errors.hpp"
#include "rwre/parallel.hpp"
#include "rwre/stats.hpp"

namespace rwre {

Count OccupancyConfig::total() const {
    Count s = 0;
    for (auto c : counts) s += c;
    return s;
}

CounterRng JumpNoise::at(long long t, const Site& x, ParticleClass cls) const {
    std::uint64_t key = hash_combine(seed_, static_cast<std::uint64_t>(t + s0_));
    for (int i = 0; i < kMaxDim; ++i)
        key = hash_combine(key, static_cast<std::uint64_t>(static_cast<long long>(x[i]) + x0_[i]));
    return CounterRng(key, static_cast<std::uint64_t>(cls));
}

void split_jumps(Count n, std::span<const double> probs, CounterRng& rng, std::span<Count> out) {
    std::fill(out.begin(), out.end(), 0);
    const std::size_t k = probs.size();
    if (n <= 0) return;
    if (n <= 16) {
        for (Count j = 0; j < n; ++j) {
            double u = rng.uniform();
            std::size_t i = 0;
            while (i + 1 < k && u >= probs[i]) u -= probs[i++];
            ++out[i];
        }
        return;
    }
    Count left = n;
    double mass = 1.0;
    for (std::size_t i = 0; i + 1 < k && left > 0; ++i) {
        const double p = mass > 0.0 ? std::clamp(probs[i] / mass, 0.0, 1.0) : 0.0;
        const Count c = std::binomial_distribution<Count>(left, p)(rng);
        out[i] = c;
        left -= c;
        mass -= probs[i];
    }
    out[k - 1] += left;
}

namespace {

// Moves `count` particles from x using the field at level t, scattering them
// into `dst` over `window`; returns the number that left the window.
Count scatter(Count count, const Site& x, long long t, const EnvField& field, const JumpNoise& noise,
              ParticleClass cls, const Box& window, std::vector<Count>& dst, std::vector<double>& probs,
              std::vector<Count>& split) {
    if (count == 0) return 0;
    const auto& offs = field.spec().support;
    field.probs_at(t, x, probs);
    auto rng = noise.at(t, x, cls);
    split_jumps(count, probs, rng, split);
    Count lost = 0;
    for (std::size_t i = 0; i < offs.size(); ++i) {
        if (split[i] == 0) continue;
        const Site y = x + offs[i];
        if (window.contains(y))
            dst[window.index(y)] += split[i];
        else
            lost += split[i];
    }
    return lost;
}

}  // namespace

OccupancyConfig step_quenched(const OccupancyConfig& config, const EnvField& field, const JumpNoise& noise,
                              ParticleClass cls) {
    OccupancyConfig next(config.window, config.time + 1);
    next.outflow = config.outflow;
    std::vector<double> probs(field.spec().size());
    std::vector<Count> split(probs.size());
    std::size_t i = 0;
    config.window.for_each([&](const Site& x) {
        const Count c = config.counts[i++];
        next.outflow += scatter(c, x, config.time, field, noise, cls, next.window, next.counts, probs, split);
    });
    return next;
}

CoupledConfig CoupledConfig::from_pair(const OccupancyConfig& eta, const OccupancyConfig& zeta) {
    if (!(eta.window == zeta.window)) throw ConfigError("coupled configurations must share a window");
    CoupledConfig c(eta.window, eta.time);
    for (std::size_t i = 0; i < eta.counts.size(); ++i) {
        c.xi[i] = std::min(eta.counts[i], zeta.counts[i]);
        c.plus[i] = eta.counts[i] - c.xi[i];
        c.minus[i] = zeta.counts[i] - c.xi[i];
    }
    return c;
}

OccupancyConfig CoupledConfig::eta() const {
    OccupancyConfig o(window, time);
    for (std::size_t i = 0; i < xi.size(); ++i) o.counts[i] = xi[i] + plus[i];
    o.outflow = outflow_xi + outflow_plus;
    return o;
}

OccupancyConfig CoupledConfig::zeta() const {
    OccupancyConfig o(window, time);
    for (std::size_t i = 0; i < xi.size(); ++i) o.counts[i] = xi[i] + minus[i];
    o.outflow = outflow_xi + outflow_minus;
    return o;
}

CoupledConfig coupled_step(const CoupledConfig& config, const EnvField& field, const JumpNoise& noise) {
    CoupledConfig next(config.window, config.time + 1);
    next.outflow_xi = config.outflow_xi;
    next.outflow_plus = config.outflow_plus;
    next.outflow_minus = config.outflow_minus;
    std::vector<double> probs(field.spec().size());
    std::vector<Count> split(probs.size());
    const long long t = config.time;
    std::size_t i = 0;
    config.window.for_each([&](const Site& x) {
        next.outflow_xi += scatter(config.xi[i], x, t, field, noise, ParticleClass::matched, next.window, next.xi,
                                   probs, split);
        next.outflow_plus += scatter(config.plus[i], x, t, field, noise, ParticleClass::plus, next.window,
                                     next.plus, probs, split);
        next.outflow_minus += scatter(config.minus[i], x, t, field, noise, ParticleClass::minus, next.window,
                                      next.minus, probs, split);
        ++i;
    });
    for (std::size_t j = 0; j < next.xi.size(); ++j) {
        const Count pairs = std::min(next.plus[j], next.minus[j]);
        next.plus[j] -= pairs;
        next.minus[j] -= pairs;
        next.xi[j] += pairs;
    }
    return next;
}

double DiscrepancyProfile::max_increase_z() const {
    double worst = -INFINITY;
    for (std::size_t j = 1; j < minus_mean.size(); ++j)
        for (std::size_t i = 0; i < j; ++i) {
            const double se = std::hypot(minus_se[i], minus_se[j]);
            const double diff = minus_mean[j] - minus_mean[i];
            if (se > 0.0)
                worst = std::max(worst, diff / se);
            else if (diff > 0.0)
                worst = INFINITY;
        }
    return worst;
}

namespace {

struct ConeTrace {
    std::vector<double> minus;
    std::vector<double> plus;
};

// One replica of the discrepancy dynamics on the backward light cone of the
// observation box at the horizon. Matched particles are never needed.
ConeTrace cone_replica(const std::shared_ptr<const EnvSpec>& spec, const PairSampler& init,
                       const DiscrepancyOptions& opts, std::size_t replica) {
    const int d = spec->dim;
    const int T = opts.horizon;
    const Site lo = spec->min_offset(), hi = spec->max_offset();
    auto cone = [&](int t) {
        Box b = Box::cube(d, opts.observe_radius);
        Site below{0, 0, 0}, above{0, 0, 0};
        for (int a = 0; a < d; ++a) {
            below[a] = (T - t) * hi[a];
            above[a] = -(T - t) * lo[a];
        }
        return b.grown(below, above);
    };

    const EnvField field(spec, derive_seed(opts.seed, "couple-env", replica));
    const JumpNoise noise(derive_seed(opts.seed, "couple-jumps", replica));
    CounterRng init_rng(derive_seed(opts.seed, "couple-init", replica));

    Box box = cone(0);
    std::vector<Count> plus(box.size()), minus(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) {
        const auto [eta, zeta] = init(init_rng);
        const Count m = std::min(eta, zeta);
        plus[i] = eta - m;
        minus[i] = zeta - m;
    }

    ConeTrace trace;
    trace.minus.reserve(T + 1);
    trace.plus.reserve(T + 1);
    auto record = [&] {
        Count sp = 0, sm = 0;
        for (std::size_t i = 0; i < plus.size(); ++i) {
            sp += plus[i];
            sm += minus[i];
        }
        trace.plus.push_back(static_cast<double>(sp) / box.size());
        trace.minus.push_back(static_cast<double>(sm) / box.size());
    };
    record();

    std::vector<double> probs(spec->size());
    std::vector<Count> split(probs.size());
    for (int t = 0; t < T; ++t) {
        const Box nbox = cone(t + 1);
        std::vector<Count> nplus(nbox.size(), 0), nminus(nbox.size(), 0);
        std::size_t i = 0;
        box.for_each([&](const Site& x) {
            const Count p = plus[i], m = minus[i];
            ++i;
            if (p == 0 && m == 0) return;
            // Mass leaving the next cone can no longer reach the observation box.
            scatter(p, x, t, field, noise, ParticleClass::plus, nbox, nplus, probs, split);
            scatter(m, x, t, field, noise, ParticleClass::minus, nbox, nminus, probs, split);
        });
        for (std::size_t j = 0; j < nplus.size(); ++j) {
            const Count pairs = std::min(nplus[j], nminus[j]);
            nplus[j] -= pairs;
            nminus[j] -= pairs;
        }
        box = nbox;
        plus.swap(nplus);
        minus.swap(nminus);
        record();
    }
    return trace;
}

}  // namespace

DiscrepancyProfile discrepancy_profile(const EnvSpec& spec, const PairSampler& init, const DiscrepancyOptions& opts) {
    spec.validate();
    if (opts.horizon < 0) throw ConfigError("horizon must be >= 0");
    if (opts.replicas < 2) throw ConfigError("replicas must be >= 2");
    const std::size_t cone_sites = [&] {
        std::size_t n = 1;
        for (int a = 0; a < spec.dim; ++a)
            n *= static_cast<std::size_t>(2 * opts.observe_radius + 1 +
                                          opts.horizon * (spec.max_offset()[a] - spec.min_offset()[a]));
        return n;
    }();
    if (cone_sites > kDefaultSiteBudget)
        throw BudgetError("discrepancy_profile: light cone needs " + std::to_string(cone_sites) + " sites", cone_sites);

    const auto shared = std::make_shared<const EnvSpec>(spec);
    const auto traces = run_replicas(opts.replicas, opts.threads,
                                     [&](std::size_t r) { return cone_replica(shared, init, opts, r); });
    DiscrepancyProfile prof;
    for (int t = 0; t <= opts.horizon; ++t) {
        SampleMoments m, p;
        for (const auto& tr : traces) {
            m.add(tr.minus[t]);
            p.add(tr.plus[t]);
        }
        prof.minus_mean.push_back(m.mean());
        prof.minus_se.push_back(m.se_mean());
        prof.plus_mean.push_back(p.mean());
        prof.plus_se.push_back(p.se_mean());
    }
    return prof;
}

}  // namespace rwre
