#include "rwre/density.hpp"

#include <cmath>
#include <random>

#include "rwre/errors.hpp"
#include "rwre/parallel.hpp"
#include "rwre/stats.hpp"

namespace rwre {

namespace {

// Sites at level -k that can reach `target` at level 0.
Box backward_cone(const Box& target, const EnvSpec& spec, int k) {
    const Site lo = spec.min_offset(), hi = spec.max_offset();
    Site below{0, 0, 0}, above{0, 0, 0};
    for (int a = 0; a < spec.dim; ++a) {
        below[a] = k * hi[a];
        above[a] = -k * lo[a];
    }
    return target.grown(below, above);
}

void require_depth(int N) {
    if (N < 1) throw ConfigError("density depth N must be >= 1");
}

}  // namespace

DensityWindow f_window(const EnvField& field, int N, const Box& window, std::size_t budget) {
    require_depth(N);
    const auto& spec = field.spec();
    const auto& offs = spec.support;
    Box box = backward_cone(window, spec, N);
    if (box.size() > budget)
        throw BudgetError("f_window needs " + std::to_string(box.size()) + " sites at level -N", box.size());
    std::vector<double> mass(box.size(), 1.0);
    std::vector<double> probs(offs.size());
    for (int s = -N; s < 0; ++s) {
        const Box nbox = backward_cone(window, spec, -(s + 1));
        std::vector<double> next(nbox.size(), 0.0);
        std::size_t i = 0;
        box.for_each([&](const Site& x) {
            const double m = mass[i++];
            field.probs_at(s, x, probs);
            for (std::size_t j = 0; j < offs.size(); ++j) {
                const Site y = x + offs[j];
                if (nbox.contains(y)) next[nbox.index(y)] += m * probs[j];
            }
        });
        box = nbox;
        mass.swap(next);
    }
    return DensityWindow{N, window, std::move(mass)};
}

double f_cone(const EnvField& field, int N, const Site& y) {
    require_depth(N);
    const auto& spec = field.spec();
    const auto& offs = spec.support;
    Box point{spec.dim, y, y};
    Box box = point;
    std::vector<double> g{1.0};
    std::vector<double> probs(offs.size());
    for (int s = -1; s >= -N; --s) {
        const Box pbox = backward_cone(point, spec, -s);
        std::vector<double> prev(pbox.size(), 0.0);
        std::size_t i = 0;
        pbox.for_each([&](const Site& x) {
            field.probs_at(s, x, probs);
            double acc = 0.0;
            for (std::size_t j = 0; j < offs.size(); ++j) {
                const Site z = x + offs[j];
                if (box.contains(z)) acc += probs[j] * g[box.index(z)];
            }
            prev[i++] = acc;
        });
        box = pbox;
        g.swap(prev);
    }
    double f = 0.0;
    for (double v : g) f += v;
    return f;
}

double harmonicity_residual(const EnvField& field, int N, const Box& window) {
    const auto& spec = field.spec();
    const auto& offs = spec.support;
    const auto lhs = f_window(field, N + 1, window);
    const Box pred = backward_cone(window, spec, 1);
    const auto prev = f_window(field.shifted(-1, {0, 0, 0}), N, pred);
    std::vector<double> rhs(window.size(), 0.0), probs(offs.size());
    std::size_t i = 0;
    pred.for_each([&](const Site& x) {
        const double f = prev.values[i++];
        field.probs_at(-1, x, probs);
        for (std::size_t j = 0; j < offs.size(); ++j) {
            const Site y = x + offs[j];
            if (window.contains(y)) rhs[window.index(y)] += f * probs[j];
        }
    });
    double worst = 0.0;
    for (std::size_t k = 0; k < rhs.size(); ++k) worst = std::max(worst, std::abs(lhs.values[k] - rhs[k]));
    return worst;
}

Box interior(const Box& window, const EnvSpec& spec) {
    const Site lo = spec.min_offset(), hi = spec.max_offset();
    Box b = window;
    for (int a = 0; a < spec.dim; ++a) {
        b.lo[a] += hi[a];
        b.hi[a] += lo[a];
    }
    return b;
}

OccupancyConfig sample_invariant_config(const DensityWindow& f, double rho, CounterRng& rng) {
    if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
    OccupancyConfig c(f.window, 0);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        const double mean = rho * f.values[i];
        c.counts[i] = mean > 0.0 ? std::poisson_distribution<Count>(mean)(rng) : 0;
    }
    return c;
}

OccupancyConfig sample_invariant_config(const EnvField& field, double rho, int N, const Box& window,
                                        CounterRng& rng) {
    return sample_invariant_config(f_window(field, N, window), rho, rng);
}

std::vector<InvarianceSite> invariance_check(const EnvField& field, double rho, int N, const Box& window,
                                             std::size_t replicas, std::uint64_t seed, unsigned threads) {
    const Box inner = interior(window, field.spec());
    if (inner.empty()) throw ConfigError("window has no interior sites");
    const auto f = f_window(field, N, window);
    const auto target = f_window(field.shifted(1, {0, 0, 0}), N + 1, inner);

    const auto counts = run_replicas(replicas, threads, [&](std::size_t r) {
        CounterRng rng(derive_seed(seed, "invariance-init", r));
        const auto start = sample_invariant_config(f, rho, rng);
        const auto next = step_quenched(start, field, JumpNoise(derive_seed(seed, "invariance-jumps", r)));
        std::vector<Count> out;
        out.reserve(inner.size());
        inner.for_each([&](const Site& y) { out.push_back(next[y]); });
        return out;
    });

    std::vector<InvarianceSite> sites;
    std::size_t k = 0;
    inner.for_each([&](const Site& y) {
        SampleMoments m;
        for (const auto& c : counts) m.add(static_cast<double>(c[k]));
        sites.push_back({y, rho * target.values[k], m.mean(), m.se_mean(), m.dispersion(), m.dispersion_se()});
        ++k;
    });
    return sites;
}

}  // namespace rwre
