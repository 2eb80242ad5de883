#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"

namespace rwre {

using Count = std::int64_t;

/// Occupation numbers eta_t(x) on a finite window. Particles that jump out of
/// the window are dropped and tallied in `outflow`.
struct OccupancyConfig {
    Box window;
    std::vector<Count> counts;
    long long time = 0;
    Count outflow = 0;

    OccupancyConfig() = default;
    OccupancyConfig(const Box& w, long long t) : window(w), counts(w.size(), 0), time(t) {}

    Count& operator[](const Site& x) { return counts[window.index(x)]; }
    Count operator[](const Site& x) const { return counts[window.index(x)]; }
    Count total() const;
};

/// Independent jump variables for the three particle classes of the coupling.
enum class ParticleClass : int { matched = 0, plus = 1, minus = 2 };

/// Counter-mode jump randomness: the generator for (t, x, class) is a pure
/// function of (seed, t + s0, x + x0, class), so shifted runs see shifted noise.
class JumpNoise {
  public:
    explicit JumpNoise(std::uint64_t seed, long long s0 = 0, Site x0 = {0, 0, 0}) : seed_(seed), s0_(s0), x0_(x0) {}
    CounterRng at(long long t, const Site& x, ParticleClass cls) const;
    JumpNoise shifted(long long a, const Site& u) const { return JumpNoise(seed_, s0_ + a, x0_ + u); }

  private:
    std::uint64_t seed_;
    long long s0_;
    Site x0_;
};

/// Splits n particles over offsets with the given probabilities: categorical
/// draws for small n, sequential binomials otherwise. out has probs.size() entries.
void split_jumps(Count n, std::span<const double> probs, CounterRng& rng, std::span<Count> out);

/// One quenched step of every particle using the environment at level config.time.
OccupancyConfig step_quenched(const OccupancyConfig& config, const EnvField& field, const JumpNoise& noise,
                              ParticleClass cls = ParticleClass::matched);

/// Matched particles xi and discrepancies beta+ / beta- on a window.
struct CoupledConfig {
    Box window;
    std::vector<Count> xi;
    std::vector<Count> plus;
    std::vector<Count> minus;
    long long time = 0;
    Count outflow_xi = 0;
    Count outflow_plus = 0;
    Count outflow_minus = 0;

    CoupledConfig() = default;
    CoupledConfig(const Box& w, long long t)
        : window(w), xi(w.size(), 0), plus(w.size(), 0), minus(w.size(), 0), time(t) {}

    /// Builds the coupling of two configurations on the same window.
    static CoupledConfig from_pair(const OccupancyConfig& eta, const OccupancyConfig& zeta);
    OccupancyConfig eta() const;
    OccupancyConfig zeta() const;
};

/// xi, beta+ and beta- jump with independent noise classes; afterwards each
/// site converts min(beta+, beta-) pairs into matched particles.
CoupledConfig coupled_step(const CoupledConfig& config, const EnvField& field, const JumpNoise& noise);

/// Draws (eta_0(x), zeta_0(x)) for one site.
using PairSampler = std::function<std::pair<Count, Count>(CounterRng&)>;

struct DiscrepancyOptions {
    int horizon = 1000;
    std::size_t replicas = 10000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    /// Observation region at the horizon; the simulated region is its exact
    /// backward light cone, so no boundary effect reaches any recorded site.
    int observe_radius = 0;
};

struct DiscrepancyProfile {
    std::vector<double> minus_mean, minus_se;  ///< index t = 0..horizon
    std::vector<double> plus_mean, plus_se;

    /// Largest violation of E[beta-_t] nonincreasing, in units of the pairwise SE.
    double max_increase_z() const;
};

/// Monte Carlo of E[beta-_t(0)] and E[beta+_t(0)]: each replica averages the
/// discrepancy counts over the light-cone sites alive at time t, which all
/// share the law of site 0 at time t by shift invariance.
DiscrepancyProfile discrepancy_profile(const EnvSpec& spec, const PairSampler& init, const DiscrepancyOptions& opts);

}  // namespace rwre
