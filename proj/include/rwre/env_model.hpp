#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "rwre/lattice.hpp"
#include "rwre/rng.hpp"

namespace rwre {

/// Jump distribution omega_{s,x}(.) over offsets with |z| <= R.
struct JumpLaw {
    std::vector<Site> offsets;
    std::vector<double> probs;

    double prob(const Site& z) const;
    bool operator==(const JumpLaw&) const = default;
};

struct Dirichlet {
    std::vector<double> alpha;
};
struct TwoPoint {
    std::vector<double> law_a;
    std::vector<double> law_b;
    double mix = 0.5;  ///< probability of drawing law_a
};
struct Deterministic {
    std::vector<double> law;
};
using EnvFamily = std::variant<Dirichlet, TwoPoint, Deterministic>;

/// Distribution of the i.i.d. environment vectors. Every member law lives on
/// the common `support`; family vectors are indexed like `support`.
struct EnvSpec {
    int dim = 1;
    int range = 1;
    std::vector<Site> support;
    EnvFamily family;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    std::size_t size() const { return support.size(); }
    std::string family_name() const;
    /// Per-axis minimum / maximum offset over the support.
    Site min_offset() const;
    Site max_offset() const;
};

/// Environment block of a run config: spec plus field seed.
struct EnvConfig {
    EnvSpec spec;
    std::uint64_t seed = 0;
};

EnvConfig env_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnvConfig& cfg);

/// Named fixtures used throughout tests and the CLI:
/// lazy-u, flip-3, right-shift, sym-dirichlet, sym-dirichlet-2d, star-3d, pm1.
EnvSpec preset(const std::string& name);

/// Draws one environment vector from the family into `out` (size == support size).
void sample_law(const EnvSpec& spec, CounterRng& rng, std::span<double> out);

/// Lazily generated space-time environment. kernel_at(s, x) is a pure
/// function of (seed, spec, s + s0, x + x0), so shifting is free.
class EnvField {
  public:
    EnvField(std::shared_ptr<const EnvSpec> spec, std::uint64_t seed, long long s0 = 0, Site x0 = {0, 0, 0});
    EnvField(const EnvSpec& spec, std::uint64_t seed) : EnvField(std::make_shared<const EnvSpec>(spec), seed) {}

    JumpLaw kernel_at(long long s, const Site& x) const;
    /// Allocation-free variant of kernel_at; out is indexed like spec().support.
    void probs_at(long long s, const Site& x, std::span<double> out) const;

    /// Field seen from (a, u): the result at (s, x) equals this at (s + a, x + u).
    EnvField shifted(long long a, const Site& u) const;

    const EnvSpec& spec() const { return *spec_; }
    const std::shared_ptr<const EnvSpec>& spec_ptr() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    long long time_origin() const { return s0_; }
    const Site& space_origin() const { return x0_; }

  private:
    std::shared_ptr<const EnvSpec> spec_;
    std::uint64_t seed_;
    long long s0_;
    Site x0_;
    bool deterministic_;
};

/// Closed-form first and second moments of the family.
/// mean[i] = E omega(z_i); second[i * k + j] = E omega(z_i) omega(z_j).
struct EnvMoments {
    std::vector<Site> support;
    std::vector<double> mean;
    std::vector<double> second;

    double first(const Site& z) const;
    double second_at(const Site& z, const Site& w) const;
};

EnvMoments env_moments(const EnvSpec& spec);

/// Monte Carlo estimate of the same moments with standard errors; works for
/// any family `sample_law` supports.
struct EnvMomentsEstimate {
    EnvMoments value;
    std::vector<double> mean_se;
    std::vector<double> second_se;
};

EnvMomentsEstimate env_moments_mc(const EnvSpec& spec, std::size_t draws, std::uint64_t seed);

struct AssumptionReport {
    bool nondegenerate = false;  ///< P{exists z: 0 < omega(z) < 1} > 0
    bool span_one = false;       ///< differences of supp p generate Z^d
    std::vector<std::string> warnings;

    bool ok() const { return nondegenerate && span_one; }
};

/// Reports, never throws: degenerate specs remain valid test fixtures.
AssumptionReport validate_assumptions(const EnvSpec& spec);

/// Index (abs value of the determinant) of the lattice generated by `vectors`
/// in Z^dim; 0 when they do not span R^dim.
long long lattice_index(const std::vector<Site>& vectors, int dim);

}  // namespace rwre
