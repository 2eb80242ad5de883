#include "rwre/env_model.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "rwre/errors.hpp"

namespace rwre {

std::string to_string(const Site& s, int dim) {
    if (dim == 1) return std::to_string(s[0]);
    std::string out = "(";
    for (int i = 0; i < dim; ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

Box Box::cube(int dim, int radius, const Site& center) {
    Box b;
    b.dim = dim;
    for (int i = 0; i < dim; ++i) {
        b.lo[i] = center[i] - radius;
        b.hi[i] = center[i] + radius;
    }
    return b;
}

double JumpLaw::prob(const Site& z) const {
    for (std::size_t i = 0; i < offsets.size(); ++i)
        if (offsets[i] == z) return probs[i];
    return 0.0;
}

//---------------------------------------------------------------------------//
// EnvSpec
//---------------------------------------------------------------------------//

namespace {

void check_prob_vector(const std::vector<double>& v, std::size_t k, const std::string& field) {
    if (v.size() != k)
        throw ConfigError(field + " has " + std::to_string(v.size()) + " entries, support has " + std::to_string(k));
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= 0.0 && v[i] <= 1.0))
            throw ConfigError(field + "[" + std::to_string(i) + "] must lie in [0,1]");
        sum += v[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError(field + " must sum to 1 (got " + std::to_string(sum) + ")");
}

}  // namespace

void EnvSpec::validate() const {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("dim must be in 1.." + std::to_string(kMaxDim));
    if (range < 1) throw ConfigError("range must be a positive integer");
    if (support.empty()) throw ConfigError("params.offsets must be nonempty");
    std::set<Site> seen;
    for (std::size_t i = 0; i < support.size(); ++i) {
        const auto& z = support[i];
        for (int a = dim; a < kMaxDim; ++a)
            if (z[a] != 0) throw ConfigError("params.offsets[" + std::to_string(i) + "] has more than dim coordinates");
        if (sup_norm(z, dim) > range)
            throw ConfigError("params.offsets[" + std::to_string(i) + "] exceeds range " + std::to_string(range));
        if (!seen.insert(z).second) throw ConfigError("params.offsets[" + std::to_string(i) + "] is duplicated");
    }
    const std::size_t k = support.size();
    std::visit(
        [&](const auto& fam) {
            using F = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<F, Dirichlet>) {
                if (fam.alpha.size() != k) throw ConfigError("params.alpha must have one entry per offset");
                for (std::size_t i = 0; i < k; ++i)
                    if (!(fam.alpha[i] > 0.0) || !std::isfinite(fam.alpha[i]))
                        throw ConfigError("params.alpha[" + std::to_string(i) + "] must be > 0");
            } else if constexpr (std::is_same_v<F, TwoPoint>) {
                check_prob_vector(fam.law_a, k, "params.law_a");
                check_prob_vector(fam.law_b, k, "params.law_b");
                if (!(fam.mix >= 0.0 && fam.mix <= 1.0)) throw ConfigError("params.mix must lie in [0,1]");
            } else {
                check_prob_vector(fam.law, k, "params.law");
            }
        },
        family);
}

std::string EnvSpec::family_name() const {
    switch (family.index()) {
        case 0: return "dirichlet";
        case 1: return "two_point";
        default: return "deterministic";
    }
}

Site EnvSpec::min_offset() const {
    Site m = support.front();
    for (const auto& z : support)
        for (int i = 0; i < dim; ++i) m[i] = std::min(m[i], z[i]);
    return m;
}

Site EnvSpec::max_offset() const {
    Site m = support.front();
    for (const auto& z : support)
        for (int i = 0; i < dim; ++i) m[i] = std::max(m[i], z[i]);
    return m;
}

//---------------------------------------------------------------------------//
// JSON
//---------------------------------------------------------------------------//

namespace {

Site parse_offset(const nlohmann::json& j, int dim, std::size_t idx) {
    Site z{0, 0, 0};
    const std::string field = "params.offsets[" + std::to_string(idx) + "]";
    if (j.is_number_integer()) {
        if (dim != 1) throw ConfigError(field + " must be an array of " + std::to_string(dim) + " integers");
        z[0] = j.get<int>();
        return z;
    }
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw ConfigError(field + " must be an array of " + std::to_string(dim) + " integers");
    for (int i = 0; i < dim; ++i) {
        if (!j[i].is_number_integer()) throw ConfigError(field + " must contain integers");
        z[i] = j[i].get<int>();
    }
    return z;
}

std::vector<double> parse_reals(const nlohmann::json& params, const char* key) {
    const std::string field = std::string("params.") + key;
    if (!params.contains(key)) throw ConfigError(field + " is required");
    const auto& arr = params.at(key);
    if (!arr.is_array()) throw ConfigError(field + " must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) throw ConfigError(field + "[" + std::to_string(i) + "] must be a number");
        out.push_back(arr[i].get<double>());
    }
    return out;
}

nlohmann::json offset_json(const Site& z, int dim) {
    if (dim == 1) return z[0];
    auto arr = nlohmann::json::array();
    for (int i = 0; i < dim; ++i) arr.push_back(z[i]);
    return arr;
}

}  // namespace

EnvConfig env_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("environment block must be a JSON object");
    EnvConfig cfg;
    auto& spec = cfg.spec;
    auto get_int = [&](const char* key, int fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
        return j.at(key).get<int>();
    };
    spec.dim = get_int("dim", 1);
    spec.range = get_int("range", 1);
    if (spec.dim < 1 || spec.dim > kMaxDim) throw ConfigError("dim must be in 1.." + std::to_string(kMaxDim));
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
            throw ConfigError("seed must be a nonnegative integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    if (!j.contains("family") || !j.at("family").is_string()) throw ConfigError("family must be a string");
    if (!j.contains("params") || !j.at("params").is_object()) throw ConfigError("params must be an object");
    const auto& params = j.at("params");
    if (!params.contains("offsets") || !params.at("offsets").is_array())
        throw ConfigError("params.offsets must be an array");
    const auto& offs = params.at("offsets");
    for (std::size_t i = 0; i < offs.size(); ++i) spec.support.push_back(parse_offset(offs[i], spec.dim, i));

    const auto family = j.at("family").get<std::string>();
    if (family == "dirichlet") {
        spec.family = Dirichlet{parse_reals(params, "alpha")};
    } else if (family == "two_point") {
        TwoPoint tp{parse_reals(params, "law_a"), parse_reals(params, "law_b"), 0.5};
        if (params.contains("mix")) {
            if (!params.at("mix").is_number()) throw ConfigError("params.mix must be a number");
            tp.mix = params.at("mix").get<double>();
        }
        spec.family = tp;
    } else if (family == "deterministic") {
        spec.family = Deterministic{parse_reals(params, "law")};
    } else {
        throw ConfigError("family must be one of dirichlet, two_point, deterministic (got '" + family + "')");
    }
    spec.validate();
    return cfg;
}

nlohmann::json to_json(const EnvConfig& cfg) {
    const auto& spec = cfg.spec;
    nlohmann::json params;
    auto offs = nlohmann::json::array();
    for (const auto& z : spec.support) offs.push_back(offset_json(z, spec.dim));
    params["offsets"] = offs;
    std::visit(
        [&](const auto& fam) {
            using F = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<F, Dirichlet>) {
                params["alpha"] = fam.alpha;
            } else if constexpr (std::is_same_v<F, TwoPoint>) {
                params["law_a"] = fam.law_a;
                params["law_b"] = fam.law_b;
                params["mix"] = fam.mix;
            } else {
                params["law"] = fam.law;
            }
        },
        spec.family);
    return nlohmann::json{{"dim", spec.dim}, {"range", spec.range}, {"family", spec.family_name()},
                          {"params", params}, {"seed", cfg.seed}};
}

EnvSpec preset(const std::string& name) {
    EnvSpec s;
    if (name == "lazy-u") {
        s.support = {site1(0), site1(1)};
        s.family = Dirichlet{{1.0, 1.0}};
    } else if (name == "flip-3") {
        s.support = {site1(-1), site1(0), site1(1)};
        s.family = TwoPoint{{0.8, 0.1, 0.1}, {0.1, 0.1, 0.8}, 0.5};
    } else if (name == "right-shift") {
        s.support = {site1(1)};
        s.family = Deterministic{{1.0}};
    } else if (name == "sym-dirichlet") {
        s.support = {site1(-1), site1(0), site1(1)};
        s.family = Dirichlet{{2.0, 2.0, 2.0}};
    } else if (name == "pm1") {
        s.support = {site1(-1), site1(1)};
        s.family = Dirichlet{{1.0, 1.0}};
    } else if (name == "sym-dirichlet-2d") {
        s.dim = 2;
        s.support = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
        s.family = Dirichlet{std::vector<double>(5, 1.0)};
    } else if (name == "star-3d") {
        s.dim = 3;
        s.support = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        s.family = Dirichlet{std::vector<double>(7, 1.0)};
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    s.validate();
    return s;
}

//---------------------------------------------------------------------------//
// Sampling
//---------------------------------------------------------------------------//

void sample_law(const EnvSpec& spec, CounterRng& rng, std::span<double> out) {
    std::visit(
        [&](const auto& fam) {
            using F = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<F, Dirichlet>) {
                double total = 0.0;
                for (std::size_t i = 0; i < out.size(); ++i) {
                    const double a = fam.alpha[i];
                    // Gamma(1) is Exp(1).
                    const double g = (a == 1.0) ? -std::log(rng.uniform())
                                                : std::gamma_distribution<double>(a, 1.0)(rng);
                    out[i] = g;
                    total += g;
                }
                for (auto& v : out) v /= total;
            } else if constexpr (std::is_same_v<F, TwoPoint>) {
                const auto& law = (rng.uniform() < fam.mix) ? fam.law_a : fam.law_b;
                std::copy(law.begin(), law.end(), out.begin());
            } else {
                std::copy(fam.law.begin(), fam.law.end(), out.begin());
            }
        },
        spec.family);
}

EnvField::EnvField(std::shared_ptr<const EnvSpec> spec, std::uint64_t seed, long long s0, Site x0)
    : spec_(std::move(spec)), seed_(seed), s0_(s0), x0_(x0),
      deterministic_(std::holds_alternative<Deterministic>(spec_->family)) {}

void EnvField::probs_at(long long s, const Site& x, std::span<double> out) const {
    if (deterministic_) {
        const auto& law = std::get<Deterministic>(spec_->family).law;
        std::copy(law.begin(), law.end(), out.begin());
        return;
    }
    std::uint64_t key = hash_combine(seed_, static_cast<std::uint64_t>(s + s0_));
    for (int i = 0; i < spec_->dim; ++i)
        key = hash_combine(key, static_cast<std::uint64_t>(static_cast<long long>(x[i]) + x0_[i]));
    CounterRng rng(key);
    sample_law(*spec_, rng, out);
}

JumpLaw EnvField::kernel_at(long long s, const Site& x) const {
    JumpLaw law{spec_->support, std::vector<double>(spec_->size())};
    probs_at(s, x, law.probs);
    return law;
}

EnvField EnvField::shifted(long long a, const Site& u) const { return EnvField(spec_, seed_, s0_ + a, x0_ + u); }

//---------------------------------------------------------------------------//
// Moments
//---------------------------------------------------------------------------//

double EnvMoments::first(const Site& z) const {
    for (std::size_t i = 0; i < support.size(); ++i)
        if (support[i] == z) return mean[i];
    return 0.0;
}

double EnvMoments::second_at(const Site& z, const Site& w) const {
    const std::size_t k = support.size();
    for (std::size_t i = 0; i < k; ++i) {
        if (support[i] != z) continue;
        for (std::size_t j = 0; j < k; ++j)
            if (support[j] == w) return second[i * k + j];
    }
    return 0.0;
}

EnvMoments env_moments(const EnvSpec& spec) {
    spec.validate();
    const std::size_t k = spec.size();
    EnvMoments m{spec.support, std::vector<double>(k), std::vector<double>(k * k)};
    std::visit(
        [&](const auto& fam) {
            using F = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<F, Dirichlet>) {
                const double a0 = std::accumulate(fam.alpha.begin(), fam.alpha.end(), 0.0);
                for (std::size_t i = 0; i < k; ++i) {
                    m.mean[i] = fam.alpha[i] / a0;
                    for (std::size_t j = 0; j < k; ++j)
                        m.second[i * k + j] = fam.alpha[i] * (fam.alpha[j] + (i == j ? 1.0 : 0.0)) / (a0 * (a0 + 1.0));
                }
            } else if constexpr (std::is_same_v<F, TwoPoint>) {
                for (std::size_t i = 0; i < k; ++i) {
                    m.mean[i] = fam.mix * fam.law_a[i] + (1.0 - fam.mix) * fam.law_b[i];
                    for (std::size_t j = 0; j < k; ++j)
                        m.second[i * k + j] =
                            fam.mix * fam.law_a[i] * fam.law_a[j] + (1.0 - fam.mix) * fam.law_b[i] * fam.law_b[j];
                }
            } else {
                for (std::size_t i = 0; i < k; ++i) {
                    m.mean[i] = fam.law[i];
                    for (std::size_t j = 0; j < k; ++j) m.second[i * k + j] = fam.law[i] * fam.law[j];
                }
            }
        },
        spec.family);
    return m;
}

EnvMomentsEstimate env_moments_mc(const EnvSpec& spec, std::size_t draws, std::uint64_t seed) {
    spec.validate();
    const std::size_t k = spec.size();
    std::vector<double> s1(k), s1sq(k), s2(k * k), s2sq(k * k), w(k);
    CounterRng rng(derive_seed(seed, "env-moments-mc"));
    for (std::size_t n = 0; n < draws; ++n) {
        sample_law(spec, rng, w);
        for (std::size_t i = 0; i < k; ++i) {
            s1[i] += w[i];
            s1sq[i] += w[i] * w[i];
            for (std::size_t j = 0; j < k; ++j) {
                const double v = w[i] * w[j];
                s2[i * k + j] += v;
                s2sq[i * k + j] += v * v;
            }
        }
    }
    const double n = static_cast<double>(draws);
    auto se = [n](double sum, double sumsq) {
        const double mean = sum / n;
        const double var = std::max(0.0, sumsq / n - mean * mean) * n / (n - 1.0);
        return std::sqrt(var / n);
    };
    EnvMomentsEstimate est{{spec.support, std::vector<double>(k), std::vector<double>(k * k)},
                           std::vector<double>(k), std::vector<double>(k * k)};
    for (std::size_t i = 0; i < k; ++i) {
        est.value.mean[i] = s1[i] / n;
        est.mean_se[i] = se(s1[i], s1sq[i]);
    }
    for (std::size_t i = 0; i < k * k; ++i) {
        est.value.second[i] = s2[i] / n;
        est.second_se[i] = se(s2[i], s2sq[i]);
    }
    return est;
}

//---------------------------------------------------------------------------//
// Standing assumptions
//---------------------------------------------------------------------------//

long long lattice_index(const std::vector<Site>& vectors, int dim) {
    // Integer row reduction (Hermite form); the product of pivots is the index.
    std::vector<std::array<long long, kMaxDim>> rows;
    for (const auto& v : vectors) rows.push_back({v[0], v[1], v[2]});
    std::size_t pivot_row = 0;
    long long index = 1;
    for (int col = 0; col < dim; ++col) {
        for (;;) {
            std::size_t best = rows.size();
            for (std::size_t r = pivot_row; r < rows.size(); ++r)
                if (rows[r][col] != 0 && (best == rows.size() || std::llabs(rows[r][col]) < std::llabs(rows[best][col])))
                    best = r;
            if (best == rows.size()) return 0;
            std::swap(rows[pivot_row], rows[best]);
            bool reduced = true;
            for (std::size_t r = pivot_row + 1; r < rows.size(); ++r) {
                const long long f = rows[r][col] / rows[pivot_row][col];
                for (int c = 0; c < dim; ++c) rows[r][c] -= f * rows[pivot_row][c];
                if (rows[r][col] != 0) reduced = false;
            }
            if (reduced) break;
        }
        index *= std::llabs(rows[pivot_row][col]);
        ++pivot_row;
    }
    return index;
}

AssumptionReport validate_assumptions(const EnvSpec& spec) {
    AssumptionReport rep;
    const auto m = env_moments(spec);
    const std::size_t k = spec.size();

    auto has_interior = [](const std::vector<double>& law) {
        for (double v : law)
            if (v > 0.0 && v < 1.0) return true;
        return false;
    };
    std::visit(
        [&](const auto& fam) {
            using F = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<F, Dirichlet>) {
                rep.nondegenerate = k >= 2;
            } else if constexpr (std::is_same_v<F, TwoPoint>) {
                rep.nondegenerate = (fam.mix > 0.0 && has_interior(fam.law_a)) ||
                                    (fam.mix < 1.0 && has_interior(fam.law_b));
            } else {
                rep.nondegenerate = has_interior(fam.law);
            }
        },
        spec.family);
    if (!rep.nondegenerate) rep.warnings.push_back("nondegeneracy fails: every environment vector is a point mass");

    std::vector<Site> supp;
    for (std::size_t i = 0; i < k; ++i)
        if (m.mean[i] > 0.0) supp.push_back(spec.support[i]);
    std::vector<Site> diffs;
    for (std::size_t i = 1; i < supp.size(); ++i) diffs.push_back(supp[i] - supp[0]);
    const long long idx = lattice_index(diffs, spec.dim);
    rep.span_one = idx == 1;
    if (!rep.span_one) {
        std::ostringstream msg;
        msg << "span-1 fails: support differences of the mean kernel generate ";
        if (idx == 0)
            msg << "a lower-rank lattice";
        else
            msg << "a sublattice of index " << idx;
        rep.warnings.push_back(msg.str());
    }
    return rep;
}

}  // namespace rwre
