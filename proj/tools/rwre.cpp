#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "rwre/current.hpp"
#include "rwre/density.hpp"
#include "rwre/errors.hpp"
#include "rwre/kernels.hpp"
#include "rwre/particles.hpp"

using namespace rwre;
using nlohmann::json;

namespace {

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Comma-separated items; "a..b" expands to the integers a, ..., b.
std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(item);
            continue;
        }
        const int a = std::stoi(item.substr(0, dots)), b = std::stoi(item.substr(dots + 2));
        if (b < a) throw ConfigError("empty range '" + item + "'");
        for (int k = a; k <= b; ++k) out.push_back(std::to_string(k));
    }
    return out;
}

Site parse_site(const std::string& s, int dim) {
    Site x{0, 0, 0};
    std::stringstream ss(s);
    std::string c;
    int a = 0;
    while (std::getline(ss, c, ':')) {
        if (a >= dim) throw ConfigError("site '" + s + "' has more than " + std::to_string(dim) + " coordinates");
        x[a++] = std::stoi(c);
    }
    return x;
}

std::vector<Site> parse_sites(const json& j, int dim) {
    std::vector<Site> out;
    for (const auto& item : split_list(j.get<std::string>())) out.push_back(parse_site(item, dim));
    if (out.empty()) throw ConfigError("site list is empty");
    return out;
}

std::vector<CurrentPoint> parse_points(const std::string& s) {
    std::vector<CurrentPoint> out;
    for (const auto& item : split_list(s)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("point '" + item + "' must be t:r");
        out.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    }
    return out;
}

std::string site_label(const Site& x, int dim) {
    std::string s = std::to_string(x[0]);
    for (int a = 1; a < dim; ++a) s += ":" + std::to_string(x[a]);
    return s;
}

struct Verdict {
    json assertions = json::array();
    bool pass = true;

    void check(const std::string& name, bool ok, double value, double tolerance) {
        assertions.push_back({{"name", name}, {"pass", ok}, {"value", value}, {"tolerance", tolerance}});
        pass = pass && ok;
    }
};

struct Csv {
    std::ostringstream out;
    explicit Csv(const std::string& header) { out << header << '\n'; }
    template <class... T>
    void row(const T&... cells) {
        bool first = true;
        ((out << (first ? "" : ",") << cells, first = false), ...);
        out << '\n';
    }
};

// Resolved run configuration: the JSON file overlaid with explicit flags.
struct Run {
    std::string command;
    json cfg = json::object();
    std::filesystem::path out_dir;
    unsigned threads = 1;

    template <class T>
    T get(const std::string& key, const T& fallback) {
        if (!cfg.contains(key)) cfg[key] = fallback;
        try {
            return cfg.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config field '" + key + "' has the wrong type");
        }
    }

    EnvConfig env() {
        if (cfg.contains("env")) return env_config_from_json(cfg.at("env"));
        EnvConfig e{preset(get<std::string>("preset", "lazy-u")), 0};
        e.seed = get<std::uint64_t>("env_seed", 0);
        return e;
    }
};

int finish(Run& run, const EnvConfig& env, const Csv& csv, const Verdict& v, json values) {
    std::filesystem::create_directories(run.out_dir);
    const auto csv_path = run.out_dir / (run.command + ".csv");
    const auto json_path = run.out_dir / (run.command + ".json");
    std::ofstream(csv_path) << csv.out.str();
    json echo = run.cfg;
    echo["env"] = to_json(env);
    const json verdict = {{"command", run.command}, {"verdict", v.pass ? "pass" : "fail"},
                          {"assertions", v.assertions}, {"values", std::move(values)},
                          {"config", echo},         {"csv", csv_path.string()}};
    std::ofstream(json_path) << verdict.dump(2) << '\n';
    std::cout << verdict.dump(2) << '\n';
    return v.pass ? 0 : 1;
}

void warn_assumptions(const EnvSpec& spec) {
    for (const auto& w : validate_assumptions(spec).warnings) std::cerr << "warning: " << w << '\n';
}

//---------------------------------------------------------------------------//

int cmd_beta(Run& run) {
    const auto env = run.env();
    warn_assumptions(env.spec);
    const double tol = run.get<double>("tol", 1e-8);
    NumericOptions opts;
    opts.agree_tol = tol;
    const double bf = beta(env.spec, BetaMethod::fourier, opts);
    const double bp = beta(env.spec, BetaMethod::probabilistic, opts);
    Csv csv("method,beta");
    csv.row("fourier", num(bf));
    csv.row("probabilistic", num(bp));
    Verdict v;
    v.check("methods_agree", std::abs(bf - bp) <= tol, std::abs(bf - bp), tol);
    return finish(run, env, csv, v,
                  {{"beta_fourier", bf}, {"beta_prob", bp}, {"agree", std::abs(bf - bp) <= tol}});
}

int cmd_covariance(Run& run) {
    const auto env = run.env();
    warn_assumptions(env.spec);
    const auto ms = parse_sites(json(run.get<std::string>("m", "0..5")), env.spec.dim);
    const int N = run.get<int>("N", 2000);
    const double tol = run.get<double>("tol", 1e-8);
    NumericOptions opts;
    opts.agree_tol = std::numeric_limits<double>::infinity();  // compared below instead
    const auto lim = cov_limit(env.spec, ms, opts);
    const auto exact = cov_exact_N(env.spec, N, ms);
    Csv csv("m,C_N,cov_limit_fourier,cov_limit_probabilistic,route_gap,exact_gap");
    double route_gap = 0.0, worst_abs = 0.0;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const double g = std::abs(lim.values[i] - lim.probabilistic[i]);
        route_gap = std::max(route_gap, g);
        if (ms[i] != Site{0, 0, 0}) worst_abs = std::max(worst_abs, std::abs(lim.values[i]));
        csv.row(site_label(ms[i], env.spec.dim), num(exact[i]), num(lim.values[i]), num(lim.probabilistic[i]), num(g),
                num(std::abs(exact[i] - lim.values[i])));
    }
    Verdict v;
    v.check("routes_agree", route_gap <= tol, route_gap, tol);
    if (run.cfg.contains("zero_tol")) {
        const double zt = run.get<double>("zero_tol", 1e-10);
        v.check("off_origin_uncorrelated", worst_abs <= zt, worst_abs, zt);
    }
    return finish(run, env, csv, v,
                  {{"beta_fourier", lim.beta_fourier}, {"beta_prob", lim.beta_probabilistic}, {"var_f", lim.var_f},
                   {"N", N}});
}

int cmd_potential(Run& run) {
    const auto env = run.env();
    warn_assumptions(env.spec);
    const auto xs = parse_sites(json(run.get<std::string>("x", "0..10")), env.spec.dim);
    const double tol = run.get<double>("tol", 1e-6);
    const auto k = build_kernels(env.spec);
    const auto ps = potential_kernel(k.qbar, xs, PotentialMethod::partial_sums);
    const auto fo = potential_kernel(k.qbar, xs, PotentialMethod::fourier);
    Csv csv("x,partial_sums,fourier,diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        worst = std::max(worst, std::abs(ps[i] - fo[i]));
        csv.row(site_label(xs[i], env.spec.dim), num(ps[i]), num(fo[i]), num(std::abs(ps[i] - fo[i])));
    }
    Verdict v;
    v.check("methods_agree", worst <= tol, worst, tol);
    return finish(run, env, csv, v, {{"max_diff", worst}});
}

int cmd_density(Run& run) {
    const auto env = run.env();
    warn_assumptions(env.spec);
    const int N = run.get<int>("N", 20);
    const int radius = run.get<int>("radius", 5);
    const double rho = run.get<double>("rho", 1.0);
    const auto replicas = run.get<std::size_t>("replicas", 10000);
    const auto seed = run.get<std::uint64_t>("seed", 1);
    const double z = run.get<double>("z", 4.0);
    const double res_tol = run.get<double>("residual_tol", 1e-12);

    const EnvField field(env.spec, env.seed);
    const Box window = Box::cube(env.spec.dim, radius);
    const double residual = harmonicity_residual(field, N, window);
    const auto f = f_window(field, N, window);
    const auto sites = invariance_check(field, rho, N, window, replicas, seed, run.threads);

    Csv csv("y,f_N,target,mean,mean_se,mean_z,dispersion,dispersion_se,dispersion_z");
    double worst_mean = 0.0, worst_disp = 0.0;
    for (const auto& s : sites) {
        const double zm = s.mean_se > 0 ? (s.mean - s.target) / s.mean_se : 0.0;
        const double zd = s.dispersion_se > 0 ? (s.dispersion - 1.0) / s.dispersion_se : 0.0;
        worst_mean = std::max(worst_mean, std::abs(zm));
        worst_disp = std::max(worst_disp, std::abs(zd));
        csv.row(site_label(s.y, env.spec.dim), num(f.at(s.y)), num(s.target), num(s.mean), num(s.mean_se), num(zm),
                num(s.dispersion), num(s.dispersion_se), num(zd));
    }
    Verdict v;
    v.check("harmonicity_residual", residual <= res_tol, residual, res_tol);
    v.check("invariant_means", worst_mean <= z, worst_mean, z);
    v.check("poisson_dispersion", worst_disp <= z, worst_disp, z);
    return finish(run, env, csv, v, {{"residual", residual}, {"sites", sites.size()}});
}

int cmd_couple(Run& run) {
    const auto env = run.env();
    warn_assumptions(env.spec);
    const auto law_a = run.get<std::string>("law_a", "poisson");
    const auto law_b = run.get<std::string>("law_b", "doubled");
    const double rho_a = run.get<double>("rho_a", 1.0), rho_b = run.get<double>("rho_b", 1.0);
    for (const auto& [name, law, rho] : {std::tuple{"law_a", law_a, rho_a}, std::tuple{"law_b", law_b, rho_b}}) {
        if (law != "poisson" && law != "doubled")
            throw ConfigError(std::string(name) + " must be 'poisson' or 'doubled'");
        if (!(rho >= 0.0) || (law == "doubled" && rho > 2.0))
            throw ConfigError(std::string(name) + " density must be in [0, " + (law == "doubled" ? "2]" : "inf)"));
    }
    // "doubled": 2 particles with probability rho/2, else none.
    auto draw = [](const std::string& law, double rho, CounterRng& rng) -> Count {
        if (law == "poisson") return rho > 0 ? std::poisson_distribution<Count>(rho)(rng) : 0;
        return rng.uniform() < rho / 2.0 ? 2 : 0;
    };
    const PairSampler init = [&](CounterRng& rng) {
        const Count a = draw(law_a, rho_a, rng);
        return std::pair{a, draw(law_b, rho_b, rng)};
    };
    DiscrepancyOptions o;
    o.horizon = run.get<int>("horizon", 1000);
    o.replicas = run.get<std::size_t>("replicas", 10000);
    o.seed = run.get<std::uint64_t>("seed", 1);
    o.observe_radius = run.get<int>("radius", 0);
    o.threads = run.threads;
    const double min_reduction = run.get<double>("min_reduction", 4.0);
    const double z = run.get<double>("z", 4.0);
    const auto prof = discrepancy_profile(env.spec, init, o);

    Csv csv("t,E_beta_minus,SE,E_beta_plus,SE_plus");
    for (int t = 0; t <= o.horizon; ++t)
        csv.row(t, num(prof.minus_mean[t]), num(prof.minus_se[t]), num(prof.plus_mean[t]), num(prof.plus_se[t]));
    Verdict v;
    v.check("nonincreasing_within_noise", prof.max_increase_z() <= z, prof.max_increase_z(), z);
    const double end = prof.minus_mean.back();
    const double ratio = end > 0 ? prof.minus_mean.front() / end : std::numeric_limits<double>::infinity();
    v.check("reduction_factor", ratio >= min_reduction, ratio, min_reduction);
    return finish(run, env, csv, v, {{"initial", prof.minus_mean.front()}, {"final", end}});
}

int cmd_current(Run& run) {
    const auto env = run.env();
    warn_assumptions(env.spec);
    CurrentSpec spec;
    spec.model = env.spec;
    spec.n = run.get<int>("n", 400);
    spec.points = parse_points(run.get<std::string>("points", "1:0,1:1,0.5:-1"));
    const auto initial = run.get<std::string>("initial", "poisson");
    if (initial == "poisson")
        spec.initial.kind = InitialLaw::Kind::poisson;
    else if (initial == "invariant")
        spec.initial.kind = InitialLaw::Kind::invariant;
    else if (initial == "deterministic")
        spec.initial.kind = InitialLaw::Kind::deterministic;
    else
        throw ConfigError("initial must be poisson, invariant or deterministic");
    spec.initial.rho = run.get<double>("rho", 1.0);
    spec.initial.depth = run.get<int>("depth", 20);
    spec.initial.count = run.get<long long>("count", 1);
    spec.clamp_k = run.get<double>("clamp_k", 8.0);
    const auto replicas = run.get<std::size_t>("replicas", 10000);
    const auto seed = run.get<std::uint64_t>("seed", 1);
    const double rel = run.get<double>("rel_tol", 0.10);
    const double z = run.get<double>("z", 4.0);
    const double oracle_tol = run.get<double>("oracle_tol", 1e-6);
    spec.validate();

    const auto res = mc_current_cov(spec, replicas, seed, run.threads);
    Csv csv("point_a,point_b,empirical,SE,analytic,z_score,oracle");
    Verdict v;
    const auto P = spec.points.size();
    for (std::size_t a = 0; a < P; ++a)
        for (std::size_t b = 0; b < P; ++b) {
            const double emp = res.empirical[a][b], se = res.se[a][b], an = res.analytic[a][b];
            const double zs = se > 0 ? (emp - an) / se : 0.0;
            const double oracle = limit_cov_bm_oracle(res.params, spec.points[a], spec.points[b]).cov;
            auto label = [](const CurrentPoint& p) { return num(p.t) + ":" + num(p.r); };
            csv.row(label(spec.points[a]), label(spec.points[b]), num(emp), num(se), num(an), num(zs), num(oracle));
            if (b < a) continue;
            const std::string tag = "(" + label(spec.points[a]) + "," + label(spec.points[b]) + ")";
            const double allowed = std::max(rel * std::abs(an), z * se);
            v.check("cov" + tag, std::abs(emp - an) <= allowed, std::abs(emp - an), allowed);
            v.check("oracle" + tag, std::abs(oracle - an) <= oracle_tol, std::abs(oracle - an), oracle_tol);
        }
    for (std::size_t a = 0; a < P; ++a)
        v.check("centered[" + std::to_string(a) + "]", std::abs(res.mean[a]) <= z * res.mean_se[a] + 1e-12,
                std::abs(res.mean[a]), z * res.mean_se[a]);
    return finish(run, env, csv, v,
                  {{"v", res.params.v}, {"sigma2", res.params.sigma2}, {"rho0", res.params.rho0},
                   {"sigma0_2", res.params.sigma0_2}, {"replicas", replicas}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Independent particles in a dynamical random environment: verification workflows"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, out_dir, preset_name;
    unsigned threads = 1;
    app.add_option("--config,--spec", config_path, "JSON run configuration (flags override its fields)");
    app.add_option("--preset", preset_name, "named environment fixture when the config has no env block");
    app.add_option("--out-dir", out_dir, "output directory (default $RWRE_OUT_DIR or .)");
    app.add_option("--threads", threads, "worker threads for replica loops")->check(CLI::PositiveNumber);

    // Subcommand flags overlay the config field of the same meaning.
    struct Flag {
        std::string key;
        std::string value;
        CLI::Option* option;
        enum class Type { str, integer, real } type;
    };
    std::vector<std::unique_ptr<Flag>> all;
    auto add = [&](CLI::App* sub, const std::string& name, const std::string& key, Flag::Type type,
                   const std::string& help) {
        all.push_back(std::make_unique<Flag>(Flag{key, "", nullptr, type}));
        all.back()->option = sub->add_option(name, all.back()->value, help);
    };
    using T = Flag::Type;

    auto* beta_cmd = app.add_subcommand("beta", "beta by Fourier quadrature and by the potential kernel");
    add(beta_cmd, "--tol", "tol", T::real, "agreement tolerance");

    auto* cov_cmd = app.add_subcommand("covariance", "exact C_N(m) next to the limit covariance by both routes");
    add(cov_cmd, "--m", "m", T::str, "sites, e.g. 1..5 or 1:0,0:1");
    add(cov_cmd, "--N", "N", T::integer, "depth of the exact recursion");
    add(cov_cmd, "--tol", "tol", T::real, "route agreement tolerance");
    add(cov_cmd, "--zero-tol", "zero_tol", T::real, "also assert |cov_limit(m)| <= this for m != 0");

    auto* pot_cmd = app.add_subcommand("potential", "potential kernel by partial sums and by Fourier");
    add(pot_cmd, "--x", "x", T::str, "sites, e.g. 0..10");
    add(pot_cmd, "--tol", "tol", T::real, "agreement tolerance");

    auto* den_cmd = app.add_subcommand("density-check", "f_N window, harmonicity residual, invariance moments");
    add(den_cmd, "--N", "N", T::integer, "depth");
    add(den_cmd, "--radius", "radius", T::integer, "window half-width");
    add(den_cmd, "--rho", "rho", T::real, "density");
    add(den_cmd, "--replicas", "replicas", T::integer, "invariance replicas");
    add(den_cmd, "--seed", "seed", T::integer, "master seed");

    auto* cpl_cmd = app.add_subcommand("couple", "discrepancy decay of the coupled process");
    add(cpl_cmd, "--law-a", "law_a", T::str, "poisson or doubled");
    add(cpl_cmd, "--law-b", "law_b", T::str, "poisson or doubled");
    add(cpl_cmd, "--rho-a", "rho_a", T::real, "density of the first law");
    add(cpl_cmd, "--rho-b", "rho_b", T::real, "density of the second law");
    add(cpl_cmd, "--horizon", "horizon", T::integer, "time horizon");
    add(cpl_cmd, "--replicas", "replicas", T::integer, "replicas");
    add(cpl_cmd, "--seed", "seed", T::integer, "master seed");
    add(cpl_cmd, "--min-reduction", "min_reduction", T::real, "required reduction factor");

    auto* cur_cmd = app.add_subcommand("current", "Monte Carlo current covariance against the limit");
    add(cur_cmd, "--n", "n", T::integer, "scaling parameter");
    add(cur_cmd, "--points", "points", T::str, "t:r,...");
    add(cur_cmd, "--replicas", "replicas", T::integer, "replicas");
    add(cur_cmd, "--seed", "seed", T::integer, "master seed");
    add(cur_cmd, "--initial", "initial", T::str, "poisson, invariant or deterministic");
    add(cur_cmd, "--rho", "rho", T::real, "initial density");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    Run run;
    run.command = app.get_subcommands().front()->get_name();
    run.threads = threads;
    const char* env_dir = std::getenv("RWRE_OUT_DIR");
    run.out_dir = !out_dir.empty() ? out_dir : (env_dir ? env_dir : ".");
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config '" + config_path + "'");
            try {
                run.cfg = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError("config is not valid JSON: " + std::string(e.what()));
            }
            if (!run.cfg.is_object()) throw ConfigError("config must be a JSON object");
        }
        if (!preset_name.empty()) {
            run.cfg.erase("env");
            run.cfg["preset"] = preset_name;
        }
        for (const auto& f : all) {
            if (f->option->count() == 0) continue;
            try {
                switch (f->type) {
                    case T::str: run.cfg[f->key] = f->value; break;
                    case T::integer: run.cfg[f->key] = std::stoll(f->value); break;
                    case T::real: run.cfg[f->key] = std::stod(f->value); break;
                }
            } catch (const std::logic_error&) {
                throw ConfigError("flag " + f->option->get_name() + " has an invalid value '" + f->value + "'");
            }
        }
        if (run.command == "beta") return cmd_beta(run);
        if (run.command == "covariance") return cmd_covariance(run);
        if (run.command == "potential") return cmd_potential(run);
        if (run.command == "density-check") return cmd_density(run);
        if (run.command == "couple") return cmd_couple(run);
        return cmd_current(run);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const BudgetError& e) {
        std::cerr << "budget error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
}
