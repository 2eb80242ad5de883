#include "rwre/current.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>

#include "rwre/density.hpp"
#include "rwre/errors.hpp"
#include "rwre/parallel.hpp"
#include "rwre/particles.hpp"
#include "rwre/stats.hpp"

namespace rwre {

namespace {

// floor with a small guard so that e.g. 400 * 0.5 * 1 lands on 200 exactly.
long long guarded_floor(double x) { return static_cast<long long>(std::floor(x + 1e-9)); }

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

double normal_sf(double x, double var) {
    if (var <= 0.0) return x < 0.0 ? 1.0 : 0.0;
    return 0.5 * std::erfc(x / std::sqrt(2.0 * var));
}

double normal_cdf(double x, double var) {
    if (var <= 0.0) return x >= 0.0 ? 1.0 : 0.0;
    return 0.5 * std::erfc(-x / std::sqrt(2.0 * var));
}

double normal_pdf(double x, double var) {
    return std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

double psi(double nu2, double x) {
    if (nu2 < 0.0) throw ConfigError("psi: variance must be >= 0");
    if (nu2 == 0.0) return std::max(-x, 0.0);
    return nu2 * normal_pdf(x, nu2) - x * normal_sf(x, nu2);
}

double gamma1(const LimitParams& p, const CurrentPoint& a, const CurrentPoint& b) {
    const double x = b.r - a.r;
    return psi(p.sigma2 * (a.t + b.t), x) - psi(p.sigma2 * std::abs(b.t - a.t), x);
}

double gamma2(const LimitParams& p, const CurrentPoint& a, const CurrentPoint& b) {
    return psi(p.sigma2 * a.t, -a.r) + psi(p.sigma2 * b.t, b.r) - psi(p.sigma2 * (a.t + b.t), b.r - a.r);
}

double limit_cov(const LimitParams& p, const CurrentPoint& a, const CurrentPoint& b) {
    return p.rho0 * gamma1(p, a, b) + p.sigma0_2 * gamma2(p, a, b);
}

//---------------------------------------------------------------------------//
// Brownian-integral oracle
//---------------------------------------------------------------------------//

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

// Gaussian mass beyond this many standard deviations is below 1e-38.
constexpr double kTail = 13.0;

struct Integrator {
    double rel_tol;
    unsigned max_depth;
    double error = 0.0;  ///< summed error estimates of all top-level calls

    // Integrates f over [lo, hi] split at `cuts`; returns the error estimate via `err`.
    template <class F>
    double operator()(F&& f, double lo, double hi, std::initializer_list<double> cuts, double* err_out = nullptr) {
        std::vector<double> knots{lo};
        for (double c : cuts)
            if (c > lo && c < hi) knots.push_back(c);
        knots.push_back(hi);
        std::sort(knots.begin(), knots.end());
        double total = 0.0, err_sum = 0.0;
        for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
            if (!(knots[i] < knots[i + 1])) continue;
            double err = 0.0;
            total += GK::integrate(f, knots[i], knots[i + 1], max_depth, rel_tol, &err);
            err_sum += err;
        }
        if (err_out)
            *err_out = err_sum;
        else
            error += err_sum;
        return total;
    }
};

// P[B_a <= alpha, B_b > beta] for one Brownian motion observed at times a, b,
// by conditioning on the earlier observation.
double joint_le_gt(double a, double alpha, double b, double beta, Integrator& integ, double& worst) {
    if (a == b) return std::max(0.0, normal_cdf(alpha, a) - normal_cdf(beta, a));
    if (a == 0.0) return (alpha >= 0.0 ? 1.0 : 0.0) * normal_sf(beta, b);
    if (b == 0.0) return (beta < 0.0 ? 1.0 : 0.0) * normal_cdf(alpha, a);
    double err = 0.0, val = 0.0;
    if (a < b) {
        const double inc = b - a, lo = -kTail * std::sqrt(a);
        if (alpha <= lo) return 0.0;
        val = integ([&](double u) { return normal_pdf(u, a) * normal_sf(beta - u, inc); }, lo, alpha, {beta, 0.0},
                    &err);
    } else {
        const double inc = a - b, hi = kTail * std::sqrt(b);
        if (beta >= hi) return 0.0;
        val = integ([&](double w) { return normal_pdf(w, b) * normal_cdf(alpha - w, inc); }, beta, hi, {alpha, 0.0},
                    &err);
    }
    worst = std::max(worst, err);
    return val;
}

}  // namespace

OracleValue limit_cov_bm_oracle(const LimitParams& p, const CurrentPoint& a, const CurrentPoint& b, double tol) {
    if (a.t < 0.0 || b.t < 0.0) throw ConfigError("current points need t >= 0");
    const double va = p.sigma2 * a.t, vb = p.sigma2 * b.t;
    const double q = a.r, r = b.r;
    const double wa = kTail * std::sqrt(va), wb = kTail * std::sqrt(vb);
    // The outer integrand carries roundoff from the inner one, so it gets a
    // looser relative tolerance.
    Integrator integ{1e-10, 10}, inner{1e-12, 15};
    double inner_worst = 0.0;

    OracleValue out;
    // Covariance of the two indicators; it vanishes unless both are nondegenerate.
    const double lo1 = std::max(q - wa, r - wb), hi1 = std::min(q + wa, r + wb);
    if (lo1 < hi1)
        out.gamma1 = integ(
            [&](double x) {
                const double pa = normal_cdf(q - x, va), pb = normal_sf(r - x, vb);
                // |Cov(1_A, 1_B)| <= min(P A, 1 - P A, P B, 1 - P B).
                if (std::min({pa, 1.0 - pa, pb, 1.0 - pb}) < 1e-17) return 0.0;
                return pa * pb - joint_le_gt(va, q - x, vb, r - x, inner, inner_worst);
            },
            lo1, hi1, {q, r});
    const double hi2 = std::min(q + wa, r + wb), lo2 = std::max(q - wa, r - wb);
    if (hi2 > 0.0)
        out.gamma2 += integ([&](double x) { return normal_cdf(q - x, va) * normal_cdf(r - x, vb); }, 0.0, hi2, {q, r});
    if (lo2 < 0.0)
        out.gamma2 += integ([&](double x) { return normal_sf(q - x, va) * normal_sf(r - x, vb); }, lo2, 0.0, {q, r});
    out.cov = p.rho0 * out.gamma1 + p.sigma0_2 * out.gamma2;

    // Inner errors enter the outer integral weighted by its length.
    const double err = integ.error + inner_worst * std::max(0.0, hi1 - lo1);
    if (!(err <= tol))
        throw NumericalError("Brownian oracle quadrature error estimate " + sci(err) + " exceeds " + sci(tol),
                             out.cov, err);
    return out;
}

//---------------------------------------------------------------------------//
// Model plumbing
//---------------------------------------------------------------------------//

void CurrentSpec::validate() const {
    model.validate();
    if (model.dim != 1) throw ConfigError("current requires dim = 1");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (points.empty()) throw ConfigError("points must be nonempty");
    for (std::size_t i = 0; i < points.size(); ++i)
        if (!(points[i].t > 0.0) || !std::isfinite(points[i].r))
            throw ConfigError("points[" + std::to_string(i) + "] needs t > 0 and finite r");
    if (!(initial.rho >= 0.0)) throw ConfigError("initial.rho must be >= 0");
    if (initial.kind == InitialLaw::Kind::invariant && initial.depth < 1)
        throw ConfigError("initial.depth must be >= 1");
    if (initial.kind == InitialLaw::Kind::deterministic && initial.count < 0)
        throw ConfigError("initial.count must be >= 0");
    if (!(clamp_k > 0.0)) throw ConfigError("clamp_k must be > 0");
}

LimitParams limit_params(const CurrentSpec& spec) {
    const auto m = env_moments(spec.model);
    LimitParams p;
    double second = 0.0;
    for (std::size_t i = 0; i < m.support.size(); ++i) {
        p.v += m.mean[i] * m.support[i][0];
        second += m.mean[i] * m.support[i][0] * m.support[i][0];
    }
    p.sigma2 = std::max(0.0, second - p.v * p.v);
    switch (spec.initial.kind) {
        case InitialLaw::Kind::poisson:
        case InitialLaw::Kind::invariant:
            // E f_N = 1, and a Poisson count has variance equal to its mean.
            p.rho0 = p.sigma0_2 = spec.initial.rho;
            break;
        case InitialLaw::Kind::deterministic:
            p.rho0 = static_cast<double>(spec.initial.count);
            p.sigma0_2 = 0.0;
            break;
    }
    return p;
}

Observer observer(const CurrentSpec& spec, const CurrentPoint& pt) {
    const double v = limit_params(spec).v;
    const double n = spec.n;
    return {guarded_floor(n * pt.t), guarded_floor(n * v * pt.t) + guarded_floor(pt.r * std::sqrt(n))};
}

std::vector<double> initial_means(const CurrentSpec& spec, const EnvField& field, long long lo, long long hi) {
    if (hi < lo) return {};
    const auto len = static_cast<std::size_t>(hi - lo + 1);
    switch (spec.initial.kind) {
        case InitialLaw::Kind::poisson:
            return std::vector<double>(len, spec.initial.rho);
        case InitialLaw::Kind::deterministic:
            return std::vector<double>(len, static_cast<double>(spec.initial.count));
        case InitialLaw::Kind::invariant: {
            auto f = f_window(field, spec.initial.depth, Box::interval(static_cast<int>(lo), static_cast<int>(hi)));
            for (auto& v : f.values) v *= spec.initial.rho;
            return f.values;
        }
    }
    return {};
}

//---------------------------------------------------------------------------//
// Quenched mean
//---------------------------------------------------------------------------//

double quenched_mean(const CurrentSpec& spec, const EnvField& field, const CurrentPoint& pt) {
    const auto par = limit_params(spec);
    const auto obs = observer(spec, pt);
    const long long T = obs.steps, F = obs.front;
    const int zmin = spec.model.min_offset()[0], zmax = spec.model.max_offset()[0];
    const int R = std::max(std::abs(zmin), std::abs(zmax));
    const double sigma = std::sqrt(par.sigma2);
    const auto& offs = spec.model.support;

    // g_s(x) = P^omega(X_T <= F | X_s = x) is stored on a band [lo, hi];
    // below it g = 1, above it g = 0.
    auto band = [&](long long s) {
        const long long k = T - s;
        const long long exact_lo = F - k * zmax + 1, exact_hi = F - k * zmin;
        const double c = F - par.v * k;
        const double half = spec.clamp_k * sigma * std::sqrt(static_cast<double>(k)) + R + 1;
        long long lo = std::max(exact_lo, static_cast<long long>(std::floor(c - half)));
        const long long hi = std::min(exact_hi, static_cast<long long>(std::ceil(c + half)));
        lo = std::min(lo, hi + 1);
        return std::pair{lo, hi};
    };

    auto [lo, hi] = band(T);
    std::vector<double> g(static_cast<std::size_t>(std::max(0LL, hi - lo + 1)), 0.0);
    std::vector<double> probs(offs.size());
    for (long long s = T - 1; s >= 0; --s) {
        const auto [nlo, nhi] = band(s);
        std::vector<double> ng(static_cast<std::size_t>(std::max(0LL, nhi - nlo + 1)));
        for (long long x = nlo; x <= nhi; ++x) {
            field.probs_at(s, site1(static_cast<int>(x)), probs);
            double acc = 0.0;
            for (std::size_t j = 0; j < offs.size(); ++j) {
                const long long y = x + offs[j][0];
                const double gy = y < lo ? 1.0 : (y > hi ? 0.0 : g[static_cast<std::size_t>(y - lo)]);
                acc += probs[j] * gy;
            }
            ng[static_cast<std::size_t>(x - nlo)] = acc;
        }
        lo = nlo;
        hi = nhi;
        g.swap(ng);
    }
    auto g0 = [&](long long x) { return x < lo ? 1.0 : (x > hi ? 0.0 : g[static_cast<std::size_t>(x - lo)]); };

    const long long a_hi = hi, b_lo = lo;  // beyond these the summands vanish
    const long long m_lo = std::min(1LL, b_lo), m_hi = std::max(0LL, a_hi);
    const auto rho = initial_means(spec, field, m_lo, m_hi);
    double mean = 0.0;
    for (long long x = 1; x <= a_hi; ++x) mean += rho[static_cast<std::size_t>(x - m_lo)] * g0(x);
    for (long long x = b_lo; x <= 0; ++x) mean -= rho[static_cast<std::size_t>(x - m_lo)] * (1.0 - g0(x));
    return mean;
}

double quenched_mean_bruteforce(const CurrentSpec& spec, const EnvField& field, const CurrentPoint& pt) {
    const auto obs = observer(spec, pt);
    const long long T = obs.steps, F = obs.front;
    const int zmin = spec.model.min_offset()[0], zmax = spec.model.max_offset()[0];
    const auto& offs = spec.model.support;
    const long long x_lo = F - T * zmax + 1, x_hi = F - T * zmin;
    const long long lo = std::min(1LL, x_lo), hi = std::max(0LL, x_hi);

    // Environment table over every space-time point a path can visit.
    const long long w_lo = lo + T * std::min(zmin, 0), w_hi = hi + T * std::max(zmax, 0);
    const auto width = static_cast<std::size_t>(w_hi - w_lo + 1);
    std::vector<double> table(static_cast<std::size_t>(T) * width * offs.size());
    for (long long s = 0; s < T; ++s)
        for (long long x = w_lo; x <= w_hi; ++x)
            field.probs_at(s, site1(static_cast<int>(x)),
                           std::span<double>(table.data() + (static_cast<std::size_t>(s) * width + (x - w_lo)) * offs.size(),
                                             offs.size()));

    // Sum of path weights ending <= F, accumulated over all k^T paths.
    std::function<double(long long, long long, double)> walk = [&](long long s, long long x, double w) -> double {
        if (s == T) return x <= F ? w : 0.0;
        const double* p = table.data() + (static_cast<std::size_t>(s) * width + (x - w_lo)) * offs.size();
        double acc = 0.0;
        for (std::size_t j = 0; j < offs.size(); ++j)
            if (p[j] > 0.0) acc += walk(s + 1, x + offs[j][0], w * p[j]);
        return acc;
    };

    const auto rho = initial_means(spec, field, lo, hi);
    double mean = 0.0;
    for (long long x = lo; x <= hi; ++x) {
        const double below = walk(0, x, 1.0);
        const double r = rho[static_cast<std::size_t>(x - lo)];
        if (x > 0)
            mean += r * below;
        else
            mean -= r * (1.0 - below);
    }
    return mean;
}

//---------------------------------------------------------------------------//
// Simulation
//---------------------------------------------------------------------------//

CurrentSample simulate_current(const CurrentSpec& spec, const EnvField& field, CounterRng& init_rng,
                               CounterRng& jump_rng) {
    const int zmin = spec.model.min_offset()[0], zmax = spec.model.max_offset()[0];
    const auto& offs = spec.model.support;
    const std::size_t P = spec.points.size();
    std::vector<Observer> obs;
    long long T = 0, a_hi = 0, b_lo = 1;
    for (const auto& pt : spec.points) {
        obs.push_back(observer(spec, pt));
        T = std::max(T, obs.back().steps);
        // Only these sources can ever be counted.
        a_hi = std::max(a_hi, obs.back().front - obs.back().steps * zmin);
        b_lo = std::min(b_lo, obs.back().front - obs.back().steps * zmax + 1);
    }
    const long long src_lo = std::min(b_lo, 1LL), src_hi = std::max(a_hi, 0LL);
    const auto means = initial_means(spec, field, src_lo, src_hi);

    const long long w_lo = src_lo + T * std::min(zmin, 0), w_hi = src_hi + T * std::max(zmax, 0);
    const auto width = static_cast<std::size_t>(w_hi - w_lo + 1);
    std::vector<Count> right(width, 0), left(width, 0), nright(width), nleft(width);
    for (long long x = src_lo; x <= src_hi; ++x) {
        const double m = means[static_cast<std::size_t>(x - src_lo)];
        Count c = 0;
        if (spec.initial.kind == InitialLaw::Kind::deterministic)
            c = spec.initial.count;
        else if (m > 0.0)
            c = std::poisson_distribution<Count>(m)(init_rng);
        if (x > 0 && x <= a_hi)
            right[static_cast<std::size_t>(x - w_lo)] = c;
        else if (x <= 0 && x >= b_lo)
            left[static_cast<std::size_t>(x - w_lo)] = c;
    }

    CurrentSample out;
    out.y.assign(P, 0.0);
    auto record = [&](long long s) {
        for (std::size_t i = 0; i < P; ++i) {
            if (obs[i].steps != s) continue;
            double y = 0.0;
            for (std::size_t k = 0; k < width; ++k) {
                const long long pos = w_lo + static_cast<long long>(k);
                if (pos <= obs[i].front)
                    y += static_cast<double>(right[k]);
                else
                    y -= static_cast<double>(left[k]);
            }
            out.y[i] = y;
        }
    };
    record(0);

    std::vector<double> probs(offs.size());
    std::vector<Count> split(offs.size());
    for (long long s = 0; s < T; ++s) {
        std::fill(nright.begin(), nright.end(), 0);
        std::fill(nleft.begin(), nleft.end(), 0);
        const long long lo = src_lo + s * zmin, hi = src_hi + s * zmax;
        for (long long x = std::max(lo, w_lo); x <= std::min(hi, w_hi); ++x) {
            const auto k = static_cast<std::size_t>(x - w_lo);
            if (right[k] == 0 && left[k] == 0) continue;
            field.probs_at(s, site1(static_cast<int>(x)), probs);
            for (auto* pop : {&right, &left}) {
                auto* dst = pop == &right ? &nright : &nleft;
                if ((*pop)[k] == 0) continue;
                split_jumps((*pop)[k], probs, jump_rng, split);
                for (std::size_t j = 0; j < offs.size(); ++j)
                    if (split[j]) (*dst)[static_cast<std::size_t>(static_cast<long long>(k) + offs[j][0])] += split[j];
            }
        }
        right.swap(nright);
        left.swap(nleft);
        record(s + 1);
    }

    const double scale = std::pow(static_cast<double>(spec.n), -0.25);
    for (std::size_t i = 0; i < P; ++i) {
        out.quenched_mean.push_back(quenched_mean(spec, field, spec.points[i]));
        out.ybar.push_back(scale * (out.y[i] - out.quenched_mean[i]));
    }
    return out;
}

CurrentCov mc_current_cov(const CurrentSpec& spec, std::size_t replicas, std::uint64_t master_seed, unsigned threads,
                          std::size_t jackknife_groups) {
    spec.validate();
    if (replicas < 2) throw ConfigError("replicas must be >= 2");
    const std::size_t G = std::clamp<std::size_t>(jackknife_groups, 2, replicas);
    const std::size_t P = spec.points.size();
    const auto shared = std::make_shared<const EnvSpec>(spec.model);

    const auto samples = run_replicas(replicas, threads, [&](std::size_t r) {
        const EnvField field(shared, derive_seed(master_seed, "current-env", r));
        CounterRng init(derive_seed(master_seed, "current-init", r));
        CounterRng jumps(derive_seed(master_seed, "current-jumps", r));
        return simulate_current(spec, field, init, jumps).ybar;
    });

    CurrentCov res;
    res.points = spec.points;
    res.params = limit_params(spec);
    res.replicas = replicas;
    for (std::size_t a = 0; a < P; ++a) {
        SampleMoments m;
        for (const auto& s : samples) m.add(s[a]);
        res.mean.push_back(m.mean());
        res.mean_se.push_back(m.se_mean());
    }

    // Power sums per jackknife group, combined in a fixed order.
    std::vector<std::vector<double>> s1(G, std::vector<double>(P, 0.0));
    std::vector<std::vector<double>> s2(G, std::vector<double>(P * P, 0.0));
    std::vector<std::size_t> count(G, 0);
    for (std::size_t r = 0; r < replicas; ++r) {
        const std::size_t g = r * G / replicas;
        ++count[g];
        for (std::size_t a = 0; a < P; ++a) {
            s1[g][a] += samples[r][a];
            for (std::size_t b = 0; b < P; ++b) s2[g][a * P + b] += samples[r][a] * samples[r][b];
        }
    }
    std::vector<double> t1(P, 0.0), t2(P * P, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t a = 0; a < P; ++a) t1[a] += s1[g][a];
        for (std::size_t k = 0; k < P * P; ++k) t2[k] += s2[g][k];
    }
    auto cov = [](double sa, double sb, double sab, double n) { return (sab - sa * sb / n) / (n - 1.0); };

    res.empirical.assign(P, std::vector<double>(P));
    res.se.assign(P, std::vector<double>(P));
    res.analytic.assign(P, std::vector<double>(P));
    for (std::size_t a = 0; a < P; ++a)
        for (std::size_t b = 0; b < P; ++b) {
            const double n = static_cast<double>(replicas);
            res.empirical[a][b] = cov(t1[a], t1[b], t2[a * P + b], n);
            std::vector<double> loo(G);
            double avg = 0.0;
            for (std::size_t g = 0; g < G; ++g) {
                const double m = n - static_cast<double>(count[g]);
                loo[g] = cov(t1[a] - s1[g][a], t1[b] - s1[g][b], t2[a * P + b] - s2[g][a * P + b], m);
                avg += loo[g] / G;
            }
            double ss = 0.0;
            for (double v : loo) ss += (v - avg) * (v - avg);
            res.se[a][b] = std::sqrt((G - 1.0) / G * ss);
            res.analytic[a][b] = limit_cov(res.params, spec.points[a], spec.points[b]);
        }
    return res;
}

}  // namespace rwre
