#pragma once

#include <cstdint>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/rng.hpp"

namespace rwre {

/// Space-time point (t, r) of the current process.
struct CurrentPoint {
    double t = 1.0;
    double r = 0.0;
};

/// Drift and variance of the averaged walk and the two moments of the initial law.
struct LimitParams {
    double v = 0.0;
    double sigma2 = 0.0;
    double rho0 = 0.0;
    double sigma0_2 = 0.0;
};

/// Psi_{nu2}(x) = nu2 phi_{nu2}(x) - x (1 - Phi_{nu2}(x)); max(-x, 0) at nu2 = 0.
double psi(double nu2, double x);

double gamma1(const LimitParams& p, const CurrentPoint& a, const CurrentPoint& b);
double gamma2(const LimitParams& p, const CurrentPoint& a, const CurrentPoint& b);

/// rho0 Gamma1 + sigma0^2 Gamma2.
double limit_cov(const LimitParams& p, const CurrentPoint& a, const CurrentPoint& b);

struct OracleValue {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double cov = 0.0;
};

/// The same covariance from integrals of Brownian probabilities, by adaptive
/// Gauss-Kronrod quadrature. Throws NumericalError when the error estimate
/// exceeds `tol`.
OracleValue limit_cov_bm_oracle(const LimitParams& p, const CurrentPoint& a, const CurrentPoint& b,
                                double tol = 1e-9);

/// Initial occupation law. `poisson`: i.i.d. Poisson(rho). `invariant`:
/// Poisson(rho f_N(T_{0,x} omega)), which depends on the environment below
/// level 0. `deterministic`: exactly `count` particles per site.
struct InitialLaw {
    enum class Kind { poisson, invariant, deterministic };
    Kind kind = Kind::poisson;
    double rho = 1.0;
    int depth = 20;
    long long count = 1;
};

struct CurrentSpec {
    EnvSpec model;
    int n = 400;
    std::vector<CurrentPoint> points;
    InitialLaw initial;
    double clamp_k = 8.0;  ///< backward-sweep band half-width in standard deviations

    void validate() const;
};

LimitParams limit_params(const CurrentSpec& spec);

/// T = floor(n t) steps and observer F = floor(n v t) + floor(r sqrt(n)).
struct Observer {
    long long steps = 0;
    long long front = 0;
};
Observer observer(const CurrentSpec& spec, const CurrentPoint& p);

/// E^omega of the initial occupation at each site of [lo, hi].
std::vector<double> initial_means(const CurrentSpec& spec, const EnvField& field, long long lo, long long hi);

/// E^omega[Y_n(t,r)] by the clamped backward sweep.
double quenched_mean(const CurrentSpec& spec, const EnvField& field, const CurrentPoint& p);

/// Same by enumerating every walk path (small n only).
double quenched_mean_bruteforce(const CurrentSpec& spec, const EnvField& field, const CurrentPoint& p);

struct CurrentSample {
    std::vector<double> y;
    std::vector<double> quenched_mean;
    std::vector<double> ybar;  ///< n^{-1/4} (Y - E^omega Y)
};

/// One realization of the initial configuration and the walks in `field`.
CurrentSample simulate_current(const CurrentSpec& spec, const EnvField& field, CounterRng& init_rng,
                               CounterRng& jump_rng);

struct CurrentCov {
    std::vector<CurrentPoint> points;
    LimitParams params;
    std::size_t replicas = 0;
    std::vector<double> mean, mean_se;                 ///< of Ybar per point
    std::vector<std::vector<double>> empirical, se;    ///< jackknife standard errors
    std::vector<std::vector<double>> analytic;
};

/// Independent (omega, eta_0, walks) replicas; every replica derives its
/// streams from (master_seed, replica index).
CurrentCov mc_current_cov(const CurrentSpec& spec, std::size_t replicas, std::uint64_t master_seed,
                          unsigned threads = 1, std::size_t jackknife_groups = 50);

}  // namespace rwre
