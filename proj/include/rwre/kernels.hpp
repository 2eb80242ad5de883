#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/lattice.hpp"

namespace rwre {

/// Finitely supported translation-invariant row: y -> value.
struct KernelRow {
    std::vector<Site> offsets;
    std::vector<double> values;

    double at(const Site& y) const;
    double sum() const;
    int radius(int dim) const;
};

/// Transition function on Z^d. Homogeneous kernels use `row` everywhere; an
/// origin-perturbed kernel uses `origin` for jumps out of 0 and `row` elsewhere.
struct LatticeKernel {
    enum class Kind { homogeneous, origin_perturbed };

    int dim = 1;
    Kind kind = Kind::homogeneous;
    KernelRow row;
    KernelRow origin;

    double operator()(const Site& x, const Site& y) const;
    const KernelRow& row_at(const Site& x) const;
    int radius() const;
    bool symmetric(double tol = 1e-14) const;
};

/// p: mean step law. q: difference walk of two particles sharing the
/// environment (perturbed at 0). qbar: the same without the shared site.
/// h = q(0,.) - qbar(0,.).
struct KernelSet {
    int dim = 1;
    LatticeKernel p;
    LatticeKernel q;
    LatticeKernel qbar;
    KernelRow h;

    /// True when h vanishes identically (walks never feel each other).
    bool trivial(double tol = 1e-15) const;
};

KernelSet build_kernels(const EnvSpec& spec);

using Theta = std::array<double, kMaxDim>;

/// lambda(theta) = sum_y q(0,y) cos(theta.y), lambda_bar likewise for qbar.
class CharFn {
  public:
    explicit CharFn(const KernelSet& k) : q0_(k.q.origin), qbar_(k.qbar.row), dim_(k.dim) {}
    double lambda(const Theta& theta) const { return eval(q0_, theta); }
    double lambda_bar(const Theta& theta) const { return eval(qbar_, theta); }

  private:
    double eval(const KernelRow& row, const Theta& theta) const;
    KernelRow q0_;
    KernelRow qbar_;
    int dim_;
};

//---------------------------------------------------------------------------//
// Torus quadrature
//---------------------------------------------------------------------------//

struct QuadOptions {
    int min_grid = 16;   ///< points per axis of the first grid (even)
    int max_grid = 0;    ///< 0 selects a per-dimension default
    double tol = 0.0;    ///< 0 selects 1e-10 (d = 1) or 1e-8 (d >= 2)
};

struct QuadResult {
    std::vector<double> values;
    std::vector<double> previous;  ///< estimate from the preceding grid
    int grid = 0;                  ///< points per axis of the final grid
};

//---------------------------------------------------------------------------//
// beta, potential kernel, Green sums, covariances
//---------------------------------------------------------------------------//

enum class BetaMethod { fourier, probabilistic };

struct PotentialOptions {
    int start_depth = 0;  ///< first N of the doubling ladder; 0 selects a default
    int max_depth = 0;    ///< 0 selects a per-dimension default
    double band = 7.0;    ///< window half-width in standard deviations
    double tol = 0.0;     ///< 0 selects 1e-10 (d = 1) or 1e-7 (d >= 2)
};

struct NumericOptions {
    QuadOptions quad;
    PotentialOptions potential;
    double agree_tol = 1e-8;  ///< fourier vs probabilistic agreement
};

/// Throws AssumptionError when span 1 fails and h is not identically zero.
double beta(const EnvSpec& spec, BetaMethod method, const NumericOptions& opts = {});
double beta_fourier(const KernelSet& k, const QuadOptions& opts = {}, QuadResult* diag = nullptr);
double beta_probabilistic(const KernelSet& k, const PotentialOptions& opts = {});

enum class PotentialMethod { partial_sums, fourier };

/// abar(x) for every x in xs.
std::vector<double> potential_kernel(const LatticeKernel& qbar, const std::vector<Site>& xs, PotentialMethod method,
                                     const NumericOptions& opts = {});

struct PotentialTable {
    std::vector<Site> xs;
    std::vector<double> partial_sums;
    std::vector<double> fourier;
    double tol = 0.0;
};

/// Both methods; throws NumericalError when they differ by more than `tol`.
PotentialTable potential_kernel_checked(const LatticeKernel& qbar, const std::vector<Site>& xs, double tol,
                                        const NumericOptions& opts = {});

/// Target pair (x, m) for green_partial.
struct GreenTarget {
    Site x;
    Site m;
};

/// G_N(x,m) = sum_{k<=N} kernel^k(x,m), exact on the reachable window.
/// Throws BudgetError when a window would exceed `budget` sites.
std::vector<double> green_partial(const LatticeKernel& kernel, int N, const std::vector<GreenTarget>& targets,
                                  std::size_t budget = kDefaultSiteBudget);

/// Largest G_N(x,0) / Gbar_N(x,0) over xs and 1 <= N' <= N.
double green_ratio_max(const KernelSet& k, int N, const std::vector<Site>& xs,
                       std::size_t budget = kDefaultSiteBudget);

/// Exact C_N(m) = sum_y h(y) G_{N-1}(y,m) for N = 1..N_max; row n-1 holds C_n.
std::vector<std::vector<double>> cov_exact_series(const KernelSet& k, int N_max, const std::vector<Site>& ms,
                                                  std::size_t budget = kDefaultSiteBudget);

std::vector<double> cov_exact_N(const EnvSpec& spec, int N, const std::vector<Site>& ms,
                                std::size_t budget = kDefaultSiteBudget);

struct CovLimit {
    std::vector<Site> ms;
    std::vector<double> values;         ///< Fourier form, m = 0 gives var_f
    std::vector<double> probabilistic;  ///< potential-kernel form
    double beta_fourier = 1.0;
    double beta_probabilistic = 1.0;
    double var_f = 0.0;
    int grid = 0;
};

/// Limit covariances by both routes; throws NumericalError when they differ by
/// more than opts.agree_tol, AssumptionError when the standing assumptions fail.
CovLimit cov_limit(const EnvSpec& spec, const std::vector<Site>& ms, const NumericOptions& opts = {});

}  // namespace rwre
