#pragma once

#include <cstdint>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/lattice.hpp"
#include "rwre/particles.hpp"

namespace rwre {

/// f_N(T_{0,y} omega) for every y of a window.
struct DensityWindow {
    int N = 0;
    Box window;
    std::vector<double> values;

    double at(const Site& y) const { return values[window.index(y)]; }
};

/// Forward all-ones sweep: unit mass on every site of the backward light cone
/// of the window at level -N, pushed through the quenched kernels to level 0.
DensityWindow f_window(const EnvField& field, int N, const Box& window, std::size_t budget = kDefaultSiteBudget);

/// Same quantity at a single site by the backward recursion
/// g_0 = delta_y, g_s(x) = sum_z omega_{s,x}(z) g_{s+1}(x + z), f_N = sum_x g_{-N}(x).
double f_cone(const EnvField& field, int N, const Site& y);

/// max_y |f_{N+1}(T_{0,y} omega) - sum_x f_N(T_{-1,x} omega) omega_{-1,x}(y - x)| over the window.
double harmonicity_residual(const EnvField& field, int N, const Box& window);

/// Sites y of `window` all of whose one-step predecessors y - z lie in `window`.
Box interior(const Box& window, const EnvSpec& spec);

/// Independent Poisson(rho f_N(T_{0,x} omega)) counts on the window of `f`, at time 0.
OccupancyConfig sample_invariant_config(const DensityWindow& f, double rho, CounterRng& rng);
OccupancyConfig sample_invariant_config(const EnvField& field, double rho, int N, const Box& window,
                                        CounterRng& rng);

struct InvarianceSite {
    Site y;
    double target;  ///< rho f_{N+1}(T_{1,y} omega)
    double mean;
    double mean_se;
    double dispersion;
    double dispersion_se;
};

/// Samples from the Poisson product built on f_N, evolves one quenched step and
/// reports per-site moments on the interior of the window (fixed omega).
std::vector<InvarianceSite> invariance_check(const EnvField& field, double rho, int N, const Box& window,
                                             std::size_t replicas, std::uint64_t seed, unsigned threads = 1);

}  // namespace rwre
