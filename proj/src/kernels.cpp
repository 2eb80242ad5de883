#include "rwre/kernels.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <set>

#include "rwre/errors.hpp"
#include "rwre/numerics.hpp"

namespace rwre {

double KernelRow::at(const Site& y) const {
    for (std::size_t i = 0; i < offsets.size(); ++i)
        if (offsets[i] == y) return values[i];
    return 0.0;
}

double KernelRow::sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

int KernelRow::radius(int dim) const {
    int r = 0;
    for (const auto& y : offsets) r = std::max(r, sup_norm(y, dim));
    return r;
}

const KernelRow& LatticeKernel::row_at(const Site& x) const {
    if (kind == Kind::origin_perturbed && x == Site{0, 0, 0}) return origin;
    return row;
}

double LatticeKernel::operator()(const Site& x, const Site& y) const { return row_at(x).at(y - x); }

int LatticeKernel::radius() const { return std::max(row.radius(dim), origin.radius(dim)); }

bool LatticeKernel::symmetric(double tol) const {
    for (const auto* r : {&row, &origin})
        for (std::size_t i = 0; i < r->offsets.size(); ++i)
            if (std::abs(r->values[i] - r->at(-r->offsets[i])) > tol) return false;
    return true;
}

bool KernelSet::trivial(double tol) const {
    for (double v : h.values)
        if (std::abs(v) > tol) return false;
    return true;
}

namespace {

KernelRow row_from(const std::map<Site, double>& m) {
    KernelRow r;
    for (const auto& [y, v] : m) {
        r.offsets.push_back(y);
        r.values.push_back(v);
    }
    return r;
}

KernelRow difference(const KernelRow& a, const KernelRow& b) {
    std::map<Site, double> m;
    for (std::size_t i = 0; i < a.offsets.size(); ++i) m[a.offsets[i]] += a.values[i];
    for (std::size_t i = 0; i < b.offsets.size(); ++i) m[b.offsets[i]] -= b.values[i];
    return row_from(m);
}

LatticeKernel homogeneous(int dim, KernelRow row) {
    LatticeKernel k;
    k.dim = dim;
    k.row = row;
    k.origin = std::move(row);
    return k;
}

}  // namespace

KernelSet build_kernels(const EnvSpec& spec) {
    const auto mom = env_moments(spec);
    const std::size_t n = spec.size();
    std::map<Site, double> p, q0, qbar;
    for (std::size_t i = 0; i < n; ++i) {
        p[spec.support[i]] += mom.mean[i];
        for (std::size_t j = 0; j < n; ++j) {
            const Site y = spec.support[j] - spec.support[i];
            q0[y] += mom.second[i * n + j];
            qbar[y] += mom.mean[i] * mom.mean[j];
        }
    }
    KernelSet k;
    k.dim = spec.dim;
    k.p = homogeneous(spec.dim, row_from(p));
    k.qbar = homogeneous(spec.dim, row_from(qbar));
    k.q = k.qbar;
    k.q.kind = LatticeKernel::Kind::origin_perturbed;
    k.q.origin = row_from(q0);
    k.h = difference(k.q.origin, k.qbar.row);
    return k;
}

double CharFn::eval(const KernelRow& row, const Theta& theta) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < row.offsets.size(); ++i) {
        double phase = 0.0;
        for (int a = 0; a < dim_; ++a) phase += theta[a] * row.offsets[i][a];
        acc += row.values[i] * std::cos(phase);
    }
    return acc;
}

//---------------------------------------------------------------------------//
// Midpoint torus quadrature
//---------------------------------------------------------------------------//

namespace {

// fn receives cos(theta.y) for every phase y and writes one value per output.
using Integrand = std::function<void(const double* cosines, double* out)>;

std::vector<double> torus_means(int dim, int M, const std::vector<Site>& phases, std::size_t nout,
                                const Integrand& fn) {
    const std::size_t P = phases.size();
    int K = 0;
    for (const auto& y : phases) K = std::max(K, sup_norm(y, dim));
    // table[a][j][k + K] = exp(i theta_j k); theta_j = -pi + (j + 1/2) 2pi/M never hits 0 for even M.
    std::vector<std::complex<double>> table(static_cast<std::size_t>(M) * (2 * K + 1));
    for (int j = 0; j < M; ++j) {
        const double th = -std::numbers::pi + (j + 0.5) * 2.0 * std::numbers::pi / M;
        for (int k = -K; k <= K; ++k) table[static_cast<std::size_t>(j) * (2 * K + 1) + (k + K)] = std::polar(1.0, th * k);
    }
    auto e = [&](int j, int k) { return table[static_cast<std::size_t>(j) * (2 * K + 1) + (k + K)]; };

    std::vector<double> total(nout, 0.0), slab(nout), out(nout), cosines(P);
    std::vector<std::complex<double>> outer(P, 1.0);
    const int outer_points = dim == 1 ? 1 : (dim == 2 ? M : M * M);
    for (int o = 0; o < outer_points; ++o) {
        for (std::size_t i = 0; i < P; ++i) {
            std::complex<double> c = 1.0;
            if (dim >= 2) c = e(dim == 2 ? o : o / M, phases[i][0]);
            if (dim == 3) c *= e(o % M, phases[i][1]);
            outer[i] = c;
        }
        std::fill(slab.begin(), slab.end(), 0.0);
        for (int j = 0; j < M; ++j) {
            for (std::size_t i = 0; i < P; ++i) {
                const auto c = outer[i] * e(j, phases[i][dim - 1]);
                cosines[i] = c.real();
            }
            fn(cosines.data(), out.data());
            for (std::size_t r = 0; r < nout; ++r) slab[r] += out[r];
        }
        for (std::size_t r = 0; r < nout; ++r) total[r] += slab[r];
    }
    const double points = std::pow(static_cast<double>(M), dim);
    for (auto& v : total) v /= points;
    return total;
}

QuadResult torus_integrate(int dim, const std::vector<Site>& phases, std::size_t nout, const Integrand& fn,
                           const QuadOptions& opts) {
    const int max_grid = opts.max_grid > 0 ? opts.max_grid : (dim == 1 ? 1 << 14 : (dim == 2 ? 4096 : 256));
    const double tol = opts.tol > 0 ? opts.tol : (dim == 1 ? 1e-10 : 1e-8);
    int M = std::max(2, opts.min_grid + (opts.min_grid % 2));
    // In d >= 2 the integrand is bounded but direction-dependent at 0, so the
    // midpoint error expands in powers h^d, h^{d+2}, ... and is extrapolated away.
    std::vector<Richardson> rich;
    std::vector<double> exps;
    if (dim >= 2)
        for (int j = 0; j < 4; ++j) exps.push_back(dim + 2.0 * j);
    for (std::size_t r = 0; r < nout; ++r) rich.emplace_back(exps);

    const std::size_t min_levels = dim == 1 ? 2 : 3;
    QuadResult res;
    for (;;) {
        const auto means = torus_means(dim, M, phases, nout, fn);
        bool converged = true;
        res.values.assign(nout, 0.0);
        res.previous.assign(nout, 0.0);
        for (std::size_t r = 0; r < nout; ++r) {
            res.values[r] = rich[r].add(means[r]);
            res.previous[r] = rich[r].previous();
            if (rich[r].size() < min_levels || !(std::abs(res.values[r] - res.previous[r]) < tol)) converged = false;
        }
        res.grid = M;
        if (converged) return res;
        if (2 * M > max_grid) {
            std::size_t worst = 0;
            for (std::size_t r = 1; r < nout; ++r)
                if (std::abs(res.values[r] - res.previous[r]) > std::abs(res.values[worst] - res.previous[worst]))
                    worst = r;
            throw NumericalError("torus quadrature did not converge at grid " + std::to_string(M),
                                 res.previous[worst], res.values[worst]);
        }
        M *= 2;
    }
}

std::vector<Site> union_sites(std::initializer_list<const std::vector<Site>*> lists) {
    std::set<Site> s;
    for (const auto* l : lists) s.insert(l->begin(), l->end());
    return {s.begin(), s.end()};
}

std::vector<double> weights_on(const std::vector<Site>& phases, const KernelRow& row) {
    std::vector<double> w(phases.size(), 0.0);
    for (std::size_t i = 0; i < phases.size(); ++i) w[i] = row.at(phases[i]);
    return w;
}

std::size_t index_of(const std::vector<Site>& v, const Site& s) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), s) - v.begin());
}

void require_span_one(const KernelRow& qbar, int dim, const char* what) {
    std::vector<Site> supp;
    for (std::size_t i = 0; i < qbar.offsets.size(); ++i)
        if (qbar.values[i] > 0.0) supp.push_back(qbar.offsets[i]);
    const long long idx = lattice_index(supp, dim);
    if (idx != 1)
        throw AssumptionError(std::string(what) + ": the averaged walk does not have span 1 (lattice index " +
                              std::to_string(idx) + "); 1 - lambda_bar vanishes away from 0");
}

//---------------------------------------------------------------------------//
// Stencil sweeps on boxes
//---------------------------------------------------------------------------//

// Calls fn(start, length) for each maximal last-axis run of `active` inside `full`.
template <class Fn>
void for_each_run(const Box& full, const Box& active, Fn&& fn) {
    if (active.empty()) return;
    const int last = full.dim - 1;
    const auto len = static_cast<std::size_t>(active.extent(last));
    Box outer = active;
    outer.hi[last] = outer.lo[last];
    outer.for_each([&](const Site& s) { fn(full.index(s), len); });
}

struct Stencil {
    std::vector<std::ptrdiff_t> offs;
    std::vector<double> vals;
};

Stencil stencil(const KernelRow& row, const Box& full) {
    Stencil st;
    for (std::size_t i = 0; i < row.offsets.size(); ++i) {
        if (row.values[i] == 0.0) continue;
        st.offs.push_back(full.offset_of(row.offsets[i]));
        st.vals.push_back(row.values[i]);
    }
    return st;
}

// out(x) = sum_y row(y) in(x - y) for x in active. `in` must vanish outside the
// region it was last written on, and active grown by the row radius must fit in full.
void convolve(const Box& full, const Box& active, const Stencil& st, const std::vector<double>& in,
              std::vector<double>& out) {
    const double* src = in.data();
    double* dst = out.data();
    for_each_run(full, active, [&](std::size_t start, std::size_t len) {
        double* o = dst + start;
        std::fill(o, o + len, 0.0);
        for (std::size_t j = 0; j < st.offs.size(); ++j) {
            const double v = st.vals[j];
            const double* s = src + static_cast<std::ptrdiff_t>(start) - st.offs[j];
            for (std::size_t i = 0; i < len; ++i) o[i] += v * s[i];
        }
    });
}

// Copies values on `from` into a zeroed vector over `to` (to contains from).
std::vector<double> embed(const Box& from, const std::vector<double>& v, const Box& to) {
    std::vector<double> out(to.size(), 0.0);
    for_each_run(from, from, [&](std::size_t start, std::size_t len) {
        const auto dst = to.index(from.site(start));
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(start), v.begin() + static_cast<std::ptrdiff_t>(start + len),
                  out.begin() + static_cast<std::ptrdiff_t>(dst));
    });
    return out;
}

Box check_budget(const Box& b, std::size_t budget, const std::string& what) {
    if (b.size() > budget)
        throw BudgetError(what + " needs a window of " + std::to_string(b.size()) + " sites (budget " +
                              std::to_string(budget) + ")",
                          b.size());
    return b;
}


// Pushes a measure with an origin-perturbed kernel: mu * row, plus mu(0) times
// the origin correction.
class ExactPush {
  public:
    ExactPush(const LatticeKernel& k, const Box& full)
        : full_(full), st_(stencil(k.row, full)), correction_(difference(k.origin, k.row)),
          perturbed_(k.kind == LatticeKernel::Kind::origin_perturbed) {}

    void step(const Box& active, const std::vector<double>& in, std::vector<double>& out) const {
        convolve(full_, active, st_, in, out);
        const Site zero{0, 0, 0};
        if (!perturbed_ || !full_.contains(zero)) return;
        const double m0 = in[full_.index(zero)];
        if (m0 == 0.0) return;
        for (std::size_t i = 0; i < correction_.offsets.size(); ++i) out[full_.index(correction_.offsets[i])] += m0 * correction_.values[i];
    }

  private:
    Box full_;
    Stencil st_;
    KernelRow correction_;
    bool perturbed_;
};

}  // namespace

//---------------------------------------------------------------------------//
// beta and the potential kernel
//---------------------------------------------------------------------------//

double beta_fourier(const KernelSet& k, const QuadOptions& opts, QuadResult* diag) {
    if (k.trivial()) return 1.0;
    require_span_one(k.qbar.row, k.dim, "beta");
    const auto phases = union_sites({&k.q.origin.offsets, &k.qbar.row.offsets});
    const auto wq = weights_on(phases, k.q.origin);
    const auto wb = weights_on(phases, k.qbar.row);
    const std::size_t P = phases.size();
    auto res = torus_integrate(
        k.dim, phases, 1,
        [&](const double* c, double* out) {
            double one_minus_l = 0.0, one_minus_lb = 0.0;
            for (std::size_t i = 0; i < P; ++i) {
                one_minus_l += wq[i] * (1.0 - c[i]);
                one_minus_lb += wb[i] * (1.0 - c[i]);
            }
            out[0] = one_minus_l / one_minus_lb;
        },
        opts);
    if (diag) *diag = res;
    return res.values[0];
}

namespace {

std::vector<double> abar_fourier(const LatticeKernel& qbar, const std::vector<Site>& xs, const QuadOptions& opts) {
    const auto phases = union_sites({&qbar.row.offsets, &xs});
    const auto wb = weights_on(phases, qbar.row);
    std::vector<std::size_t> xi;
    for (const auto& x : xs) xi.push_back(index_of(phases, x));
    const std::size_t P = phases.size();
    auto res = torus_integrate(
        qbar.dim, phases, xs.size(),
        [&](const double* c, double* out) {
            double one_minus_lb = 0.0;
            for (std::size_t i = 0; i < P; ++i) one_minus_lb += wb[i] * (1.0 - c[i]);
            for (std::size_t r = 0; r < xi.size(); ++r) out[r] = (1.0 - c[xi[r]]) / one_minus_lb;
        },
        opts);
    return res.values;
}

// abar(x) = lim_N sum_{k<=N} [qbar^k(0,0) - qbar^k(0,-x)]. Partial sums are
// taken on a doubling ladder of N and Richardson-extrapolated in powers
// N^{-d/2-j}; the walk is kept on a window of `band` standard deviations.
std::vector<double> abar_partial_sums(const LatticeKernel& qbar, const std::vector<Site>& xs,
                                      const PotentialOptions& opts) {
    const int d = qbar.dim;
    const int R = qbar.radius();
    const int N0 = opts.start_depth > 0 ? opts.start_depth : (d == 1 ? 512 : (d == 2 ? 64 : 16));
    const int Nmax = opts.max_depth > 0 ? opts.max_depth : (d == 1 ? 1 << 17 : (d == 2 ? 1 << 13 : 512));
    const double tol = opts.tol > 0 ? opts.tol : (d == 1 ? 1e-10 : 1e-7);

    std::array<double, kMaxDim> var{0, 0, 0};
    for (std::size_t i = 0; i < qbar.row.offsets.size(); ++i)
        for (int a = 0; a < d; ++a) var[a] += qbar.row.values[i] * qbar.row.offsets[i][a] * qbar.row.offsets[i][a];
    int xr = 0;
    for (const auto& x : xs) xr = std::max(xr, sup_norm(x, d));
    auto active_box = [&](long long k) {
        Box b;
        b.dim = d;
        for (int a = 0; a < d; ++a) {
            const long long exact = static_cast<long long>(R) * k;
            const long long band = static_cast<long long>(std::ceil(opts.band * std::sqrt(var[a] * k))) + R + xr;
            const int r = static_cast<int>(std::min(exact, band));
            b.lo[a] = -r;
            b.hi[a] = r;
        }
        return b;
    };

    std::vector<double> exps;
    for (int j = 0; j < 4; ++j) exps.push_back(d / 2.0 + j);
    std::vector<Richardson> rich(xs.size(), Richardson(exps));
    std::vector<double> sums(xs.size(), 0.0);

    // Origin term k = 0 contributes 1 - 1{x = 0}.
    for (std::size_t r = 0; r < xs.size(); ++r) sums[r] = (sup_norm(xs[r], d) == 0) ? 0.0 : 1.0;

    Box full = active_box(N0).grown(R);
    std::vector<double> cur(full.size(), 0.0), next(full.size(), 0.0);
    cur[full.index({0, 0, 0})] = 1.0;
    Stencil st = stencil(qbar.row, full);
    long long k = 0;
    for (long long target = N0;; target *= 2) {
        const Box need = active_box(target).grown(R);
        if (!(need == full)) {
            cur = embed(full, cur, need);
            next.assign(need.size(), 0.0);
            full = need;
            st = stencil(qbar.row, full);
        }
        for (; k < target; ++k) {
            convolve(full, active_box(k + 1), st, cur, next);
            std::swap(cur, next);
            const double at0 = cur[full.index({0, 0, 0})];
            for (std::size_t r = 0; r < xs.size(); ++r)
                sums[r] += at0 - (full.contains(-xs[r]) ? cur[full.index(-xs[r])] : 0.0);
        }
        bool converged = true;
        double worst_prev = 0.0, worst_cur = 0.0, worst_gap = -1.0;
        for (std::size_t r = 0; r < xs.size(); ++r) {
            rich[r].add(sums[r]);
            const double gap = rich[r].size() < 3 ? INFINITY : std::abs(rich[r].value() - rich[r].previous());
            if (!(gap < tol)) converged = false;
            if (gap > worst_gap) {
                worst_gap = gap;
                worst_prev = rich[r].previous();
                worst_cur = rich[r].value();
            }
        }
        if (converged) break;
        if (2 * target > Nmax)
            throw NumericalError("potential kernel partial sums did not converge by N = " + std::to_string(target),
                                 worst_prev, worst_cur);
    }
    std::vector<double> out(xs.size());
    for (std::size_t r = 0; r < xs.size(); ++r) out[r] = sup_norm(xs[r], d) == 0 ? 0.0 : rich[r].value();
    return out;
}

}  // namespace

std::vector<double> potential_kernel(const LatticeKernel& qbar, const std::vector<Site>& xs, PotentialMethod method,
                                     const NumericOptions& opts) {
    if (!qbar.symmetric()) throw ConfigError("potential kernel requires a symmetric kernel");
    require_span_one(qbar.row, qbar.dim, "potential kernel");
    return method == PotentialMethod::fourier ? abar_fourier(qbar, xs, opts.quad)
                                              : abar_partial_sums(qbar, xs, opts.potential);
}

PotentialTable potential_kernel_checked(const LatticeKernel& qbar, const std::vector<Site>& xs, double tol,
                                        const NumericOptions& opts) {
    PotentialTable t{xs, potential_kernel(qbar, xs, PotentialMethod::partial_sums, opts),
                     potential_kernel(qbar, xs, PotentialMethod::fourier, opts), tol};
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!(std::abs(t.partial_sums[i] - t.fourier[i]) <= tol))
            throw NumericalError("potential kernel methods disagree at x = " + to_string(xs[i], qbar.dim),
                                 t.partial_sums[i], t.fourier[i]);
    return t;
}

double beta_probabilistic(const KernelSet& k, const PotentialOptions& opts) {
    if (k.trivial()) return 1.0;
    require_span_one(k.qbar.row, k.dim, "beta");
    NumericOptions o;
    o.potential = opts;
    const auto abar = potential_kernel(k.qbar, k.q.origin.offsets, PotentialMethod::partial_sums, o);
    double b = 0.0;
    for (std::size_t i = 0; i < abar.size(); ++i) b += k.q.origin.values[i] * abar[i];
    return b;
}

double beta(const EnvSpec& spec, BetaMethod method, const NumericOptions& opts) {
    const auto k = build_kernels(spec);
    return method == BetaMethod::fourier ? beta_fourier(k, opts.quad) : beta_probabilistic(k, opts.potential);
}

//---------------------------------------------------------------------------//
// Green sums and exact covariances
//---------------------------------------------------------------------------//

std::vector<double> green_partial(const LatticeKernel& kernel, int N, const std::vector<GreenTarget>& targets,
                                  std::size_t budget) {
    if (N < 0) throw ConfigError("green_partial: N must be >= 0");
    const int d = kernel.dim;
    const int R = kernel.radius();
    std::vector<double> out(targets.size(), 0.0);
    std::map<Site, std::vector<std::size_t>> by_source;
    for (std::size_t i = 0; i < targets.size(); ++i) by_source[targets[i].x].push_back(i);

    for (const auto& [x, idx] : by_source) {
        const Box full = check_budget(Box::cube(d, R * (N + 1), x), budget, "green_partial");
        ExactPush push(kernel, full);
        std::vector<double> cur(full.size(), 0.0), next(full.size(), 0.0);
        cur[full.index(x)] = 1.0;
        for (int k = 0;; ++k) {
            for (auto i : idx) {
                const auto& m = targets[i].m;
                if (full.contains(m)) out[i] += cur[full.index(m)];
            }
            if (k == N) break;
            push.step(Box::cube(d, R * (k + 1), x), cur, next);
            std::swap(cur, next);
        }
    }
    return out;
}

double green_ratio_max(const KernelSet& k, int N, const std::vector<Site>& xs, std::size_t budget) {
    const int d = k.dim;
    const int R = k.q.radius();
    const Box full = check_budget(Box::cube(d, R * (N + 1)), budget, "green_ratio_max");
    const Stencil st = stencil(k.qbar.row, full);
    std::vector<double> g(full.size(), 0.0), gn(full.size()), gb(full.size(), 0.0), gbn(full.size());
    const auto origin = full.index({0, 0, 0});
    g[origin] = gb[origin] = 1.0;
    std::vector<double> G(xs.size(), 0.0), Gb(xs.size(), 0.0);
    double worst = 0.0;
    for (int n = 0; n <= N; ++n) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!full.contains(xs[i])) continue;
            G[i] += g[full.index(xs[i])];
            Gb[i] += gb[full.index(xs[i])];
            if (n >= 1 && Gb[i] > 0.0) worst = std::max(worst, G[i] / Gb[i]);
        }
        if (n == N) break;
        // Backward equation for the target 0: g <- q g, where q differs from
        // qbar only in the row at the origin.
        double corr = 0.0;
        for (std::size_t i = 0; i < k.h.offsets.size(); ++i)
            if (full.contains(k.h.offsets[i])) corr += k.h.values[i] * g[full.index(k.h.offsets[i])];
        const Box active = Box::cube(d, R * (n + 1));
        convolve(full, active, st, g, gn);
        convolve(full, active, st, gb, gbn);
        gn[origin] += corr;
        std::swap(g, gn);
        std::swap(gb, gbn);
    }
    return worst;
}

std::vector<std::vector<double>> cov_exact_series(const KernelSet& k, int N_max, const std::vector<Site>& ms,
                                                  std::size_t budget) {
    if (N_max < 1) throw ConfigError("cov_exact: N must be >= 1");
    const int d = k.dim;
    const int R = k.q.radius();
    const int Rh = k.h.radius(d);
    const Box full = check_budget(Box::cube(d, Rh + R * N_max), budget, "cov_exact_N");
    ExactPush push(k.q, full);
    std::vector<double> mu(full.size(), 0.0), next(full.size(), 0.0);
    for (std::size_t i = 0; i < k.h.offsets.size(); ++i) mu[full.index(k.h.offsets[i])] = k.h.values[i];

    std::vector<std::vector<double>> series;
    std::vector<double> acc(ms.size(), 0.0);
    for (int n = 1; n <= N_max; ++n) {
        // mu holds h q^{n-1}; C_n(m) = sum_{j<n} (h q^j)(m).
        for (std::size_t i = 0; i < ms.size(); ++i)
            if (full.contains(ms[i])) acc[i] += mu[full.index(ms[i])];
        series.push_back(acc);
        if (n == N_max) break;
        push.step(Box::cube(d, Rh + R * n), mu, next);
        std::swap(mu, next);
    }
    return series;
}

std::vector<double> cov_exact_N(const EnvSpec& spec, int N, const std::vector<Site>& ms, std::size_t budget) {
    return cov_exact_series(build_kernels(spec), N, ms, budget).back();
}

//---------------------------------------------------------------------------//
// Limit covariance
//---------------------------------------------------------------------------//

CovLimit cov_limit(const EnvSpec& spec, const std::vector<Site>& ms, const NumericOptions& opts) {
    const auto k = build_kernels(spec);
    CovLimit res;
    res.ms = ms;
    if (k.trivial()) {
        res.values.assign(ms.size(), 0.0);
        res.probabilistic.assign(ms.size(), 0.0);
        return res;
    }
    const auto rep = validate_assumptions(spec);
    if (!rep.ok()) {
        std::string msg = "cov_limit requires the standing assumptions:";
        for (const auto& w : rep.warnings) msg += " " + w + ";";
        throw AssumptionError(msg);
    }
    const int d = k.dim;

    // Fourier route.
    const auto phases = union_sites({&k.q.origin.offsets, &k.qbar.row.offsets, &ms});
    const auto wq = weights_on(phases, k.q.origin);
    const auto wb = weights_on(phases, k.qbar.row);
    std::vector<std::size_t> mi;
    for (const auto& m : ms) mi.push_back(index_of(phases, m));
    const std::size_t P = phases.size();
    const auto quad = torus_integrate(
        d, phases, ms.size() + 1,
        [&](const double* c, double* out) {
            double one_minus_l = 0.0, one_minus_lb = 0.0;
            for (std::size_t i = 0; i < P; ++i) {
                one_minus_l += wq[i] * (1.0 - c[i]);
                one_minus_lb += wb[i] * (1.0 - c[i]);
            }
            const double ratio = one_minus_l / one_minus_lb;
            out[0] = ratio;
            for (std::size_t r = 0; r < mi.size(); ++r) out[r + 1] = c[mi[r]] * ratio;
        },
        opts.quad);
    res.grid = quad.grid;
    res.beta_fourier = quad.values[0];
    res.var_f = 1.0 / res.beta_fourier - 1.0;
    for (std::size_t r = 0; r < ms.size(); ++r)
        res.values.push_back(((sup_norm(ms[r], d) == 0 ? 1.0 : 0.0) - quad.values[r + 1]) / res.beta_fourier);

    // Potential-kernel route.
    std::set<Site> need(k.q.origin.offsets.begin(), k.q.origin.offsets.end());
    for (const auto& m : ms) {
        need.insert(-m);
        for (const auto& z : k.q.origin.offsets) need.insert(z - m);
    }
    const std::vector<Site> xs(need.begin(), need.end());
    const auto abar = potential_kernel(k.qbar, xs, PotentialMethod::partial_sums, opts);
    auto a = [&](const Site& x) { return abar[index_of(xs, x)]; };
    const auto& q0 = k.q.origin;
    double b = 0.0;
    for (std::size_t i = 0; i < q0.offsets.size(); ++i) b += q0.values[i] * a(q0.offsets[i]);
    res.beta_probabilistic = b;
    for (const auto& m : ms) {
        double s = sup_norm(m, d) == 0 ? 1.0 : 0.0;
        for (std::size_t i = 0; i < q0.offsets.size(); ++i) s += q0.values[i] * (a(-m) - a(q0.offsets[i] - m));
        res.probabilistic.push_back(s / b);
    }

    if (!(std::abs(res.beta_fourier - res.beta_probabilistic) <= opts.agree_tol))
        throw NumericalError("beta: fourier and probabilistic forms disagree", res.beta_fourier,
                             res.beta_probabilistic);
    for (std::size_t r = 0; r < ms.size(); ++r)
        if (!(std::abs(res.values[r] - res.probabilistic[r]) <= opts.agree_tol))
            throw NumericalError("limit covariance: fourier and probabilistic forms disagree at m = " +
                                     to_string(ms[r], d),
                                 res.values[r], res.probabilistic[r]);
    return res;
}

}  // namespace rwre
