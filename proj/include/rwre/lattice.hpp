#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwre {

inline constexpr int kMaxDim = 3;

/// Default cap on the number of sites any single window may hold.
inline constexpr std::size_t kDefaultSiteBudget = std::size_t{1} << 26;

/// Lattice point or offset in Z^d, d <= 3. Unused trailing coordinates stay 0.
using Site = std::array<int, kMaxDim>;

inline Site operator+(Site a, const Site& b) {
    for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
    return a;
}
inline Site operator-(Site a, const Site& b) {
    for (int i = 0; i < kMaxDim; ++i) a[i] -= b[i];
    return a;
}
inline Site operator-(Site a) {
    for (auto& c : a) c = -c;
    return a;
}

inline Site site1(int x) { return Site{x, 0, 0}; }

/// Sup norm over the first `dim` coordinates.
inline int sup_norm(const Site& s, int dim) {
    int m = 0;
    for (int i = 0; i < dim; ++i) m = std::max(m, s[i] < 0 ? -s[i] : s[i]);
    return m;
}

inline long long dot(const Site& s, const Site& t, int dim) {
    long long acc = 0;
    for (int i = 0; i < dim; ++i) acc += static_cast<long long>(s[i]) * t[i];
    return acc;
}

std::string to_string(const Site& s, int dim);

/// Axis-aligned box [lo, hi] (inclusive) in Z^d.
struct Box {
    int dim = 1;
    Site lo{0, 0, 0};
    Site hi{-1, 0, 0};

    static Box interval(int lo, int hi) { return Box{1, {lo, 0, 0}, {hi, 0, 0}}; }
    static Box cube(int dim, int radius, const Site& center = {0, 0, 0});

    bool empty() const {
        for (int i = 0; i < dim; ++i)
            if (hi[i] < lo[i]) return true;
        return false;
    }
    int extent(int axis) const { return hi[axis] - lo[axis] + 1; }
    std::size_t size() const {
        if (empty()) return 0;
        std::size_t n = 1;
        for (int i = 0; i < dim; ++i) n *= static_cast<std::size_t>(extent(i));
        return n;
    }
    bool contains(const Site& s) const {
        for (int i = 0; i < dim; ++i)
            if (s[i] < lo[i] || s[i] > hi[i]) return false;
        return true;
    }
    /// Row-major linear index, last axis fastest.
    std::size_t index(const Site& s) const {
        std::size_t idx = 0;
        for (int i = 0; i < dim; ++i) idx = idx * extent(i) + static_cast<std::size_t>(s[i] - lo[i]);
        return idx;
    }
    Site site(std::size_t idx) const {
        Site s{0, 0, 0};
        for (int i = dim - 1; i >= 0; --i) {
            const auto e = static_cast<std::size_t>(extent(i));
            s[i] = lo[i] + static_cast<int>(idx % e);
            idx /= e;
        }
        return s;
    }
    /// Linear-index stride of one unit step along `axis`.
    std::ptrdiff_t stride(int axis) const {
        std::ptrdiff_t st = 1;
        for (int i = dim - 1; i > axis; --i) st *= extent(i);
        return st;
    }
    std::ptrdiff_t offset_of(const Site& z) const {
        std::ptrdiff_t off = 0;
        for (int i = 0; i < dim; ++i) off += stride(i) * z[i];
        return off;
    }
    Box grown(int r) const {
        Box b = *this;
        for (int i = 0; i < dim; ++i) {
            b.lo[i] -= r;
            b.hi[i] += r;
        }
        return b;
    }
    Box grown(const Site& below, const Site& above) const {
        Box b = *this;
        for (int i = 0; i < dim; ++i) {
            b.lo[i] -= below[i];
            b.hi[i] += above[i];
        }
        return b;
    }
    Box shifted(const Site& u) const {
        Box b = *this;
        for (int i = 0; i < dim; ++i) {
            b.lo[i] += u[i];
            b.hi[i] += u[i];
        }
        return b;
    }
    Box intersect(const Box& o) const {
        Box b = *this;
        for (int i = 0; i < dim; ++i) {
            b.lo[i] = std::max(lo[i], o.lo[i]);
            b.hi[i] = std::min(hi[i], o.hi[i]);
        }
        return b;
    }
    bool operator==(const Box&) const = default;

    /// Calls fn(site) for every site in row-major order.
    template <class Fn>
    void for_each(Fn&& fn) const {
        if (empty()) return;
        Site s = lo;
        for (;;) {
            fn(static_cast<const Site&>(s));
            int axis = dim - 1;
            while (axis >= 0) {
                if (++s[axis] <= hi[axis]) break;
                s[axis] = lo[axis];
                --axis;
            }
            if (axis < 0) return;
        }
    }
};

/// Dense array of values over a box.
template <class T>
struct Grid {
    Box box;
    std::vector<T> data;

    Grid() = default;
    explicit Grid(const Box& b, T fill = T{}) : box(b), data(b.size(), fill) {}

    T& operator[](const Site& s) { return data[box.index(s)]; }
    const T& operator[](const Site& s) const { return data[box.index(s)]; }
    T at_or(const Site& s, T fallback) const { return box.contains(s) ? data[box.index(s)] : fallback; }
};

}  // namespace rwre
