#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rwre {

/// Richardson table for estimates taken at step sizes h0, h0/2, h0/4, ...
/// whose error expands as sum_j c_j h^{p_j}. Feed estimates in order; value()
/// is the most extrapolated entry of the newest row.
class Richardson {
  public:
    explicit Richardson(std::vector<double> exponents) : exponents_(std::move(exponents)) {}

    double add(double estimate) {
        std::vector<double> row{estimate};
        const std::size_t order = std::min(rows_.size(), exponents_.size());
        for (std::size_t j = 0; j < order; ++j) {
            const double factor = std::pow(2.0, exponents_[j]) - 1.0;
            row.push_back(row[j] + (row[j] - rows_.back()[j]) / factor);
        }
        rows_.push_back(std::move(row));
        return value();
    }

    double value() const { return rows_.back().back(); }
    /// Most extrapolated entry of the previous row; NaN when there is none.
    double previous() const { return rows_.size() < 2 ? std::nan("") : rows_[rows_.size() - 2].back(); }
    std::size_t size() const { return rows_.size(); }

  private:
    std::vector<double> exponents_;
    std::vector<std::vector<double>> rows_;
};

}  // namespace rwre
