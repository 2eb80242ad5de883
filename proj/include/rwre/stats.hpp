#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace rwre {

/// Streaming sample moments up to order four, accumulated about the first
/// observation to keep the power sums well conditioned.
class SampleMoments {
  public:
    void add(double x) {
        if (n_ == 0) shift_ = x;
        const double d = x - shift_;
        const double d2 = d * d;
        s1_ += d;
        s2_ += d2;
        s3_ += d2 * d;
        s4_ += d2 * d2;
        ++n_;
    }

    std::size_t count() const { return n_; }
    double mean() const { return shift_ + s1_ / n_; }
    /// Unbiased sample variance.
    double variance() const {
        const double m = s1_ / n_;
        return std::max(0.0, (s2_ - n_ * m * m) / (n_ - 1.0));
    }
    double se_mean() const { return std::sqrt(variance() / n_); }
    /// Large-sample standard error of variance(): sqrt((mu4 - mu2^2) / n).
    double variance_se() const {
        const double n = static_cast<double>(n_);
        const double m = s1_ / n;
        const double c2 = s2_ / n - m * m;
        const double c4 = s4_ / n - 4 * m * s3_ / n + 6 * m * m * s2_ / n - 3 * m * m * m * m;
        return std::sqrt(std::max(0.0, (c4 - c2 * c2) / n));
    }

    /// Index of dispersion var / mean and its delta-method standard error.
    double dispersion() const { return variance() / mean(); }
    double dispersion_se() const {
        const double n = static_cast<double>(n_);
        const double m = s1_ / n;
        const double c2 = s2_ / n - m * m;
        const double c3 = s3_ / n - 3 * m * s2_ / n + 2 * m * m * m;
        const double c4 = s4_ / n - 4 * m * s3_ / n + 6 * m * m * s2_ / n - 3 * m * m * m * m;
        const double mu = mean();
        // D = s2 / xbar; Var(xbar) = c2/n, Var(s2) = (c4 - c2^2)/n, Cov = c3/n.
        const double gx = -c2 / (mu * mu), gs = 1.0 / mu;
        const double var = (gx * gx * c2 + gs * gs * (c4 - c2 * c2) + 2 * gx * gs * c3) / n;
        return std::sqrt(std::max(0.0, var));
    }

  private:
    std::size_t n_ = 0;
    double shift_ = 0.0;
    double s1_ = 0.0, s2_ = 0.0, s3_ = 0.0, s4_ = 0.0;
};

/// |estimate - target| <= k * se, also accepting an absolute floor for
/// zero-variance cases.
inline bool within_se(double estimate, double target, double se, double k = 4.0, double floor = 1e-12) {
    return std::abs(estimate - target) <= k * se + floor;
}

}  // namespace rwre
