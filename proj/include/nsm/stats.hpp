#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nsm::stats {

/// Pairwise (cascade) summation; result depends only on the input order.
double pairwise_sum(std::span<const double> x);

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;   // standard error of the mean
    double sd = 0.0;
    std::size_t n = 0;
};
MeanSE mean_se(std::span<const double> x);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Wilson score interval for a binomial proportion (z = 1.96 for 95%).
Interval wilson(std::size_t successes, std::size_t n, double z = 1.959963984540054);

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    std::size_t n = 0;
    /// 95% normal-approximation interval on the slope.
    Interval slope_ci() const { return {slope - 1.959963984540054 * slope_se, slope + 1.959963984540054 * slope_se}; }
};
/// Ordinary least squares y = a + b x. Needs at least 2 points (slope_se is 0 for n = 2).
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double quantile(std::vector<double> x, double q);
double median(std::vector<double> x);

}  // namespace nsm::stats
