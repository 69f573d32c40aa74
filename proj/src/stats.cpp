#include "nsm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nsm::stats {

double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t h = x.size() / 2;
    return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

MeanSE mean_se(std::span<const double> x) {
    MeanSE r;
    r.n = x.size();
    if (x.empty()) return r;
    r.mean = pairwise_sum(x) / double(x.size());
    if (x.size() > 1) {
        std::vector<double> dev(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) dev[i] = (x[i] - r.mean) * (x[i] - r.mean);
        r.sd = std::sqrt(pairwise_sum(dev) / double(x.size() - 1));
        r.se = r.sd / std::sqrt(double(x.size()));
    }
    return r;
}

Interval wilson(std::size_t successes, std::size_t n, double z) {
    if (n == 0) return {0.0, 1.0};
    const double p = double(successes) / double(n);
    const double nn = double(n);
    const double denom = 1.0 + z * z / nn;
    const double centre = (p + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
    // The exact endpoints at 0 and n successes are 0 and 1; the formula only reaches them up to roundoff.
    return {successes == 0 ? 0.0 : std::max(0.0, centre - half), successes == n ? 1.0 : std::min(1.0, centre + half)};
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("linear_fit: size mismatch");
    if (x.size() < 2) throw std::invalid_argument("linear_fit: need at least two points");
    const std::size_t n = x.size();
    const double mx = pairwise_sum(x) / double(n), my = pairwise_sum(y) / double(n);
    std::vector<double> sxx(n), sxy(n);
    for (std::size_t i = 0; i < n; ++i) {
        sxx[i] = (x[i] - mx) * (x[i] - mx);
        sxy[i] = (x[i] - mx) * (y[i] - my);
    }
    const double Sxx = pairwise_sum(sxx);
    if (Sxx <= 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
    LinearFit f;
    f.n = n;
    f.slope = pairwise_sum(sxy) / Sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        std::vector<double> r2(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            r2[i] = r * r;
        }
        f.slope_se = std::sqrt(pairwise_sum(r2) / double(n - 2) / Sxx);
    }
    return f;
}

double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw std::invalid_argument("quantile: empty sample");
    std::sort(x.begin(), x.end());
    const double pos = q * double(x.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - double(i);
    if (i + 1 >= x.size()) return x.back();
    return x[i] * (1.0 - frac) + x[i + 1] * frac;
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

}  // namespace nsm::stats
