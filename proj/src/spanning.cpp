#include "nsm/spanning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nsm {

namespace {

long det(ModeIndex a, ModeIndex b) { return long(a.k1) * b.k2 - long(a.k2) * b.k1; }

void fill_condition1(const std::vector<ModeIndex>& z0, SpanningReport& r) {
    const std::set<ModeIndex> s(z0.begin(), z0.end());
    r.is_symmetric = std::all_of(z0.begin(), z0.end(), [&](ModeIndex k) { return s.count(-k) > 0; });
    long g = 0;
    for (std::size_t a = 0; a < z0.size(); ++a)
        for (std::size_t b = a + 1; b < z0.size(); ++b) g = std::gcd(g, std::abs(det(z0[a], z0[b])));
    r.determinant_gcd = g;
    r.is_generator = (g == 1);
    std::vector<ModeIndex> sorted(s.begin(), s.end());
    for (std::size_t a = 0; a < sorted.size() && !r.nonparallel_unequal_pair; ++a)
        for (std::size_t b = a + 1; b < sorted.size(); ++b)
            if (det(sorted[a], sorted[b]) != 0 && sorted[a].norm2() != sorted[b].norm2()) {
                r.nonparallel_unequal_pair = std::make_pair(sorted[a], sorted[b]);
                break;
            }
}

}  // namespace

std::pair<bool, SpanningReport> check_condition1(const std::vector<ModeIndex>& z0) {
    if (z0.empty()) throw std::invalid_argument("check_condition1: Z0 must be nonempty");
    SpanningReport r;
    fill_condition1(z0, r);
    r.layers.emplace_back(z0.begin(), z0.end());
    const bool ok = r.is_symmetric && r.is_generator && r.nonparallel_unequal_pair.has_value();
    return {ok, std::move(r)};
}

SpanningReport reachable_modes(const std::vector<ModeIndex>& z0, int R, int max_iter) {
    if (R < 1) throw std::invalid_argument("reachable_modes: R must be >= 1");
    if (z0.empty()) throw std::invalid_argument("reachable_modes: Z0 must be nonempty");
    SpanningReport r;
    fill_condition1(z0, r);
    r.requested_radius = R;

    const std::set<ModeIndex> base(z0.begin(), z0.end());
    std::int64_t jmax2 = 0;
    for (const auto& j : base) jmax2 = std::max(jmax2, j.norm2());
    const double clip = R + std::sqrt(double(jmax2));
    const double clip2 = clip * clip;

    r.layers.push_back(base);
    std::set<std::set<ModeIndex>> seen{base};
    std::set<ModeIndex> all = base;
    for (int it = 0; it < max_iter; ++it) {
        std::set<ModeIndex> next;
        for (const auto& k : r.layers.back())
            for (const auto& j : base) {
                // <k^perp, j> != 0 <=> k, j not parallel; sign convention of perp is irrelevant.
                if (det(k, j) == 0 || k.norm2() == j.norm2()) continue;
                const ModeIndex s(k.k1 + j.k1, k.k2 + j.k2);
                if (double(s.norm2()) <= clip2) next.insert(s);
            }
        const bool repeat = !seen.insert(next).second;
        all.insert(next.begin(), next.end());
        r.layers.push_back(std::move(next));
        if (repeat) break;
    }

    // Smallest |k| missing from the union.
    const int box = int(std::ceil(clip));
    double missing = clip;
    for (int a = -box; a <= box; ++a)
        for (int b = -box; b <= box; ++b) {
            if (a == 0 && b == 0) continue;
            const ModeIndex k(a, b);
            if (k.norm() <= clip && !all.count(k)) missing = std::min(missing, k.norm());
        }
    r.coverage_radius_achieved = std::min(R, int(std::ceil(missing - 1e-12)) - 1);
    if (missing >= clip) r.coverage_radius_achieved = R;
    r.covers = r.coverage_radius_achieved >= R;
    return r;
}

bool generates_box(const std::vector<ModeIndex>& z0, int box, int target) {
    // Breadth-first closure under +/- each generator, confined to a window.
    const int window = box;
    const int side = 2 * window + 1;
    std::vector<char> hit(std::size_t(side) * side, 0);
    auto at = [&](int a, int b) -> char& { return hit[std::size_t(a + window) * side + (b + window)]; };
    std::vector<std::pair<int, int>> frontier{{0, 0}};
    at(0, 0) = 1;
    while (!frontier.empty()) {
        std::vector<std::pair<int, int>> next;
        for (auto [a, b] : frontier)
            for (const auto& j : z0)
                for (int sgn : {1, -1}) {
                    const int x = a + sgn * j.k1, y = b + sgn * j.k2;
                    if (std::abs(x) > window || std::abs(y) > window || at(x, y)) continue;
                    at(x, y) = 1;
                    next.emplace_back(x, y);
                }
        frontier.swap(next);
    }
    for (int a = -target; a <= target; ++a)
        for (int b = -target; b <= target; ++b)
            if (!at(a, b)) return false;
    return true;
}

}  // namespace nsm
