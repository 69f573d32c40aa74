#pragma once

#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "nsm/lattice.hpp"

namespace nsm {

struct SpanningReport {
    bool is_symmetric = false;
    bool is_generator = false;
    long determinant_gcd = 0;  // gcd of all pairwise 2x2 determinants (1 <=> generator)
    std::optional<std::pair<ModeIndex, ModeIndex>> nonparallel_unequal_pair;
    std::vector<std::set<ModeIndex>> layers;  // layers[0] = Z0
    int requested_radius = 0;
    int coverage_radius_achieved = 0;  // largest R with {0 < |k| <= R} inside the union of layers
    bool covers = false;               // coverage_radius_achieved >= requested_radius
};

/// Symmetric generator containing two non-parallel modes of different length.
std::pair<bool, SpanningReport> check_condition1(const std::vector<ModeIndex>& z0);

/// Layers Z_n = {k + j : j in Z0, k in Z_{n-1}, <k^perp, j> != 0, |k| != |j|},
/// clipped to |k| <= R + max|j|, iterated until a layer repeats or max_iter.
SpanningReport reachable_modes(const std::vector<ModeIndex>& z0, int R, int max_iter);

/// Brute-force check that integer combinations with |coefficient| <= box
/// of the modes hit every lattice point with max(|k1|,|k2|) <= target.
bool generates_box(const std::vector<ModeIndex>& z0, int box, int target);

}  // namespace nsm
