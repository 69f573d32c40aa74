#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace nsm {

/// Nonzero wavenumber k = (k1, k2) on the integer lattice.
///
/// Sign class follows the real basis: modes in the upper half plane
/// (k1 > 0, or k1 == 0 and k2 > 0) carry sin<k,x>; the others carry
/// cos<k,x> = cos<-k,x>.
struct ModeIndex {
    int k1 = 0;
    int k2 = 0;

    ModeIndex() = default;
    /// Throws std::invalid_argument for the zero pair.
    ModeIndex(int a, int b);

    bool is_sin_type() const { return k1 > 0 || (k1 == 0 && k2 > 0); }
    bool is_cos_type() const { return !is_sin_type(); }
    std::int64_t norm2() const { return std::int64_t(k1) * k1 + std::int64_t(k2) * k2; }
    double norm() const;
    int max_abs() const;
    ModeIndex operator-() const { return ModeIndex(-k1, -k2); }
    std::string str() const;

    auto operator<=>(const ModeIndex&) const = default;
};

/// Index arithmetic for the square truncation {k != 0 : max(|k1|,|k2|) <= kmax}.
///
/// Modes are ordered lexicographically in (k1, k2), which is also the order
/// used by the field file format.
namespace lattice {

int size(int kmax);
bool contains(int kmax, ModeIndex k);
/// Position of k in the lexicographic order. Precondition: contains(kmax, k).
int index(int kmax, ModeIndex k);
ModeIndex mode(int kmax, int idx);
std::vector<ModeIndex> modes(int kmax);

/// Largest kmax whose quadratic products are alias-free on an n-point grid
/// (n >= 3 kmax + 1).
int dealiased_kmax(int grid);
/// Smallest 2^a 3^b 5^c grid that resolves kmax without aliasing.
int grid_for(int kmax);

}  // namespace lattice
}  // namespace nsm
