#include "nsm/lattice.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace nsm {

ModeIndex::ModeIndex(int a, int b) : k1(a), k2(b) {
    if (a == 0 && b == 0) throw std::invalid_argument("ModeIndex: the zero mode is excluded");
}

double ModeIndex::norm() const { return std::sqrt(double(norm2())); }

int ModeIndex::max_abs() const { return std::max(std::abs(k1), std::abs(k2)); }

std::string ModeIndex::str() const {
    return "(" + std::to_string(k1) + "," + std::to_string(k2) + ")";
}

namespace lattice {

int size(int kmax) {
    const int side = 2 * kmax + 1;
    return side * side - 1;
}

bool contains(int kmax, ModeIndex k) {
    return !(k.k1 == 0 && k.k2 == 0) && k.max_abs() <= kmax;
}

int index(int kmax, ModeIndex k) {
    const int side = 2 * kmax + 1;
    const int raw = (k.k1 + kmax) * side + (k.k2 + kmax);
    const int zero = kmax * side + kmax;
    return raw > zero ? raw - 1 : raw;
}

ModeIndex mode(int kmax, int idx) {
    const int side = 2 * kmax + 1;
    const int zero = kmax * side + kmax;
    const int raw = idx >= zero ? idx + 1 : idx;
    return ModeIndex(raw / side - kmax, raw % side - kmax);
}

std::vector<ModeIndex> modes(int kmax) {
    std::vector<ModeIndex> out;
    out.reserve(size(kmax));
    for (int i = 0; i < size(kmax); ++i) out.push_back(mode(kmax, i));
    return out;
}

int dealiased_kmax(int grid) { return (grid - 1) / 3; }

int grid_for(int kmax) {
    int n = 3 * kmax + 1;
    for (;; ++n) {
        int m = n;
        for (int p : {2, 3, 5})
            while (m % p == 0) m /= p;
        if (m == 1) return n;
    }
}

}  // namespace lattice
}  // namespace nsm
