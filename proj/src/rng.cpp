#include "nsm/rng.hpp"

#include <cmath>
#include <numbers>

namespace nsm {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(kMul0) * c[0];
        const std::uint64_t p1 = std::uint64_t(kMul1) * c[2];
        const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
        const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

std::uint64_t purpose_id(std::string_view purpose) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char ch : purpose) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

CounterRng::CounterRng(std::uint64_t seed, std::string_view purpose, std::uint64_t index) : index_(index) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(purpose_id(purpose)));
    key_ = {std::uint32_t(k), std::uint32_t(k >> 32)};
}

void CounterRng::refill() {
    buf_ = philox4x32({std::uint32_t(block_), std::uint32_t(block_ >> 32), std::uint32_t(index_),
                       std::uint32_t(index_ >> 32)},
                      key_);
    ++block_;
    used_ = 0;
}

std::uint64_t CounterRng::next_u64() {
    if (used_ > 2) refill();
    const std::uint64_t v = std::uint64_t(buf_[used_]) | (std::uint64_t(buf_[used_ + 1]) << 32);
    used_ += 2;
    return v;
}

double CounterRng::uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

double CounterRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
    // Lemire-style rejection keeps the result unbiased.
    const std::uint64_t limit = -n % n;
    for (;;) {
        const std::uint64_t x = next_u64();
        const unsigned __int128 m = (unsigned __int128)x * n;
        if (std::uint64_t(m) >= limit) return std::uint64_t(m >> 64);
    }
}

}  // namespace nsm
