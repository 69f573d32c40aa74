#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace nsm {

/// Philox4x32-10 block function (Salmon et al.), counter-based: every output
/// block is a pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

/// Stable 64-bit identifier for a stream purpose ("increments", "initials", ...).
std::uint64_t purpose_id(std::string_view purpose);

/// Counter-based stream keyed by (master seed, purpose, index). Streams with
/// different keys never overlap, so adding a new purpose or path leaves all
/// existing streams untouched.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::string_view purpose, std::uint64_t index);

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    /// Standard normal (Box-Muller).
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    void refill();

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t index_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int used_ = 4;  // 32-bit words consumed from buf_
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace nsm
