#pragma once

#include <iosfwd>
#include <string>

#include "nsm/dynamics.hpp"

namespace nsm {

/// Path checkpoint "NSMG", little-endian:
///   char[4] magic, u32 version, i32 kmax, u32 d, u32 D (lattice size),
///   f64 dt, u64 seed, u64 path index, u64 steps,
///   f64 increments[steps][d], f64 q_values[steps][d],
///   u64 snapshot stride, u64 snapshot count,
///   then per snapshot: u64 step, f64 coefficients[D].
inline constexpr std::uint32_t kPathFormatVersion = 1;

void write_path(std::ostream& os, const PathRecord& p);
PathRecord read_path(std::istream& is);
void save_path(const std::string& file, const PathRecord& p);
PathRecord load_path(const std::string& file);

}  // namespace nsm
