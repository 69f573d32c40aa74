#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsm/spectral.hpp"

namespace nsm {

/// Field snapshot format "NSSF", little-endian:
///   char[4] magic, u32 version, i32 kmax, u32 mode count,
///   then (i32 k1, i32 k2, f64 amplitude) per mode, sorted lexicographically.
/// Amplitudes are coefficients of the unit-norm basis ê_k.
inline constexpr std::uint32_t kFieldFormatVersion = 1;

void write_field(std::ostream& os, const SpectralField& w);
SpectralField read_field(std::istream& is);

void save_field(const std::string& path, const SpectralField& w);
SpectralField load_field(const std::string& path);

/// Several NSSF records back to back (used for Gram matrices: one record per column).
void save_fields(const std::string& path, const std::vector<SpectralField>& fields);
std::vector<SpectralField> load_fields(const std::string& path);

namespace binio {

void put_u32(std::ostream& os, std::uint32_t v);
void put_i32(std::ostream& os, std::int32_t v);
void put_u64(std::ostream& os, std::uint64_t v);
void put_f64(std::ostream& os, double v);
std::uint32_t get_u32(std::istream& is);
std::int32_t get_i32(std::istream& is);
std::uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);
void put_magic(std::ostream& os, const char (&magic)[5]);
void expect_magic(std::istream& is, const char (&magic)[5]);

}  // namespace binio
}  // namespace nsm
