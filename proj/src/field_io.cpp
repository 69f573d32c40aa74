#include "nsm/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "nsm/errors.hpp"

namespace nsm {

namespace binio {

namespace {

template <class U>
void put_le(std::ostream& os, U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
    unsigned char buf[sizeof(U)];
    is.read(reinterpret_cast<char*>(buf), sizeof(U));
    if (!is) throw FormatError("unexpected end of file");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
void put_i32(std::ostream& os, std::int32_t v) { put_le(os, static_cast<std::uint32_t>(v)); }
void put_u64(std::ostream& os, std::uint64_t v) { put_le(os, v); }
void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t get_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
std::int32_t get_i32(std::istream& is) { return static_cast<std::int32_t>(get_le<std::uint32_t>(is)); }
std::uint64_t get_u64(std::istream& is) { return get_le<std::uint64_t>(is); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char (&magic)[5]) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0)
        throw FormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace binio

void write_field(std::ostream& os, const SpectralField& w) {
    using namespace binio;
    put_magic(os, "NSSF");
    put_u32(os, kFieldFormatVersion);
    put_i32(os, w.kmax());
    put_u32(os, static_cast<std::uint32_t>(w.size()));
    for (int i = 0; i < w.size(); ++i) {
        const ModeIndex k = lattice::mode(w.kmax(), i);
        put_i32(os, k.k1);
        put_i32(os, k.k2);
        put_f64(os, w.coeffs()[i]);
    }
}

SpectralField read_field(std::istream& is) {
    using namespace binio;
    expect_magic(is, "NSSF");
    const auto version = get_u32(is);
    if (version != kFieldFormatVersion) throw FormatError("unsupported NSSF version " + std::to_string(version));
    const int kmax = get_i32(is);
    if (kmax < 0 || kmax > 4096) throw FormatError("implausible kmax " + std::to_string(kmax));
    const auto count = get_u32(is);
    if (count > std::uint32_t(lattice::size(kmax))) throw FormatError("mode count exceeds lattice size");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(lattice::size(kmax));
    bool first = true;
    ModeIndex prev;
    for (std::uint32_t i = 0; i < count; ++i) {
        const int k1 = get_i32(is), k2 = get_i32(is);
        const double amp = get_f64(is);
        if ((k1 == 0 && k2 == 0) || std::max(std::abs(k1), std::abs(k2)) > kmax)
            throw FormatError("mode outside lattice");
        const ModeIndex k(k1, k2);
        if (!first && !(prev < k)) throw FormatError("modes not strictly sorted");
        first = false;
        prev = k;
        c[lattice::index(kmax, k)] = amp;
    }
    return SpectralField(kmax, std::move(c));
}

void save_field(const std::string& path, const SpectralField& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    write_field(os, w);
}

SpectralField load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    return read_field(is);
}

void save_fields(const std::string& path, const std::vector<SpectralField>& fields) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    for (const auto& f : fields) write_field(os, f);
}

std::vector<SpectralField> load_fields(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    std::vector<SpectralField> out;
    while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_field(is));
    return out;
}

}  // namespace nsm
