#include "nsm/path_io.hpp"

#include <fstream>

#include "nsm/errors.hpp"
#include "nsm/field_io.hpp"

namespace nsm {

using namespace binio;

void write_path(std::ostream& os, const PathRecord& p) {
    put_magic(os, "NSMG");
    put_u32(os, kPathFormatVersion);
    put_i32(os, p.kmax);
    put_u32(os, std::uint32_t(p.d()));
    put_u32(os, std::uint32_t(lattice::size(p.kmax)));
    put_f64(os, p.dt);
    put_u64(os, p.seed);
    put_u64(os, p.path_index);
    put_u64(os, std::uint64_t(p.steps));
    for (std::int64_t m = 0; m < p.steps; ++m)
        for (Eigen::Index j = 0; j < p.increments.cols(); ++j) put_f64(os, p.increments(m, j));
    for (std::int64_t m = 0; m < p.steps; ++m)
        for (Eigen::Index j = 0; j < p.q_values.cols(); ++j) put_f64(os, p.q_values(m, j));
    put_u64(os, std::uint64_t(p.snapshot_stride));
    put_u64(os, p.snapshots.size());
    for (std::size_t s = 0; s < p.snapshots.size(); ++s) {
        put_u64(os, std::uint64_t(p.snapshot_steps[s]));
        for (double c : p.snapshots[s]) put_f64(os, c);
    }
}

PathRecord read_path(std::istream& is) {
    expect_magic(is, "NSMG");
    const auto version = get_u32(is);
    if (version != kPathFormatVersion) throw FormatError("unsupported NSMG version " + std::to_string(version));
    PathRecord p;
    p.kmax = get_i32(is);
    const auto d = get_u32(is);
    const auto D = get_u32(is);
    if (p.kmax < 1 || D != std::uint32_t(lattice::size(p.kmax))) throw FormatError("NSMG: inconsistent lattice size");
    p.dt = get_f64(is);
    p.seed = get_u64(is);
    p.path_index = get_u64(is);
    p.steps = std::int64_t(get_u64(is));
    if (p.steps < 0 || d == 0 || d > 4096) throw FormatError("NSMG: implausible dimensions");
    p.increments.resize(p.steps, d);
    p.q_values.resize(p.steps, d);
    for (std::int64_t m = 0; m < p.steps; ++m)
        for (std::uint32_t j = 0; j < d; ++j) p.increments(m, j) = get_f64(is);
    for (std::int64_t m = 0; m < p.steps; ++m)
        for (std::uint32_t j = 0; j < d; ++j) p.q_values(m, j) = get_f64(is);
    p.snapshot_stride = std::int64_t(get_u64(is));
    const auto count = get_u64(is);
    for (std::uint64_t s = 0; s < count; ++s) {
        p.snapshot_steps.push_back(std::int64_t(get_u64(is)));
        Eigen::VectorXd w(D);
        for (auto& c : w) c = get_f64(is);
        p.snapshots.push_back(std::move(w));
    }
    if (p.snapshots.empty() || p.snapshot_steps.front() != 0) throw FormatError("NSMG: missing initial snapshot");
    return p;
}

void save_path(const std::string& file, const PathRecord& p) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw Error("cannot open " + file + " for writing");
    write_path(os, p);
}

PathRecord load_path(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw Error("cannot open " + file);
    return read_path(is);
}

}  // namespace nsm
