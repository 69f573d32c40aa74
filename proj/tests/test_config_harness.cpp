#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nsm/config.hpp"
#include "nsm/errors.hpp"
#include "nsm/harness.hpp"

using namespace nsm;
namespace fs = std::filesystem;

namespace {
std::string slurp(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("nsm_test_" + name);
    fs::remove_all(d);
    return d;
}

std::vector<std::string> config_errors(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.messages();
    }
    return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}
}  // namespace

TEST_CASE("config parsing: values, lists, modes and comments") {
    const auto c = parse_config(R"(
# comment
[run]
kind = malliavin   ; trailing comment
seed = 42
paths = 7
[grid]
kmax = 6
nu = 0.05
dt = 0.002
[noise]
modes = (1,0) (-1,0) (1,1) (-1,-1)
kind = spectral_coordinate
profile = sigmoid
c0 = 0.5
c1 = 0.2
aleph = 1
[malliavin]
alpha = 0.2
epsilons = 1e-2, 1e-4
gram_kmax = 4
)");
    CHECK(c.kind == ExperimentKind::malliavin);
    CHECK(c.seed == 42);
    CHECK(c.paths == 7);
    CHECK(c.integrator.kmax == 6);
    CHECK(c.integrator.dt == 0.002);
    CHECK(c.noise.modes.size() == 4);
    CHECK(c.noise.modes[3] == ModeIndex(-1, -1));
    CHECK(c.noise.kind == QKind::spectral_coordinate);
    CHECK(c.malliavin.alpha == 0.2);
    CHECK(c.malliavin.epsilons == std::vector<double>{1e-2, 1e-4});
    CHECK(c.malliavin.N == 4);  // default kept
    const auto d = parse_config(c.canonical().empty() ? "" : "[run]\nkind = malliavin\nseed = 42\npaths = 7\n");
    CHECK(d.hash() != c.hash());
    CHECK(c.hash() == parse_config("[run]\nkind=malliavin\nseed=42\npaths=7\n[grid]\nkmax=6\nnu=0.05\ndt=0.002\n"
                                   "[noise]\nmodes=(1,0),(-1,0),(1,1),(-1,-1)\nkind=spectral_coordinate\nprofile=sigmoid\n"
                                   "c0=0.5\nc1=0.2\naleph=1\n[malliavin]\nalpha=0.2\nepsilons=1e-2 1e-4\ngram_kmax=4\n")
                          .hash());
    CHECK(c.hash().size() == 64);
    // The output directory does not enter the hash.
    auto e = c;
    e.out_dir = "elsewhere";
    CHECK(e.hash() == c.hash());
}

TEST_CASE("config errors are collected with line numbers") {
    const auto errs = config_errors("[run]\nkind = simulate\nbogus = 1\n[grid]\nnu = abc\n[nowhere]\nx = 1\n");
    CHECK(errs.size() >= 3);
    CHECK(any_contains(errs, "line 3"));
    CHECK(any_contains(errs, "line 5"));
    CHECK(any_contains(errs, "nowhere"));
    CHECK(any_contains(config_errors("[malliavin]\nalpha = 1.5\n"), "alpha must lie in (0,1]"));
    CHECK(any_contains(config_errors("[run]\nseed = 1\nseed = 2\n"), "line 3"));
    CHECK(any_contains(config_errors("[noise]\nmodes = (1,0) (0,1\n"), "(k1,k2)"));
    CHECK(any_contains(config_errors("[grid]\nkmax = 2\n[noise]\nmodes = (3,0) (-3,0)\n"), "outside the lattice"));
    CHECK(any_contains(config_errors("[noise]\nmodes = (1,0) (-1,0) (0,1) (0,-1)\ncondition1_required = true\n"),
                       "spanning condition fails"));
    CHECK(any_contains(config_errors("[noise]\nkind = spectral_coordinate\nprofile = sigmoid\nc0 = 0.5\nc1 = 2\naleph = 2.5\n"),
                       "noise"));
    CHECK(any_contains(config_errors("[run]\nkind = teleport\n"), "teleport"));
    CHECK(any_contains(config_errors("just text\n"), "line 1"));
    CHECK_THROWS_AS(load_config("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("CSV quoting round-trips") {
    for (std::string s : {"plain", "with,comma", "with \"quote\"", "", "diff_coord:1,0"}) {
        const auto line = csv_field(s) + "," + csv_field("x");
        const auto f = csv_split(line);
        REQUIRE(f.size() == 2);
        CHECK(f[0] == s);
        CHECK(f[1] == "x");
    }
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("ab") == "ab");
}

TEST_CASE("output directory resolution") {
    ExperimentConfig c;
    c.out_dir = "from_config";
    ::unsetenv(kOutDirEnv);
    CHECK(resolve_out_dir(c) == "from_config");
    ::setenv(kOutDirEnv, "from_env", 1);
    CHECK(resolve_out_dir(c) == "from_env");
    CHECK(resolve_out_dir(c, "from_cli") == "from_cli");
    ::unsetenv(kOutDirEnv);
}

TEST_CASE("harness runs are deterministic and write a manifest last") {
    auto cfg = parse_config("[run]\nkind = jacobian-check\nseed = 5\n[grid]\nkmax = 3\ndt = 0.01\n[jacobian]\npairs = 2\n");
    const auto a = scratch("det_a"), b = scratch("det_b");
    cfg.out_dir = a.string();
    const auto ra = run_experiment(cfg);
    cfg.out_dir = b.string();
    const auto rb = run_experiment(cfg);
    CHECK(ra.exit_code == exit_ok);
    CHECK(ra.checks_passed);
    CHECK(slurp(ra.summary_path) == slurp(rb.summary_path));
    CHECK(slurp(ra.series_path) == slurp(rb.series_path));
    const auto man = nlohmann::json::parse(slurp(ra.manifest_path));
    CHECK(man["config_hash"] == cfg.hash());
    CHECK(man["files"].size() >= 3);
    const auto summary = nlohmann::json::parse(slurp(ra.summary_path));
    CHECK(summary["kind"] == "jacobian-check");
    CHECK(summary["pass"] == true);

    const auto plots = export_plotdata(ra.manifest_path);
    CHECK_FALSE(plots.empty());
    for (const auto& p : plots) CHECK(fs::exists(p));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("harness error paths") {
    // Numerical failure: blow-up recorded in failure.json, no manifest.
    auto cfg = parse_config("[run]\nkind = simulate\n[grid]\nkmax = 3\nnu = 0\ndt = 0.5\nblowup_guard = 10\n"
                            "[initial]\nkind = random\nradius = 9\n[simulate]\nT = 50\n");
    const auto d = scratch("fail");
    cfg.out_dir = d.string();
    const auto r = run_experiment(cfg);
    CHECK(r.exit_code == exit_numerical_failure);
    CHECK(r.manifest_path.empty());
    CHECK_FALSE(fs::exists(d / "manifest.json"));
    const auto f = nlohmann::json::parse(slurp((d / "failure.json").string()));
    CHECK(f["error_type"] == "blow_up");

    // T not a multiple of dt is a configuration problem.
    auto bad = parse_config("[run]\nkind = simulate\n[grid]\nkmax = 2\ndt = 0.3\n[simulate]\nT = 1\n");
    bad.out_dir = d.string();
    CHECK_THROWS_AS(run_experiment(bad), ConfigError);

    // Empty manifest and manifest without rows.
    std::ofstream(d / "empty.json") << "";
    CHECK_THROWS_AS(export_plotdata((d / "empty.json").string()), FormatError);
    auto sp = parse_config("[run]\nkind = spanning\n");
    sp.out_dir = (d / "sp").string();
    const auto rs = run_experiment(sp);
    CHECK(rs.exit_code == exit_ok);
    CHECK_FALSE(export_plotdata(rs.manifest_path).empty());
    // Same manifest, but series.csv reduced to its header.
    std::ofstream(d / "sp" / "series.csv") << "series,t,value,ci_lo,ci_hi\n";
    CHECK_THROWS_AS(export_plotdata(rs.manifest_path), FormatError);
    std::ofstream(d / "sp" / "series.csv") << "series,t\n";
    CHECK_THROWS_AS(export_plotdata(rs.manifest_path), FormatError);
    std::ofstream(d / "nofiles.json") << "{\"files\": []}";
    CHECK_THROWS_AS(export_plotdata((d / "nofiles.json").string()), FormatError);
    fs::remove_all(d);
}

TEST_CASE("experiment kinds round-trip through their names") {
    for (auto k : {ExperimentKind::simulate, ExperimentKind::energy_check, ExperimentKind::jacobian_check,
                   ExperimentKind::spanning, ExperimentKind::malliavin, ExperimentKind::control_probe,
                   ExperimentKind::lyapunov, ExperimentKind::mixing, ExperimentKind::irreducibility})
        CHECK(parse_kind(to_string(k)) == k);
    CHECK_THROWS(parse_kind("nope"));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
