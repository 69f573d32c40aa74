#include "nsm/config.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <sstream>

#include "nsm/ergodicity.hpp"
#include "nsm/errors.hpp"
#include "nsm/malliavin.hpp"
#include "nsm/spanning.hpp"

namespace nsm {

namespace {

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
    static const std::vector<std::pair<ExperimentKind, std::string>> names{
        {ExperimentKind::simulate, "simulate"},           {ExperimentKind::energy_check, "energy-check"},
        {ExperimentKind::jacobian_check, "jacobian-check"}, {ExperimentKind::spanning, "spanning"},
        {ExperimentKind::malliavin, "malliavin"},         {ExperimentKind::control_probe, "control-probe"},
        {ExperimentKind::lyapunov, "lyapunov"},           {ExperimentKind::mixing, "mixing"},
        {ExperimentKind::irreducibility, "irreducibility"}};
    return names;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

/// Typed access to the raw table; records every problem instead of stopping.
class Reader {
public:
    std::map<std::string, std::map<std::string, Entry>> table;
    std::vector<std::string> errors;

    void error(const Entry& e, const std::string& section, const std::string& key, const std::string& msg) {
        errors.push_back("line " + std::to_string(e.line) + ": [" + section + "] " + key + ": " + msg);
    }

    Entry* find(const std::string& section, const std::string& key) {
        auto s = table.find(section);
        if (s == table.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    template <class T, class Parse>
    void get(const std::string& section, const std::string& key, T& target, Parse parse) {
        Entry* e = find(section, key);
        if (!e) return;
        try {
            target = parse(e->value);
        } catch (const std::exception& ex) {
            error(*e, section, key, ex.what());
        }
    }

    void real(const std::string& s, const std::string& k, double& t) { get(s, k, t, parse_real); }
    void integer(const std::string& s, const std::string& k, int& t) {
        get(s, k, t, [](const std::string& v) { return int(parse_i64(v)); });
    }
    void i64(const std::string& s, const std::string& k, std::int64_t& t) { get(s, k, t, parse_i64); }
    void u64(const std::string& s, const std::string& k, std::uint64_t& t) { get(s, k, t, parse_u64); }
    void size(const std::string& s, const std::string& k, std::size_t& t) {
        get(s, k, t, [](const std::string& v) { return std::size_t(parse_u64(v)); });
    }
    void boolean(const std::string& s, const std::string& k, bool& t) { get(s, k, t, parse_bool); }
    void text(const std::string& s, const std::string& k, std::string& t) {
        get(s, k, t, [](const std::string& v) { return v; });
    }
    void reals(const std::string& s, const std::string& k, std::vector<double>& t) {
        get(s, k, t, [](const std::string& v) {
            std::vector<double> out;
            for (const auto& x : split_list(v)) out.push_back(parse_real(x));
            if (out.empty()) throw std::invalid_argument("empty list");
            return out;
        });
    }
    void integers(const std::string& s, const std::string& k, std::vector<int>& t) {
        get(s, k, t, [](const std::string& v) {
            std::vector<int> out;
            for (const auto& x : split_list(v)) out.push_back(int(parse_i64(x)));
            if (out.empty()) throw std::invalid_argument("empty list");
            return out;
        });
    }
    void words(const std::string& s, const std::string& k, std::vector<std::string>& t) {
        get(s, k, t, [](const std::string& v) {
            // observables may contain commas ("coord:1,0"), so split on whitespace only
            std::vector<std::string> out;
            std::istringstream is(v);
            for (std::string w; is >> w;) out.push_back(w);
            if (out.empty()) throw std::invalid_argument("empty list");
            return out;
        });
    }
    void modes(const std::string& s, const std::string& k, std::vector<ModeIndex>& t) {
        get(s, k, t, parse_modes);
    }
    void mode(const std::string& s, const std::string& k, ModeIndex& t) {
        get(s, k, t, [](const std::string& v) {
            const auto m = parse_modes(v);
            if (m.size() != 1) throw std::invalid_argument("expected a single mode (k1,k2)");
            return m[0];
        });
    }

    static double parse_real(const std::string& v) {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("not a number: '" + v + "'");
        return x;
    }
    static std::int64_t parse_i64(const std::string& v) {
        std::int64_t x = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw std::invalid_argument("not an integer: '" + v + "'");
        return x;
    }
    static std::uint64_t parse_u64(const std::string& v) {
        std::uint64_t x = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size())
            throw std::invalid_argument("not a non-negative integer: '" + v + "'");
        return x;
    }
    static bool parse_bool(const std::string& v) {
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        throw std::invalid_argument("not a boolean: '" + v + "'");
    }
    static std::vector<ModeIndex> parse_modes(const std::string& v) {
        static const std::regex one(R"(\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\))");
        std::vector<ModeIndex> out;
        std::string leftover;
        std::smatch m;
        auto it = v.cbegin();
        while (std::regex_search(it, v.cend(), m, one)) {
            leftover.append(it, m[0].first);
            out.push_back(ModeIndex{std::stoi(m[1].str()), std::stoi(m[2].str())});
            it = m[0].second;
        }
        leftover.append(it, v.cend());
        if (leftover.find_first_not_of(" \t,") != std::string::npos)
            throw std::invalid_argument("expected modes written as (k1,k2) pairs");
        if (out.empty()) throw std::invalid_argument("expected at least one (k1,k2) mode");
        return out;
    }
};

QKind parse_qkind(const std::string& v) {
    if (v == "constant") return QKind::constant;
    if (v == "spectral_coordinate") return QKind::spectral_coordinate;
    if (v == "norm_based") return QKind::norm_based;
    throw std::invalid_argument("unknown noise kind '" + v + "' (constant, spectral_coordinate, norm_based)");
}

std::string modes_str(const std::vector<ModeIndex>& m) {
    std::string s;
    for (std::size_t i = 0; i < m.size(); ++i) s += (i ? " " : "") + m[i].str();
    return s;
}

template <class T>
std::string list_str(const std::vector<T>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

std::string num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

std::string to_string(ExperimentKind k) {
    for (const auto& [kind, name] : kind_names())
        if (kind == k) return name;
    return "unknown";
}

ExperimentKind parse_kind(std::string_view name) {
    for (const auto& [kind, n] : kind_names())
        if (n == name) return kind;
    throw std::invalid_argument("unknown experiment kind '" + std::string(name) + "'");
}

NoiseModel NoiseConfig::build() const {
    ScalarProfile p = ScalarProfile::constant(c0);
    if (profile == "sigmoid")
        p = ScalarProfile::sigmoid(c0, c1);
    else if (profile == "bump")
        p = ScalarProfile::bump(c0, c1);
    else if (profile != "constant")
        throw std::invalid_argument("unknown profile '" + profile + "'");
    return NoiseModel(ModeSet(modes), kind, {p}, aleph, probes);
}

SpectralField InitialConfig::build(int kmax, std::uint64_t seed) const {
    if (kind == "zero") return SpectralField(kmax);
    if (kind == "mode") return SpectralField::basis(kmax, mode, radius);
    if (kind == "random") return sample_initials(kmax, radius, 4, seed)[3];
    throw std::invalid_argument("unknown initial kind '" + kind + "'");
}

void validate_config(const ExperimentConfig& c) {
    std::vector<std::string> e;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) e.push_back(msg);
    };
    const auto& g = c.integrator;
    need(g.kmax >= 1, "grid.kmax must be >= 1");
    need(g.grid == 0 || (g.grid >= 4 && lattice::dealiased_kmax(g.grid) >= g.kmax),
         "grid.grid must be 0 (automatic) or at least 3*kmax+1 for alias-free products");
    need(g.nu >= 0.0, "grid.nu must be non-negative");
    need(g.dt > 0.0, "grid.dt must be positive");
    need(g.blowup_guard > 0.0, "grid.blowup_guard must be positive");
    need(c.workers >= 1, "run.workers must be >= 1");
    need(c.paths >= 1, "run.paths must be >= 1");

    const auto& n = c.noise;
    need(n.aleph > 0.0, "noise.aleph must be positive");
    need(n.profile == "constant" || n.profile == "sigmoid" || n.profile == "bump",
         "noise.profile must be constant, sigmoid or bump");
    need(n.probes.empty() || n.probes.size() == n.modes.size(), "noise.probes must be empty or list one mode per forced mode");
    try {
        ModeSet ms(n.modes);
        for (const auto& k : ms)
            need(lattice::contains(g.kmax, k), "noise.modes: forced mode " + k.str() + " lies outside the lattice");
        const auto model = n.build();
        std::vector<SpectralField> probes{SpectralField(g.kmax)};
        for (double r : {0.5, 1.0, 2.0}) probes.push_back(sample_initials(g.kmax, r, 4, 7)[3]);
        const auto rep = validate_condition2(model, probes, 7, 4);
        for (const auto& f : rep.failures) e.push_back("noise violates the bounded-coefficient condition: " + f);
    } catch (const std::exception& ex) {
        e.push_back(std::string("noise: ") + ex.what());
    }
    if (n.condition1_required) {
        const auto [ok, rep] = check_condition1(n.modes);
        if (!ok) {
            std::string why = !rep.is_symmetric ? "mode set is not symmetric under k -> -k"
                              : !rep.is_generator ? "mode set does not generate the integer lattice"
                                                  : "no two non-parallel modes of different length";
            e.push_back("noise.condition1_required: spanning condition fails (" + why + ")");
        }
    }
    const auto& ic = c.initial;
    need(ic.kind == "zero" || ic.kind == "mode" || ic.kind == "random", "initial.kind must be zero, mode or random");
    need(ic.radius >= 0.0, "initial.radius must be non-negative");
    if (ic.kind == "mode") need(lattice::contains(g.kmax, ic.mode), "initial.mode lies outside the lattice");

    need(c.simulate.T > 0.0, "simulate.T must be positive");
    need(c.simulate.snapshot_stride >= 1, "simulate.snapshot_stride must be >= 1");
    need(c.energy.T > 0.0, "energy.T must be positive");
    need(c.jacobian.T > 0.0, "jacobian.T must be positive");
    need(c.jacobian.pairs >= 1, "jacobian.pairs must be >= 1");
    need(c.jacobian.eps.size() >= 2, "jacobian.eps needs at least two values");
    for (std::size_t i = 0; i < c.jacobian.eps.size(); ++i)
        need(c.jacobian.eps[i] > 0.0 && (i == 0 || c.jacobian.eps[i] < c.jacobian.eps[i - 1]),
             "jacobian.eps must be positive and decreasing");
    need(c.spanning.radius >= 1, "spanning.radius must be >= 1");
    need(c.spanning.max_iter >= 1, "spanning.max_iter must be >= 1");

    const auto& m = c.malliavin;
    need(m.alpha > 0.0 && m.alpha <= 1.0, "alpha must lie in (0,1]");
    need(m.N >= 1, "malliavin.N must be >= 1");
    need(m.T > 0.0, "malliavin.T must be positive");
    need(m.node_stride >= 1, "malliavin.node_stride must be >= 1");
    if (c.kind == ExperimentKind::malliavin)
        need(m.gram_kmax >= 1 && m.gram_kmax <= g.kmax, "malliavin.gram_kmax must lie in [1, grid.kmax]");
    need(m.radius >= 0.0, "malliavin.radius must be non-negative");
    need(m.initials >= 1, "malliavin.initials must be >= 1");
    need(m.restarts >= 0 && m.pg_iterations >= 0, "malliavin.restarts and pg_iterations must be non-negative");
    for (double x : m.epsilons) need(x > 0.0, "malliavin.epsilons must be positive");

    const auto& ct = c.control;
    for (double b : ct.betas) need(b > 0.0, "control.betas must be positive");
    need(!ct.betas.empty(), "control.betas must not be empty");
    need(ct.cycles >= 1, "control.cycles must be >= 1");
    need(ct.node_stride >= 1, "control.node_stride must be >= 1");
    need(ct.bootstrap >= 0, "control.bootstrap must be non-negative");

    const auto& l = c.lyapunov;
    need(l.T > 0.0, "lyapunov.T must be positive");
    need(l.eta_start > 0.0 && l.eta_min > 0.0 && l.eta_min <= l.eta_start, "lyapunov: need 0 < eta_min <= eta_start");
    need(l.eta_factor > 0.0 && l.eta_factor < 1.0, "lyapunov.eta_factor must lie in (0,1)");

    const auto& x = c.mixing;
    need(x.T > 0.0 && x.sample_every > 0.0, "mixing.T and mixing.sample_every must be positive");
    need(x.radius_a >= 0.0 && x.radius_b >= 0.0, "mixing radii must be non-negative");
    need(x.bootstrap >= 0, "mixing.bootstrap must be non-negative");
    for (const auto& o : x.observables) {
        try {
            (void)Observable::parse(o);
        } catch (const std::exception& ex) {
            e.push_back(std::string("mixing.observables: ") + ex.what());
        }
    }
    const auto& ir = c.irreducibility;
    need(ir.ball > 0.0, "irreducibility.ball must be positive");
    need(ir.radius >= 0.0, "irreducibility.radius must be non-negative");
    need(ir.initials >= 1, "irreducibility.initials must be >= 1");
    need(!ir.times.empty() && std::is_sorted(ir.times.begin(), ir.times.end()) && ir.times.front() >= 0.0,
         "irreducibility.times must be non-negative and increasing");
    if (!e.empty()) throw ConfigError(e);
}

ExperimentConfig parse_config(std::string_view text) {
    Reader r;
    std::string section;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto semi = line.find(';');
        if (semi != std::string::npos) line = line.substr(0, semi);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                r.errors.push_back("line " + std::to_string(line_no) + ": malformed section header");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            r.table[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            r.errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
            continue;
        }
        if (section.empty()) {
            r.errors.push_back("line " + std::to_string(line_no) + ": key outside of any [section]");
            continue;
        }
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) {
            r.errors.push_back("line " + std::to_string(line_no) + ": empty key");
            continue;
        }
        auto& slot = r.table[section];
        if (slot.count(key)) {
            r.errors.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key + "' in [" + section + "]");
            continue;
        }
        slot[key] = Entry{value, line_no, false};
    }

    ExperimentConfig c;
    r.get("run", "kind", c.kind, [](const std::string& v) { return parse_kind(v); });
    r.u64("run", "seed", c.seed);
    r.text("run", "out", c.out_dir);
    r.size("run", "workers", c.workers);
    r.size("run", "paths", c.paths);

    r.integer("grid", "kmax", c.integrator.kmax);
    r.integer("grid", "grid", c.integrator.grid);
    r.real("grid", "nu", c.integrator.nu);
    r.real("grid", "dt", c.integrator.dt);
    r.boolean("grid", "nonlinear", c.integrator.nonlinear);
    r.real("grid", "blowup_guard", c.integrator.blowup_guard);

    r.modes("noise", "modes", c.noise.modes);
    r.get("noise", "kind", c.noise.kind, parse_qkind);
    r.text("noise", "profile", c.noise.profile);
    r.real("noise", "c0", c.noise.c0);
    r.real("noise", "c1", c.noise.c1);
    r.real("noise", "aleph", c.noise.aleph);
    r.modes("noise", "probes", c.noise.probes);
    r.boolean("noise", "condition1_required", c.noise.condition1_required);

    r.text("initial", "kind", c.initial.kind);
    r.real("initial", "radius", c.initial.radius);
    r.mode("initial", "mode", c.initial.mode);

    r.real("simulate", "T", c.simulate.T);
    r.i64("simulate", "snapshot_stride", c.simulate.snapshot_stride);
    r.boolean("simulate", "save_path", c.simulate.save_path);

    r.real("energy", "T", c.energy.T);

    r.real("jacobian", "T", c.jacobian.T);
    r.reals("jacobian", "eps", c.jacobian.eps);
    r.integer("jacobian", "pairs", c.jacobian.pairs);

    r.integer("spanning", "radius", c.spanning.radius);
    r.integer("spanning", "max_iter", c.spanning.max_iter);

    r.real("malliavin", "T", c.malliavin.T);
    r.i64("malliavin", "node_stride", c.malliavin.node_stride);
    r.real("malliavin", "alpha", c.malliavin.alpha);
    r.integer("malliavin", "N", c.malliavin.N);
    r.integer("malliavin", "gram_kmax", c.malliavin.gram_kmax);
    r.real("malliavin", "radius", c.malliavin.radius);
    r.integer("malliavin", "initials", c.malliavin.initials);
    r.reals("malliavin", "epsilons", c.malliavin.epsilons);
    r.integer("malliavin", "restarts", c.malliavin.restarts);
    r.integer("malliavin", "pg_iterations", c.malliavin.pg_iterations);
    r.boolean("malliavin", "save_gram", c.malliavin.save_gram);

    r.reals("control", "betas", c.control.betas);
    r.integer("control", "cycles", c.control.cycles);
    r.i64("control", "node_stride", c.control.node_stride);
    r.integers("control", "moments", c.control.moments);
    r.integer("control", "bootstrap", c.control.bootstrap);

    r.real("lyapunov", "T", c.lyapunov.T);
    r.real("lyapunov", "eta_start", c.lyapunov.eta_start);
    r.real("lyapunov", "eta_factor", c.lyapunov.eta_factor);
    r.real("lyapunov", "eta_min", c.lyapunov.eta_min);

    r.real("mixing", "T", c.mixing.T);
    r.real("mixing", "sample_every", c.mixing.sample_every);
    r.real("mixing", "radius_a", c.mixing.radius_a);
    r.real("mixing", "radius_b", c.mixing.radius_b);
    r.words("mixing", "observables", c.mixing.observables);
    r.boolean("mixing", "independent_seeds", c.mixing.independent_seeds);
    r.integer("mixing", "bootstrap", c.mixing.bootstrap);

    r.real("irreducibility", "radius", c.irreducibility.radius);
    r.real("irreducibility", "ball", c.irreducibility.ball);
    r.reals("irreducibility", "times", c.irreducibility.times);
    r.integer("irreducibility", "initials", c.irreducibility.initials);

    static const std::vector<std::string> known{"run",      "grid",      "noise",   "initial",  "simulate",
                                                "energy",   "jacobian",  "spanning", "malliavin", "control",
                                                "lyapunov", "mixing",    "irreducibility"};
    for (const auto& [sec, keys] : r.table) {
        if (std::find(known.begin(), known.end(), sec) == known.end()) {
            int first = keys.empty() ? 0 : keys.begin()->second.line;
            r.errors.push_back("unknown section [" + sec + "]" + (first ? " (line " + std::to_string(first) + ")" : ""));
            continue;
        }
        for (const auto& [key, e] : keys)
            if (!e.used) r.errors.push_back("line " + std::to_string(e.line) + ": unknown key '" + key + "' in [" + sec + "]");
    }
    if (r.errors.empty()) {
        try {
            validate_config(c);
        } catch (const ConfigError& ce) {
            for (const auto& m : ce.messages()) r.errors.push_back(m);
        }
    }
    if (!r.errors.empty()) throw ConfigError(r.errors);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    auto kv = [&](const std::string& k, const std::string& v) { os << k << '=' << v << '\n'; };
    kv("run.kind", to_string(kind));
    kv("run.seed", std::to_string(seed));
    kv("run.workers", std::to_string(workers));
    kv("run.paths", std::to_string(paths));
    kv("grid.kmax", std::to_string(integrator.kmax));
    kv("grid.grid", std::to_string(integrator.grid));
    kv("grid.nu", num(integrator.nu));
    kv("grid.dt", num(integrator.dt));
    kv("grid.nonlinear", integrator.nonlinear ? "true" : "false");
    kv("grid.blowup_guard", num(integrator.blowup_guard));
    kv("noise.modes", modes_str(noise.modes));
    kv("noise.kind", to_string(noise.kind));
    kv("noise.profile", noise.profile);
    kv("noise.c0", num(noise.c0));
    kv("noise.c1", num(noise.c1));
    kv("noise.aleph", num(noise.aleph));
    kv("noise.probes", modes_str(noise.probes));
    kv("noise.condition1_required", noise.condition1_required ? "true" : "false");
    kv("initial.kind", initial.kind);
    kv("initial.radius", num(initial.radius));
    kv("initial.mode", initial.mode.str());
    kv("simulate.T", num(simulate.T));
    kv("simulate.snapshot_stride", std::to_string(simulate.snapshot_stride));
    kv("simulate.save_path", simulate.save_path ? "true" : "false");
    kv("energy.T", num(energy.T));
    kv("jacobian.T", num(jacobian.T));
    kv("jacobian.eps", list_str(jacobian.eps));
    kv("jacobian.pairs", std::to_string(jacobian.pairs));
    kv("spanning.radius", std::to_string(spanning.radius));
    kv("spanning.max_iter", std::to_string(spanning.max_iter));
    kv("malliavin.T", num(malliavin.T));
    kv("malliavin.node_stride", std::to_string(malliavin.node_stride));
    kv("malliavin.alpha", num(malliavin.alpha));
    kv("malliavin.N", std::to_string(malliavin.N));
    kv("malliavin.gram_kmax", std::to_string(malliavin.gram_kmax));
    kv("malliavin.radius", num(malliavin.radius));
    kv("malliavin.initials", std::to_string(malliavin.initials));
    kv("malliavin.epsilons", list_str(malliavin.epsilons));
    kv("malliavin.restarts", std::to_string(malliavin.restarts));
    kv("malliavin.pg_iterations", std::to_string(malliavin.pg_iterations));
    kv("malliavin.save_gram", malliavin.save_gram ? "true" : "false");
    kv("control.betas", list_str(control.betas));
    kv("control.cycles", std::to_string(control.cycles));
    kv("control.node_stride", std::to_string(control.node_stride));
    kv("control.moments", list_str(control.moments));
    kv("control.bootstrap", std::to_string(control.bootstrap));
    kv("lyapunov.T", num(lyapunov.T));
    kv("lyapunov.eta_start", num(lyapunov.eta_start));
    kv("lyapunov.eta_factor", num(lyapunov.eta_factor));
    kv("lyapunov.eta_min", num(lyapunov.eta_min));
    kv("mixing.T", num(mixing.T));
    kv("mixing.sample_every", num(mixing.sample_every));
    kv("mixing.radius_a", num(mixing.radius_a));
    kv("mixing.radius_b", num(mixing.radius_b));
    kv("mixing.observables", list_str(mixing.observables));
    kv("mixing.independent_seeds", mixing.independent_seeds ? "true" : "false");
    kv("mixing.bootstrap", std::to_string(mixing.bootstrap));
    kv("irreducibility.radius", num(irreducibility.radius));
    kv("irreducibility.ball", num(irreducibility.ball));
    kv("irreducibility.times", list_str(irreducibility.times));
    kv("irreducibility.initials", std::to_string(irreducibility.initials));
    return os.str();
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical()); }

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

}  // namespace nsm
