#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nsm/dynamics.hpp"
#include "nsm/noise.hpp"

namespace nsm {

enum class ExperimentKind {
    simulate,
    energy_check,
    jacobian_check,
    spanning,
    malliavin,
    control_probe,
    lyapunov,
    mixing,
    irreducibility
};

std::string to_string(ExperimentKind k);
/// Accepts the CLI spelling ("energy-check", "control-probe", ...).
ExperimentKind parse_kind(std::string_view name);

struct NoiseConfig {
    std::vector<ModeIndex> modes{{1, 0}, {-1, 0}, {1, 1}, {-1, -1}};
    QKind kind = QKind::constant;
    std::string profile = "constant";  // constant | sigmoid | bump
    double c0 = 1.0;
    double c1 = 0.0;
    double aleph = 1.0;
    std::vector<ModeIndex> probes;  // empty: each mode probes itself
    bool condition1_required = false;

    NoiseModel build() const;
};

/// Initial field: zero, a single mode (radius * ê_mode) or a random smooth field of norm radius.
struct InitialConfig {
    std::string kind = "zero";
    double radius = 1.0;
    ModeIndex mode{1, 0};

    SpectralField build(int kmax, std::uint64_t seed) const;
};

struct SimulateParams {
    double T = 1.0;
    std::int64_t snapshot_stride = 100;
    bool save_path = true;
};

struct EnergyParams {
    double T = 1.0;
};

struct JacobianParams {
    double T = 0.5;
    std::vector<double> eps{1e-2, 1e-3, 1e-4, 1e-5};
    int pairs = 5;  // random (w0, xi) pairs
};

struct SpanningParams {
    int radius = 6;
    int max_iter = 64;
};

struct MalliavinParams {
    double T = 1.0;
    std::int64_t node_stride = 10;
    double alpha = 0.1;
    int N = 4;
    int gram_kmax = 8;
    double radius = 1.0;
    int initials = 10;
    std::vector<double> epsilons{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    int restarts = 16;
    int pg_iterations = 400;
    bool save_gram = true;
};

struct ControlParams {
    std::vector<double> betas{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    int cycles = 6;
    std::int64_t node_stride = 10;
    std::vector<int> moments{1, 2, 4, 8};
    int bootstrap = 1000;
};

struct LyapunovParams {
    double T = 2.0;
    double eta_start = 0.1;
    double eta_factor = 0.5;
    double eta_min = 1e-4;
};

struct MixingParams {
    double T = 20.0;
    double sample_every = 1.0;
    double radius_a = 0.0;
    double radius_b = 2.0;
    std::vector<std::string> observables{"expnorm:0.5", "ball:1", "coord:1,0"};
    bool independent_seeds = true;
    int bootstrap = 500;
};

struct IrreducibilityParams {
    double radius = 2.0;
    double ball = 0.5;
    std::vector<double> times{1, 2, 5, 10, 20};
    int initials = 10;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::simulate;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::size_t workers = 1;
    std::size_t paths = 100;

    IntegratorSpec integrator{};
    NoiseConfig noise;
    InitialConfig initial;
    SimulateParams simulate;
    EnergyParams energy;
    JacobianParams jacobian;
    SpanningParams spanning;
    MalliavinParams malliavin;
    ControlParams control;
    LyapunovParams lyapunov;
    MixingParams mixing;
    IrreducibilityParams irreducibility;

    /// Fully resolved config in a fixed key order (output directory excluded).
    std::string canonical() const;
    /// SHA-256 of canonical(), hex encoded.
    std::string hash() const;
};

/// Parses sectioned `key = value` text. Every problem is collected; on any
/// error a ConfigError carrying all messages (with line numbers) is thrown.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Re-runs the semantic checks after programmatic edits (CLI overrides).
void validate_config(const ExperimentConfig& cfg);

std::string sha256_hex(std::string_view data);

}  // namespace nsm
