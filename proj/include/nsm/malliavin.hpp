#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "nsm/dynamics.hpp"
#include "nsm/stats.hpp"

namespace nsm {

/// Discretised Malliavin operator M_{s,t} on a Galerkin lattice:
///   M = sum_j sum_m wt_m q_j(w_{r_m})^2 g_{j,m} g_{j,m}^T,  g_{j,m} = P (J_{r_m,t} ê_j)
/// with left-endpoint nodes r_m = s + m * stride.
struct MalliavinGram {
    Eigen::MatrixXd matrix;
    int kmax = 0;  // lattice of the matrix
    std::int64_t s_step = 0;
    std::int64_t t_step = 0;
    std::int64_t node_stride = 1;
    std::vector<std::int64_t> nodes;
    std::vector<double> node_weights;  // wt_m (time weights)
    std::uint64_t path_index = 0;

    Eigen::Index dim() const { return matrix.rows(); }
};

/// Raw quadrature data: columns g_{j,m} (node-major, mode-minor) with weights wt_m q_j^2.
struct GramNodeData {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd weights;
};

/// Forward route: every node launches d tangent vectors that are carried to t
/// along the stored path. gram_kmax = 0 keeps the integrator lattice.
MalliavinGram assemble_gram(Integrator& integ, const PathRecord& path, std::int64_t s_step, std::int64_t t_step,
                            std::int64_t node_stride, int gram_kmax = 0, GramNodeData* raw = nullptr);

/// Reference route through the fundamental matrix, J_{r,t} = Phi_t Phi_r^{-1}.
/// Cost grows like D^3; intended for small lattices.
MalliavinGram assemble_gram_fundamental(Integrator& integ, const PathRecord& path, std::int64_t s_step,
                                        std::int64_t t_step, std::int64_t node_stride, int gram_kmax = 0);

double quadratic_form(const Eigen::MatrixXd& M, const Eigen::VectorXd& xi);
double quadratic_form(const MalliavinGram& M, const SpectralField& xi);

/// S_{alpha,N} = { xi : ||xi|| = 1, ||P_N xi|| >= alpha }.
struct SalphaN {
    int N = 4;
    double alpha = 0.1;
};

/// Diagonal 0/1 mask of P_N (|k| <= N) on lattice kmax.
Eigen::VectorXd low_mode_mask(int kmax, int N);

struct ConstrainedMinOptions {
    int restarts = 16;
    int pg_iterations = 400;
    std::uint64_t seed = 0;
    double tolerance = 1e-6;        // relative disagreement threshold, scaled by ||M||
    bool throw_on_disagreement = true;
};

struct ConstrainedMinResult {
    double value = 0.0;         // X = min xi^T M xi over S_{alpha,N}
    Eigen::VectorXd xi;         // minimiser
    double low_mass = 0.0;      // ||P_N xi||
    double lambda_min = 0.0;    // unconstrained smallest eigenvalue
    bool constraint_active = false;
    double mu = 0.0;            // multiplier of the active constraint
    double dual_bound = 0.0;    // lambda_min(M - mu P) + mu alpha^2 <= value
    double pg_value = 0.0;      // best projected-gradient value over restarts
    double disagreement = 0.0;  // (pg_value - kkt value) / ||M||
    bool agree = true;          // projected gradient found nothing below value - tolerance * ||M||
    int iterations = 0;
};

/// Minimises xi^T M xi over ||xi|| = 1, xi^T P xi >= alpha^2 (P a 0/1 diagonal
/// mask). Exact route: global eigenvector when feasible, otherwise bisection on
/// the multiplier mu of M - mu P. Cross-checked by projected gradient restarts.
ConstrainedMinResult constrained_min(const Eigen::MatrixXd& M, const Eigen::VectorXd& mask, double alpha,
                                     const ConstrainedMinOptions& opt = {});
ConstrainedMinResult constrained_min(const MalliavinGram& M, const SalphaN& region,
                                     const ConstrainedMinOptions& opt = {});

/// Random smooth initial conditions on ||w0|| = radius: index 0 is the zero
/// field, 1 and 2 put all mass on ê_(1,0) and ê_(1,1), the rest are random
/// fields with |k|^-2 amplitudes.
std::vector<SpectralField> sample_initials(int kmax, double radius, std::size_t n, std::uint64_t seed);

struct NondegeneracyConfig {
    std::vector<double> epsilon_grid{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    SalphaN region{4, 0.1};
    double radius = 1.0;  // R: initial conditions with ||w0|| <= R
    std::size_t n_paths = 20;
    std::size_t n_initials = 10;
    double T = 1.0;
    std::int64_t node_stride = 10;
    int gram_kmax = 8;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    ConstrainedMinOptions minimizer{};
};

struct NondegeneracySample {
    std::size_t initial = 0;
    std::size_t path = 0;
    double X = 0.0;
    double lambda_min = 0.0;
    double trace = 0.0;
    double low_mass = 0.0;
    bool agree = true;
};

struct NondegeneracyEstimate {
    std::vector<double> epsilon_grid;
    SalphaN region;
    double radius = 0.0;
    std::size_t n_samples = 0;
    std::vector<std::size_t> pooled_hits;        // #{X < eps} per eps over all samples
    std::vector<double> pooled_probability;
    std::vector<stats::Interval> pooled_ci;
    std::vector<double> sup_probability;         // max over initials of per-initial fraction
    std::vector<stats::Interval> sup_ci;        // Wilson CI of the maximising initial
    std::vector<NondegeneracySample> samples;
};

/// Estimates r(eps) = sup_{||w0|| <= R} P(X < eps), X = min over S_{alpha,N} of
/// the Malliavin quadratic form on [0, T], by Monte Carlo over paths and a
/// finite set of initial conditions.
NondegeneracyEstimate estimate_r(const IntegratorSpec& spec, const NoiseModel& noise, const NondegeneracyConfig& cfg);

}  // namespace nsm
