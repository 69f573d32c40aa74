#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "nsm/spectral.hpp"

namespace nsm {

/// Ordered, duplicate-free set of forced modes Z0. Position j in the list is
/// the canonical basis vector theta_j of R^d.
class ModeSet {
public:
    /// Throws std::invalid_argument when empty or containing duplicates.
    explicit ModeSet(std::vector<ModeIndex> modes);

    std::size_t size() const { return modes_.size(); }
    const ModeIndex& operator[](std::size_t j) const { return modes_[j]; }
    const std::vector<ModeIndex>& modes() const { return modes_; }
    auto begin() const { return modes_.begin(); }
    auto end() const { return modes_.end(); }
    int max_abs() const;

private:
    std::vector<ModeIndex> modes_;
};

/// Scalar profiles f used to build q_k.
///   constant: f = c0
///   sigmoid:  f = c0 + c1 / (1 + x^2)
///   bump:     f = c0 + c1 x^2 exp(-x^2)
class ScalarProfile {
public:
    enum class Kind { constant, sigmoid, bump };

    static ScalarProfile constant(double c) { return {Kind::constant, c, 0.0}; }
    static ScalarProfile sigmoid(double c0, double c1) { return {Kind::sigmoid, c0, c1}; }
    static ScalarProfile bump(double c0, double c1) { return {Kind::bump, c0, c1}; }

    Kind kind() const { return kind_; }
    double c0() const { return c0_; }
    double c1() const { return c1_; }
    std::string name() const;

    double f(double x) const;
    double df(double x) const;
    double d2f(double x) const;

    // Closed-form bounds over the real line.
    double sup_abs() const;
    double inf_abs() const;
    double sup_abs_df() const;
    double sup_abs_d2f() const;
    /// sup |f'(x)| / min(|x|, 1); infinite when f'(0) != 0.
    double growth_constant() const;

private:
    ScalarProfile(Kind k, double c0, double c1) : kind_(k), c0_(c0), c1_(c1) {}
    Kind kind_;
    double c0_, c1_;
};

enum class QKind { constant, spectral_coordinate, norm_based };

std::string to_string(QKind k);

/// Noise coefficients q_j(w), j in Z0, with declared bound aleph.
///   constant:            q_j(w) = f_j(0)
///   spectral_coordinate: q_j(w) = f_j(<w, ê_{i(j)}>)
///   norm_based:          q_j(w) = f_j(||w||)
/// q may be signed; only |q| is constrained.
class NoiseModel {
public:
    /// profiles has size 1 (shared) or d; probes is empty (i(j) = j) or size d.
    NoiseModel(ModeSet modes, QKind kind, std::vector<ScalarProfile> profiles, double aleph,
               std::vector<ModeIndex> probes = {});

    /// q_j = c for every mode.
    static NoiseModel constant(ModeSet modes, double c, double aleph);

    const ModeSet& modes() const { return modes_; }
    std::size_t d() const { return modes_.size(); }
    QKind kind() const { return kind_; }
    double aleph() const { return aleph_; }
    const ScalarProfile& profile(std::size_t j) const { return profiles_[profiles_.size() == 1 ? 0 : j]; }
    ModeIndex probe(std::size_t j) const { return probes_[j]; }

    /// Raw evaluation on coefficient vectors of lattice kmax (no bound check).
    void q_raw(int kmax, const Eigen::VectorXd& w, Eigen::Ref<Eigen::VectorXd> out) const;
    /// Dq_j(w) v for all j.
    void dq_raw(int kmax, const Eigen::VectorXd& w, const Eigen::Ref<const Eigen::VectorXd>& v,
                Eigen::Ref<Eigen::VectorXd> out) const;

    /// q(w); throws BoundViolation if some |q_j| > aleph (1 + 1e-12) or q_j == 0.
    Eigen::VectorXd q_eval(const SpectralField& w) const;
    /// (Dq_j(w) v)_j; zero at w = 0 for the norm-based family.
    Eigen::VectorXd dq_apply(const SpectralField& w, const SpectralField& v) const;
    /// (D^2 q_j(w)(u, v))_j.
    Eigen::VectorXd d2q_apply(const SpectralField& w, const SpectralField& u, const SpectralField& v) const;

    /// Q(w) z = sum_j q_j(w) z_j ê_j.
    SpectralField apply_Q(const SpectralField& w, const Eigen::VectorXd& z) const;
    /// Q*(w) xi = (q_j(w) <xi, ê_j>)_j.
    Eigen::VectorXd apply_Qstar(const SpectralField& w, const SpectralField& xi) const;

private:
    double coordinate(int kmax, const Eigen::VectorXd& w, ModeIndex k) const;

    ModeSet modes_;
    QKind kind_;
    std::vector<ScalarProfile> profiles_;
    double aleph_;
    std::vector<ModeIndex> probes_;
};

struct ValidationReport {
    bool pass = true;
    double max_abs_q = 0.0;
    double min_abs_q = 0.0;
    double max_dq_ratio = 0.0;   // max |Dq_j(w) v| / ||v||
    double max_d2q_ratio = 0.0;  // max |D^2 q_j(w)(u,v)| / (||u|| ||v||)
    double max_growth_ratio = 0.0;  // norm-based only: max |f'(x)| / min(x, 1)
    std::optional<double> growth_witness;  // x at which the growth bound fails
    std::vector<std::string> failures;
};

/// Probes the bounded-coefficient condition (|q| in (0, aleph], |Dq| <= aleph,
/// |D^2 q| <= aleph, plus |f'(x)| <= aleph min(|x|,1) for norm-based q) on a
/// finite set of fields and random directions.
ValidationReport validate_condition2(const NoiseModel& model, const std::vector<SpectralField>& samples,
                                     std::uint64_t seed = 0, int directions = 16);

}  // namespace nsm
