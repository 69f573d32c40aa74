#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <vector>

#include "nsm/lattice.hpp"

namespace nsm {

/// Ratio between the sin/cos functions e_k on [-pi,pi]^2 and the unit-norm
/// basis element used for storage: e_k = kBasisScale * ê_k.
inline constexpr double kBasisScale = std::numbers::sqrt2 * std::numbers::pi;

/// Mean-zero scalar field on the torus, stored as coefficients of the
/// orthonormal real basis ê_k on the square lattice max(|k1|,|k2|) <= kmax.
class SpectralField {
public:
    explicit SpectralField(int kmax = 0);
    SpectralField(int kmax, Eigen::VectorXd coeffs);

    /// amp * ê_k. Throws std::out_of_range if k is outside the lattice.
    static SpectralField basis(int kmax, ModeIndex k, double amp = 1.0);

    int kmax() const { return kmax_; }
    Eigen::Index size() const { return coeffs_.size(); }
    const Eigen::VectorXd& coeffs() const { return coeffs_; }

    /// Coefficient of ê_k; zero outside the support.
    double at(ModeIndex k) const;

    double dot(const SpectralField& other) const;
    double norm() const { return coeffs_.norm(); }

    /// Restriction (kmax smaller) or zero-padding (kmax larger) onto another lattice.
    SpectralField resized(int kmax) const;

    SpectralField operator+(const SpectralField& o) const;
    SpectralField operator-(const SpectralField& o) const;
    SpectralField operator*(double s) const;
    SpectralField operator-() const { return *this * -1.0; }
    bool operator==(const SpectralField& o) const {
        return kmax_ == o.kmax_ && coeffs_ == o.coeffs_;
    }

private:
    int kmax_;
    Eigen::VectorXd coeffs_;
};

inline SpectralField operator*(double s, const SpectralField& f) { return f * s; }

/// Two scalar components, each mean-zero and expanded in the same real basis.
struct VelocityField {
    SpectralField u1;
    SpectralField u2;
    int kmax() const { return u1.kmax(); }
};

enum class Part { low, high };

/// Kw with (Kw)_k = -i w_k k^perp / |k|^2, k^perp = (-k2, k1).
VelocityField biot_savart(const SpectralField& w);

/// ||w||_alpha = sqrt(sum |k|^{2 alpha} w_k^2), compensated summation.
double sobolev_norm(const SpectralField& w, double alpha);
/// Vector version: sum over both components.
double sobolev_norm(const VelocityField& u, double alpha);

/// P_N (part = low, keeps |k| <= N) or Q_N = I - P_N (part = high).
SpectralField project(const SpectralField& w, int N, Part part);

/// Spectral derivative d/dx_axis (axis = 0 or 1), exact in the real basis.
SpectralField partial(const SpectralField& w, int axis);

/// L2 norm of d1 u1 + d2 u2.
double divergence_norm(const VelocityField& u);

/// B(u, w) = -(u . grad) w, pseudo-spectral with alias-free truncation.
/// Throws LatticeMismatch when u and w live on different lattices.
SpectralField bilinear_B(const VelocityField& u, const SpectralField& w);

/// B~(w, v) = B(Kw, v) + B(Kv, w).
SpectralField b_tilde(const SpectralField& w, const SpectralField& v);

/// Physical-space working set for one field: velocity Kw and grad w.
struct AdvectionGrids {
    std::vector<double> u1, u2, gx, gy;
};

/// FFT engine for one lattice. Owns its plans and scratch buffers, so an
/// instance must not be shared between threads.
class SpectralTransform {
public:
    /// grid = 0 selects lattice::grid_for(kmax).
    explicit SpectralTransform(int kmax, int grid = 0);
    ~SpectralTransform();
    SpectralTransform(const SpectralTransform&) = delete;
    SpectralTransform& operator=(const SpectralTransform&) = delete;

    int kmax() const { return kmax_; }
    int grid() const { return n_; }
    int dim() const { return lattice::size(kmax_); }

    /// Values on the n x n grid x_j = 2 pi j / n, row-major in (x1, x2).
    std::vector<double> to_physical(const Eigen::VectorXd& coeffs);
    /// Orthogonal projection of grid values onto the lattice (mean dropped).
    Eigen::VectorXd from_physical(const std::vector<double>& values);

    void prepare(const Eigen::VectorXd& w, AdvectionGrids& out);
    /// out = B(Kw, w) from prepared grids.
    void nonlinear(const AdvectionGrids& w, Eigen::Ref<Eigen::VectorXd> out);
    /// out = B~(w, v) from prepared grids of w.
    void b_tilde(const AdvectionGrids& w, const Eigen::Ref<const Eigen::VectorXd>& v,
                 Eigen::Ref<Eigen::VectorXd> out);
    /// out = B(u, w) for an arbitrary velocity.
    void bilinear(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                  const Eigen::VectorXd& w, Eigen::Ref<Eigen::VectorXd> out);

private:
    struct Impl;
    int kmax_;
    int n_;
    std::unique_ptr<Impl> impl_;
};

/// Per-thread cached transform for a lattice (default grid).
SpectralTransform& thread_transform(int kmax);

}  // namespace nsm
