#include "nsm/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "nsm/errors.hpp"
#include "nsm/rng.hpp"
#include "nsm/stats.hpp"

namespace nsm {

Eigen::MatrixXd brownian_increments(std::uint64_t seed, std::uint64_t path_index, std::int64_t steps,
                                    std::size_t d, double dt, std::string_view purpose) {
    CounterRng rng(seed, purpose, path_index);
    Eigen::MatrixXd dW(steps, Eigen::Index(d));
    const double s = std::sqrt(dt);
    for (std::int64_t m = 0; m < steps; ++m)
        for (std::size_t j = 0; j < d; ++j) dW(m, Eigen::Index(j)) = s * rng.normal();
    return dW;
}

Eigen::MatrixXd refine_increments(const Eigen::MatrixXd& coarse, double dt, std::uint64_t seed,
                                  std::uint64_t path_index) {
    CounterRng rng(seed, "refine", path_index);
    Eigen::MatrixXd fine(coarse.rows() * 2, coarse.cols());
    const double s = std::sqrt(dt / 4.0);
    for (Eigen::Index m = 0; m < coarse.rows(); ++m)
        for (Eigen::Index j = 0; j < coarse.cols(); ++j) {
            const double z = s * rng.normal();
            fine(2 * m, j) = 0.5 * coarse(m, j) + z;
            fine(2 * m + 1, j) = 0.5 * coarse(m, j) - z;
        }
    return fine;
}

// ---------------------------------------------------------------------------

Integrator::Integrator(IntegratorSpec spec, NoiseModel noise) : spec_(spec), noise_(std::move(noise)) {
    if (spec_.kmax < 1) throw std::invalid_argument("Integrator: kmax must be >= 1");
    if (!(spec_.dt > 0.0)) throw std::invalid_argument("Integrator: dt must be positive");
    if (spec_.nu < 0.0) throw std::invalid_argument("Integrator: nu must be non-negative");
    transform_ = std::make_unique<SpectralTransform>(spec_.kmax, spec_.grid);
    spec_.grid = transform_->grid();
    const int D = dim();
    decay_.resize(D);
    for (int i = 0; i < D; ++i)
        decay_[i] = std::exp(-spec_.nu * double(lattice::mode(spec_.kmax, i).norm2()) * spec_.dt);
    for (const auto& k : noise_.modes()) {
        if (!lattice::contains(spec_.kmax, k))
            throw std::invalid_argument("Integrator: forced mode " + k.str() + " outside the lattice");
        forced_index_.push_back(lattice::index(spec_.kmax, k));
    }
    work_.resize(D);
    q_.resize(Eigen::Index(noise_.d()));
    dq_.resize(Eigen::Index(noise_.d()));
}

std::int64_t Integrator::steps_for(double T) const {
    if (T < 0.0) throw std::invalid_argument("T must be non-negative");
    const double r = T / spec_.dt;
    const auto n = std::llround(r);
    if (std::abs(r - double(n)) > 1e-6 * std::max(1.0, r))
        throw std::invalid_argument("T = " + std::to_string(T) + " is not a multiple of dt = " + std::to_string(spec_.dt));
    return n;
}

void Integrator::prepare(const Eigen::VectorXd& w, AdvectionGrids& grids) {
    if (spec_.nonlinear) transform_->prepare(w, grids);
}

void Integrator::check_guard(std::int64_t step, const Eigen::VectorXd& w) const {
    const double n = w.norm();
    if (!std::isfinite(n) || n > spec_.blowup_guard) throw BlowUp(step, n);
}

void Integrator::advance(Eigen::VectorXd& w, const AdvectionGrids& grids, const Eigen::VectorXd& dW) {
    noise_.q_raw(spec_.kmax, w, q_);
    const double cap = noise_.aleph() * (1.0 + 1e-12);
    for (Eigen::Index j = 0; j < q_.size(); ++j) {
        const double a = std::abs(q_[j]);
        if (!(a > 0.0) || a > cap)
            throw BoundViolation("q_" + noise_.modes()[std::size_t(j)].str() + "(w) = " + std::to_string(q_[j]) +
                                 " outside (0, aleph=" + std::to_string(noise_.aleph()) + "]");
    }
    if (spec_.nonlinear) {
        transform_->nonlinear(grids, work_);
        w += spec_.dt * work_;
    }
    for (std::size_t j = 0; j < forced_index_.size(); ++j) w[forced_index_[j]] += q_[Eigen::Index(j)] * dW[Eigen::Index(j)];
    w.array() *= decay_.array();
}

void Integrator::advance_linear(const Eigen::VectorXd& w, const AdvectionGrids& grids, const Eigen::VectorXd& dW,
                                Eigen::Ref<Eigen::MatrixXd> V) {
    const bool has_dq = noise_.kind() != QKind::constant;
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        auto v = V.col(c);
        if (has_dq) noise_.dq_raw(spec_.kmax, w, v, dq_);
        if (spec_.nonlinear) {
            transform_->b_tilde(grids, v, work_);
            v += spec_.dt * work_;
        }
        if (has_dq)
            for (std::size_t j = 0; j < forced_index_.size(); ++j)
                v[forced_index_[j]] += dq_[Eigen::Index(j)] * dW[Eigen::Index(j)];
        v.array() *= decay_.array();
    }
}

SpectralField Integrator::step(const SpectralField& w, const Eigen::VectorXd& dW) {
    if (w.kmax() != spec_.kmax) throw LatticeMismatch("step: field lattice differs from integrator lattice");
    if (dW.size() != Eigen::Index(noise_.d())) throw DimensionMismatch("step: dW must have d entries");
    Eigen::VectorXd x = w.coeffs();
    AdvectionGrids g;
    prepare(x, g);
    advance(x, g, dW);
    check_guard(1, x);
    return SpectralField(spec_.kmax, std::move(x));
}

void Integrator::run(const Eigen::VectorXd& w0, const Eigen::MatrixXd& increments,
                     const std::function<void(std::int64_t, const Eigen::VectorXd&)>& observer) {
    Eigen::VectorXd w = w0;
    AdvectionGrids g;
    observer(0, w);
    for (std::int64_t m = 0; m < increments.rows(); ++m) {
        prepare(w, g);
        advance(w, g, increments.row(m).transpose());
        check_guard(m + 1, w);
        observer(m + 1, w);
    }
}

PathRecord Integrator::replay(const SpectralField& w0, const Eigen::MatrixXd& increments, std::uint64_t seed,
                              std::uint64_t path_index, std::int64_t snapshot_stride) {
    if (w0.kmax() != spec_.kmax) throw LatticeMismatch("replay: initial field lattice differs from integrator lattice");
    if (increments.cols() != Eigen::Index(noise_.d())) throw DimensionMismatch("replay: increments need d columns");
    if (snapshot_stride < 1) throw std::invalid_argument("snapshot stride must be >= 1");
    PathRecord rec;
    rec.kmax = spec_.kmax;
    rec.dt = spec_.dt;
    rec.steps = increments.rows();
    rec.seed = seed;
    rec.path_index = path_index;
    rec.increments = increments;
    rec.q_values.resize(rec.steps, Eigen::Index(noise_.d()));
    rec.snapshot_stride = snapshot_stride;
    Eigen::VectorXd q(Eigen::Index(noise_.d()));
    run(w0.coeffs(), increments, [&](std::int64_t m, const Eigen::VectorXd& w) {
        if (m < rec.steps) {
            noise_.q_raw(spec_.kmax, w, q);
            rec.q_values.row(m) = q.transpose();
        }
        if (m % snapshot_stride == 0 || m == rec.steps) {
            rec.snapshot_steps.push_back(m);
            rec.snapshots.push_back(w);
        }
    });
    return rec;
}

PathRecord Integrator::simulate(const SpectralField& w0, double T, std::uint64_t seed, std::uint64_t path_index,
                                std::int64_t snapshot_stride) {
    const auto steps = steps_for(T);
    return replay(w0, brownian_increments(seed, path_index, steps, noise_.d(), spec_.dt), seed, path_index,
                  snapshot_stride);
}

void Integrator::walk(const PathRecord& path, std::int64_t s, std::int64_t t,
                      const std::function<void(std::int64_t, const Eigen::VectorXd&, const AdvectionGrids&)>& visit) {
    if (path.kmax != spec_.kmax) throw LatticeMismatch("walk: path lattice differs from integrator lattice");
    if (s < 0 || t > path.steps || s > t)
        throw IndexOutOfRange("step range [" + std::to_string(s) + ", " + std::to_string(t) + "] outside path of " +
                              std::to_string(path.steps) + " steps");
    // nearest snapshot at or before s
    std::size_t k = 0;
    while (k + 1 < path.snapshot_steps.size() && path.snapshot_steps[k + 1] <= s) ++k;
    std::int64_t m = path.snapshot_steps[k];
    Eigen::VectorXd w = path.snapshots[k];
    AdvectionGrids g;
    for (; m < t; ++m) {
        prepare(w, g);
        if (m >= s) visit(m, w, g);
        if (m + 1 < t) {
            const std::size_t next = k + 1;
            if (next < path.snapshot_steps.size() && path.snapshot_steps[next] == m + 1) {
                w = path.snapshots[next];
                k = next;
            } else {
                advance(w, g, path.increments.row(m).transpose());
            }
        }
    }
}

Eigen::VectorXd Integrator::state_at(const PathRecord& path, std::int64_t step) {
    if (step < 0 || step > path.steps) throw IndexOutOfRange("state_at: step outside path");
    std::size_t k = 0;
    while (k + 1 < path.snapshot_steps.size() && path.snapshot_steps[k + 1] <= step) ++k;
    Eigen::VectorXd w = path.snapshots[k];
    AdvectionGrids g;
    for (std::int64_t m = path.snapshot_steps[k]; m < step; ++m) {
        prepare(w, g);
        advance(w, g, path.increments.row(m).transpose());
    }
    return w;
}

Eigen::MatrixXd Integrator::linearized_flow(const PathRecord& path, std::int64_t s_step, std::int64_t t_step,
                                            const Eigen::MatrixXd& X) {
    if (X.rows() != dim()) throw DimensionMismatch("linearized_flow: vectors must live on the integrator lattice");
    if (s_step > t_step) throw IndexOutOfRange("linearized_flow: s_step > t_step");
    Eigen::MatrixXd V = X;
    walk(path, s_step, t_step, [&](std::int64_t m, const Eigen::VectorXd& w, const AdvectionGrids& g) {
        advance_linear(w, g, path.increments.row(m).transpose(), V);
    });
    return V;
}

SpectralField Integrator::linearized_flow(const PathRecord& path, std::int64_t s_step, std::int64_t t_step,
                                          const SpectralField& xi) {
    if (xi.kmax() != spec_.kmax) throw LatticeMismatch("linearized_flow: xi lattice differs from integrator lattice");
    Eigen::MatrixXd X = xi.coeffs();
    return SpectralField(spec_.kmax, linearized_flow(path, s_step, t_step, X).col(0));
}

// ---------------------------------------------------------------------------

FdCheckResult jacobian_fd_check(Integrator& integ, const SpectralField& w0, const SpectralField& xi,
                                const std::vector<double>& eps_list, double T, std::uint64_t seed,
                                std::uint64_t path_index) {
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw std::invalid_argument("jacobian_fd_check: eps must be positive");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
            throw std::invalid_argument("jacobian_fd_check: eps list must be decreasing");
    }
    const auto base = integ.simulate(w0, T, seed, path_index);
    const SpectralField J(integ.kmax(), integ.linearized_flow(base, 0, base.steps, Eigen::MatrixXd(xi.coeffs())).col(0));
    FdCheckResult r;
    r.jacobian_norm = J.norm();
    std::vector<double> lx, ly;
    for (double eps : eps_list) {
        const auto pert = integ.replay(w0 + xi * eps, base.increments, seed, path_index, base.steps > 0 ? base.steps : 1);
        const Eigen::VectorXd fd = (pert.final_state() - base.final_state()) / eps;
        const double err = (fd - J.coeffs()).norm();
        r.eps.push_back(eps);
        r.errors.push_back(err);
        if (err > 0.0) {
            lx.push_back(std::log(eps));
            ly.push_back(std::log(err));
        }
    }
    if (lx.size() >= 2) r.slope = stats::linear_fit(lx, ly).slope;
    return r;
}

namespace {

EnergyBalance balance_for(Integrator& integ, const SpectralField& w0, const std::vector<Eigen::MatrixXd>& incs) {
    const double dt = integ.spec().dt, nu = integ.spec().nu;
    const int K = integ.kmax();
    std::vector<double> k2(integ.dim());
    for (int i = 0; i < integ.dim(); ++i) k2[i] = double(lattice::mode(K, i).norm2());
    std::vector<double> lhs, rhs, res;
    Eigen::VectorXd q(Eigen::Index(integ.noise().d()));
    const double e0 = w0.coeffs().squaredNorm();
    for (const auto& inc : incs) {
        double diss = 0.0, inj = 0.0, eT = 0.0;
        const auto steps = inc.rows();
        integ.run(w0.coeffs(), inc, [&](std::int64_t m, const Eigen::VectorXd& w) {
            if (m < steps) {
                double h1 = 0.0;
                for (int i = 0; i < w.size(); ++i) h1 += k2[i] * w[i] * w[i];
                diss += h1 * dt;
                integ.noise().q_raw(K, w, q);
                inj += q.squaredNorm() * dt;
            } else {
                eT = w.squaredNorm();
            }
        });
        const double l = eT - e0 + 2.0 * nu * diss;
        lhs.push_back(l);
        rhs.push_back(inj);
        res.push_back(l - inj);
    }
    EnergyBalance b;
    b.dt = dt;
    const auto L = stats::mean_se(lhs), R = stats::mean_se(rhs), D = stats::mean_se(res);
    b.lhs_mean = L.mean;
    b.lhs_se = L.se;
    b.rhs_mean = R.mean;
    b.rhs_se = R.se;
    b.residual_mean = D.mean;
    b.residual_se = D.se;
    return b;
}

}  // namespace

EnergyCheckResult energy_check(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0,
                               double T, std::size_t n_paths, std::uint64_t seed) {
    Integrator coarse(spec, noise);
    IntegratorSpec fine_spec = spec;
    fine_spec.dt = spec.dt / 2.0;
    Integrator fine(fine_spec, noise);
    const auto steps = coarse.steps_for(T);
    std::vector<Eigen::MatrixXd> ci, fi;
    for (std::size_t p = 0; p < n_paths; ++p) {
        ci.push_back(brownian_increments(seed, p, steps, noise.d(), spec.dt));
        fi.push_back(refine_increments(ci.back(), spec.dt, seed, p));
    }
    EnergyCheckResult r;
    r.paths = n_paths;
    r.coarse = balance_for(coarse, w0, ci);
    r.fine = balance_for(fine, w0, fi);
    r.richardson = 2.0 * r.fine.residual_mean - r.coarse.residual_mean;
    // Paths are shared, so the two residuals are correlated; this bound is conservative.
    r.richardson_se = 2.0 * r.fine.residual_se + r.coarse.residual_se;
    return r;
}

}  // namespace nsm
