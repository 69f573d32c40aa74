#include "nsm/malliavin.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "nsm/errors.hpp"
#include "nsm/parallel.hpp"
#include "nsm/rng.hpp"

namespace nsm {

namespace {

struct NodePlan {
    std::vector<std::int64_t> nodes;
    std::vector<double> weights;
};

NodePlan plan_nodes(const PathRecord& path, std::int64_t s, std::int64_t t, std::int64_t stride) {
    if (stride < 1) throw std::invalid_argument("Malliavin: node stride must be >= 1");
    if (s < 0 || t > path.steps || s >= t) throw IndexOutOfRange("Malliavin: need 0 <= s < t <= steps");
    NodePlan p;
    for (std::int64_t m = s; m < t; m += stride) {
        p.nodes.push_back(m);
        p.weights.push_back(double(std::min(stride, t - m)) * path.dt);
    }
    return p;
}

/// Row indices of the target lattice inside the source lattice.
std::vector<int> restriction_rows(int source_kmax, int target_kmax) {
    if (target_kmax > source_kmax) throw LatticeMismatch("Malliavin: Gram lattice exceeds integrator lattice");
    std::vector<int> rows;
    for (const auto& k : lattice::modes(target_kmax)) rows.push_back(lattice::index(source_kmax, k));
    return rows;
}

std::vector<int> forced_rows(const Integrator& integ) {
    std::vector<int> rows;
    for (const auto& k : integ.noise().modes()) {
        if (!lattice::contains(integ.kmax(), k)) throw LatticeMismatch("forced mode " + k.str() + " outside lattice");
        rows.push_back(lattice::index(integ.kmax(), k));
    }
    return rows;
}

MalliavinGram finish(const Integrator& integ, const PathRecord& path, std::int64_t s, std::int64_t t,
                     std::int64_t stride, int gram_kmax, const NodePlan& plan, const Eigen::MatrixXd& V,
                     GramNodeData* raw) {
    const int K = gram_kmax > 0 ? gram_kmax : integ.kmax();
    const auto rows = restriction_rows(integ.kmax(), K);
    const std::size_t d = integ.noise().d();
    const Eigen::Index cols = V.cols();
    Eigen::MatrixXd G(Eigen::Index(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) G.row(Eigen::Index(r)) = V.row(rows[r]);
    Eigen::VectorXd w(cols);
    for (std::size_t i = 0; i < plan.nodes.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double q = path.q_values(plan.nodes[i], Eigen::Index(j));
            w[Eigen::Index(i * d + j)] = plan.weights[i] * q * q;
        }
    MalliavinGram M;
    M.kmax = K;
    M.s_step = s;
    M.t_step = t;
    M.node_stride = stride;
    M.nodes = plan.nodes;
    M.node_weights = plan.weights;
    M.path_index = path.path_index;
    const Eigen::MatrixXd Gs = G * w.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(G.rows(), G.rows());
    lower.selfadjointView<Eigen::Lower>().rankUpdate(Gs);
    M.matrix = lower.selfadjointView<Eigen::Lower>();
    if (raw) {
        raw->vectors = std::move(G);
        raw->weights = std::move(w);
    }
    return M;
}

}  // namespace

MalliavinGram assemble_gram(Integrator& integ, const PathRecord& path, std::int64_t s_step, std::int64_t t_step,
                            std::int64_t node_stride, int gram_kmax, GramNodeData* raw) {
    const auto plan = plan_nodes(path, s_step, t_step, node_stride);
    const auto forced = forced_rows(integ);
    const Eigen::Index d = Eigen::Index(forced.size());
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(integ.dim(), Eigen::Index(plan.nodes.size()) * d);
    Eigen::Index active = 0;
    std::size_t next_node = 0;
    integ.walk(path, s_step, t_step, [&](std::int64_t m, const Eigen::VectorXd& w, const AdvectionGrids& g) {
        if (next_node < plan.nodes.size() && plan.nodes[next_node] == m) {
            for (Eigen::Index j = 0; j < d; ++j) V(forced[std::size_t(j)], active + j) = 1.0;
            active += d;
            ++next_node;
        }
        integ.advance_linear(w, g, path.increments.row(m).transpose(), V.leftCols(active));
    });
    return finish(integ, path, s_step, t_step, node_stride, gram_kmax, plan, V, raw);
}

MalliavinGram assemble_gram_fundamental(Integrator& integ, const PathRecord& path, std::int64_t s_step,
                                        std::int64_t t_step, std::int64_t node_stride, int gram_kmax) {
    const auto plan = plan_nodes(path, s_step, t_step, node_stride);
    const auto forced = forced_rows(integ);
    const Eigen::Index D = integ.dim();
    const Eigen::Index d = Eigen::Index(forced.size());
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(D, D);
    std::vector<Eigen::MatrixXd> at_nodes;
    std::size_t next_node = 0;
    integ.walk(path, s_step, t_step, [&](std::int64_t m, const Eigen::VectorXd& w, const AdvectionGrids& g) {
        if (next_node < plan.nodes.size() && plan.nodes[next_node] == m) {
            at_nodes.push_back(Phi);
            ++next_node;
        }
        integ.advance_linear(w, g, path.increments.row(m).transpose(), Phi);
    });
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(D, d);
    for (Eigen::Index j = 0; j < d; ++j) E(forced[std::size_t(j)], j) = 1.0;
    Eigen::MatrixXd V(D, Eigen::Index(plan.nodes.size()) * d);
    for (std::size_t i = 0; i < at_nodes.size(); ++i) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(at_nodes[i]);
        if (!lu.isInvertible()) throw SingularSolve("fundamental matrix is singular at node " + std::to_string(i));
        V.middleCols(Eigen::Index(i) * d, d) = Phi * lu.solve(E);
    }
    return finish(integ, path, s_step, t_step, node_stride, gram_kmax, plan, V, nullptr);
}

double quadratic_form(const Eigen::MatrixXd& M, const Eigen::VectorXd& xi) {
    if (M.rows() != xi.size()) throw DimensionMismatch("quadratic_form: size mismatch");
    return xi.dot(M * xi);
}

double quadratic_form(const MalliavinGram& M, const SpectralField& xi) {
    if (xi.kmax() != M.kmax) throw LatticeMismatch("quadratic_form: field lattice differs from Gram lattice");
    return quadratic_form(M.matrix, xi.coeffs());
}

Eigen::VectorXd low_mode_mask(int kmax, int N) {
    const int D = lattice::size(kmax);
    Eigen::VectorXd p(D);
    for (int i = 0; i < D; ++i) p[i] = lattice::mode(kmax, i).norm2() <= N * N ? 1.0 : 0.0;
    return p;
}

// ---------------------------------------------------------------------------
// Constrained minimisation

namespace {

struct Smallest {
    double value;
    Eigen::VectorXd vec;
};

Smallest smallest_pair(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw NonConvergence("symmetric eigensolver failed");
    return {es.eigenvalues()[0], es.eigenvectors().col(0)};
}

double low_mass2(const Eigen::VectorXd& mask, const Eigen::VectorXd& x) {
    return (mask.array() * x.array().square()).sum();
}

/// Nearest point of {||x|| = 1, ||Px|| >= alpha} to the direction of x.
Eigen::VectorXd project_feasible(const Eigen::VectorXd& mask, double alpha, Eigen::VectorXd x, Eigen::Index fallback) {
    Eigen::VectorXd p = mask.cwiseProduct(x);
    Eigen::VectorXd q = x - p;
    const double pn = p.norm(), qn = q.norm();
    if (pn >= alpha * std::hypot(pn, qn) && pn + qn > 0.0) return x / x.norm();
    if (pn == 0.0) {
        p.setZero();
        p[fallback] = 1.0;
    } else {
        p /= pn;
    }
    if (qn == 0.0) return p;
    return alpha * p + std::sqrt(std::max(0.0, 1.0 - alpha * alpha)) * (q / qn);
}

/// Exact minimum of x^T M x on the unit circle of span{b1, b2} subject to
/// x^T P x >= alpha^2; returns false when the plane holds no feasible point.
bool plane_minimum(const Eigen::MatrixXd& M, const Eigen::VectorXd& mask, double alpha, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& v, Eigen::VectorXd& best, double& best_value) {
    Eigen::VectorXd b1 = u / u.norm();
    Eigen::VectorXd b2 = v - b1.dot(v) * b1;
    if (b2.norm() < 1e-12) return false;
    b2.normalize();
    const Eigen::VectorXd Mb1 = M * b1, Mb2 = M * b2;
    const double m11 = b1.dot(Mb1), m22 = b2.dot(Mb2), m12 = b1.dot(Mb2);
    const Eigen::VectorXd Pb1 = mask.cwiseProduct(b1), Pb2 = mask.cwiseProduct(b2);
    const double p11 = b1.dot(Pb1), p22 = b2.dot(Pb2), p12 = b1.dot(Pb2);
    // On x = cos t b1 + sin t b2:  form(t) = a + b cos 2t + c sin 2t
    const double pa = 0.5 * (p11 + p22), pb = 0.5 * (p11 - p22), pc = p12;
    const double ma = 0.5 * (m11 + m22), mb = 0.5 * (m11 - m22), mc = m12;
    const double a2 = alpha * alpha;
    std::vector<double> candidates{0.5 * std::atan2(-mc, -mb)};
    const double r = std::hypot(pb, pc);
    if (r > 0.0 && std::abs((a2 - pa) / r) <= 1.0) {
        const double phi = std::atan2(pc, pb), c = std::acos((a2 - pa) / r);
        candidates.push_back(0.5 * (phi + c));
        candidates.push_back(0.5 * (phi - c));
    }
    bool found = false;
    for (double t : candidates) {
        const double g = pa + pb * std::cos(2 * t) + pc * std::sin(2 * t);
        if (g < a2 * (1.0 - 1e-12)) continue;
        const double h = ma + mb * std::cos(2 * t) + mc * std::sin(2 * t);
        if (!found || h < best_value) {
            best_value = h;
            best = std::cos(t) * b1 + std::sin(t) * b2;
            found = true;
        }
    }
    return found;
}

}  // namespace

ConstrainedMinResult constrained_min(const Eigen::MatrixXd& M, const Eigen::VectorXd& mask, double alpha,
                                     const ConstrainedMinOptions& opt) {
    if (M.rows() != M.cols() || M.rows() != mask.size()) throw DimensionMismatch("constrained_min: size mismatch");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("constrained_min: alpha must lie in (0, 1]");
    const Eigen::Index D = M.rows();
    Eigen::Index fallback = -1;
    for (Eigen::Index i = 0; i < D; ++i)
        if (mask[i] > 0.5 && fallback < 0) fallback = i;
    if (fallback < 0) throw std::invalid_argument("constrained_min: low-mode projection is empty on this lattice");
    const double a2 = alpha * alpha;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw NonConvergence("symmetric eigensolver failed");
    const double lmax = std::max(std::abs(es.eigenvalues()[D - 1]), std::abs(es.eigenvalues()[0]));
    const double scale = lmax > 0.0 ? lmax : 1.0;

    ConstrainedMinResult res;
    res.lambda_min = es.eigenvalues()[0];

    // Unconstrained minimiser, maximising low-mode mass inside a degenerate bottom eigenspace.
    Eigen::Index mult = 1;
    while (mult < D && es.eigenvalues()[mult] - es.eigenvalues()[0] <= 1e-14 * scale) ++mult;
    const Eigen::MatrixXd Ebot = es.eigenvectors().leftCols(mult);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> inner(Ebot.transpose() * mask.asDiagonal() * Ebot);
    const Eigen::VectorXd v0 = Ebot * inner.eigenvectors().col(mult - 1);

    if (low_mass2(mask, v0) >= a2 * (1.0 - 1e-12)) {
        res.value = res.lambda_min;
        res.xi = v0;
        res.dual_bound = res.lambda_min;
    } else if (alpha == 1.0) {
        // Feasible set is the unit sphere of range(P).
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < D; ++i)
            if (mask[i] > 0.5) idx.push_back(i);
        Eigen::MatrixXd sub(Eigen::Index(idx.size()), Eigen::Index(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < idx.size(); ++j) sub(Eigen::Index(i), Eigen::Index(j)) = M(idx[i], idx[j]);
        const auto sp = smallest_pair(sub);
        res.value = sp.value;
        res.dual_bound = sp.value;
        res.xi = Eigen::VectorXd::Zero(D);
        for (std::size_t i = 0; i < idx.size(); ++i) res.xi[idx[i]] = sp.vec[Eigen::Index(i)];
        res.constraint_active = true;
        res.mu = std::numeric_limits<double>::infinity();
    } else {
        // Active constraint: find mu >= 0 with ||P xi(mu)||^2 = alpha^2, xi(mu) the
        // bottom eigenvector of M - mu P. The mass is non-decreasing in mu.
        res.constraint_active = true;
        const Eigen::MatrixXd P = mask.asDiagonal();
        double lo = 0.0, hi = 2.0 * scale + 1e-300;
        Eigen::VectorXd x_lo = v0, x_hi;
        Smallest s_hi{};
        for (int k = 0;; ++k) {
            s_hi = smallest_pair(M - hi * P);
            if (low_mass2(mask, s_hi.vec) >= a2) break;
            lo = hi;
            x_lo = s_hi.vec;
            hi *= 4.0;
            if (k > 200) throw NonConvergence("constrained_min: could not bracket the multiplier");
        }
        x_hi = s_hi.vec;
        double upper = quadratic_form(M, x_hi), lower = s_hi.value + hi * a2;
        double mu_best = hi;
        int it = 0;
        for (; it < 200; ++it) {
            if (upper - lower <= 1e-9 * std::abs(upper) + 1e-14 * scale) break;
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const auto sm = smallest_pair(M - mid * P);
            lower = std::max(lower, sm.value + mid * a2);
            if (low_mass2(mask, sm.vec) >= a2) {
                hi = mid;
                x_hi = sm.vec;
                const double val = quadratic_form(M, x_hi);
                if (val < upper) {
                    upper = val;
                    mu_best = mid;
                }
            } else {
                lo = mid;
                x_lo = sm.vec;
            }
        }
        res.iterations = it;
        res.xi = x_hi;
        res.value = upper;
        res.mu = mu_best;
        // Near-degenerate crossing: the optimum lies in the plane of the bracketing vectors.
        Eigen::VectorXd xp;
        double vp = 0.0;
        if (plane_minimum(M, mask, alpha, x_hi, x_lo, xp, vp) && vp < res.value) {
            res.value = vp;
            res.xi = xp;
        }
        res.dual_bound = lower;
    }

    // Independent cross-check: projected gradient from random starts.
    double pg_best = std::numeric_limits<double>::infinity();
    const double step = 1.0 / scale;
    for (int r = 0; r < opt.restarts; ++r) {
        CounterRng rng(opt.seed, "constrained-min", std::uint64_t(r));
        Eigen::VectorXd x(D);
        for (Eigen::Index i = 0; i < D; ++i) x[i] = rng.normal();
        x = project_feasible(mask, alpha, x, fallback);
        double val = quadratic_form(M, x);
        for (int k = 0; k < opt.pg_iterations; ++k) {
            x = project_feasible(mask, alpha, x - step * (M * x), fallback);
            val = std::min(val, quadratic_form(M, x));
        }
        pg_best = std::min(pg_best, val);
    }
    res.pg_value = pg_best;
    if (opt.restarts > 0) {
        res.disagreement = (pg_best - res.value) / scale;
        res.agree = res.disagreement >= -opt.tolerance;
        if (res.disagreement < -opt.tolerance) {
            if (opt.throw_on_disagreement)
                throw NonConvergence("constrained_min: projected gradient found " + std::to_string(pg_best) +
                                     " below the multiplier solution " + std::to_string(res.value));
            res.value = pg_best;
        }
    }
    res.low_mass = std::sqrt(low_mass2(mask, res.xi));
    return res;
}

ConstrainedMinResult constrained_min(const MalliavinGram& M, const SalphaN& region, const ConstrainedMinOptions& opt) {
    return constrained_min(M.matrix, low_mode_mask(M.kmax, region.N), region.alpha, opt);
}

// ---------------------------------------------------------------------------

std::vector<SpectralField> sample_initials(int kmax, double radius, std::size_t n, std::uint64_t seed) {
    std::vector<SpectralField> out;
    const int D = lattice::size(kmax);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0) {
            out.emplace_back(kmax);
        } else if (i == 1) {
            out.push_back(SpectralField::basis(kmax, {1, 0}, radius));
        } else if (i == 2) {
            out.push_back(SpectralField::basis(kmax, {1, 1}, radius));
        } else {
            CounterRng rng(seed, "initials", i);
            Eigen::VectorXd c(D);
            for (int j = 0; j < D; ++j) c[j] = rng.normal() / double(lattice::mode(kmax, j).norm2());
            out.emplace_back(kmax, c * (radius / c.norm()));
        }
    }
    return out;
}

NondegeneracyEstimate estimate_r(const IntegratorSpec& spec, const NoiseModel& noise, const NondegeneracyConfig& cfg) {
    if (cfg.n_paths == 0 || cfg.n_initials == 0) throw std::invalid_argument("estimate_r: need paths and initials");
    const auto initials = sample_initials(spec.kmax, cfg.radius, cfg.n_initials, cfg.seed);
    const std::size_t n = cfg.n_initials * cfg.n_paths;
    std::vector<NondegeneracySample> samples(n);
    std::vector<std::unique_ptr<Integrator>> pool(std::max<std::size_t>(1, cfg.workers));
    parallel_for(n, cfg.workers, [&](std::size_t task, std::size_t worker) {
        if (!pool[worker]) pool[worker] = std::make_unique<Integrator>(spec, noise);
        Integrator& integ = *pool[worker];
        const std::size_t i = task / cfg.n_paths, p = task % cfg.n_paths;
        const auto path = integ.simulate(initials[i], cfg.T, cfg.seed, task);
        const auto M = assemble_gram(integ, path, 0, path.steps, cfg.node_stride, cfg.gram_kmax);
        auto opt = cfg.minimizer;
        opt.seed = cfg.seed ^ (0x9e3779b97f4a7c15ull * (task + 1));
        const auto cm = constrained_min(M, cfg.region, opt);
        samples[task] = {i, p, cm.value, cm.lambda_min, M.matrix.trace(), cm.low_mass, cm.agree};
    });

    NondegeneracyEstimate est;
    est.epsilon_grid = cfg.epsilon_grid;
    est.region = cfg.region;
    est.radius = cfg.radius;
    est.n_samples = n;
    for (double eps : cfg.epsilon_grid) {
        std::size_t hits = 0;
        std::vector<std::size_t> per(cfg.n_initials, 0);
        for (const auto& s : samples)
            if (s.X < eps) {
                ++hits;
                ++per[s.initial];
            }
        est.pooled_hits.push_back(hits);
        est.pooled_probability.push_back(double(hits) / double(n));
        est.pooled_ci.push_back(stats::wilson(hits, n));
        const auto worst = std::max_element(per.begin(), per.end());
        est.sup_probability.push_back(double(*worst) / double(cfg.n_paths));
        est.sup_ci.push_back(stats::wilson(*worst, cfg.n_paths));
    }
    est.samples = std::move(samples);
    return est;
}

}  // namespace nsm
