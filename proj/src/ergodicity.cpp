#include "nsm/ergodicity.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "nsm/errors.hpp"
#include "nsm/parallel.hpp"
#include "nsm/rng.hpp"

namespace nsm {

namespace {

/// One integrator per worker, created on first use.
class IntegratorPool {
public:
    IntegratorPool(const IntegratorSpec& spec, const NoiseModel& noise, std::size_t workers)
        : spec_(spec), noise_(noise), slots_(std::max<std::size_t>(1, workers)) {}
    Integrator& get(std::size_t worker) {
        auto& s = slots_[worker];
        if (!s) s = std::make_unique<Integrator>(spec_, noise_);
        return *s;
    }

private:
    const IntegratorSpec& spec_;
    const NoiseModel& noise_;
    std::vector<std::unique_ptr<Integrator>> slots_;
};

Eigen::VectorXd wavenumbers_squared(int kmax) {
    Eigen::VectorXd k2(lattice::size(kmax));
    for (int i = 0; i < k2.size(); ++i) k2[i] = double(lattice::mode(kmax, i).norm2());
    return k2;
}

std::vector<std::int64_t> sample_steps(const Integrator& integ, const std::vector<double>& times) {
    std::vector<std::int64_t> out;
    for (double t : times) out.push_back(t == 0.0 ? 0 : integ.steps_for(t));
    return out;
}

stats::Interval percentile_interval(std::vector<double> v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    return {stats::quantile(v, 0.025), stats::quantile(std::move(v), 0.975)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Lyapunov

std::vector<double> lyapunov_functionals(const IntegratorSpec& spec, const NoiseModel& noise,
                                         const SpectralField& w0, double T, std::size_t n_paths,
                                         std::uint64_t seed, std::size_t workers) {
    IntegratorPool pool(spec, noise, workers);
    const std::int64_t steps = pool.get(0).steps_for(T);
    const Eigen::VectorXd k2 = wavenumbers_squared(spec.kmax);
    const double drift = double(noise.d()) * noise.aleph() * noise.aleph();
    std::vector<double> S(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t p, std::size_t worker) {
        Integrator& integ = pool.get(worker);
        const auto inc = brownian_increments(seed, p, steps, noise.d(), spec.dt);
        double dissipated = 0.0, sup = -std::numeric_limits<double>::infinity();
        integ.run(w0.coeffs(), inc, [&](std::int64_t m, const Eigen::VectorXd& w) {
            const double t = double(m) * spec.dt;
            sup = std::max(sup, w.squaredNorm() + spec.nu * dissipated - drift * t);
            dissipated += (k2.array() * w.array().square()).sum() * spec.dt;
        });
        S[p] = sup;
    });
    return S;
}

LyapunovReport lyapunov_report(const std::vector<double>& functionals, double w0_norm2, double eta, double T) {
    std::vector<double> F(functionals.size());
    for (std::size_t i = 0; i < F.size(); ++i) F[i] = std::exp(eta * functionals[i]);
    const auto ms = stats::mean_se(F);
    LyapunovReport r;
    r.eta = eta;
    r.T = T;
    r.bound = std::exp(eta * w0_norm2);
    r.mean = ms.mean;
    r.se = ms.se;
    r.n_paths = F.size();
    r.pass = std::isfinite(ms.mean) && ms.mean <= r.bound * (1.0 + 3.0 * ms.se);
    return r;
}

LyapunovReport lyapunov_check(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0,
                              double eta, double T, std::size_t n_paths, std::uint64_t seed, std::size_t workers) {
    if (!(eta > 0.0)) throw std::invalid_argument("lyapunov_check: eta must be positive");
    return lyapunov_report(lyapunov_functionals(spec, noise, w0, T, n_paths, seed, workers),
                           w0.coeffs().squaredNorm(), eta, T);
}

LyapunovSweep lyapunov_sweep(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0, double T,
                             std::size_t n_paths, std::uint64_t seed, double eta_start, double factor, double eta_min,
                             std::size_t workers) {
    if (!(eta_start > 0.0) || !(factor > 0.0 && factor < 1.0) || !(eta_min > 0.0))
        throw std::invalid_argument("lyapunov_sweep: need eta_start > 0, factor in (0,1), eta_min > 0");
    const auto S = lyapunov_functionals(spec, noise, w0, T, n_paths, seed, workers);
    LyapunovSweep sweep;
    for (double eta = eta_start; eta >= eta_min * (1.0 - 1e-12); eta *= factor) {
        sweep.tried.push_back(lyapunov_report(S, w0.coeffs().squaredNorm(), eta, T));
        if (sweep.tried.back().pass) {
            sweep.passing = sweep.tried.size() - 1;
            break;
        }
    }
    return sweep;
}

LyapunovDecayProfile lyapunov_decay_profile(const IntegratorSpec& spec, const NoiseModel& noise,
                                            const std::vector<double>& radii, double eta,
                                            const std::vector<double>& times, std::size_t n_paths,
                                            std::uint64_t seed, std::size_t workers) {
    if (radii.size() < 2) throw std::invalid_argument("lyapunov_decay_profile: need at least two radii");
    IntegratorPool pool(spec, noise, workers);
    const auto at = sample_steps(pool.get(0), times);
    const std::int64_t steps = *std::max_element(at.begin(), at.end());
    const auto dir = sample_initials(spec.kmax, 1.0, 4, seed)[3];
    // values[radius][path][time] = exp(eta ||w_t||^2)
    std::vector<std::vector<std::vector<double>>> values(radii.size(),
                                                         std::vector<std::vector<double>>(n_paths));
    parallel_for(radii.size() * n_paths, workers, [&](std::size_t task, std::size_t worker) {
        const std::size_t r = task / n_paths, p = task % n_paths;
        Integrator& integ = pool.get(worker);
        const auto inc = brownian_increments(seed, p, steps, noise.d(), spec.dt);
        auto& out = values[r][p];
        out.assign(at.size(), 0.0);
        integ.run((dir * radii[r]).coeffs(), inc, [&](std::int64_t m, const Eigen::VectorXd& w) {
            for (std::size_t k = 0; k < at.size(); ++k)
                if (at[k] == m) out[k] = std::exp(eta * w.squaredNorm());
        });
    });
    LyapunovDecayProfile prof;
    prof.times = times;
    for (std::size_t k = 0; k < at.size(); ++k) {
        std::vector<double> x, y;
        for (std::size_t r = 0; r < radii.size(); ++r) {
            std::vector<double> v;
            for (std::size_t p = 0; p < n_paths; ++p) v.push_back(values[r][p][k]);
            x.push_back(radii[r] * radii[r]);
            y.push_back(std::log(stats::mean_se(v).mean));
        }
        prof.fits.push_back(stats::linear_fit(x, y));
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Control residual

double resolvent_norm(const Eigen::MatrixXd& M, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("resolvent_norm: beta must be positive");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NonConvergence("symmetric eigensolver failed");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double den = es.eigenvalues()[i] + beta;
        if (!(den > 0.0)) throw SingularSolve("M + beta I is not positive definite; beta too small");
        worst = std::max(worst, beta / den);
    }
    return worst;
}

namespace {

struct ControlPathRecord {
    Eigen::MatrixXd norms;  // betas x (n_cycles + 1)
    Eigen::MatrixXd costs;  // betas x n_cycles
    Eigen::MatrixXd ceiling_ratio;
    std::vector<bool> ceiling_ok;
    std::vector<double> resolvent;  // per beta, max over cycles
};

ControlPathRecord control_path(Integrator& integ, const SpectralField& w0, const SpectralField& xi,
                               const ControlProbeConfig& cfg, std::uint64_t path_index) {
    const std::int64_t S = integ.steps_for(1.0);
    const std::int64_t total = 2 * S * cfg.n_cycles;
    const auto nb = Eigen::Index(cfg.betas.size());
    const auto path = integ.replay(w0, brownian_increments(cfg.seed, path_index, total, integ.noise().d(),
                                                           integ.spec().dt),
                                   cfg.seed, path_index, S);
    ControlPathRecord rec;
    rec.norms.resize(nb, cfg.n_cycles + 1);
    rec.costs.resize(nb, cfg.n_cycles);
    rec.ceiling_ratio.resize(nb, cfg.n_cycles);
    rec.ceiling_ok.assign(std::size_t(nb), true);
    rec.resolvent.assign(std::size_t(nb), 0.0);
    Eigen::MatrixXd R = xi.coeffs().replicate(1, nb);
    rec.norms.col(0) = R.colwise().norm().transpose();
    for (int c = 0; c < cfg.n_cycles; ++c) {
        const std::int64_t s = 2 * S * c;
        const Eigen::MatrixXd Y = integ.linearized_flow(path, s, s + S, R);
        Eigen::VectorXd lambda;
        Eigen::MatrixXd U;
        if (!cfg.identity_resolvent) {
            const auto M = assemble_gram(integ, path, s, s + S, cfg.node_stride);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M.matrix);
            if (es.info() != Eigen::Success) throw NonConvergence("symmetric eigensolver failed");
            lambda = es.eigenvalues();
            U = es.eigenvectors();
        }
        for (Eigen::Index b = 0; b < nb; ++b) {
            const double beta = cfg.betas[std::size_t(b)];
            const Eigen::VectorXd y = Y.col(b);
            if (cfg.identity_resolvent) {
                R.col(b) = y;
                rec.costs(b, c) = 0.0;
                rec.ceiling_ratio(b, c) = 0.0;
                continue;
            }
            const Eigen::VectorXd a = U.transpose() * y;
            Eigen::VectorXd shrink(a.size());
            double cost = 0.0;
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                const double den = lambda[i] + beta;
                if (!(den > 0.0)) throw SingularSolve("M + beta I is not positive definite; beta too small");
                shrink[i] = beta / den;
                cost += a[i] * a[i] * lambda[i] / (den * den);
                rec.resolvent[std::size_t(b)] = std::max(rec.resolvent[std::size_t(b)], shrink[i]);
            }
            R.col(b) = U * shrink.cwiseProduct(a);
            const double ceiling = y.squaredNorm() / beta;
            rec.costs(b, c) = cost;
            rec.ceiling_ratio(b, c) = ceiling > 0.0 ? cost / ceiling : 0.0;
            if (cost > ceiling * (1.0 + 1e-10)) rec.ceiling_ok[std::size_t(b)] = false;
        }
        R = integ.linearized_flow(path, s + S, s + 2 * S, R);
        rec.norms.col(c + 1) = R.colwise().norm().transpose();
    }
    return rec;
}

double fit_rate(const std::vector<double>& means) {
    std::vector<double> t, y;
    for (std::size_t n = 0; n < means.size(); ++n) {
        if (!(means[n] > 0.0)) continue;
        t.push_back(2.0 * double(n));
        y.push_back(std::log(means[n]));
    }
    if (t.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return -stats::linear_fit(t, y).slope;
}

}  // namespace

ControlProbeResult control_probe(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0,
                                 const SpectralField& xi, const ControlProbeConfig& cfg) {
    if (std::abs(xi.norm() - 1.0) > 1e-12) throw std::invalid_argument("control_probe: xi must have unit norm");
    if (xi.kmax() != spec.kmax || w0.kmax() != spec.kmax)
        throw LatticeMismatch("control_probe: fields must live on the integrator lattice");
    if (cfg.betas.empty() || cfg.n_cycles < 1 || cfg.n_paths == 0)
        throw std::invalid_argument("control_probe: need betas, cycles and paths");
    for (double b : cfg.betas)
        if (!(b > 0.0)) throw std::invalid_argument("control_probe: beta must be positive");

    IntegratorPool pool(spec, noise, cfg.workers);
    std::vector<ControlPathRecord> recs(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.workers, [&](std::size_t p, std::size_t worker) {
        recs[p] = control_path(pool.get(worker), w0, xi, cfg, p);
    });

    ControlProbeResult res;
    res.n_paths = cfg.n_paths;
    res.n_cycles = cfg.n_cycles;
    res.galerkin_kmax = spec.kmax;
    const std::size_t P = cfg.n_paths;
    for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
        const auto bi = Eigen::Index(b);
        ControlBetaResult br;
        br.beta = cfg.betas[b];
        std::vector<double> means;
        for (int n = 0; n <= cfg.n_cycles; ++n) {
            ControlCycleStats cs;
            cs.cycle = n;
            cs.time = 2.0 * n;
            std::vector<double> v(P);
            for (std::size_t p = 0; p < P; ++p) v[p] = recs[p].norms(bi, n);
            const auto ms = stats::mean_se(v);
            cs.mean_norm = ms.mean;
            cs.se_norm = ms.se;
            for (int m : cfg.moments) {
                std::vector<double> vp(P);
                for (std::size_t p = 0; p < P; ++p) vp[p] = std::pow(v[p], double(m));
                cs.moment_means.push_back(stats::mean_se(vp).mean);
            }
            cs.q10 = stats::quantile(v, 0.1);
            cs.q50 = stats::quantile(v, 0.5);
            cs.q90 = stats::quantile(v, 0.9);
            if (n < cfg.n_cycles) {
                std::vector<double> cost(P);
                for (std::size_t p = 0; p < P; ++p) {
                    cost[p] = recs[p].costs(bi, n);
                    cs.ceiling_ratio_max = std::max(cs.ceiling_ratio_max, recs[p].ceiling_ratio(bi, n));
                }
                cs.cost_mean = stats::mean_se(cost).mean;
                cs.cost_max = *std::max_element(cost.begin(), cost.end());
            }
            means.push_back(cs.mean_norm);
            br.cycles.push_back(cs);
        }
        std::vector<double> ratios;
        for (std::size_t p = 0; p < P; ++p) {
            br.ceiling_holds = br.ceiling_holds && recs[p].ceiling_ok[b];
            br.max_resolvent_norm = std::max(br.max_resolvent_norm, recs[p].resolvent[b]);
            for (int n = 0; n < cfg.n_cycles; ++n) {
                const double a = recs[p].norms(bi, n);
                if (a > 0.0) ratios.push_back(recs[p].norms(bi, n + 1) / a);
            }
        }
        br.ratio_count = ratios.size();
        br.median_ratio = ratios.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::median(ratios);
        br.gamma = fit_rate(means);
        std::vector<double> boot;
        for (std::size_t r = 0; r < cfg.bootstrap; ++r) {
            CounterRng rng(cfg.seed, "control-bootstrap", r);
            std::vector<double> acc(std::size_t(cfg.n_cycles) + 1, 0.0);
            for (std::size_t k = 0; k < P; ++k) {
                const auto p = std::size_t(rng.below(P));
                for (int n = 0; n <= cfg.n_cycles; ++n) acc[std::size_t(n)] += recs[p].norms(bi, n) / double(P);
            }
            const double g = fit_rate(acc);
            if (std::isfinite(g)) boot.push_back(g);
        }
        br.gamma_ci = percentile_interval(std::move(boot));
        if (!res.best && br.decays()) res.best = b;
        res.betas.push_back(std::move(br));
    }
    return res;
}

ContractionReport low_mode_contraction_check(const MalliavinGram& M, double beta, const SalphaN& region,
                                             double epsilon, std::size_t n_probes, std::uint64_t seed) {
    if (!(beta > 0.0) || !(epsilon > 0.0)) throw std::invalid_argument("contraction check: beta, eps must be positive");
    const Eigen::Index D = M.dim();
    const Eigen::VectorXd mask = low_mode_mask(M.kmax, region.N);
    ConstrainedMinOptions opt;
    opt.seed = seed;
    opt.throw_on_disagreement = false;
    ContractionReport rep;
    rep.X = constrained_min(M, region, opt).value;
    rep.on_event = rep.X >= epsilon;
    rep.probes = n_probes;
    const Eigen::LLT<Eigen::MatrixXd> llt(M.matrix + beta * Eigen::MatrixXd::Identity(D, D));
    if (llt.info() != Eigen::Success) throw SingularSolve("M + beta I is not positive definite");
    const double factor = rep.on_event ? std::max(region.alpha, std::sqrt(beta / epsilon)) : 1.0;
    for (std::size_t i = 0; i < n_probes; ++i) {
        CounterRng rng(seed, "contraction-probe", i);
        Eigen::VectorXd phi(D);
        for (Eigen::Index k = 0; k < D; ++k) phi[k] = rng.normal();
        const double lhs = beta * mask.cwiseProduct(llt.solve(phi)).norm();
        const double rhs = phi.norm() * factor;
        rep.max_ratio = std::max(rep.max_ratio, lhs / rhs);
        if (lhs > rhs * (1.0 + 1e-12)) rep.holds = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Observables

Observable Observable::parse(const std::string& id) {
    const auto colon = id.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("observable '" + id + "': expected kind:parameter");
    const std::string kind = id.substr(0, colon), arg = id.substr(colon + 1);
    try {
        if (kind == "coord") {
            const auto comma = arg.find(',');
            if (comma == std::string::npos) throw std::invalid_argument("need k1,k2");
            return Observable(id, Kind::coordinate, ModeIndex{std::stoi(arg.substr(0, comma)), std::stoi(arg.substr(comma + 1))}, 0.0);
        }
        const double v = std::stod(arg);
        if (!(v > 0.0)) throw std::invalid_argument("parameter must be positive");
        if (kind == "expnorm") return Observable(id, Kind::exp_norm, ModeIndex{1, 0}, v);
        if (kind == "ball") return Observable(id, Kind::ball, ModeIndex{1, 0}, v);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("observable '" + id + "': " + e.what());
    } catch (const std::out_of_range&) {
        throw std::invalid_argument("observable '" + id + "': number out of range");
    }
    throw std::invalid_argument("observable '" + id + "': unknown kind '" + kind + "'");
}

double Observable::operator()(int kmax, const Eigen::VectorXd& w) const {
    switch (kind_) {
        case Kind::coordinate:
            return lattice::contains(kmax, mode_) ? std::tanh(w[lattice::index(kmax, mode_)]) : 0.0;
        case Kind::exp_norm:
            return std::exp(-param_ * w.squaredNorm());
        case Kind::ball:
            return 1.0 / (1.0 + std::exp((w.norm() - param_) / (0.1 * param_)));
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Mixing

MixingEstimate mixing_rate(const IntegratorSpec& spec, const NoiseModel& noise, const SpectralField& w0_a,
                           const SpectralField& w0_b, const std::vector<Observable>& observables,
                           const MixingOptions& opt) {
    if (observables.empty()) throw std::invalid_argument("mixing_rate: no observables");
    if (opt.n_paths < 2) throw std::invalid_argument("mixing_rate: need at least two paths per ensemble");
    IntegratorPool pool(spec, noise, opt.workers);
    const std::int64_t steps = pool.get(0).steps_for(opt.T);
    const std::int64_t every = pool.get(0).steps_for(opt.sample_every);
    if (every < 1 || steps % every != 0) throw std::invalid_argument("mixing_rate: T must be a multiple of sample_every");
    const std::size_t nt = std::size_t(steps / every) + 1, no = observables.size(), n = opt.n_paths;

    // vals[ensemble][path] = row-major (time, observable)
    std::vector<std::vector<std::vector<double>>> vals(2, std::vector<std::vector<double>>(n));
    parallel_for(2 * n, opt.workers, [&](std::size_t task, std::size_t worker) {
        const std::size_t e = task / n, p = task % n;
        Integrator& integ = pool.get(worker);
        const char* purpose = (e == 1 && opt.independent_seeds) ? "mixing-b" : "mixing-a";
        const auto inc = brownian_increments(opt.seed, p, steps, noise.d(), spec.dt, purpose);
        auto& out = vals[e][p];
        out.assign(nt * no, 0.0);
        integ.run((e == 0 ? w0_a : w0_b).coeffs(), inc, [&](std::int64_t m, const Eigen::VectorXd& w) {
            if (m % every != 0) return;
            const auto k = std::size_t(m / every);
            for (std::size_t o = 0; o < no; ++o) out[k * no + o] = observables[o](spec.kmax, w);
        });
    });

    MixingEstimate est;
    est.n_paths = n;
    for (std::size_t k = 0; k < nt; ++k) est.times.push_back(double(k) * double(every) * spec.dt);

    auto diffs_for = [&](const std::vector<std::size_t>& ia, const std::vector<std::size_t>& ib) {
        // Means are accumulated separately so identical ensembles difference to exactly zero.
        std::vector<double> sa(nt * no, 0.0), sb(nt * no, 0.0);
        for (std::size_t p : ia)
            for (std::size_t i = 0; i < nt * no; ++i) sa[i] += vals[0][p][i];
        for (std::size_t p : ib)
            for (std::size_t i = 0; i < nt * no; ++i) sb[i] += vals[1][p][i];
        for (std::size_t i = 0; i < nt * no; ++i) sa[i] = sa[i] / double(n) - sb[i] / double(n);
        return sa;
    };
    std::vector<std::size_t> identity(n);
    for (std::size_t p = 0; p < n; ++p) identity[p] = p;
    const auto base = diffs_for(identity, identity);
    std::vector<std::vector<double>> boot;
    for (std::size_t r = 0; r < opt.bootstrap; ++r) {
        CounterRng rng(opt.seed, "mixing-bootstrap", r);
        std::vector<std::size_t> ia(n), ib(n);
        for (auto& i : ia) i = std::size_t(rng.below(n));
        for (auto& i : ib) i = std::size_t(rng.below(n));
        boot.push_back(diffs_for(ia, ib));
    }

    auto fit_window = [&](const std::vector<double>& d, std::size_t o, std::size_t first, std::size_t window) {
        std::vector<double> t, y;
        for (std::size_t k = first; k < first + window; ++k) {
            const double a = std::abs(d[k * no + o]);
            if (!(a > 0.0)) return std::numeric_limits<double>::quiet_NaN();
            t.push_back(est.times[k]);
            y.push_back(std::log(a));
        }
        return -stats::linear_fit(t, y).slope;
    };

    for (std::size_t o = 0; o < no; ++o) {
        ObservableSeries s;
        s.id = observables[o].id();
        for (std::size_t k = 0; k < nt; ++k) {
            std::vector<double> a(n), b(n);
            for (std::size_t p = 0; p < n; ++p) {
                a[p] = vals[0][p][k * no + o];
                b[p] = vals[1][p][k * no + o];
            }
            const auto ma = stats::mean_se(a), mb = stats::mean_se(b);
            s.diff.push_back(base[k * no + o]);
            s.se.push_back(std::hypot(ma.se, mb.se));
            std::vector<double> bd;
            for (const auto& bv : boot) bd.push_back(bv[k * no + o]);
            s.ci.push_back(bd.empty() ? stats::Interval{s.diff.back(), s.diff.back()} : percentile_interval(bd));
        }
        // The difference at t = 0 is deterministic, so the signal is judged on
        // the random sample times that follow it.
        std::size_t run = 0;
        while (1 + run < nt && (s.ci[1 + run].lo > 0.0 || s.ci[1 + run].hi < 0.0)) ++run;
        s.signal = run >= 3;
        const std::size_t first = std::abs(base[o]) > 0.0 ? 0 : 1;
        s.window = 1 + run - first;
        if (s.signal) {
            s.gamma = fit_window(base, o, first, s.window);
            std::vector<double> g;
            for (const auto& bv : boot) {
                const double x = fit_window(bv, o, first, s.window);
                if (std::isfinite(x)) g.push_back(x);
            }
            s.gamma_ci = percentile_interval(std::move(g));
        } else {
            s.gamma = std::numeric_limits<double>::quiet_NaN();
            s.gamma_ci = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        }
        est.series.push_back(std::move(s));
    }
    return est;
}

// ---------------------------------------------------------------------------
// Irreducibility

IrreducibilityEstimate irreducibility_probe(const IntegratorSpec& spec, const NoiseModel& noise,
                                            const IrreducibilityOptions& opt) {
    if (!(opt.gamma_ball > 0.0)) throw std::invalid_argument("irreducibility_probe: ball radius must be positive");
    if (opt.times.empty() || opt.n_initials == 0 || opt.n_paths == 0)
        throw std::invalid_argument("irreducibility_probe: need times, initials and paths");
    if (!std::is_sorted(opt.times.begin(), opt.times.end()))
        throw std::invalid_argument("irreducibility_probe: times must be increasing");
    IntegratorPool pool(spec, noise, opt.workers);
    const auto at = sample_steps(pool.get(0), opt.times);
    const std::int64_t steps = at.back();
    const auto initials = sample_initials(spec.kmax, opt.radius, opt.n_initials, opt.seed);
    const std::size_t nt = at.size(), n = opt.n_paths;
    std::vector<std::vector<char>> inside(opt.n_initials * n);
    parallel_for(opt.n_initials * n, opt.workers, [&](std::size_t task, std::size_t worker) {
        Integrator& integ = pool.get(worker);
        const auto inc = brownian_increments(opt.seed, task, steps, noise.d(), spec.dt, "irreducibility");
        auto& out = inside[task];
        out.assign(nt, 0);
        integ.run(initials[task / n].coeffs(), inc, [&](std::int64_t m, const Eigen::VectorXd& w) {
            for (std::size_t k = 0; k < nt; ++k)
                if (at[k] == m && w.norm() <= opt.gamma_ball) out[k] = 1;
        });
    });
    IrreducibilityEstimate est;
    est.times = opt.times;
    est.n_paths = n;
    for (std::size_t k = 0; k < nt; ++k) {
        std::vector<std::size_t> h(opt.n_initials, 0);
        for (std::size_t i = 0; i < opt.n_initials; ++i)
            for (std::size_t p = 0; p < n; ++p) h[i] += std::size_t(inside[i * n + p][k]);
        const std::size_t worst = *std::min_element(h.begin(), h.end());
        est.hits.push_back(h);
        est.min_probability.push_back(double(worst) / double(n));
        est.min_ci.push_back(stats::wilson(worst, n));
        if (!est.first_positive && est.min_ci.back().lo > 0.0) est.first_positive = k;
    }
    return est;
}

}  // namespace nsm
