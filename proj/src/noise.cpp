#include "nsm/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "nsm/errors.hpp"
#include "nsm/rng.hpp"

namespace nsm {

// ---------------------------------------------------------------------------
// ModeSet

ModeSet::ModeSet(std::vector<ModeIndex> modes) : modes_(std::move(modes)) {
    if (modes_.empty()) throw std::invalid_argument("ModeSet: Z0 must be nonempty");
    std::set<ModeIndex> seen(modes_.begin(), modes_.end());
    if (seen.size() != modes_.size()) throw std::invalid_argument("ModeSet: duplicate modes");
}

int ModeSet::max_abs() const {
    int m = 0;
    for (const auto& k : modes_) m = std::max(m, k.max_abs());
    return m;
}

// ---------------------------------------------------------------------------
// ScalarProfile

std::string ScalarProfile::name() const {
    switch (kind_) {
        case Kind::constant: return "constant";
        case Kind::sigmoid: return "sigmoid";
        case Kind::bump: return "bump";
    }
    return "?";
}

double ScalarProfile::f(double x) const {
    switch (kind_) {
        case Kind::constant: return c0_;
        case Kind::sigmoid: return c0_ + c1_ / (1.0 + x * x);
        case Kind::bump: return c0_ + c1_ * x * x * std::exp(-x * x);
    }
    return 0.0;
}

double ScalarProfile::df(double x) const {
    switch (kind_) {
        case Kind::constant: return 0.0;
        case Kind::sigmoid: {
            const double s = 1.0 + x * x;
            return -2.0 * c1_ * x / (s * s);
        }
        case Kind::bump: return 2.0 * c1_ * x * (1.0 - x * x) * std::exp(-x * x);
    }
    return 0.0;
}

double ScalarProfile::d2f(double x) const {
    switch (kind_) {
        case Kind::constant: return 0.0;
        case Kind::sigmoid: {
            const double s = 1.0 + x * x;
            return c1_ * (6.0 * x * x - 2.0) / (s * s * s);
        }
        case Kind::bump: {
            const double y = x * x;
            return c1_ * (4.0 * y * y - 10.0 * y + 2.0) * std::exp(-y);
        }
    }
    return 0.0;
}

namespace {
/// End points of the range of f over the real line.
std::pair<double, double> profile_range(ScalarProfile::Kind k, double c0, double c1) {
    switch (k) {
        case ScalarProfile::Kind::constant: return {c0, c0};
        case ScalarProfile::Kind::sigmoid: return {c0, c0 + c1};
        case ScalarProfile::Kind::bump: return {c0, c0 + c1 / std::exp(1.0)};
    }
    return {c0, c0};
}
}  // namespace

double ScalarProfile::sup_abs() const {
    const auto [a, b] = profile_range(kind_, c0_, c1_);
    return std::max(std::abs(a), std::abs(b));
}

double ScalarProfile::inf_abs() const {
    const auto [a, b] = profile_range(kind_, c0_, c1_);
    if ((a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)) return std::min(std::abs(a), std::abs(b));
    return 0.0;
}

double ScalarProfile::sup_abs_df() const {
    switch (kind_) {
        case Kind::constant: return 0.0;
        case Kind::sigmoid: return std::abs(c1_) * 3.0 * std::sqrt(3.0) / 8.0;
        case Kind::bump: {
            // critical points of x (1 - x^2) e^{-x^2}: 2y^2 - 5y + 1 = 0, y = x^2
            double best = 0.0;
            for (double y : {(5.0 - std::sqrt(17.0)) / 4.0, (5.0 + std::sqrt(17.0)) / 4.0})
                best = std::max(best, std::sqrt(y) * std::abs(1.0 - y) * std::exp(-y));
            return 2.0 * std::abs(c1_) * best;
        }
    }
    return 0.0;
}

double ScalarProfile::sup_abs_d2f() const {
    return kind_ == Kind::constant ? 0.0 : 2.0 * std::abs(c1_);
}

double ScalarProfile::growth_constant() const {
    // |f'(x)| / min(|x|,1) peaks at x -> 0 with value |f''(0)| = 2|c1| for both smooth profiles.
    return kind_ == Kind::constant ? 0.0 : std::max(2.0 * std::abs(c1_), sup_abs_df());
}

std::string to_string(QKind k) {
    switch (k) {
        case QKind::constant: return "constant";
        case QKind::spectral_coordinate: return "spectral_coordinate";
        case QKind::norm_based: return "norm_based";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// NoiseModel

NoiseModel::NoiseModel(ModeSet modes, QKind kind, std::vector<ScalarProfile> profiles, double aleph,
                       std::vector<ModeIndex> probes)
    : modes_(std::move(modes)), kind_(kind), profiles_(std::move(profiles)), aleph_(aleph), probes_(std::move(probes)) {
    if (!(aleph_ > 0.0)) throw std::invalid_argument("NoiseModel: aleph must be positive");
    if (profiles_.size() != 1 && profiles_.size() != modes_.size())
        throw std::invalid_argument("NoiseModel: need one profile or one per mode");
    if (probes_.empty()) probes_ = modes_.modes();
    if (probes_.size() != modes_.size()) throw std::invalid_argument("NoiseModel: need one probe mode per forced mode");
}

NoiseModel NoiseModel::constant(ModeSet modes, double c, double aleph) {
    return NoiseModel(std::move(modes), QKind::constant, {ScalarProfile::constant(c)}, aleph);
}

double NoiseModel::coordinate(int kmax, const Eigen::VectorXd& w, ModeIndex k) const {
    return lattice::contains(kmax, k) ? w[lattice::index(kmax, k)] : 0.0;
}

void NoiseModel::q_raw(int kmax, const Eigen::VectorXd& w, Eigen::Ref<Eigen::VectorXd> out) const {
    const double nrm = kind_ == QKind::norm_based ? w.norm() : 0.0;
    for (std::size_t j = 0; j < d(); ++j) {
        const auto& p = profile(j);
        switch (kind_) {
            case QKind::constant: out[j] = p.f(0.0); break;
            case QKind::spectral_coordinate: out[j] = p.f(coordinate(kmax, w, probes_[j])); break;
            case QKind::norm_based: out[j] = p.f(nrm); break;
        }
    }
}

void NoiseModel::dq_raw(int kmax, const Eigen::VectorXd& w, const Eigen::Ref<const Eigen::VectorXd>& v,
                        Eigen::Ref<Eigen::VectorXd> out) const {
    switch (kind_) {
        case QKind::constant: out.setZero(); return;
        case QKind::spectral_coordinate:
            for (std::size_t j = 0; j < d(); ++j) {
                const ModeIndex i = probes_[j];
                out[j] = lattice::contains(kmax, i)
                             ? profile(j).df(w[lattice::index(kmax, i)]) * v[lattice::index(kmax, i)]
                             : 0.0;
            }
            return;
        case QKind::norm_based: {
            const double nrm = w.norm();
            if (nrm == 0.0) {
                out.setZero();
                return;
            }
            const double proj = w.dot(v) / nrm;
            for (std::size_t j = 0; j < d(); ++j) out[j] = profile(j).df(nrm) * proj;
            return;
        }
    }
}

Eigen::VectorXd NoiseModel::q_eval(const SpectralField& w) const {
    Eigen::VectorXd q(d());
    q_raw(w.kmax(), w.coeffs(), q);
    for (std::size_t j = 0; j < d(); ++j) {
        const double a = std::abs(q[j]);
        if (!(a > 0.0) || a > aleph_ * (1.0 + 1e-12))
            throw BoundViolation("q_" + modes_[j].str() + "(w) = " + std::to_string(q[j]) +
                                 " outside (0, aleph=" + std::to_string(aleph_) + "]");
    }
    return q;
}

Eigen::VectorXd NoiseModel::dq_apply(const SpectralField& w, const SpectralField& v) const {
    if (w.kmax() != v.kmax()) throw LatticeMismatch("dq_apply: lattice mismatch");
    Eigen::VectorXd out(d());
    dq_raw(w.kmax(), w.coeffs(), v.coeffs(), out);
    return out;
}

Eigen::VectorXd NoiseModel::d2q_apply(const SpectralField& w, const SpectralField& u, const SpectralField& v) const {
    if (w.kmax() != v.kmax() || w.kmax() != u.kmax()) throw LatticeMismatch("d2q_apply: lattice mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d());
    if (kind_ == QKind::constant) return out;
    if (kind_ == QKind::spectral_coordinate) {
        for (std::size_t j = 0; j < d(); ++j) {
            const ModeIndex i = probes_[j];
            if (!lattice::contains(w.kmax(), i)) continue;
            out[j] = profile(j).d2f(w.at(i)) * u.at(i) * v.at(i);
        }
        return out;
    }
    const double nrm = w.norm();
    const double uv = u.dot(v);
    if (nrm == 0.0) {
        for (std::size_t j = 0; j < d(); ++j) out[j] = profile(j).d2f(0.0) * uv;
        return out;
    }
    const double wu = w.dot(u), wv = w.dot(v);
    for (std::size_t j = 0; j < d(); ++j) {
        const auto& p = profile(j);
        out[j] = p.d2f(nrm) * wv * wu / (nrm * nrm) + p.df(nrm) * (uv * nrm * nrm - wu * wv) / (nrm * nrm * nrm);
    }
    return out;
}

SpectralField NoiseModel::apply_Q(const SpectralField& w, const Eigen::VectorXd& z) const {
    if (z.size() != Eigen::Index(d())) throw DimensionMismatch("apply_Q: z must have d entries");
    Eigen::VectorXd q(d());
    q_raw(w.kmax(), w.coeffs(), q);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(w.size());
    for (std::size_t j = 0; j < d(); ++j) {
        if (!lattice::contains(w.kmax(), modes_[j])) throw std::out_of_range("apply_Q: forced mode outside lattice");
        out[lattice::index(w.kmax(), modes_[j])] += q[j] * z[j];
    }
    return SpectralField(w.kmax(), std::move(out));
}

Eigen::VectorXd NoiseModel::apply_Qstar(const SpectralField& w, const SpectralField& xi) const {
    if (w.kmax() != xi.kmax()) throw LatticeMismatch("apply_Qstar: lattice mismatch");
    Eigen::VectorXd q(d());
    q_raw(w.kmax(), w.coeffs(), q);
    Eigen::VectorXd out(d());
    for (std::size_t j = 0; j < d(); ++j) out[j] = q[j] * xi.at(modes_[j]);
    return out;
}

// ---------------------------------------------------------------------------
// validate_condition2

ValidationReport validate_condition2(const NoiseModel& model, const std::vector<SpectralField>& samples,
                                     std::uint64_t seed, int directions) {
    ValidationReport rep;
    rep.min_abs_q = std::numeric_limits<double>::infinity();
    const double aleph = model.aleph();
    const double tol = aleph * (1.0 + 1e-12);
    auto fail = [&](std::string msg) {
        rep.pass = false;
        if (rep.failures.size() < 32) rep.failures.push_back(std::move(msg));
    };

    CounterRng rng(seed, "validate_condition2", 0);
    auto random_unit = [&](int kmax) {
        Eigen::VectorXd v(lattice::size(kmax));
        for (auto& x : v) x = rng.normal();
        return SpectralField(kmax, v / v.norm());
    };

    for (const auto& w : samples) {
        const int K = w.kmax();
        Eigen::VectorXd q(model.d());
        model.q_raw(K, w.coeffs(), q);
        for (std::size_t j = 0; j < model.d(); ++j) {
            const double a = std::abs(q[j]);
            rep.max_abs_q = std::max(rep.max_abs_q, a);
            rep.min_abs_q = std::min(rep.min_abs_q, a);
            if (!(a > 0.0) || a > tol) fail("|q_" + model.modes()[j].str() + "| = " + std::to_string(a) + " outside (0, aleph]");
        }

        std::vector<SpectralField> dirs;
        for (int r = 0; r < directions; ++r) dirs.push_back(random_unit(K));
        // Worst-case directions for the built-in families.
        if (model.kind() == QKind::norm_based && w.norm() > 0.0) dirs.push_back(w * (1.0 / w.norm()));
        if (model.kind() == QKind::spectral_coordinate)
            for (std::size_t j = 0; j < model.d(); ++j)
                if (lattice::contains(K, model.probe(j))) dirs.push_back(SpectralField::basis(K, model.probe(j)));

        for (std::size_t a = 0; a < dirs.size(); ++a) {
            const Eigen::VectorXd dq = model.dq_apply(w, dirs[a]);
            const double r1 = dq.cwiseAbs().maxCoeff();
            rep.max_dq_ratio = std::max(rep.max_dq_ratio, r1);
            if (r1 > tol) fail("|Dq(w)v| = " + std::to_string(r1) + " > aleph ||v||");
            const auto& b = dirs[(a + 1) % dirs.size()];
            for (const SpectralField* u : std::initializer_list<const SpectralField*>{&dirs[a], &b}) {
                const double r2 = model.d2q_apply(w, *u, dirs[a]).cwiseAbs().maxCoeff();
                rep.max_d2q_ratio = std::max(rep.max_d2q_ratio, r2);
                if (r2 > tol) fail("|D^2 q(w)(u,v)| = " + std::to_string(r2) + " > aleph ||u|| ||v||");
            }
        }
    }

    if (model.kind() == QKind::norm_based) {
        std::vector<double> xs;
        for (const auto& w : samples) xs.push_back(w.norm());
        for (int i = 0; i <= 200; ++i) xs.push_back(1e-4 * std::pow(10.0, i * 6.0 / 200.0));  // 1e-4 .. 1e2
        double worst_excess = 0.0;
        for (double x : xs) {
            if (x <= 0.0) continue;
            for (std::size_t j = 0; j < model.d(); ++j) {
                const double g = std::abs(model.profile(j).df(x)) / std::min(x, 1.0);
                rep.max_growth_ratio = std::max(rep.max_growth_ratio, g);
                const double excess = std::abs(model.profile(j).df(x)) - aleph * std::min(x, 1.0);
                if (excess > 1e-12 * aleph && excess > worst_excess) {
                    worst_excess = excess;
                    rep.growth_witness = x;
                }
            }
        }
        if (rep.growth_witness)
            fail("|f'(x)| > aleph min(|x|,1) at x = " + std::to_string(*rep.growth_witness));
    }
    if (samples.empty()) rep.min_abs_q = 0.0;
    return rep;
}

}  // namespace nsm
