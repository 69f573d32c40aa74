#include "nsm/spectral.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

#include "nsm/errors.hpp"

namespace nsm {

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Neumaier summation.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

void require_same_lattice(int a, int b, const char* what) {
    if (a != b)
        throw LatticeMismatch(std::string(what) + ": lattice kmax " + std::to_string(a) + " vs " +
                              std::to_string(b));
}

/// Visits every sin-type mode p with the storage slots of (ê_p, ê_{-p}).
template <class F>
void for_each_pair(int kmax, F&& f) {
    for (int k1 = 0; k1 <= kmax; ++k1) {
        for (int k2 = -kmax; k2 <= kmax; ++k2) {
            if (k1 == 0 && k2 <= 0) continue;
            const ModeIndex p(k1, k2);
            f(p, lattice::index(kmax, p), lattice::index(kmax, -p));
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// SpectralField

SpectralField::SpectralField(int kmax) : kmax_(kmax), coeffs_(Eigen::VectorXd::Zero(lattice::size(kmax))) {
    if (kmax < 0) throw std::invalid_argument("SpectralField: kmax must be non-negative");
}

SpectralField::SpectralField(int kmax, Eigen::VectorXd coeffs) : kmax_(kmax), coeffs_(std::move(coeffs)) {
    if (kmax < 0) throw std::invalid_argument("SpectralField: kmax must be non-negative");
    if (coeffs_.size() != lattice::size(kmax))
        throw DimensionMismatch("SpectralField: expected " + std::to_string(lattice::size(kmax)) +
                                " coefficients, got " + std::to_string(coeffs_.size()));
}

SpectralField SpectralField::basis(int kmax, ModeIndex k, double amp) {
    if (!lattice::contains(kmax, k))
        throw std::out_of_range("SpectralField::basis: mode " + k.str() + " outside lattice");
    SpectralField f(kmax);
    f.coeffs_[lattice::index(kmax, k)] = amp;
    return f;
}

double SpectralField::at(ModeIndex k) const {
    return lattice::contains(kmax_, k) ? coeffs_[lattice::index(kmax_, k)] : 0.0;
}

double SpectralField::dot(const SpectralField& other) const {
    require_same_lattice(kmax_, other.kmax_, "dot");
    return coeffs_.dot(other.coeffs_);
}

SpectralField SpectralField::resized(int kmax) const {
    if (kmax == kmax_) return *this;
    SpectralField out(kmax);
    const int lo = std::min(kmax, kmax_);
    for (int k1 = -lo; k1 <= lo; ++k1)
        for (int k2 = -lo; k2 <= lo; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            const ModeIndex k(k1, k2);
            out.coeffs_[lattice::index(kmax, k)] = coeffs_[lattice::index(kmax_, k)];
        }
    return out;
}

SpectralField SpectralField::operator+(const SpectralField& o) const {
    require_same_lattice(kmax_, o.kmax_, "operator+");
    return SpectralField(kmax_, coeffs_ + o.coeffs_);
}

SpectralField SpectralField::operator-(const SpectralField& o) const {
    require_same_lattice(kmax_, o.kmax_, "operator-");
    return SpectralField(kmax_, coeffs_ - o.coeffs_);
}

SpectralField SpectralField::operator*(double s) const { return SpectralField(kmax_, coeffs_ * s); }

// ---------------------------------------------------------------------------
// Exact real-basis operators

VelocityField biot_savart(const SpectralField& w) {
    const int K = w.kmax();
    Eigen::VectorXd u1 = Eigen::VectorXd::Zero(w.size());
    Eigen::VectorXd u2 = Eigen::VectorXd::Zero(w.size());
    const auto& c = w.coeffs();
    for_each_pair(K, [&](ModeIndex p, int is, int ic) {
        const double a = c[is], b = c[ic];
        const double inv = 1.0 / double(p.norm2());
        // u1 = p2 (a cos - b sin)/|p|^2, u2 = -p1 (a cos - b sin)/|p|^2
        u1[is] = -p.k2 * b * inv;
        u1[ic] = p.k2 * a * inv;
        u2[is] = p.k1 * b * inv;
        u2[ic] = -p.k1 * a * inv;
    });
    return {SpectralField(K, std::move(u1)), SpectralField(K, std::move(u2))};
}

double sobolev_norm(const SpectralField& w, double alpha) {
    CompensatedSum s;
    const auto& c = w.coeffs();
    for (int i = 0; i < c.size(); ++i) {
        if (c[i] == 0.0) continue;
        const double k2 = double(lattice::mode(w.kmax(), i).norm2());
        s.add(std::pow(k2, alpha) * c[i] * c[i]);
    }
    return std::sqrt(s.value());
}

double sobolev_norm(const VelocityField& u, double alpha) {
    const double a = sobolev_norm(u.u1, alpha), b = sobolev_norm(u.u2, alpha);
    return std::sqrt(a * a + b * b);
}

SpectralField project(const SpectralField& w, int N, Part part) {
    if (N < 1) throw std::invalid_argument("project: N must be >= 1");
    Eigen::VectorXd c = w.coeffs();
    const std::int64_t N2 = std::int64_t(N) * N;
    for (int i = 0; i < c.size(); ++i) {
        const bool low = lattice::mode(w.kmax(), i).norm2() <= N2;
        if (low != (part == Part::low)) c[i] = 0.0;
    }
    return SpectralField(w.kmax(), std::move(c));
}

SpectralField partial(const SpectralField& w, int axis) {
    if (axis != 0 && axis != 1) throw std::invalid_argument("partial: axis must be 0 or 1");
    Eigen::VectorXd d = Eigen::VectorXd::Zero(w.size());
    const auto& c = w.coeffs();
    for_each_pair(w.kmax(), [&](ModeIndex p, int is, int ic) {
        const double kk = axis == 0 ? p.k1 : p.k2;
        // d(a sin + b cos) = k (a cos - b sin)
        d[is] = -kk * c[ic];
        d[ic] = kk * c[is];
    });
    return SpectralField(w.kmax(), std::move(d));
}

double divergence_norm(const VelocityField& u) {
    return (partial(u.u1, 0) + partial(u.u2, 1)).norm();
}

// ---------------------------------------------------------------------------
// SpectralTransform

struct SpectralTransform::Impl {
    using cplx = std::complex<double>;

    struct Slot {
        int is, ic;     // storage of (ê_p, ê_{-p})
        int slot;       // half-complex position
        bool conj;      // slot holds the -p coefficient
        int mirror;     // second slot on the k2 = 0 line, or -1
    };

    int n, nh;
    std::vector<Slot> pairs;
    std::vector<double> kx, ky, inv_k2;  // per half-complex slot
    std::vector<int> occupied;

    fftw_complex* cin = nullptr;   // c2r input (destroyed)
    fftw_complex* cspec = nullptr; // spectrum of the current field
    fftw_complex* cout = nullptr;  // r2c output
    double* rbuf = nullptr;
    fftw_plan c2r{};
    fftw_plan r2c{};

    AdvectionGrids scratch;
    std::vector<double> prod;

    Impl(int kmax, int grid) : n(grid), nh(grid / 2 + 1) {
        const std::size_t csize = std::size_t(n) * nh;
        kx.assign(csize, 0.0);
        ky.assign(csize, 0.0);
        inv_k2.assign(csize, 0.0);
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < nh; ++i2) {
                const int k1 = i1 <= n / 2 ? i1 : i1 - n;
                const int k2 = i2;
                const std::size_t s = std::size_t(i1) * nh + i2;
                kx[s] = k1;
                ky[s] = k2;
                if (k1 != 0 || k2 != 0) inv_k2[s] = 1.0 / double(k1 * k1 + k2 * k2);
            }
        auto wrap = [&](int k) { return ((k % n) + n) % n; };
        for_each_pair(kmax, [&](ModeIndex p, int is, int ic) {
            Slot sl{is, ic, 0, false, -1};
            if (p.k2 > 0) {
                sl.slot = wrap(p.k1) * nh + p.k2;
            } else if (p.k2 == 0) {
                sl.slot = wrap(p.k1) * nh;
                sl.mirror = wrap(-p.k1) * nh;
            } else {
                sl.slot = wrap(-p.k1) * nh + (-p.k2);
                sl.conj = true;
            }
            pairs.push_back(sl);
            occupied.push_back(sl.slot);
            if (sl.mirror >= 0) occupied.push_back(sl.mirror);
        });

        cin = fftw_alloc_complex(csize);
        cspec = fftw_alloc_complex(csize);
        cout = fftw_alloc_complex(csize);
        rbuf = fftw_alloc_real(std::size_t(n) * n);
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            c2r = fftw_plan_dft_c2r_2d(n, n, cin, rbuf, FFTW_ESTIMATE);
            r2c = fftw_plan_dft_r2c_2d(n, n, rbuf, cout, FFTW_ESTIMATE);
        }
        for (auto* g : {&scratch.u1, &scratch.u2, &scratch.gx, &scratch.gy}) g->assign(std::size_t(n) * n, 0.0);
        prod.assign(std::size_t(n) * n, 0.0);
    }

    ~Impl() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(c2r);
        fftw_destroy_plan(r2c);
        fftw_free(cin);
        fftw_free(cspec);
        fftw_free(cout);
        fftw_free(rbuf);
    }

    cplx* spec() { return reinterpret_cast<cplx*>(cspec); }

    /// Real coefficients -> half-complex spectrum of sum w_k e^{ik.x}.
    void load(const double* c) {
        cplx* W = spec();
        for (int s : occupied) W[s] = 0.0;
        const double h = 0.5 / kBasisScale;
        for (const auto& p : pairs) {
            const cplx v(c[p.ic] * h, -c[p.is] * h);
            W[p.slot] = p.conj ? std::conj(v) : v;
            if (p.mirror >= 0) W[p.mirror] = std::conj(v);
        }
    }

    /// Spectrum in cout (unnormalised r2c output) -> real coefficients.
    void store(double* c) const {
        const cplx* F = reinterpret_cast<const cplx*>(cout);
        const double scale = 2.0 * kBasisScale / (double(n) * n);
        for (const auto& p : pairs) {
            const cplx f = p.conj ? std::conj(F[p.slot]) : F[p.slot];
            c[p.is] = -scale * f.imag();
            c[p.ic] = scale * f.real();
        }
    }

    enum class Mul { one, dx, dy, u1, u2 };

    /// Inverse transform of (multiplier * current spectrum) into dst.
    void synth(Mul m, std::vector<double>& dst) {
        const std::size_t csize = std::size_t(n) * nh;
        cplx* in = reinterpret_cast<cplx*>(cin);
        const cplx* W = spec();
        for (std::size_t s = 0; s < csize; ++s) in[s] = 0.0;
        const cplx I(0.0, 1.0);
        for (int s : occupied) {
            switch (m) {
                case Mul::one: in[s] = W[s]; break;
                case Mul::dx: in[s] = I * kx[s] * W[s]; break;
                case Mul::dy: in[s] = I * ky[s] * W[s]; break;
                case Mul::u1: in[s] = I * ky[s] * inv_k2[s] * W[s]; break;
                case Mul::u2: in[s] = -I * kx[s] * inv_k2[s] * W[s]; break;
            }
        }
        fftw_execute_dft_c2r(c2r, cin, rbuf);
        std::copy(rbuf, rbuf + std::size_t(n) * n, dst.begin());
    }

    void analyse(const std::vector<double>& values, double* c) {
        std::copy(values.begin(), values.end(), rbuf);
        fftw_execute_dft_r2c(r2c, rbuf, cout);
        store(c);
    }

    void prepare(const double* w, AdvectionGrids& g) {
        const std::size_t nn = std::size_t(n) * n;
        for (auto* v : {&g.u1, &g.u2, &g.gx, &g.gy})
            if (v->size() != nn) v->assign(nn, 0.0);
        load(w);
        synth(Mul::u1, g.u1);
        synth(Mul::u2, g.u2);
        synth(Mul::dx, g.gx);
        synth(Mul::dy, g.gy);
    }
};

SpectralTransform::SpectralTransform(int kmax, int grid)
    : kmax_(kmax), n_(grid == 0 ? lattice::grid_for(kmax) : grid) {
    if (kmax < 1) throw std::invalid_argument("SpectralTransform: kmax must be >= 1");
    if (lattice::dealiased_kmax(n_) < kmax)
        throw std::invalid_argument("SpectralTransform: grid " + std::to_string(n_) +
                                    " cannot resolve kmax " + std::to_string(kmax) + " without aliasing");
    impl_ = std::make_unique<Impl>(kmax, n_);
}

SpectralTransform::~SpectralTransform() = default;

std::vector<double> SpectralTransform::to_physical(const Eigen::VectorXd& coeffs) {
    if (coeffs.size() != dim()) throw DimensionMismatch("to_physical: wrong coefficient count");
    std::vector<double> out(std::size_t(n_) * n_);
    impl_->load(coeffs.data());
    impl_->synth(Impl::Mul::one, out);
    return out;
}

Eigen::VectorXd SpectralTransform::from_physical(const std::vector<double>& values) {
    if (values.size() != std::size_t(n_) * n_) throw DimensionMismatch("from_physical: wrong grid size");
    Eigen::VectorXd c(dim());
    impl_->analyse(values, c.data());
    return c;
}

void SpectralTransform::prepare(const Eigen::VectorXd& w, AdvectionGrids& out) {
    if (w.size() != dim()) throw DimensionMismatch("prepare: wrong coefficient count");
    impl_->prepare(w.data(), out);
}

void SpectralTransform::nonlinear(const AdvectionGrids& w, Eigen::Ref<Eigen::VectorXd> out) {
    auto& P = impl_->prod;
    for (std::size_t i = 0; i < P.size(); ++i) P[i] = -(w.u1[i] * w.gx[i] + w.u2[i] * w.gy[i]);
    impl_->analyse(P, out.data());
}

void SpectralTransform::b_tilde(const AdvectionGrids& w, const Eigen::Ref<const Eigen::VectorXd>& v,
                                Eigen::Ref<Eigen::VectorXd> out) {
    if (v.size() != dim() || out.size() != dim()) throw DimensionMismatch("b_tilde: wrong coefficient count");
    auto& g = impl_->scratch;
    impl_->prepare(v.data(), g);
    auto& P = impl_->prod;
    for (std::size_t i = 0; i < P.size(); ++i)
        P[i] = -(w.u1[i] * g.gx[i] + w.u2[i] * g.gy[i] + g.u1[i] * w.gx[i] + g.u2[i] * w.gy[i]);
    impl_->analyse(P, out.data());
}

void SpectralTransform::bilinear(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                                 const Eigen::VectorXd& w, Eigen::Ref<Eigen::VectorXd> out) {
    if (u1.size() != dim() || u2.size() != dim() || w.size() != dim())
        throw DimensionMismatch("bilinear: wrong coefficient count");
    auto& g = impl_->scratch;
    impl_->prepare(w.data(), g);  // gx, gy of w
    std::vector<double> a(g.gx.size()), b(g.gx.size());
    impl_->load(u1.data());
    impl_->synth(Impl::Mul::one, a);
    impl_->load(u2.data());
    impl_->synth(Impl::Mul::one, b);
    auto& P = impl_->prod;
    for (std::size_t i = 0; i < P.size(); ++i) P[i] = -(a[i] * g.gx[i] + b[i] * g.gy[i]);
    impl_->analyse(P, out.data());
}

SpectralTransform& thread_transform(int kmax) {
    thread_local std::map<int, std::unique_ptr<SpectralTransform>> cache;
    auto& slot = cache[kmax];
    if (!slot) slot = std::make_unique<SpectralTransform>(kmax);
    return *slot;
}

SpectralField bilinear_B(const VelocityField& u, const SpectralField& w) {
    require_same_lattice(u.u1.kmax(), w.kmax(), "bilinear_B");
    require_same_lattice(u.u2.kmax(), w.kmax(), "bilinear_B");
    Eigen::VectorXd out(w.size());
    thread_transform(w.kmax()).bilinear(u.u1.coeffs(), u.u2.coeffs(), w.coeffs(), out);
    return SpectralField(w.kmax(), std::move(out));
}

SpectralField b_tilde(const SpectralField& w, const SpectralField& v) {
    require_same_lattice(w.kmax(), v.kmax(), "b_tilde");
    auto& tr = thread_transform(w.kmax());
    AdvectionGrids g;
    tr.prepare(w.coeffs(), g);
    Eigen::VectorXd out(w.size());
    tr.b_tilde(g, v.coeffs(), out);
    return SpectralField(w.kmax(), std::move(out));
}

}  // namespace nsm
