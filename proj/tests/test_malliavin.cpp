#include "doctest.h"

#include <cmath>
#include <random>

#include "nsm/errors.hpp"
#include "nsm/malliavin.hpp"
#include "oracle.hpp"

using namespace nsm;

namespace {
const std::vector<ModeIndex> kZ0{{1, 0}, {-1, 0}, {1, 1}, {-1, -1}};

NoiseModel sigmoid_noise() {
    return NoiseModel(ModeSet(kZ0), QKind::spectral_coordinate, {ScalarProfile::sigmoid(0.5, 0.3)}, 1.0);
}

double min_eig(const Eigen::MatrixXd& M) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues()[0];
}
}  // namespace

TEST_CASE("frozen dynamics give the explicit Gram matrix") {
    IntegratorSpec s;
    s.kmax = 3;
    s.nu = 0.0;
    s.dt = 0.01;
    s.nonlinear = false;
    const double c = 0.8;
    Integrator integ(s, NoiseModel::constant(ModeSet(kZ0), c, 1.0));
    const auto path = integ.simulate(SpectralField(3), 1.0, 4);
    const auto M = assemble_gram(integ, path, 20, 90, 7);
    Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(M.dim(), M.dim());
    for (auto k : kZ0) {
        const int i = lattice::index(3, k);
        ref(i, i) += c * c * 0.7;
    }
    CHECK((M.matrix - ref).cwiseAbs().maxCoeff() <= 1e-12);
    double wsum = 0;
    for (double w : M.node_weights) wsum += w;
    CHECK(wsum == doctest::Approx(0.7));
}

TEST_CASE("forward and fundamental-matrix Gram assembly agree") {
    IntegratorSpec s;
    s.kmax = 2;
    s.nu = 0.1;
    s.dt = 0.01;
    Integrator integ(s, sigmoid_noise());
    std::mt19937_64 gen(1);
    for (int p = 0; p < 3; ++p) {
        const auto path = integ.simulate(oracle::random_field(2, gen), 1.0, 5, std::uint64_t(p), 10);
        GramNodeData raw;
        const auto fwd = assemble_gram(integ, path, 0, path.steps, 5, 0, &raw);
        const auto fun = assemble_gram_fundamental(integ, path, 0, path.steps, 5);
        const double scale = fwd.matrix.norm();
        CHECK((fwd.matrix - fun.matrix).norm() <= 1e-10 * scale);
        CHECK((fwd.matrix - fwd.matrix.transpose()).norm() == 0.0);
        CHECK(min_eig(fwd.matrix) >= -1e-10 * scale);
        const Eigen::MatrixXd rebuilt = raw.vectors * raw.weights.asDiagonal() * raw.vectors.transpose();
        CHECK((rebuilt - fwd.matrix).norm() <= 1e-12 * scale);
        // Rank is bounded by the number of launched directions.
        CHECK(raw.vectors.cols() == Eigen::Index(fwd.nodes.size() * 4));
    }
}

TEST_CASE("Gram restriction to a smaller lattice is the principal block") {
    IntegratorSpec s;
    s.kmax = 4;
    s.nu = 0.1;
    s.dt = 0.01;
    Integrator integ(s, sigmoid_noise());
    std::mt19937_64 gen(2);
    const auto path = integ.simulate(oracle::random_field(4, gen), 0.5, 6);
    const auto full = assemble_gram(integ, path, 0, path.steps, 5);
    const auto small = assemble_gram(integ, path, 0, path.steps, 5, 2);
    CHECK(small.dim() == lattice::size(2));
    for (int a = 0; a < small.dim(); ++a)
        for (int b = 0; b < small.dim(); ++b) {
            const int ia = lattice::index(4, lattice::mode(2, a)), ib = lattice::index(4, lattice::mode(2, b));
            CHECK(small.matrix(a, b) == doctest::Approx(full.matrix(ia, ib)).epsilon(1e-12).scale(full.matrix.norm()));
        }
    const auto xi = oracle::random_field(2, gen);
    CHECK(quadratic_form(small, xi) == doctest::Approx(xi.coeffs().dot(small.matrix * xi.coeffs())));
}

TEST_CASE("low-mode mask uses the Euclidean ball") {
    const auto m = low_mode_mask(4, 3);
    const auto modes = lattice::modes(4);
    for (std::size_t i = 0; i < modes.size(); ++i) CHECK(m[Eigen::Index(i)] == (modes[i].norm2() <= 9 ? 1.0 : 0.0));
}

TEST_CASE("constrained minimum agrees with a sphere-grid search") {
    std::mt19937_64 gen(3);
    for (int t = 0; t < 8; ++t) {
        const int D = 2 + t % 4;
        const auto M = oracle::random_psd(D, gen);
        Eigen::VectorXd mask = Eigen::VectorXd::Zero(D);
        mask[0] = 1.0;
        if (D > 3) mask[1] = 1.0;
        for (double alpha : {0.1, 0.7}) {
            ConstrainedMinOptions opt;
            opt.seed = std::uint64_t(t);
            const auto r = constrained_min(M, mask, alpha, opt);
            const double brute = oracle::sphere_grid_min(M, mask, alpha);
            CHECK(r.value == doctest::Approx(brute).epsilon(1e-6).scale(M.norm()));
            CHECK(r.value <= brute + 1e-9 * M.norm());
            CHECK(r.dual_bound <= r.value + 1e-9 * M.norm());
            CHECK(r.xi.norm() == doctest::Approx(1.0));
            CHECK(r.low_mass >= alpha - 1e-9);
            CHECK(r.agree);
        }
    }
}

TEST_CASE("constrained minimum special cases") {
    Eigen::MatrixXd M = Eigen::Vector3d(1.0, 2.0, 0.01).asDiagonal();
    const Eigen::VectorXd mask = Eigen::Vector3d(1.0, 0.0, 0.0);
    // Global minimiser (axis 3) has no low mass; the optimum mixes axes 1 and 3.
    const auto r = constrained_min(M, mask, 0.5);
    CHECK(r.constraint_active);
    CHECK(r.value == doctest::Approx(0.25 * 1.0 + 0.75 * 0.01));
    CHECK(r.low_mass == doctest::Approx(0.5));
    // alpha = 1 restricts to the masked block.
    CHECK(constrained_min(M, mask, 1.0).value == doctest::Approx(1.0));
    // Feasible global minimiser.
    const auto f = constrained_min(M, Eigen::Vector3d(0.0, 0.0, 1.0), 0.5);
    CHECK_FALSE(f.constraint_active);
    CHECK(f.value == doctest::Approx(0.01));
    CHECK_THROWS_AS(constrained_min(M, Eigen::Vector3d::Zero(), 0.5), std::invalid_argument);
    CHECK_THROWS(constrained_min(M, mask, 1.5));
}

TEST_CASE("initial conditions sit on the requested sphere") {
    const auto w = sample_initials(4, 1.5, 6, 9);
    REQUIRE(w.size() == 6);
    CHECK(w[0].norm() == 0.0);
    CHECK(w[1].at({1, 0}) == 1.5);
    CHECK(w[2].at({1, 1}) == 1.5);
    for (std::size_t i = 3; i < 6; ++i) CHECK(w[i].norm() == doctest::Approx(1.5));
    CHECK(sample_initials(4, 1.5, 6, 9)[4] == w[4]);
}

TEST_CASE("non-degeneracy estimate bookkeeping") {
    IntegratorSpec s;
    s.kmax = 3;
    s.nu = 0.1;
    s.dt = 0.01;
    NondegeneracyConfig cfg;
    cfg.n_paths = 3;
    cfg.n_initials = 2;
    cfg.T = 0.2;
    cfg.gram_kmax = 2;
    cfg.region = {2, 0.1};
    cfg.minimizer.restarts = 2;
    cfg.minimizer.pg_iterations = 50;
    const auto est = estimate_r(s, sigmoid_noise(), cfg);
    CHECK(est.n_samples == 6);
    CHECK(est.samples.size() == 6);
    for (std::size_t e = 0; e < est.epsilon_grid.size(); ++e) {
        std::size_t hits = 0;
        for (const auto& smp : est.samples) hits += smp.X < est.epsilon_grid[e];
        CHECK(est.pooled_hits[e] == hits);
        CHECK(est.pooled_ci[e].contains(est.pooled_probability[e]));
        CHECK(est.sup_probability[e] >= est.pooled_probability[e] - 1e-15);
    }
    cfg.workers = 3;
    const auto par = estimate_r(s, sigmoid_noise(), cfg);
    for (std::size_t i = 0; i < 6; ++i) CHECK(par.samples[i].X == est.samples[i].X);
}
