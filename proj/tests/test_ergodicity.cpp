#include "doctest.h"

#include <cmath>
#include <random>

#include "nsm/errors.hpp"
#include "nsm/ergodicity.hpp"
#include "oracle.hpp"

using namespace nsm;

namespace {
const std::vector<ModeIndex> kZ0{{1, 0}, {-1, 0}, {1, 1}, {-1, -1}};

IntegratorSpec linear_spec(int K, double nu, double dt) {
    IntegratorSpec s;
    s.kmax = K;
    s.nu = nu;
    s.dt = dt;
    s.nonlinear = false;
    return s;
}
}  // namespace

TEST_CASE("resolvent norm of a diagonal Gram") {
    const Eigen::MatrixXd M = Eigen::Vector3d(0.0, 1.0, 5.0).asDiagonal();
    CHECK(resolvent_norm(M, 0.5) == doctest::Approx(1.0));
    const Eigen::MatrixXd P = Eigen::Vector3d(0.2, 1.0, 5.0).asDiagonal();
    CHECK(resolvent_norm(P, 0.5) == doctest::Approx(0.5 / 0.7));
    CHECK_THROWS_AS(resolvent_norm(-P, 0.1), SingularSolve);
    CHECK_THROWS_AS(resolvent_norm(P, 0.0), std::invalid_argument);
}

TEST_CASE("control residual in the frozen linear regime follows the closed form") {
    const double nu = 0.1, c = 0.6, beta = 0.05;
    const auto spec = linear_spec(3, nu, 0.01);
    const auto noise = NoiseModel::constant(ModeSet(kZ0), c, 1.0);
    ControlProbeConfig cfg;
    cfg.betas = {beta};
    cfg.n_cycles = 3;
    cfg.n_paths = 4;
    cfg.node_stride = 10;
    cfg.bootstrap = 50;
    // Forced direction: each active interval multiplies by beta / (m + beta).
    double m = 0.0;
    for (int i = 0; i < 10; ++i) m += 0.1 * c * c * std::exp(-2.0 * nu * (1.0 - 0.1 * i));
    const double ratio = std::exp(-2.0 * nu) * beta / (m + beta);
    const auto r = control_probe(spec, noise, SpectralField(3), SpectralField::basis(3, {1, 0}), cfg);
    REQUIRE(r.betas.size() == 1);
    const auto& b = r.betas[0];
    for (int n = 0; n <= 3; ++n) CHECK(b.cycles[std::size_t(n)].mean_norm == doctest::Approx(std::pow(ratio, n)).epsilon(1e-10));
    CHECK(b.median_ratio == doctest::Approx(ratio).epsilon(1e-10));
    CHECK(b.gamma == doctest::Approx(-std::log(ratio) / 2.0).epsilon(1e-8));
    CHECK(b.gamma_ci.lo > 0.0);
    CHECK(b.ceiling_holds);
    CHECK(b.max_resolvent_norm <= 1.0 + 1e-12);
    CHECK(r.best.has_value());
    // Control cost per cycle: m y^2 / (m + beta)^2 with y = e^{-nu} times the incoming residual.
    const double y = std::exp(-nu);
    CHECK(b.cycles[0].cost_mean == doctest::Approx(m * y * y / ((m + beta) * (m + beta))).epsilon(1e-10));

    // Unforced direction: plain heat decay.
    cfg.identity_resolvent = true;
    const auto free = control_probe(spec, noise, SpectralField(3), SpectralField::basis(3, {2, -1}), cfg);
    CHECK(free.betas[0].cycles[2].mean_norm == doctest::Approx(std::exp(-nu * 5.0 * 4.0)).epsilon(1e-10));
    CHECK_THROWS_AS(control_probe(spec, noise, SpectralField(3), SpectralField::basis(3, {1, 0}, 2.0), cfg),
                    std::invalid_argument);
}

TEST_CASE("low-mode contraction bound on random Grams") {
    std::mt19937_64 gen(1);
    for (int t = 0; t < 5; ++t) {
        MalliavinGram M;
        M.kmax = 2;
        M.matrix = oracle::random_psd(lattice::size(2), gen, 10);
        for (double beta : {1e-3, 1e-1}) {
            const auto rep = low_mode_contraction_check(M, beta, {2, 0.1}, 1e-4, 200, std::uint64_t(t));
            CHECK(rep.holds);
            CHECK(rep.max_ratio <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("Lyapunov functional matches a direct path evaluation") {
    IntegratorSpec s;
    s.kmax = 3;
    s.nu = 0.2;
    s.dt = 0.01;
    const NoiseModel noise(ModeSet(kZ0), QKind::spectral_coordinate, {ScalarProfile::sigmoid(0.3, 0.2)}, 0.6);
    std::mt19937_64 gen(2);
    const auto w0 = oracle::random_field(3, gen);
    const auto S = lyapunov_functionals(s, noise, w0, 0.5, 3, 4);
    Integrator integ(s, noise);
    for (std::size_t p = 0; p < 3; ++p) {
        const auto path = integ.simulate(w0, 0.5, 4, p);
        double diss = 0.0, sup = -1e300;
        for (std::int64_t m = 0; m <= path.steps; ++m) {
            const SpectralField w(3, path.snapshots[std::size_t(m)]);
            sup = std::max(sup, w.norm() * w.norm() + s.nu * diss - 4 * 0.36 * double(m) * s.dt);
            diss += std::pow(sobolev_norm(w, 1.0), 2) * s.dt;
        }
        CHECK(S[p] == doctest::Approx(sup).epsilon(1e-12));
        CHECK(S[p] >= w0.norm() * w0.norm() - 1e-12);
    }
    const auto rep = lyapunov_report({1.0, 2.0, 3.0}, 1.5, 0.1, 2.0);
    const double e1 = std::exp(0.1), e2 = std::exp(0.2), e3 = std::exp(0.3);
    CHECK(rep.mean == doctest::Approx((e1 + e2 + e3) / 3));
    CHECK(rep.bound == doctest::Approx(std::exp(0.15)));
    CHECK(rep.pass == (rep.mean <= rep.bound * (1 + 3 * rep.se)));
    const auto sweep = lyapunov_sweep(s, noise, w0, 0.5, 50, 4, 0.1, 0.5, 1e-3);
    CHECK_FALSE(sweep.tried.empty());
    if (sweep.passing) CHECK(sweep.tried[*sweep.passing].pass);
    for (std::size_t i = 1; i < sweep.tried.size(); ++i) CHECK(sweep.tried[i].eta == doctest::Approx(sweep.tried[i - 1].eta * 0.5));
}

TEST_CASE("observables") {
    const Eigen::VectorXd w = SpectralField::basis(2, {1, 0}, 0.5).coeffs();
    CHECK(Observable::parse("coord:1,0")(2, w) == doctest::Approx(std::tanh(0.5)));
    CHECK(Observable::parse("coord:5,0")(2, w) == 0.0);
    CHECK(Observable::parse("expnorm:2")(2, w) == doctest::Approx(std::exp(-0.5)));
    CHECK(Observable::parse("ball:0.5")(2, w) == doctest::Approx(0.5));
    CHECK(Observable::parse("ball:1")(2, w) > 0.99);
    CHECK_THROWS_AS(Observable::parse("bogus:1"), std::invalid_argument);
    CHECK_THROWS_AS(Observable::parse("expnorm:-1"), std::invalid_argument);
    CHECK_THROWS_AS(Observable::parse("expnorm"), std::invalid_argument);
}

TEST_CASE("mixing estimate: identical ensembles give no signal, distinct ones decay") {
    const auto spec = linear_spec(2, 0.5, 0.01);
    const auto noise = NoiseModel::constant(ModeSet(kZ0), 0.3, 1.0);
    std::vector<Observable> obs{Observable::parse("coord:1,0"), Observable::parse("expnorm:1")};
    MixingOptions opt;
    opt.T = 4.0;
    opt.sample_every = 0.5;
    opt.n_paths = 200;
    opt.bootstrap = 200;
    opt.independent_seeds = false;
    const auto null = mixing_rate(spec, noise, SpectralField(2), SpectralField(2), obs, opt);
    for (const auto& s : null.series) {
        CHECK_FALSE(s.signal);
        for (double d : s.diff) CHECK(d == 0.0);
    }
    opt.independent_seeds = true;
    const auto w0b = SpectralField::basis(2, {1, 0}, 2.0);
    const auto est = mixing_rate(spec, noise, SpectralField(2), w0b, obs, opt);
    CHECK(est.times.size() == 9);
    CHECK(est.series[0].diff[0] == doctest::Approx(-std::tanh(2.0)));
    CHECK(est.series[0].signal);
    // The first coordinate mean relaxes like exp(-nu t) in the linear regime.
    CHECK(est.series[0].gamma_ci.lo > 0.0);
    CHECK(est.series[0].gamma == doctest::Approx(0.5).epsilon(0.35));
}

TEST_CASE("irreducibility: strongly damped small noise enters the ball") {
    const auto spec = linear_spec(2, 1.0, 0.01);
    const auto noise = NoiseModel::constant(ModeSet(kZ0), 0.01, 1.0);
    IrreducibilityOptions opt;
    opt.radius = 2.0;
    opt.gamma_ball = 0.5;
    opt.times = {0.5, 1.0, 3.0};
    opt.n_initials = 4;
    opt.n_paths = 20;
    const auto est = irreducibility_probe(spec, noise, opt);
    // ||w_t|| <= 2 exp(-t) deterministically up to O(0.01) noise.
    CHECK(est.min_probability[0] == 0.0);
    CHECK(est.min_probability[2] == 1.0);
    REQUIRE(est.first_positive.has_value());
    CHECK(*est.first_positive >= 1);
    CHECK(est.hits.size() == 3);
    opt.times = {3.0, 1.0};
    CHECK_THROWS_AS(irreducibility_probe(spec, noise, opt), std::invalid_argument);
}
