#include <cmath>

#include "doctest.h"
#include "mlpmcmc/error.hpp"
#include "mlpmcmc/multilevel.hpp"
#include "oracle.hpp"

using namespace mlpmcmc;

namespace {

const ObservationSeries kObs{0.0, {1.1, 0.7, 1.4}};

EstimatorOptions options(std::size_t particles = 20) {
    EstimatorOptions opts;
    opts.chain.particles = particles;
    opts.chain.fixed = default_params(ModelKind::StateSpace);
    opts.chain.proposal.step_sizes.assign(4, 0.3);
    opts.burn_in = 0.0;
    return opts;
}

}  // namespace

TEST_CASE("H weights from per-time densities") {
    const std::vector<double> fine{std::log(2.0), std::log(1.0)};
    const std::vector<double> coarse{std::log(1.0), std::log(4.0)};
    const auto h = h_weights_from_densities(fine, coarse);
    CHECK(oracle::rel_err(std::exp(h.log_h1), 0.25) < 1e-12);
    CHECK(oracle::rel_err(std::exp(h.log_h2), 0.5) < 1e-12);

    const auto same = h_weights_from_densities(fine, fine);
    CHECK(same.log_h1 == 0.0);
    CHECK(same.log_h2 == 0.0);

    const std::vector<double> bad{std::log(2.0), -std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(h_weights_from_densities(fine, bad), Error);
}

TEST_CASE("H weights of a path pair: one factor per time is one") {
    const ModelParams theta = default_params(ModelKind::StateSpace);
    Stream rng(6);
    const auto fine = sample_increments(Level{3}, 3, rng);
    const auto coarse = coarsen(fine);
    const auto [h1, h2] = h_weights(theta, fine, coarse, kObs);
    CHECK(h1 > 0.0);
    CHECK(h1 <= 1.0);
    CHECK(h2 > 0.0);
    CHECK(h2 <= 1.0);
    const auto df = oracle::log_densities(true, theta, 3, fine.values, kObs);
    const auto dc = oracle::log_densities(true, theta, 2, coarse.values, kObs);
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t t = 0; t < df.size(); ++t) {
        const double m = std::max(df[t], dc[t]);
        CHECK((df[t] == m || dc[t] == m));
        l1 += df[t] - m;
        l2 += dc[t] - m;
    }
    CHECK(oracle::rel_err(h1, std::exp(l1)) < 1e-10);
    CHECK(oracle::rel_err(h2, std::exp(l2)) < 1e-10);
    CHECK_THROWS_AS(h_weights(theta, fine, fine, kObs), Error);
}

TEST_CASE("self-normalized difference: hand values") {
    const std::vector<double> phi_f{1.0, 3.0};
    const std::vector<double> h1{std::log(1.0), std::log(0.25)};
    const std::vector<double> phi_c{2.0, 2.0};
    const std::vector<double> h2{std::log(0.5), std::log(1.0)};
    CHECK(oracle::rel_err(self_normalized_difference(phi_f, h1, phi_c, h2), -0.6) < 1e-12);

    const std::vector<double> one_f{4.5};
    const std::vector<double> one_c{1.25};
    const std::vector<double> w1{-3.0};
    const std::vector<double> w2{-0.2};
    CHECK(self_normalized_difference(one_f, w1, one_c, w2) == 4.5 - 1.25);

    const std::vector<double> c(5, 2.7);
    const std::vector<double> wa{-1.0, -0.3, -2.2, 0.0, -5.0};
    const std::vector<double> wb{-0.1, -4.0, -0.7, -1.3, 0.0};
    CHECK(self_normalized_difference(c, wa, c, wb) == 0.0);
}

TEST_CASE("burn-in count") {
    CHECK(burn_in_count(101, 0.1) == 10);
    CHECK(burn_in_count(5, 0.0) == 0);
    CHECK(burn_in_count(5, 1.0) == 5);
    CHECK_THROWS_AS(burn_in_count(5, 1.5), Error);
}

TEST_CASE("choose_levels") {
    const auto alloc = choose_levels(0.1, 0.4);
    CHECK(alloc.max_level == 4);
    CHECK(alloc.base_level == 0);
    CHECK(alloc.M.front() == 132);
    CHECK(alloc.levels() == 5);
    for (std::size_t i = 1; i < alloc.M.size(); ++i) CHECK(alloc.M[i] <= alloc.M[i - 1]);

    AllocationConstants loose;
    loose.M_min = 1;
    const auto raw = choose_levels(0.1, 0.4, loose);
    for (std::size_t i = 1; i < raw.M.size(); ++i) {
        if (raw.M[i] > 1) CHECK(raw.M[i] < raw.M[i - 1]);
    }
    CHECK(raw.M == std::vector<std::size_t>{132, 36, 10, 3, 1});

    CHECK(choose_levels(0.9, 0.4).max_level == 1);
    CHECK_THROWS_AS(choose_levels(0.0, 0.4), Error);
    CHECK_THROWS_AS(choose_levels(0.1, 0.5), Error);

    const auto ranged = allocate_levels(0.1, 0.4, 2, 4, loose);
    CHECK(ranged.M == std::vector<std::size_t>{10, 3, 1});
    CHECK(ranged.iterations_at(3) == 3);
}

TEST_CASE("level cost") {
    CHECK(level_cost(0, 10) == 10.0);
    CHECK(level_cost(3, 2) == 128.0);
}

TEST_CASE("increment estimator on a hand-built chain") {
    const ModelParams theta = default_params(ModelKind::StateSpace);
    Stream rng(14);
    Chain chain;
    chain.level = Level{2};
    chain.coupled = true;
    for (int k = 0; k < 2; ++k) {
        ChainRecord rec;
        rec.theta = theta;
        rec.theta.vol.V0 = 1.0 + 0.5 * k;
        rec.fine = std::make_shared<const IncrementPath>(sample_increments(Level{2}, 3, rng));
        rec.coarse = std::make_shared<const IncrementPath>(coarsen(*rec.fine));
        chain.records.push_back(rec);
    }
    const std::vector<Functional> phis{parameter_functional(ParamId::V0), skeleton_functional(2),
                                       constant_functional(3.0)};
    const auto got = increment_estimator(chain, phis, kObs, 0.0);

    std::vector<double> v_f, v_c, l1, l2;
    for (const auto& rec : chain.records) {
        const auto& th = rec.theta;
        const auto df = oracle::log_densities(true, th, 2, rec.fine->values, kObs);
        const auto dc = oracle::log_densities(true, th, 1, rec.coarse->values, kObs);
        double a = 0.0, b = 0.0;
        for (std::size_t t = 0; t < df.size(); ++t) {
            const double m = std::max(df[t], dc[t]);
            a += df[t] - m;
            b += dc[t] - m;
        }
        l1.push_back(std::exp(a));
        l2.push_back(std::exp(b));
        const auto pf = oracle::euler_naive(th.vol.V0, th.vol.kappa, th.vol.lambda, th.vol.nu, th.kernel.C, th.kernel.H,
                                            0.25, rec.fine->values);
        const auto pc = oracle::euler_naive(th.vol.V0, th.vol.kappa, th.vol.lambda, th.vol.nu, th.kernel.C, th.kernel.H,
                                            0.5, rec.coarse->values);
        v_f.push_back(pf[8]);
        v_c.push_back(pc[4]);
    }
    const double V0a = 1.0, V0b = 1.5;
    const double want_v0 = (V0a * l1[0] + V0b * l1[1]) / (l1[0] + l1[1]) - (V0a * l2[0] + V0b * l2[1]) / (l2[0] + l2[1]);
    const double want_v2 = (v_f[0] * l1[0] + v_f[1] * l1[1]) / (l1[0] + l1[1]) -
                           (v_c[0] * l2[0] + v_c[1] * l2[1]) / (l2[0] + l2[1]);
    CHECK(oracle::rel_err(got[0], want_v0) < 1e-10);
    CHECK(oracle::rel_err(got[1], want_v2) < 1e-10);
    CHECK(got[2] == 0.0);

    Chain single = chain;
    single.records.resize(1);
    const auto one = increment_estimator(single, phis, kObs, 0.0);
    CHECK(one[0] == 0.0);
    CHECK(oracle::rel_err(one[1], v_f[0] - v_c[0]) < 1e-10);

    Chain plain = chain;
    plain.coupled = false;
    CHECK_THROWS_AS(increment_estimator(plain, phis, kObs, 0.0), Error);
}

TEST_CASE("ergodic average") {
    EstimatorOptions opts = options();
    const std::vector<Functional> phis{constant_functional(2.5)};
    const auto est = single_level_estimate(kObs, Level{1}, 20, opts, phis, 3);
    CHECK(est.value[0] == 2.5);
    CHECK(est.cost == level_cost(1, 20));
    try {
        ergodic_average(est.chain, phis, 1.0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientData);
    }
}

TEST_CASE("multilevel estimate telescopes") {
    LevelAllocation alloc;
    alloc.epsilon = 0.2;
    alloc.base_level = 0;
    alloc.max_level = 2;
    alloc.M = {40, 20, 10};
    const auto phis = coordinate_functionals(ModelKind::StateSpace, false);
    const auto run = ml_estimate(kObs, alloc, options(), phis, 77);
    REQUIRE(run.chains.size() == 3);
    for (std::size_t f = 0; f < phis.size(); ++f) {
        double sum = 0.0;
        for (const auto& c : run.estimate.components) sum += c[f];
        CHECK(std::abs(run.estimate.value[f] - sum) <= 1e-12 * std::max(1.0, std::abs(sum)));
    }
    CHECK(run.estimate.total_cost() == 40.0 + 4.0 * 20.0 + 16.0 * 10.0);
    CHECK(run.estimate.seeds[1] == level_seed(77, 1));
    CHECK(!run.chains[0].coupled);
    CHECK(run.chains[2].coupled);

    EstimatorOptions threaded = options();
    threaded.threads = 3;
    const auto again = ml_estimate(kObs, alloc, threaded, phis, 77);
    CHECK(again.estimate.value == run.estimate.value);
}

TEST_CASE("multilevel estimate with one sample per level") {
    LevelAllocation alloc;
    alloc.base_level = 0;
    alloc.max_level = 1;
    alloc.M = {1, 1};
    EstimatorOptions opts = options();
    const std::vector<Functional> phis{parameter_functional(ParamId::kappa), skeleton_functional(3)};
    const auto run = ml_estimate(kObs, alloc, opts, phis, 5);

    ChainOptions co = opts.chain;
    co.iterations = 1;
    const Chain base = pmcmc_chain(kObs, Level{0}, co, level_seed(5, 0));
    const Chain top = coupled_chain(kObs, Level{1}, co, level_seed(5, 1));
    std::vector<double> want(2, 0.0);
    for (const auto& rec : base.records) {
        const auto& th = rec.theta;
        const auto v = oracle::euler_naive(th.vol.V0, th.vol.kappa, th.vol.lambda, th.vol.nu, th.kernel.C, th.kernel.H,
                                           1.0, rec.fine->values);
        want[0] += th.vol.kappa / 2.0;
        want[1] += v[3] / 2.0;
    }
    std::vector<double> w1, w2, kf, vf, vc;
    for (const auto& rec : top.records) {
        const auto& th = rec.theta;
        const auto df = oracle::log_densities(true, th, 1, rec.fine->values, kObs);
        const auto dc = oracle::log_densities(true, th, 0, rec.coarse->values, kObs);
        double a = 0.0, b = 0.0;
        for (std::size_t t = 0; t < df.size(); ++t) {
            const double m = std::max(df[t], dc[t]);
            a += df[t] - m;
            b += dc[t] - m;
        }
        w1.push_back(std::exp(a));
        w2.push_back(std::exp(b));
        kf.push_back(th.vol.kappa);
        vf.push_back(oracle::euler_naive(th.vol.V0, th.vol.kappa, th.vol.lambda, th.vol.nu, th.kernel.C, th.kernel.H,
                                         0.5, rec.fine->values)[6]);
        vc.push_back(oracle::euler_naive(th.vol.V0, th.vol.kappa, th.vol.lambda, th.vol.nu, th.kernel.C, th.kernel.H,
                                         1.0, rec.coarse->values)[3]);
    }
    auto snd = [&](const std::vector<double>& f, const std::vector<double>& c) {
        return (f[0] * w1[0] + f[1] * w1[1]) / (w1[0] + w1[1]) - (c[0] * w2[0] + c[1] * w2[1]) / (w2[0] + w2[1]);
    };
    want[0] += snd(kf, kf);
    want[1] += snd(vf, vc);
    CHECK(std::abs(run.estimate.value[0] - want[0]) < 1e-10 * std::max(1.0, std::abs(want[0])));
    CHECK(std::abs(run.estimate.value[1] - want[1]) < 1e-10 * std::max(1.0, std::abs(want[1])));
}

TEST_CASE("functional parser") {
    ModelParams theta = default_params(ModelKind::StochVol);
    theta.vol.V0 = 2.0;
    theta.rho = 0.5;
    const std::vector<double> skel{1.0, 4.0, 9.0};
    CHECK(parse_functional("log(V0)")(theta, skel) == doctest::Approx(std::log(2.0)));
    CHECK(parse_functional("log((1+rho)/(1-rho))")(theta, skel) == doctest::Approx(std::log(3.0)));
    CHECK(parse_functional("V[3] - V[1]")(theta, skel) == 8.0);
    CHECK(parse_functional("-2^2")(theta, skel) == -4.0);
    CHECK(parse_functional("sqrt(V[2]) * 1.5e0")(theta, skel) == 3.0);
    CHECK(parse_functional("V[2]").needs_path);
    CHECK(!parse_functional("kappa + 1").needs_path);
    CHECK_THROWS_AS(parse_functional("foo(1)"), Error);
    CHECK_THROWS_AS(parse_functional("1 +"), Error);
    CHECK_THROWS_AS(parse_functional("V[9]")(theta, skel), Error);
    CHECK(coordinate_functional(ParamId::rho)(theta, skel) == doctest::Approx(std::log(3.0)));
}
