#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mlpmcmc/error.hpp"
#include "mlpmcmc/experiments.hpp"
#include "oracle.hpp"

using namespace mlpmcmc;

namespace {

std::vector<double> diffs(const ObservationSeries& obs) {
    std::vector<double> out;
    for (int t = 1; t <= obs.horizon(); ++t) out.push_back(obs.at(t) - obs.prev(t));
    return out;
}

/// Base-level-only run whose chain holds `records` copies of theta.
MultilevelRun point_mass_run(const ModelParams& theta, int level, std::size_t records) {
    MultilevelRun run;
    Chain chain;
    chain.level = Level{level};
    for (std::size_t k = 0; k < records; ++k) {
        ChainRecord rec;
        rec.theta = theta;
        chain.records.push_back(rec);
    }
    run.chains.push_back(chain);
    run.estimate.allocation.base_level = level;
    run.estimate.allocation.max_level = level;
    run.estimate.burn_in = 0.0;
    return run;
}

}  // namespace

TEST_CASE("synthetic SSM without noise observes V") {
    ModelParams theta = default_params(ModelKind::StateSpace);
    theta.vol = VolParams{1.0, 0.5, 1.0, 0.5};
    theta.sigma_obs = 0.0;
    Stream rng(3);
    const auto ds = generate_synthetic(theta, 10, Level{4}, rng);
    REQUIRE(ds.y.horizon() == 10);
    for (int t = 1; t <= 10; ++t) CHECK(ds.y.at(t) == ds.latent_truth.at_unit(t));
}

TEST_CASE("synthetic default shape") {
    ModelParams theta = default_params(ModelKind::StochVol);
    theta.vol = VolParams{0.04, 0.5, 1.0, 0.3};
    theta.rho = -0.5;
    Stream rng(1);
    const auto ds = generate_synthetic(theta, 100, Level{6}, rng);
    CHECK(ds.y.horizon() == 100);
    CHECK(ds.latent_truth.values.size() == 6401);
    CHECK(ds.increments.size() == 6400);
    Stream again(1);
    CHECK(generate_synthetic(theta, 100, Level{6}, again).y.y == ds.y.y);
}

TEST_CASE("synthetic SV with constant volatility has Gaussian increments") {
    ModelParams theta = default_params(ModelKind::StochVol);
    theta.vol = VolParams{0.09, 0.0, 0.0, 0.0};
    theta.rho = 0.0;
    theta.r = 0.05;
    Stream rng(10);
    const auto ds = generate_synthetic(theta, 20000, Level{0}, rng, 1.0);
    const auto r = diffs(ds.y);
    const auto m = oracle::two_pass_moments(r);
    const double n = static_cast<double>(r.size());
    CHECK(std::abs(m.mean - 0.05) < 4.0 * std::sqrt(0.09 / n));
    CHECK(std::abs(m.variance - 0.09) < 4.0 * 0.09 * std::sqrt(2.0 / n));
    CHECK(std::abs(m.kurtosis - 3.0) < 4.0 * std::sqrt(24.0 / n));
}

TEST_CASE("log-log slope fit") {
    std::vector<double> mse{0.5, 0.1, 0.02, 0.004};
    std::vector<double> cost;
    for (double e : mse) cost.push_back(3.0 * std::pow(e, -19.0 / 9.0));
    CHECK(std::abs(fit_loglog_slope(mse, cost) - (-19.0 / 9.0)) < 1e-9);
    CHECK_THROWS_AS(fit_loglog_slope(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("single-level chain length") {
    AllocationConstants c;
    CHECK(single_level_iterations(0.1, c) == 100);
    CHECK(single_level_iterations(0.4, c) == 50);
}

TEST_CASE("return statistics") {
    const auto flat = return_stats(std::vector<double>(6, 0.0));
    CHECK(flat.mean == 0.0);
    CHECK(flat.variance == 0.0);
    CHECK(!flat.skewness);
    CHECK(!flat.kurtosis);

    const auto pm = return_stats(std::vector<double>{-1.0, 1.0});
    CHECK(pm.mean == 0.0);
    CHECK(pm.variance == 2.0);
    CHECK(*pm.skewness == 0.0);
    CHECK(*pm.kurtosis == doctest::Approx(1.0));

    Stream rng(44);
    std::vector<double> x;
    for (int i = 0; i < 500; ++i) x.push_back(0.01 * rng.normal() + 0.002 * rng.normal() * rng.normal());
    const auto s = return_stats(x);
    const auto o = oracle::two_pass_moments(x);
    CHECK(oracle::rel_err(s.mean, o.mean) < 1e-10);
    CHECK(oracle::rel_err(s.variance, o.variance) < 1e-10);
    CHECK(oracle::rel_err(*s.skewness, o.skewness) < 1e-10);
    CHECK(oracle::rel_err(*s.kurtosis, o.kurtosis) < 1e-10);
    CHECK(s.n == 500);

    CHECK_THROWS_AS(return_stats(std::vector<double>{1.0}), Error);
}

TEST_CASE("log returns") {
    const std::vector<double> p{1.0, std::numbers::e, std::numbers::e * std::numbers::e};
    const auto r = log_returns(p);
    REQUIRE(r.size() == 2);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(log_returns(std::vector<double>{1.0, -2.0}), Error);
    CHECK(return_stats_from_prices(p).mean == doctest::Approx(1.0));
}

TEST_CASE("lagged absolute correlation") {
    Stream rng(71);
    std::vector<double> r(100000);
    for (double& x : r) x = rng.normal();
    const auto curve = lagged_abs_correlation(r, 5);
    REQUIRE(curve.size() == 11);
    for (const auto& lc : curve) CHECK(std::abs(*lc.correlation) < 3.0 / std::sqrt(100000.0));
    CHECK(curve.front().lag == -5);
    CHECK(curve.back().lag == 5);

    std::vector<double> pos(50);
    for (double& x : pos) x = 0.1 + rng.uniform();
    CHECK(*lagged_abs_correlation(pos, 3)[3].correlation == doctest::Approx(1.0).epsilon(1e-14));

    std::vector<double> small(300);
    for (double& x : small) x = rng.normal() * (1.0 + 0.5 * rng.uniform());
    const auto got = lagged_abs_correlation(small, 4);
    for (const auto& lc : got) CHECK(oracle::rel_err(*lc.correlation, oracle::two_pass_lag_corr(small, lc.lag)) < 1e-10);

    CHECK_THROWS_AS(lagged_abs_correlation(std::vector<double>(4, 1.0), 3), Error);
    const auto flat = lagged_abs_correlation(std::vector<double>(10, 1.0), 2);
    CHECK(!flat[2].correlation);
}

TEST_CASE("rate study is reproducible") {
    ModelParams fixed = default_params(ModelKind::StateSpace);
    fixed.vol = VolParams{1.0, 0.5, 1.0, 0.5};
    Stream rng(2);
    const auto ds = generate_synthetic(fixed, 3, Level{4}, rng);
    RateStudyConfig cfg;
    cfg.epsilons = {0.6, 0.5, 0.4};
    cfg.replicates = 2;
    cfg.constants.c_M = 2.0;
    cfg.constants.M_min = 4;
    cfg.options.chain.particles = 10;
    cfg.options.chain.fixed = fixed;
    cfg.options.chain.proposal.step_sizes.assign(4, 0.4);
    const auto phis = coordinate_functionals(ModelKind::StateSpace, false);
    const std::vector<double> reference(4, 0.0);
    for (Method m : {Method::Single, Method::Multilevel}) {
        const auto a = rate_study(ds.y, m, cfg, phis, reference, 9);
        const auto b = rate_study(ds.y, m, cfg, phis, reference, 9);
        CHECK(a.slope == b.slope);
        CHECK(a.grid.size() == 3);
        CHECK(a.runs.size() == 6);
        for (double s : a.slope) CHECK(std::isfinite(s));
    }
    RateStudyConfig two = cfg;
    two.epsilons = {0.5, 0.4};
    CHECK_THROWS_AS(rate_study(ds.y, Method::Single, two, phis, reference, 9), Error);
}

TEST_CASE("predictive summaries from one draw") {
    ModelParams theta = default_params(ModelKind::StochVol);
    theta.vol = VolParams{0.04, 0.5, 1.0, 0.3};
    theta.rho = -0.3;
    const auto run = point_mass_run(theta, 2, 3);
    const ObservationSeries obs{0.0, {0.01}};
    const auto pred = predictive_summaries(run, obs, 40, 1, 3, 123);

    Stream s = Stream::derived(derive_seed(123, 0), 0);
    (void)s.uniform();
    const auto ds = generate_synthetic(theta, 40, Level{2}, s, 0.0);
    const auto r = diffs(ds.y);
    const auto want = return_stats(r);
    CHECK(pred.stats.mean == want.mean);
    CHECK(pred.stats.variance == want.variance);
    CHECK(*pred.stats.skewness == *want.skewness);
    CHECK(*pred.stats.kurtosis == *want.kurtosis);
    const auto curve = lagged_abs_correlation(r, 3);
    for (std::size_t i = 0; i < curve.size(); ++i) CHECK(*pred.curve[i].correlation == *curve[i].correlation);
}

TEST_CASE("predictive variance under constant volatility") {
    ModelParams theta = default_params(ModelKind::StochVol);
    theta.vol = VolParams{0.04, 0.0, 0.0, 0.0};
    theta.rho = 0.0;
    const auto run = point_mass_run(theta, 1, 10);
    const ObservationSeries obs{0.0, {0.01}};
    const std::size_t draws = 400;
    const int T = 50;
    const auto pred = predictive_summaries(run, obs, T, draws, 2, 5);
    const double se = 0.04 * std::sqrt(2.0 / (T - 1)) / std::sqrt(static_cast<double>(draws));
    CHECK(std::abs(pred.stats.variance - 0.04) < 4.0 * se);
    CHECK(pred.stats.n == static_cast<std::size_t>(T));
}
