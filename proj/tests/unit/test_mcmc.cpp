#include <cmath>

#include "doctest.h"
#include "mlpmcmc/error.hpp"
#include "mlpmcmc/mcmc.hpp"

using namespace mlpmcmc;

namespace {

const ObservationSeries kObs{0.0, {1.1, 0.7, 1.4}};

ChainOptions small_options(std::size_t M) {
    ChainOptions opts;
    opts.particles = 20;
    opts.iterations = M;
    opts.fixed = default_params(ModelKind::StateSpace);
    opts.proposal.step_sizes.assign(4, 0.3);
    return opts;
}

bool same_record(const ChainRecord& a, const ChainRecord& b) {
    return a.theta.vol.V0 == b.theta.vol.V0 && a.theta.vol.kappa == b.theta.vol.kappa &&
           a.theta.vol.lambda == b.theta.vol.lambda && a.theta.vol.nu == b.theta.vol.nu && a.z.z == b.z.z &&
           a.log_z == b.log_z && a.fine == b.fine && a.coarse == b.coarse;
}

}  // namespace

TEST_CASE("proposal validation") {
    CHECK_THROWS_AS(validate(ProposalConfig{{0.0, 0.0}}), Error);
    CHECK_THROWS_AS(validate(ProposalConfig{{}}), Error);
    CHECK_NOTHROW(validate(ProposalConfig{{0.1, 2.0}}));
}

TEST_CASE("random walk proposal mean") {
    const UnconstrainedParams z{{0.5, -1.0, 2.0}};
    const ProposalConfig cfg{{0.2, 1.0, 3.0}};
    Stream rng(12);
    std::vector<double> sum(3, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto p = rw_propose(z, cfg, rng);
        for (std::size_t k = 0; k < 3; ++k) sum[k] += p.z[k];
    }
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(sum[k] / n - z.z[k]) < 3.0 * cfg.step_sizes[k] / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("random walk proposal symmetry") {
    Stream rng(4);
    const ProposalConfig cfg{{0.3, 0.7}};
    for (int i = 0; i < 100; ++i) {
        const UnconstrainedParams a{{rng.normal(), rng.normal()}};
        const UnconstrainedParams b{{rng.normal(), rng.normal()}};
        CHECK(rw_log_density(a, b, cfg) - rw_log_density(b, a, cfg) == 0.0);
    }
}

TEST_CASE("acceptance probability") {
    CHECK(acceptance_probability(std::log(2.0), -1.0, std::log(1.0), -1.0) == 1.0);
    CHECK(acceptance_probability(0.3, -2.0, 0.3, -2.0) == 1.0);
    CHECK(acceptance_probability(std::log(0.5), 0.0, 0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(acceptance_probability(std::nan(""), 0.0, 0.0, 0.0) == 0.0);
    CHECK(acceptance_probability(0.0, -std::numeric_limits<double>::infinity(), 0.0, 0.0) == 0.0);
}

TEST_CASE("pmcmc chain length and copy-forward") {
    const Chain chain = pmcmc_chain(kObs, Level{1}, small_options(3), 21);
    REQUIRE(chain.records.size() == 4);
    CHECK(chain.iterations() == 3);
    for (std::size_t k = 1; k < chain.records.size(); ++k) {
        if (!chain.records[k].accepted) CHECK(same_record(chain.records[k], chain.records[k - 1]));
        CHECK(chain.records[k].z_hat() > 0.0);
    }
}

TEST_CASE("pmcmc chain mixes and is reproducible") {
    const Chain a = pmcmc_chain(kObs, Level{1}, small_options(200), 5);
    const Chain b = pmcmc_chain(kObs, Level{1}, small_options(200), 5);
    CHECK(a.acceptance_rate > 0.0);
    CHECK(a.acceptance_rate < 1.0);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        CHECK(a.records[k].z.z == b.records[k].z.z);
        CHECK(a.records[k].log_z == b.records[k].log_z);
    }
}

TEST_CASE("coupled chain records stay coupled") {
    const Chain chain = coupled_chain(kObs, Level{2}, small_options(30), 8);
    CHECK(chain.coupled);
    for (const auto& rec : chain.records) {
        REQUIRE(rec.coarse);
        CHECK(rec.coarse->values == coarsen(*rec.fine).values);
    }
    CHECK_THROWS_AS(coupled_chain(kObs, Level{0}, small_options(3), 8), Error);
}

TEST_CASE("huge steps reject everything") {
    ChainOptions opts = small_options(25);
    opts.proposal.step_sizes.assign(4, 1e6);
    for (bool coupled : {false, true}) {
        const Chain chain = coupled ? coupled_chain(kObs, Level{1}, opts, 3) : pmcmc_chain(kObs, Level{1}, opts, 3);
        CHECK(chain.acceptance_rate == 0.0);
        for (std::size_t k = 1; k < chain.records.size(); ++k) {
            CHECK(same_record(chain.records[k], chain.records[0]));
        }
    }
}

TEST_CASE("start override and dimension checks") {
    ChainOptions opts = small_options(2);
    ModelParams start = opts.fixed;
    start.vol = VolParams{1.2, 0.4, 0.9, 0.3};
    opts.start = start;
    const Chain chain = pmcmc_chain(kObs, Level{0}, opts, 1);
    CHECK(chain.records[0].theta.vol.V0 == 1.2);
    opts.proposal.step_sizes.assign(3, 0.1);
    CHECK_THROWS_AS(pmcmc_chain(kObs, Level{0}, opts, 1), Error);
}

TEST_CASE("proposal tuning") {
    ChainOptions opts = small_options(1);
    TuningOptions tuning;
    tuning.batches = 8;
    tuning.batch_size = 25;
    const auto result = tune_proposal(kObs, Level{0}, opts, tuning, 31);
    REQUIRE(result.proposal.step_sizes.size() == 4);
    for (double s : result.proposal.step_sizes) {
        CHECK(s > 0.0);
        CHECK(std::isfinite(s));
    }
}
