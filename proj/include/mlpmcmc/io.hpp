#pragma once

// Run configuration, dataset ingestion and result files for the command
// line front end.
//
// Configuration is INI text (sections and key = value lines). Unknown
// sections or keys are rejected. Every command writes resolved_config.ini,
// which lists every value actually used, and every CSV/JSON output carries
// the FNV-1a 64 hash of that text (output directory excluded) together with
// the root seed.
//
// Seed tree under the root seed s (child k is derive_seed(s, k)):
//   1 synthetic data, 2 pilot tuning, 3 single-level / reference chain,
//   4 multilevel run (level l uses derive_seed(child, l)),
//   5 rate study (method m, grid point g, replicate r nest below it),
//   6 predictive draws.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mlpmcmc/experiments.hpp"

namespace mlpmcmc {

enum class DataFormat { Observations, Prices };

struct RunConfig {
    // [model]
    ModelParams model;  // model kind, flags, fixed values and synthetic truth

    // [data]
    std::string data_path;  // empty: synthetic data from [model]
    DataFormat data_format = DataFormat::Observations;
    int T = 100;
    int data_level = 6;
    double y0 = 0.0;

    // [inference]
    std::size_t N = 100;
    std::size_t M = 1000;
    int level = 6;
    double epsilon = 0.1;
    int base_level = 3;
    int max_level = 5;
    std::vector<std::size_t> M_levels;  // explicit chain lengths for base_level..max_level
    double burn_in = 0.1;
    std::vector<double> step_sizes;  // empty: pilot tuning
    std::size_t pilot_batches = 20;
    std::size_t pilot_batch_size = 50;
    AllocationConstants constants;
    int max_init_retries = 100;
    bool start_at_model = false;  // start = model: chains start at the [model] values instead of a prior draw
    std::vector<std::string> functionals;  // empty: unconstrained coordinates

    // [study]
    std::vector<double> epsilons{0.4, 0.2, 0.1};
    std::size_t replicates = 20;
    double reference_factor = 20.0;

    // [analysis]
    int max_lag = 10;

    // [predict]
    int T_pred = 0;  // 0: length of the observed series
    std::size_t n_draws = 200;

    // [seeds] / [output] / runtime flags
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 1;
    bool exact = false;
};

RunConfig parse_config_text(std::string_view text);
RunConfig parse_config(const std::string& path);

/// Canonical INI text of every setting, readable by parse_config_text.
std::string resolved_config_text(const RunConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
/// Hash of the resolved text with the output directory left out.
std::uint64_t config_hash(const RunConfig& cfg);

/// Returns column of a price file (log price differences), or the returns
/// column itself. Lines starting with '#' are skipped. y0 is 0.
ObservationSeries load_price_series(const std::string& path);

/// Observation file with a y column; a row with t = 0 supplies y0.
ObservationSeries load_observations(const std::string& path);

/// y_t = y0 + cumulative sum of returns.
ObservationSeries cumulative_observations(std::span<const double> returns, double y0 = 0.0);

/// Observations for inference commands: the file in [data] or synthetic
/// data drawn from [model].
ObservationSeries resolve_observations(const RunConfig& cfg);

std::vector<Functional> resolve_functionals(const RunConfig& cfg);

/// "%.17e".
std::string format_double(double x);

/// Runs one subcommand (simulate, pmcmc, mlpmcmc, rate-study,
/// analyze-returns, predict) and writes its files to cfg.out_dir.
void run_command(std::string_view command, const RunConfig& cfg);

}  // namespace mlpmcmc
