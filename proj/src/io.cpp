#include "mlpmcmc/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"
#include "mlpmcmc/error.hpp"

namespace mlpmcmc {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& field, const std::string& detail) {
    throw Error(ErrorKind::Config, "cli_io", "parse_config", field + ": " + detail);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(const std::string& field, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        config_error(field, "expected a number, got '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) config_error(field, "expected a finite number, got '" + text + "'");
    return v;
}

long long to_integer(const std::string& field, const std::string& text) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &used);
    } catch (const std::exception&) {
        config_error(field, "expected an integer, got '" + text + "'");
    }
    if (used != text.size()) config_error(field, "expected an integer, got '" + text + "'");
    return v;
}

std::size_t to_count(const std::string& field, const std::string& text) {
    const long long v = to_integer(field, text);
    if (v < 0) config_error(field, "must be non-negative");
    return static_cast<std::size_t>(v);
}

std::uint64_t to_u64(const std::string& field, const std::string& text) {
    if (text.empty() || text[0] == '-') config_error(field, "expected an unsigned integer, got '" + text + "'");
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(text, &used, 0);
    } catch (const std::exception&) {
        config_error(field, "expected an unsigned integer, got '" + text + "'");
    }
    if (used != text.size()) config_error(field, "expected an unsigned integer, got '" + text + "'");
    return v;
}

bool to_bool(const std::string& field, const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    config_error(field, "expected true or false, got '" + text + "'");
}

template <class T, class Conv>
std::vector<T> to_list(const std::string& field, const std::string& text, Conv conv) {
    std::vector<T> out;
    if (trim(text).empty()) return out;
    for (const auto& item : split(text, ',')) out.push_back(conv(field, item));
    return out;
}

std::string fmt_g(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class T, class Fmt>
std::string join(const std::vector<T>& xs, Fmt fmt) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += fmt(xs[i]);
    }
    return out;
}

std::string_view to_string(DataFormat f) { return f == DataFormat::Prices ? "prices" : "observations"; }

using Setter = std::function<void(RunConfig&, const std::string& field, const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& schema() {
    static const std::map<std::string, std::map<std::string, Setter>> table = [] {
        std::map<std::string, std::map<std::string, Setter>> s;
        auto param = [](ParamId id) {
            return [id](RunConfig& c, const std::string& f, const std::string& v) { c.model.set(id, to_double(f, v)); };
        };
        s["model"] = {
            {"kind",
             [](RunConfig& c, const std::string& f, const std::string& v) {
                 if (v != "ssm" && v != "sv") config_error(f, "expected ssm or sv, got '" + v + "'");
                 c.model.model_kind = parse_model_kind(v);
             }},
            {"estimate_H", [](RunConfig& c, const std::string& f, const std::string& v) { c.model.estimate_H = to_bool(f, v); }},
            {"drift_in_mean",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.model.drift_in_mean = to_bool(f, v); }},
        };
        for (ParamId id : kAllParams) s["model"][std::string(name(id))] = param(id);

        s["data"] = {
            {"path", [](RunConfig& c, const std::string&, const std::string& v) { c.data_path = v; }},
            {"format",
             [](RunConfig& c, const std::string& f, const std::string& v) {
                 if (v == "observations") {
                     c.data_format = DataFormat::Observations;
                 } else if (v == "prices") {
                     c.data_format = DataFormat::Prices;
                 } else {
                     config_error(f, "expected observations or prices, got '" + v + "'");
                 }
             }},
            {"T", [](RunConfig& c, const std::string& f, const std::string& v) { c.T = static_cast<int>(to_integer(f, v)); }},
            {"data_level",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.data_level = static_cast<int>(to_integer(f, v)); }},
            {"y0", [](RunConfig& c, const std::string& f, const std::string& v) { c.y0 = to_double(f, v); }},
        };

        s["inference"] = {
            {"N", [](RunConfig& c, const std::string& f, const std::string& v) { c.N = to_count(f, v); }},
            {"M", [](RunConfig& c, const std::string& f, const std::string& v) { c.M = to_count(f, v); }},
            {"level", [](RunConfig& c, const std::string& f, const std::string& v) { c.level = static_cast<int>(to_integer(f, v)); }},
            {"epsilon", [](RunConfig& c, const std::string& f, const std::string& v) { c.epsilon = to_double(f, v); }},
            {"base_level",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.base_level = static_cast<int>(to_integer(f, v)); }},
            {"max_level",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.max_level = static_cast<int>(to_integer(f, v)); }},
            {"M_levels",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.M_levels = to_list<std::size_t>(f, v, to_count); }},
            {"burn_in", [](RunConfig& c, const std::string& f, const std::string& v) { c.burn_in = to_double(f, v); }},
            {"step_sizes",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.step_sizes = to_list<double>(f, v, to_double); }},
            {"pilot_batches", [](RunConfig& c, const std::string& f, const std::string& v) { c.pilot_batches = to_count(f, v); }},
            {"pilot_batch_size",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.pilot_batch_size = to_count(f, v); }},
            {"c_M", [](RunConfig& c, const std::string& f, const std::string& v) { c.constants.c_M = to_double(f, v); }},
            {"c_L", [](RunConfig& c, const std::string& f, const std::string& v) { c.constants.c_L = to_double(f, v); }},
            {"M_min", [](RunConfig& c, const std::string& f, const std::string& v) { c.constants.M_min = to_count(f, v); }},
            {"max_init_retries",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.max_init_retries = static_cast<int>(to_integer(f, v)); }},
            {"start",
             [](RunConfig& c, const std::string& f, const std::string& v) {
                 if (v == "prior") {
                     c.start_at_model = false;
                 } else if (v == "model") {
                     c.start_at_model = true;
                 } else {
                     config_error(f, "expected prior or model, got '" + v + "'");
                 }
             }},
            {"functionals",
             [](RunConfig& c, const std::string&, const std::string& v) {
                 c.functionals.clear();
                 if (!trim(v).empty()) c.functionals = split(v, ';');
             }},
        };

        s["study"] = {
            {"epsilons",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.epsilons = to_list<double>(f, v, to_double); }},
            {"replicates", [](RunConfig& c, const std::string& f, const std::string& v) { c.replicates = to_count(f, v); }},
            {"reference_factor",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.reference_factor = to_double(f, v); }},
        };
        s["analysis"] = {
            {"max_lag",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.max_lag = static_cast<int>(to_integer(f, v)); }},
        };
        s["predict"] = {
            {"T_pred",
             [](RunConfig& c, const std::string& f, const std::string& v) { c.T_pred = static_cast<int>(to_integer(f, v)); }},
            {"n_draws", [](RunConfig& c, const std::string& f, const std::string& v) { c.n_draws = to_count(f, v); }},
        };
        s["seeds"] = {
            {"root", [](RunConfig& c, const std::string& f, const std::string& v) { c.seed = to_u64(f, v); }},
        };
        s["output"] = {
            {"dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
        };
        return s;
    }();
    return table;
}

void check(bool ok, const std::string& field, const std::string& detail) {
    if (!ok) config_error(field, detail);
}

void validate_config(const RunConfig& c) {
    const ModelParams& m = c.model;
    check(m.kernel.H >= 0.0 && m.kernel.H < 0.5, "model.H", "H must lie in [0, 0.5)");
    check(m.kernel.C > 0.0, "model.C", "C must be positive");
    check(m.vol.V0 > 0.0, "model.V0", "V0 must be positive");
    check(m.vol.kappa > 0.0, "model.kappa", "kappa must be positive");
    check(m.vol.lambda > 0.0, "model.lambda", "lambda must be positive");
    check(m.vol.nu > 0.0, "model.nu", "nu must be positive");
    check(std::abs(m.rho) < 1.0, "model.rho", "rho must lie in (-1, 1)");
    check(m.sigma_obs > 0.0, "model.sigma_obs", "sigma_obs must be positive");
    check(c.T >= 1, "data.T", "T must be >= 1");
    check(c.data_level >= 0 && c.data_level <= 20, "data.data_level", "data_level must lie in [0, 20]");
    check(c.N >= 1, "inference.N", "N must be >= 1");
    check(c.M >= 1, "inference.M", "M must be >= 1");
    check(c.level >= 0 && c.level <= 20, "inference.level", "level must lie in [0, 20]");
    check(c.epsilon > 0.0 && c.epsilon < 1.0, "inference.epsilon", "epsilon must lie in (0, 1)");
    check(c.base_level >= 0, "inference.base_level", "base_level must be >= 0");
    check(c.max_level > c.base_level && c.max_level <= 20, "inference.max_level",
          "max_level must lie in (base_level, 20]");
    if (!c.M_levels.empty()) {
        check(c.M_levels.size() == static_cast<std::size_t>(c.max_level - c.base_level + 1), "inference.M_levels",
              "M_levels needs one entry per level from base_level to max_level");
        for (std::size_t v : c.M_levels) check(v >= 1, "inference.M_levels", "chain lengths must be >= 1");
    }
    check(c.burn_in >= 0.0 && c.burn_in < 1.0, "inference.burn_in", "burn_in must lie in [0, 1)");
    if (!c.step_sizes.empty()) {
        const std::size_t dim = active_parameters(c.model).size();
        check(c.step_sizes.size() == dim, "inference.step_sizes",
              "step_sizes needs " + std::to_string(dim) + " entries for this model");
        for (double s : c.step_sizes) check(s > 0.0, "inference.step_sizes", "step sizes must be positive");
    }
    check(c.pilot_batches >= 1, "inference.pilot_batches", "pilot_batches must be >= 1");
    check(c.pilot_batch_size >= 1, "inference.pilot_batch_size", "pilot_batch_size must be >= 1");
    check(c.constants.c_M > 0.0, "inference.c_M", "c_M must be positive");
    check(c.constants.c_L > 0.0, "inference.c_L", "c_L must be positive");
    check(c.max_init_retries >= 0, "inference.max_init_retries", "max_init_retries must be >= 0");
    for (const auto& expr : c.functionals) parse_functional(expr);
    check(c.epsilons.size() >= 3, "study.epsilons", "the rate study needs at least 3 epsilon values");
    for (double e : c.epsilons) check(e > 0.0 && e < 1.0, "study.epsilons", "epsilon values must lie in (0, 1)");
    check(c.replicates >= 1, "study.replicates", "replicates must be >= 1");
    check(c.reference_factor >= 1.0, "study.reference_factor", "reference_factor must be >= 1");
    check(c.max_lag >= 1, "analysis.max_lag", "max_lag must be >= 1");
    check(c.T_pred >= 0, "predict.T_pred", "T_pred must be >= 0");
    check(c.n_draws >= 1, "predict.n_draws", "n_draws must be >= 1");
}

// ---- CSV ----

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    std::ptrdiff_t column(std::string_view name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : it - header.begin();
    }
};

CsvTable read_csv(const std::string& path, const char* op) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cli_io", op, "cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto cells = split(t, ',');
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw Error(ErrorKind::Schema, "cli_io", op,
                        "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " fields, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    if (table.header.empty()) throw Error(ErrorKind::Schema, "cli_io", op, "'" + path + "' has no header row");
    return table;
}

double cell_double(const CsvTable& table, std::size_t row, std::ptrdiff_t col, const char* op) {
    const std::string& text = table.rows[row][static_cast<std::size_t>(col)];
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.empty()) {
        throw Error(ErrorKind::Schema, "cli_io", op,
                    "line " + std::to_string(table.line_numbers[row]) + ": '" + text + "' is not a number");
    }
    return v;
}

class OutputFiles {
public:
    explicit OutputFiles(const RunConfig& cfg) : dir_(cfg.out_dir), hash_(config_hash(cfg)), seed_(cfg.seed) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw Error(ErrorKind::Io, "cli_io", "run", "cannot create '" + dir_.string() + "': " + ec.message());
        write_text("resolved_config.ini", resolved_config_text(cfg));
    }

    std::string comment() const {
        char buf[96];
        std::snprintf(buf, sizeof buf, "# config_hash=%016" PRIx64 ",seed=%" PRIu64, hash_, seed_);
        return buf;
    }

    void write_csv(const std::string& file, const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) const {
        std::string text = comment() + "\n";
        for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
        text += "\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + row[i];
            text += "\n";
        }
        write_text(file, text);
    }

    void write_json(const std::string& file, Json body) const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016" PRIx64, hash_);
        Json doc;
        doc["config_hash"] = buf;
        doc["seed"] = seed_;
        for (auto& [k, v] : body.items()) doc[k] = v;
        write_text(file, doc.dump(2) + "\n");
    }

    void write_text(const std::string& file, const std::string& text) const {
        const auto path = dir_ / file;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cli_io", "run", "cannot write '" + path.string() + "'");
        out << text;
        if (!out) throw Error(ErrorKind::Io, "cli_io", "run", "write failed for '" + path.string() + "'");
    }

private:
    std::filesystem::path dir_;
    std::uint64_t hash_;
    std::uint64_t seed_;
};

std::string opt_double(const std::optional<double>& x) { return x ? format_double(*x) : "nan"; }

Json opt_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

// ---- command helpers ----

constexpr std::uint64_t kDataSeed = 1;
constexpr std::uint64_t kTuneSeed = 2;
constexpr std::uint64_t kSingleSeed = 3;
constexpr std::uint64_t kMultilevelSeed = 4;
constexpr std::uint64_t kRateSeed = 5;
constexpr std::uint64_t kPredictSeed = 6;

SyntheticDataset synthetic_data(const RunConfig& cfg) {
    Stream rng(derive_seed(cfg.seed, kDataSeed));
    return generate_synthetic(cfg.model, cfg.T, make_level(cfg.data_level), rng, cfg.y0);
}

int thread_count(const RunConfig& cfg) { return cfg.exact ? 1 : std::max(1, cfg.threads); }

EstimatorOptions estimator_options(const RunConfig& cfg, const ObservationSeries& obs, int tune_level) {
    EstimatorOptions opts;
    opts.chain.particles = cfg.N;
    opts.chain.fixed = cfg.model;
    opts.chain.max_init_retries = cfg.max_init_retries;
    if (cfg.start_at_model) opts.chain.start = cfg.model;
    opts.burn_in = cfg.burn_in;
    opts.threads = thread_count(cfg);
    if (!cfg.step_sizes.empty()) {
        opts.chain.proposal.step_sizes = cfg.step_sizes;
    } else {
        TuningOptions tuning;
        tuning.batches = cfg.pilot_batches;
        tuning.batch_size = cfg.pilot_batch_size;
        opts.chain.proposal =
            tune_proposal(obs, make_level(tune_level), opts.chain, tuning, derive_seed(cfg.seed, kTuneSeed)).proposal;
    }
    return opts;
}

LevelAllocation multilevel_allocation(const RunConfig& cfg) {
    if (cfg.M_levels.empty()) {
        return allocate_levels(cfg.epsilon, cfg.model.kernel.H, cfg.base_level, cfg.max_level, cfg.constants);
    }
    LevelAllocation alloc;
    alloc.epsilon = cfg.epsilon;
    alloc.H = cfg.model.kernel.H;
    alloc.base_level = cfg.base_level;
    alloc.max_level = cfg.max_level;
    alloc.M = cfg.M_levels;
    return alloc;
}

std::vector<std::vector<std::string>> chain_rows(const Chain& chain, const std::vector<ParamId>& ids) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < chain.records.size(); ++i) {
        const ChainRecord& rec = chain.records[i];
        std::vector<std::string> row{std::to_string(i), rec.accepted ? "1" : "0", format_double(rec.log_z)};
        for (ParamId id : ids) row.push_back(format_double(rec.theta.get(id)));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::string> chain_header(const std::vector<ParamId>& ids) {
    std::vector<std::string> header{"iteration", "accepted", "log_z"};
    for (ParamId id : ids) header.emplace_back(name(id));
    return header;
}

Json named_values(const std::vector<std::string>& names, const std::vector<double>& values) {
    Json out = Json::object();
    for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = values[i];
    return out;
}

std::vector<double> returns_for_analysis(const RunConfig& cfg) {
    if (cfg.data_path.empty()) {
        throw Error(ErrorKind::Config, "cli_io", "analyze-returns", "data.path must name a price or returns file");
    }
    if (cfg.data_format == DataFormat::Prices) return load_price_series(cfg.data_path).y;
    const ObservationSeries obs = load_observations(cfg.data_path);
    std::vector<double> out;
    for (int t = 1; t <= obs.horizon(); ++t) out.push_back(obs.at(t) - obs.prev(t));
    return out;
}

void run_simulate(const RunConfig& cfg, const OutputFiles& files) {
    const SyntheticDataset ds = synthetic_data(cfg);
    const bool sv = cfg.model.model_kind == ModelKind::StochVol;
    std::vector<std::string> header{"t", "y", "v"};
    if (sv) header.emplace_back("price");
    std::vector<std::vector<std::string>> rows;
    if (sv) {
        rows.push_back({"0", format_double(ds.y.y0), format_double(ds.latent_truth.at_unit(0)),
                        format_double(std::exp(ds.y.y0))});
    }
    for (int t = 1; t <= ds.y.horizon(); ++t) {
        std::vector<std::string> row{std::to_string(t), format_double(ds.y.at(t)), format_double(ds.latent_truth.at_unit(t))};
        if (sv) row.push_back(format_double(std::exp(ds.y.at(t))));
        rows.push_back(std::move(row));
    }
    files.write_csv("data.csv", header, rows);

    Json truth = Json::object();
    for (ParamId id : kAllParams) truth[std::string(name(id))] = ds.true_theta.get(id);
    files.write_json("truth.json", Json{{"command", "simulate"},
                                        {"model", std::string(to_string(cfg.model.model_kind))},
                                        {"T", cfg.T},
                                        {"data_level", cfg.data_level},
                                        {"true_parameters", truth}});
}

void run_pmcmc(const RunConfig& cfg, const OutputFiles& files) {
    const ObservationSeries obs = resolve_observations(cfg);
    const auto phis = resolve_functionals(cfg);
    const EstimatorOptions opts = estimator_options(cfg, obs, cfg.level);
    const auto est = single_level_estimate(obs, make_level(cfg.level), cfg.M, opts, phis,
                                           derive_seed(cfg.seed, kSingleSeed));
    const auto ids = active_parameters(cfg.model);
    files.write_csv("chain.csv", chain_header(ids), chain_rows(est.chain, ids));
    files.write_json("summary.json", Json{{"command", "pmcmc"},
                                          {"level", cfg.level},
                                          {"N", cfg.N},
                                          {"M", cfg.M},
                                          {"burn_in", cfg.burn_in},
                                          {"step_sizes", opts.chain.proposal.step_sizes},
                                          {"acceptance_rate", est.chain.acceptance_rate},
                                          {"failed_proposals", est.chain.failed_proposals.size()},
                                          {"initial_retries", est.chain.initial_retries},
                                          {"cost", est.cost},
                                          {"estimate", named_values(est.names, est.value)}});
}

MultilevelRun multilevel_run(const RunConfig& cfg, const ObservationSeries& obs, std::span<const Functional> phis,
                             EstimatorOptions& opts) {
    const LevelAllocation alloc = multilevel_allocation(cfg);
    opts = estimator_options(cfg, obs, alloc.base_level);
    return ml_estimate(obs, alloc, opts, phis, derive_seed(cfg.seed, kMultilevelSeed));
}

Json estimate_json(const MultilevelRun& run, const EstimatorOptions& opts) {
    const MLEstimate& e = run.estimate;
    Json levels = Json::array();
    for (std::size_t i = 0; i < run.chains.size(); ++i) {
        levels.push_back(Json{{"level", e.allocation.base_level + static_cast<int>(i)},
                              {"M", e.allocation.M[i]},
                              {"seed", e.seeds[i]},
                              {"cost", e.costs[i]},
                              {"acceptance_rate", run.chains[i].acceptance_rate},
                              {"failed_proposals", run.chains[i].failed_proposals.size()},
                              {"components", named_values(e.names, e.components[i])}});
    }
    return Json{{"command", "mlpmcmc"},
                {"epsilon", e.allocation.epsilon},
                {"base_level", e.allocation.base_level},
                {"max_level", e.allocation.max_level},
                {"burn_in", e.burn_in},
                {"step_sizes", opts.chain.proposal.step_sizes},
                {"total_cost", e.total_cost()},
                {"value", named_values(e.names, e.value)},
                {"levels", levels}};
}

void run_mlpmcmc(const RunConfig& cfg, const OutputFiles& files) {
    const ObservationSeries obs = resolve_observations(cfg);
    const auto phis = resolve_functionals(cfg);
    EstimatorOptions opts;
    const MultilevelRun run = multilevel_run(cfg, obs, phis, opts);
    files.write_json("estimate.json", estimate_json(run, opts));
    const auto ids = active_parameters(cfg.model);
    for (const Chain& chain : run.chains) {
        files.write_csv("chain_level_" + std::to_string(chain.level.l) + ".csv", chain_header(ids),
                        chain_rows(chain, ids));
    }
}

void run_rate_study(const RunConfig& cfg, const OutputFiles& files) {
    const ObservationSeries obs = resolve_observations(cfg);
    const auto phis = resolve_functionals(cfg);
    const EstimatorOptions opts = estimator_options(cfg, obs, 0);

    const double eps_min = *std::min_element(cfg.epsilons.begin(), cfg.epsilons.end());
    const LevelAllocation finest = choose_levels(eps_min, cfg.model.kernel.H, cfg.constants);
    const auto ref_iterations = static_cast<std::size_t>(
        std::ceil(cfg.reference_factor * static_cast<double>(single_level_iterations(eps_min, cfg.constants))));
    const auto reference = single_level_estimate(obs, Level{finest.max_level}, ref_iterations, opts, phis,
                                                 derive_seed(cfg.seed, kSingleSeed));

    RateStudyConfig study;
    study.epsilons = cfg.epsilons;
    study.replicates = cfg.replicates;
    study.H = cfg.model.kernel.H;
    study.constants = cfg.constants;
    study.options = opts;

    const std::uint64_t rate_root = derive_seed(cfg.seed, kRateSeed);
    std::vector<std::vector<std::string>> slope_rows;
    std::vector<std::vector<std::string>> grid_rows;
    Json methods = Json::array();
    for (Method method : {Method::Single, Method::Multilevel}) {
        const auto result =
            rate_study(obs, method, study, phis, reference.value, derive_seed(rate_root, static_cast<std::uint64_t>(method)));
        for (std::size_t f = 0; f < result.names.size(); ++f) {
            slope_rows.push_back({result.names[f], std::string(to_string(method)), format_double(result.slope[f])});
            for (const auto& point : result.grid) {
                grid_rows.push_back({std::string(to_string(method)), result.names[f], format_double(point.epsilon),
                                     std::to_string(point.max_level), format_double(point.cost),
                                     format_double(point.mse[f])});
            }
        }
        methods.push_back(Json{{"method", std::string(to_string(method))},
                               {"slope", named_values(result.names, result.slope)}});
    }
    files.write_csv("rate_study.csv", {"parameter", "method", "slope"}, slope_rows);
    files.write_csv("rate_grid.csv", {"method", "parameter", "epsilon", "max_level", "cost", "mse"}, grid_rows);
    files.write_json("rate_study.json", Json{{"command", "rate-study"},
                                             {"reference_level", finest.max_level},
                                             {"reference_iterations", ref_iterations},
                                             {"reference", named_values(reference.names, reference.value)},
                                             {"methods", methods}});
}

std::vector<std::string> stats_row(const ReturnStats& s) {
    return {std::to_string(s.n), format_double(s.mean), format_double(s.variance), opt_double(s.skewness),
            opt_double(s.kurtosis)};
}

void run_analyze_returns(const RunConfig& cfg, const OutputFiles& files) {
    const std::vector<double> returns = returns_for_analysis(cfg);
    const ReturnStats stats = return_stats(returns);
    const auto curve = lagged_abs_correlation(returns, cfg.max_lag);
    files.write_csv("return_stats.csv", {"n", "mean", "variance", "skewness", "kurtosis"}, {stats_row(stats)});
    std::vector<std::vector<std::string>> rows;
    for (const auto& lc : curve) rows.push_back({std::to_string(lc.lag), opt_double(lc.correlation)});
    files.write_csv("lag_correlation.csv", {"lag", "correlation"}, rows);
}

void run_predict(const RunConfig& cfg, const OutputFiles& files) {
    const ObservationSeries obs = resolve_observations(cfg);
    const auto phis = resolve_functionals(cfg);
    EstimatorOptions opts;
    const MultilevelRun run = multilevel_run(cfg, obs, phis, opts);
    const int horizon = cfg.T_pred > 0 ? cfg.T_pred : obs.horizon();
    const auto pred =
        predictive_summaries(run, obs, horizon, cfg.n_draws, cfg.max_lag, derive_seed(cfg.seed, kPredictSeed));

    std::vector<double> observed;
    for (int t = 1; t <= obs.horizon(); ++t) observed.push_back(obs.at(t) - obs.prev(t));
    std::vector<std::vector<std::string>> stat_rows;
    std::vector<std::optional<double>> observed_curve(pred.curve.size());
    if (observed.size() >= 2) {
        auto row = stats_row(return_stats(observed));
        row.insert(row.begin(), "observed");
        stat_rows.push_back(std::move(row));
    }
    if (static_cast<long>(observed.size()) > cfg.max_lag + 1) {
        const auto curve = lagged_abs_correlation(observed, cfg.max_lag);
        for (std::size_t i = 0; i < curve.size(); ++i) observed_curve[i] = curve[i].correlation;
    }
    auto row = stats_row(pred.stats);
    row.insert(row.begin(), "predictive");
    stat_rows.push_back(std::move(row));
    files.write_csv("predictive_stats.csv", {"source", "n", "mean", "variance", "skewness", "kurtosis"}, stat_rows);

    std::vector<std::vector<std::string>> curve_rows;
    for (std::size_t i = 0; i < pred.curve.size(); ++i) {
        curve_rows.push_back(
            {std::to_string(pred.curve[i].lag), opt_double(observed_curve[i]), opt_double(pred.curve[i].correlation)});
    }
    files.write_csv("predictive_correlation.csv", {"lag", "observed", "predictive"}, curve_rows);
    Json out = estimate_json(run, opts);
    out["command"] = "predict";
    out["horizon"] = horizon;
    out["draws_per_level"] = pred.draws_per_level;
    out["predictive"] = Json{{"mean", pred.stats.mean},
                             {"variance", pred.stats.variance},
                             {"skewness", opt_json(pred.stats.skewness)},
                             {"kurtosis", opt_json(pred.stats.kurtosis)}};
    files.write_json("predict.json", out);
}

}  // namespace

RunConfig parse_config_text(std::string_view text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::Config, "cli_io", "parse_config",
                    "line " + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig cfg;
    cfg.model = default_params(ModelKind::StateSpace);
    cfg.model.vol = VolParams{1.0, 0.5, 1.0, 0.5};
    cfg.model.rho = -0.5;
    cfg.model.r = 0.0;

    const auto& table = schema();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) config_error(section, "key outside of any section");
        const auto sec = table.find(section);
        if (sec == table.end()) config_error(section, "unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            const std::string field = section + "." + key;
            const auto setter = sec->second.find(key);
            if (setter == sec->second.end()) config_error(field, "unknown key '" + key + "'");
            setter->second(cfg, field, trim(value.data()));
        }
    }
    validate_config(cfg);
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cli_io", "parse_config", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string resolved_config_text(const RunConfig& c) {
    std::ostringstream o;
    const ModelParams& m = c.model;
    o << "[model]\n";
    o << "kind = " << to_string(m.model_kind) << "\n";
    o << "estimate_H = " << (m.estimate_H ? "true" : "false") << "\n";
    o << "drift_in_mean = " << (m.drift_in_mean ? "true" : "false") << "\n";
    for (ParamId id : kAllParams) o << name(id) << " = " << fmt_g(m.get(id)) << "\n";
    o << "\n[data]\n";
    o << "path = " << c.data_path << "\n";
    o << "format = " << to_string(c.data_format) << "\n";
    o << "T = " << c.T << "\n";
    o << "data_level = " << c.data_level << "\n";
    o << "y0 = " << fmt_g(c.y0) << "\n";
    o << "\n[inference]\n";
    o << "N = " << c.N << "\n";
    o << "M = " << c.M << "\n";
    o << "level = " << c.level << "\n";
    o << "epsilon = " << fmt_g(c.epsilon) << "\n";
    o << "base_level = " << c.base_level << "\n";
    o << "max_level = " << c.max_level << "\n";
    o << "M_levels = " << join(c.M_levels, [](std::size_t v) { return std::to_string(v); }) << "\n";
    o << "burn_in = " << fmt_g(c.burn_in) << "\n";
    o << "step_sizes = " << join(c.step_sizes, fmt_g) << "\n";
    o << "pilot_batches = " << c.pilot_batches << "\n";
    o << "pilot_batch_size = " << c.pilot_batch_size << "\n";
    o << "c_M = " << fmt_g(c.constants.c_M) << "\n";
    o << "c_L = " << fmt_g(c.constants.c_L) << "\n";
    o << "M_min = " << c.constants.M_min << "\n";
    o << "max_init_retries = " << c.max_init_retries << "\n";
    o << "start = " << (c.start_at_model ? "model" : "prior") << "\n";
    std::string fns;
    for (std::size_t i = 0; i < c.functionals.size(); ++i) fns += (i ? "; " : "") + c.functionals[i];
    o << "functionals = " << fns << "\n";
    o << "\n[study]\n";
    o << "epsilons = " << join(c.epsilons, fmt_g) << "\n";
    o << "replicates = " << c.replicates << "\n";
    o << "reference_factor = " << fmt_g(c.reference_factor) << "\n";
    o << "\n[analysis]\n";
    o << "max_lag = " << c.max_lag << "\n";
    o << "\n[predict]\n";
    o << "T_pred = " << c.T_pred << "\n";
    o << "n_draws = " << c.n_draws << "\n";
    o << "\n[seeds]\n";
    o << "root = " << c.seed << "\n";
    o << "\n[output]\n";
    o << "dir = " << c.out_dir << "\n";
    return o.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const RunConfig& cfg) {
    RunConfig keyed = cfg;
    keyed.out_dir.clear();
    return fnv1a64(resolved_config_text(keyed));
}

ObservationSeries load_price_series(const std::string& path) {
    const CsvTable table = read_csv(path, "load_price_series");
    const auto price_col = table.column("price");
    const auto returns_col = table.column("returns");
    ObservationSeries out;
    if (price_col >= 0) {
        std::vector<double> prices;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const double p = cell_double(table, i, price_col, "load_price_series");
            if (!(p > 0.0)) {
                throw Error(ErrorKind::Domain, "cli_io", "load_price_series",
                            "line " + std::to_string(table.line_numbers[i]) + ": price must be positive");
            }
            prices.push_back(p);
        }
        if (prices.size() < 2) {
            throw Error(ErrorKind::InsufficientData, "cli_io", "load_price_series",
                        "need at least two prices to form a return");
        }
        out.y = log_returns(prices);
    } else if (returns_col >= 0) {
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            out.y.push_back(cell_double(table, i, returns_col, "load_price_series"));
        }
        if (out.y.empty()) {
            throw Error(ErrorKind::InsufficientData, "cli_io", "load_price_series", "no returns in '" + path + "'");
        }
    } else {
        throw Error(ErrorKind::Schema, "cli_io", "load_price_series",
                    "'" + path + "' needs a price or returns column");
    }
    return out;
}

ObservationSeries load_observations(const std::string& path) {
    const CsvTable table = read_csv(path, "load_observations");
    const auto y_col = table.column("y");
    const auto t_col = table.column("t");
    if (y_col < 0) throw Error(ErrorKind::Schema, "cli_io", "load_observations", "'" + path + "' needs a y column");
    ObservationSeries out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const double y = cell_double(table, i, y_col, "load_observations");
        if (t_col >= 0 && cell_double(table, i, t_col, "load_observations") == 0.0) {
            out.y0 = y;
        } else {
            out.y.push_back(y);
        }
    }
    if (out.y.empty()) {
        throw Error(ErrorKind::InsufficientData, "cli_io", "load_observations", "no observations in '" + path + "'");
    }
    return out;
}

ObservationSeries cumulative_observations(std::span<const double> returns, double y0) {
    ObservationSeries out;
    out.y0 = y0;
    double y = y0;
    for (double r : returns) {
        y += r;
        out.y.push_back(y);
    }
    return out;
}

ObservationSeries resolve_observations(const RunConfig& cfg) {
    if (cfg.data_path.empty()) return synthetic_data(cfg).y;
    if (cfg.data_format == DataFormat::Prices) return cumulative_observations(load_price_series(cfg.data_path).y, cfg.y0);
    return load_observations(cfg.data_path);
}

std::vector<Functional> resolve_functionals(const RunConfig& cfg) {
    if (cfg.functionals.empty()) return coordinate_functionals(cfg.model.model_kind, cfg.model.estimate_H);
    std::vector<Functional> out;
    for (const auto& expr : cfg.functionals) out.push_back(parse_functional(expr));
    return out;
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17e", x);
    return buf;
}

void run_command(std::string_view command, const RunConfig& cfg) {
    using Runner = void (*)(const RunConfig&, const OutputFiles&);
    static const std::pair<std::string_view, Runner> commands[] = {
        {"simulate", run_simulate},         {"pmcmc", run_pmcmc},
        {"mlpmcmc", run_mlpmcmc},           {"rate-study", run_rate_study},
        {"analyze-returns", run_analyze_returns}, {"predict", run_predict},
    };
    for (const auto& [cmd, runner] : commands) {
        if (cmd == command) {
            const OutputFiles files(cfg);
            runner(cfg, files);
            return;
        }
    }
    throw Error(ErrorKind::Config, "cli_io", "run", "unknown command '" + std::string(command) + "'");
}

}  // namespace mlpmcmc
