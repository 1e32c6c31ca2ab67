// custcount: estimate unique unmonitored retail customers from a
// transaction log, run the validation-split experiment, or drive the
// simulation study.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "custcount/errors.hpp"
#include "custcount/pipeline.hpp"
#include "custcount/simulation.hpp"
#include "custcount/stats.hpp"

namespace {

namespace fs = std::filesystem;
using namespace custcount;

constexpr int kExitInput = 2;
constexpr int kExitIdentifiability = 3;
constexpr int kExitNonConvergence = 4;

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write output file: " + path.string());
    out << content;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

EstimatorKind parse_estimator(const std::string& name) {
    if (name == "mle") return EstimatorKind::mle;
    if (name == "least-squares") return EstimatorKind::least_squares;
    if (name == "map") return EstimatorKind::map;
    throw input_error("unknown estimator: " + name);
}

struct CommonFlags {
    std::string input;
    std::string output_dir = ".";
    std::string period = "all";
    std::string estimator = "mle";
    std::vector<double> prior;
    int basket_types = 0;
    int segments = 0;
    double cap = 15.0;
    std::uint64_t seed = 1;
    int restarts = 10;
    std::string delimiter = ",";
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool with_estimator) {
    cmd->add_option("--input", flags.input, "transaction log (delimited, with header)")
        ->required();
    cmd->add_option("--out", flags.output_dir, "output directory");
    cmd->add_option("--period", flags.period, "all|weekly|monthly|quarterly|yearly");
    cmd->add_option("--n-baskets", flags.basket_types, "basket-type count; 0 selects by Davies-Bouldin");
    cmd->add_option("--m-segments", flags.segments, "segment count; 0 selects by Davies-Bouldin");
    cmd->add_option("--cap", flags.cap, "visits-per-month cap for monitored customers");
    cmd->add_option("--seed", flags.seed, "clustering seed");
    cmd->add_option("--restarts", flags.restarts, "k-means restarts");
    cmd->add_option("--delimiter", flags.delimiter, "field delimiter (single character)");
    if (with_estimator) {
        cmd->add_option("--estimator", flags.estimator, "mle|least-squares|map");
        cmd->add_option("--prior", flags.prior, "Dirichlet concentrations (map estimator only)")
            ->delimiter(',');
    }
}

RunConfig make_run_config(const CommonFlags& flags) {
    RunConfig config;
    config.basket_types = flags.basket_types;
    config.segments = flags.segments;
    config.frequency_cap = flags.cap;
    config.estimator = parse_estimator(flags.estimator);
    if (!flags.prior.empty()) config.prior = flags.prior;
    config.seed = flags.seed;
    config.restarts = flags.restarts;
    return config;
}

IngestResult load_records(const CommonFlags& flags) {
    if (flags.delimiter.size() != 1) throw input_error("delimiter must be a single character");
    IngestOptions options;
    options.delimiter = flags.delimiter[0];
    IngestResult result = ingest(flags.input, options);
    std::cout << "ingested " << result.summary.rows_accepted << " rows ("
              << result.summary.rows_rejected << " rejected), " << result.summary.baskets
              << " baskets, monitored share " << result.summary.monitored_share << "\n";
    for (const RejectedRow& reject : result.summary.rejects)
        std::cout << "  rejected line " << reject.line << ": " << reject.reason << "\n";
    return result;
}

std::string slice_suffix(const std::string& label) {
    return label == "all" ? "" : "_" + label;
}

int run_estimate(const CommonFlags& flags) {
    const RunConfig config = make_run_config(flags);
    const IngestResult data = load_records(flags);
    const auto slices = slice_by_period(data.records, parse_period_kind(flags.period));

    bool all_converged = true;
    for (const PeriodSlice& slice : slices) {
        const Report report = estimate_pipeline(slice.records, config, slice.label, slice.months);
        all_converged = all_converged && report.converged;
        const fs::path dir = flags.output_dir;
        write_file(dir / ("report" + slice_suffix(slice.label) + ".json"), report_to_json(report));
        write_file(dir / ("segments" + slice_suffix(slice.label) + ".csv"), segments_csv(report));
        std::cout << "period " << slice.label << ": estimated " << report.estimated_uniques
                  << " unique unmonitored customers (naive " << report.naive_uniques << ")\n";
    }
    return all_converged ? 0 : kExitNonConvergence;
}

int run_validate(const CommonFlags& flags, const std::string& flag_file, double flag_fraction) {
    const RunConfig config = make_run_config(flags);
    const IngestResult data = load_records(flags);

    std::set<std::string> flagged;
    if (!flag_file.empty()) {
        std::ifstream in(flag_file);
        if (!in) throw io_error("cannot open flag file: " + flag_file);
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
            if (!line.empty()) flagged.insert(line);
        }
    } else {
        // Deterministic pseudo-random flag per customer id.
        std::set<std::string> customers;
        for (const TransactionRecord& record : data.records)
            if (record.customer_id) customers.insert(*record.customer_id);
        for (const std::string& customer : customers) {
            const double u = static_cast<double>(mix64(fnv1a(customer) ^ mix64(flags.seed))) /
                             18446744073709551616.0;
            if (u < flag_fraction) flagged.insert(customer);
        }
    }

    const auto slices = slice_by_period(data.records, parse_period_kind(flags.period));
    std::vector<ValidationOutcome> outcomes;
    bool all_converged = true;
    for (const PeriodSlice& slice : slices) {
        ValidationOutcome outcome =
            validation_split(slice.records, flagged, config, slice.label, slice.months);
        all_converged = all_converged && outcome.report.converged;
        std::cout << "period " << slice.label << ": true " << outcome.true_uniques
                  << ", proposed APE " << outcome.proposed_ape << "%, naive APE "
                  << outcome.naive_ape << "%\n";
        outcomes.push_back(std::move(outcome));
    }

    const fs::path dir = flags.output_dir;
    write_file(dir / "validation.csv", validation_csv(outcomes));
    write_file(dir / "validation_summary.csv", validation_summary_csv(flags.period, outcomes));
    return all_converged ? 0 : kExitNonConvergence;
}

int run_cluster_only(const CommonFlags& flags) {
    const IngestResult data = load_records(flags);
    const auto slices = slice_by_period(data.records, parse_period_kind(flags.period));

    for (const PeriodSlice& slice : slices) {
        const RunConfig config = make_run_config(flags);
        const ClusterSummary summary =
            cluster_summary(slice.records, config, slice.label, slice.months);
        nlohmann::ordered_json doc;
        doc["period"] = summary.period_label;
        doc["basket_types"] = summary.basket_types;
        doc["segment_count"] = summary.segment_count;
        doc["basket_db_index"] = summary.basket_db_index;
        doc["customer_db_index"] = summary.customer_db_index;
        nlohmann::ordered_json segments = nlohmann::ordered_json::array();
        for (int j = 0; j < summary.segment_count; ++j) {
            nlohmann::ordered_json segment;
            segment["segment"] = j + 1;
            segment["monitored_uniques"] = summary.segment_customers[static_cast<std::size_t>(j)];
            segment["frequency"] = summary.segment_frequencies[static_cast<std::size_t>(j)];
            segment["center"] = summary.segment_centers.row(static_cast<std::size_t>(j));
            segments.push_back(std::move(segment));
        }
        doc["segments"] = std::move(segments);
        doc["degenerate_baskets_excluded"] = summary.degenerate_baskets_excluded;
        doc["extreme_frequency_removed"] = summary.extreme_frequency_removed;
        write_file(fs::path(flags.output_dir) / ("clusters" + slice_suffix(slice.label) + ".json"),
                   doc.dump(2) + "\n");
        std::cout << "period " << slice.label << ": " << summary.basket_types
                  << " basket types, " << summary.segment_count << " segments\n";
    }
    return 0;
}

int run_simulate(const std::string& scenario, const std::string& sweep,
                 const std::vector<double>& grid, int replications, std::uint64_t seed,
                 bool with_ls, const std::vector<double>& map_prior,
                 const std::string& output_dir) {
    if (scenario.empty() == sweep.empty())
        throw input_error("pick exactly one of --scenario or --sweep");

    SimulationOptions options;
    options.with_least_squares = with_ls;
    if (!map_prior.empty()) options.map_prior = map_prior;
    const fs::path dir = output_dir;

    if (!scenario.empty()) {
        std::vector<ScenarioConfig> selected;
        for (ScenarioConfig& config : scenario_catalog()) {
            if (scenario == "all" || config.label == scenario) {
                config.replications = replications;
                config.master_seed = seed;
                selected.push_back(std::move(config));
            }
        }
        if (selected.empty()) throw input_error("unknown scenario: " + scenario);
        std::vector<ScenarioResult> results;
        results.reserve(selected.size());
        for (const ScenarioConfig& config : selected) {
            results.push_back(run_scenario(config, options));
            const ScenarioResult& r = results.back();
            std::cout << "scenario " << r.label << ": naive M=" << r.naive.mean_ape
                      << " proposed M=" << r.proposed.mean_ape << " (failures " << r.failures
                      << ")\n";
        }
        write_file(dir / "table1.csv", scenario_table_csv(results));
        write_file(dir / "summary.json", scenario_summary_json(results));
        return 0;
    }

    SweepAxis axis;
    if (sweep == "a0") axis = SweepAxis::monitored_size;
    else if (sweep == "a") axis = SweepAxis::unmonitored_size;
    else if (sweep == "alpha_r") axis = SweepAxis::alpha_conditional;
    else if (sweep == "alpha_f") axis = SweepAxis::alpha_frequency;
    else throw input_error("unknown sweep axis: " + sweep);
    if (grid.empty()) throw input_error("a sweep needs --grid values");

    ScenarioConfig base = benchmark_parameters();
    base.master_seed = seed;
    const auto points = run_sweep(axis, grid, base, replications, options);
    write_file(dir / ("sweep_" + sweep + ".csv"), sweep_table_csv(axis, points));
    for (const SweepPoint& point : points)
        std::cout << sweep << "=" << point.value << ": proposed M=" << point.result.proposed.mean_ape
                  << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unique-customer estimation from retail transaction logs"};
    app.require_subcommand(1);
    app.set_config("--config");

    CommonFlags estimate_flags, validate_flags, cluster_flags;
    std::string flag_file;
    double flag_fraction = 0.5;

    CLI::App* estimate_cmd = app.add_subcommand("estimate", "cluster, estimate and report");
    add_common_flags(estimate_cmd, estimate_flags, true);

    CLI::App* validate_cmd =
        app.add_subcommand("validate", "hold-out split inside the monitored data");
    add_common_flags(validate_cmd, validate_flags, true);
    validate_cmd->add_option("--flag-file", flag_file, "file of customer ids kept monitored");
    validate_cmd->add_option("--flag-fraction", flag_fraction,
                             "deterministic random share kept monitored");

    CLI::App* cluster_cmd = app.add_subcommand("cluster-only", "run clustering, skip estimation");
    add_common_flags(cluster_cmd, cluster_flags, false);

    CLI::App* simulate_cmd = app.add_subcommand("simulate", "scenario catalog and sweeps");
    std::string scenario, sweep, sim_out = ".";
    std::vector<double> grid, map_prior;
    int replications = 2000;
    std::uint64_t sim_seed = 0;
    bool with_ls = false;
    simulate_cmd->add_option("--scenario", scenario, "scenario label (i..ix) or 'all'");
    simulate_cmd->add_option("--sweep", sweep, "a0|a|alpha_r|alpha_f");
    simulate_cmd->add_option("--grid", grid, "sweep grid values")->delimiter(',');
    simulate_cmd->add_option("--nu", replications, "replications per scenario or grid point");
    simulate_cmd->add_option("--seed", sim_seed, "master seed");
    simulate_cmd->add_option("--out", sim_out, "output directory");
    simulate_cmd->add_flag("--with-ls", with_ls, "also run the least-squares estimator");
    simulate_cmd->add_option("--map-prior", map_prior,
                             "Dirichlet concentrations: also run the posterior-mode estimator")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
        if (estimate_cmd->parsed()) return run_estimate(estimate_flags);
        if (validate_cmd->parsed()) return run_validate(validate_flags, flag_file, flag_fraction);
        if (cluster_cmd->parsed()) return run_cluster_only(cluster_flags);
        if (simulate_cmd->parsed())
            return run_simulate(scenario, sweep, grid, replications, sim_seed, with_ls, map_prior,
                                sim_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitInput;
    } catch (const identifiability_error& e) {
        std::cerr << "identifiability error: " << e.what() << "\n";
        return kExitIdentifiability;
    } catch (const input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const io_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
