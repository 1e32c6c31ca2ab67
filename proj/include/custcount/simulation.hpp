#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "custcount/estimators.hpp"
#include "custcount/matrix.hpp"
#include "custcount/model.hpp"

namespace custcount {

// One synthetic scenario: population parameters of the monitored and
// unmonitored samples plus optional Dirichlet perturbation strengths
// for the unmonitored side.
struct ScenarioConfig {
    std::string label;
    std::string description;
    std::int64_t monitored_transactions = 0;
    std::int64_t unmonitored_transactions = 0;
    std::vector<double> monitored_mix;
    std::vector<double> unmonitored_mix;
    Matrix conditional;               // shared base; perturbed per draw when configured
    std::vector<double> frequencies;  // shared base, likewise
    std::optional<double> alpha_conditional;
    std::optional<double> alpha_frequency;
    bool dependent_last_column = false;
    int replications = 2000;
    std::uint64_t master_seed = 0;
};

void validate_scenario(const ScenarioConfig& config);

// The reference setup: six basket types, three segments, heavy movement
// of the mix toward the low-frequency segment, one million transactions
// on each side.
ScenarioConfig benchmark_parameters();

// Nine variations: identical mixes, the benchmark itself, small sample
// sizes, perturbed conditional matrix and/or frequencies, and a
// linearly dependent conditional column.
std::vector<ScenarioConfig> scenario_catalog();

// Each column redrawn as Dirichlet(alpha * column). Requires strictly
// positive entries and positive alpha.
Matrix dirichlet_perturb_columns(const Matrix& base, double alpha, std::mt19937_64& rng);

// Dirichlet draw rescaled so the vector keeps the base's sum.
std::vector<double> dirichlet_perturb_frequencies(std::span<const double> base,
                                                  double alpha, std::mt19937_64& rng);

// Counts summing to `total`, marginally Binomial(total, p[i]).
std::vector<std::int64_t> sample_multinomial(std::int64_t total,
                                             std::span<const double> probabilities,
                                             std::mt19937_64& rng);

struct SimulationOptions {
    // Near-dependent conditional estimates converge slowly, so the
    // simulation runs the optimizer longer and a little looser than the
    // library defaults.
    OptimizerSettings optimizer{.max_iterations = 400000, .tolerance = 1e-9};
    bool with_least_squares = false;
    std::optional<std::vector<double>> map_prior;
};

struct ReplicationOutcome {
    double true_count = 0.0;  // unmonitored unique customers this draw
    double naive_count = 0.0;
    double proposed_count = 0.0;
    double least_squares_count = std::numeric_limits<double>::quiet_NaN();
    double map_count = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    int monitored_redraws = 0;  // empty-segment re-draws; practically never
};

// One full draw: realize the unmonitored parameters, sample both
// transaction tables, estimate the conditional matrix from the
// monitored side, and produce true/naive/proposed unique-customer
// counts. Estimator failures mark the outcome not-ok.
ReplicationOutcome run_replication(const ScenarioConfig& config,
                                   std::mt19937_64& rng,
                                   const SimulationOptions& options = {});

struct EstimatorStats {
    double mean_ape = 0.0;
    double sd_ape = 0.0;
    double q95_ape = 0.0;
};

// Mean absolute percentage error, in percent.
double mape(std::span<const double> true_counts, std::span<const double> estimates);
EstimatorStats ape_stats(std::span<const double> true_counts, std::span<const double> estimates);

struct ScenarioResult {
    std::string label;
    std::string description;
    int replications = 0;
    int failures = 0;
    int monitored_redraws = 0;
    std::uint64_t master_seed = 0;
    EstimatorStats naive;
    EstimatorStats proposed;
    std::optional<EstimatorStats> least_squares;
    std::optional<EstimatorStats> map;
    std::vector<ReplicationOutcome> trace;
};

// Runs the configured number of replications on independent per-index
// RNG streams and aggregates APE statistics. Bit-reproducible for a
// fixed master seed.
ScenarioResult run_scenario(const ScenarioConfig& config, const SimulationOptions& options = {});

enum class SweepAxis { monitored_size, unmonitored_size, alpha_conditional, alpha_frequency };
std::string sweep_axis_name(SweepAxis axis);

struct SweepPoint {
    double value = 0.0;
    ScenarioResult result;
};

// One scenario per grid value, varying a single axis of the base
// configuration.
std::vector<SweepPoint> run_sweep(SweepAxis axis, std::span<const double> grid,
                                  ScenarioConfig base, int replications,
                                  const SimulationOptions& options = {});

// Delimited and structured emission; one scenario per row / one
// (scenario, estimator) pair per record.
std::string scenario_table_csv(std::span<const ScenarioResult> results);
std::string sweep_table_csv(SweepAxis axis, std::span<const SweepPoint> points);
std::string scenario_summary_json(std::span<const ScenarioResult> results);

}  // namespace custcount
