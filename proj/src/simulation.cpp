#include "custcount/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "custcount/errors.hpp"
#include "custcount/stats.hpp"

namespace custcount {

namespace {

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::vector<double> dirichlet_draw(std::span<const double> concentration, std::mt19937_64& rng) {
    std::vector<double> draw(concentration.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < concentration.size(); ++i) {
        std::gamma_distribution<double> gamma(concentration[i], 1.0);
        draw[i] = gamma(rng);
        sum += draw[i];
    }
    if (!(sum > 0.0)) {
        // All gamma draws underflowed; fall back to the mean direction.
        const double total =
            std::accumulate(concentration.begin(), concentration.end(), 0.0);
        for (std::size_t i = 0; i < draw.size(); ++i) draw[i] = concentration[i] / total;
        return draw;
    }
    for (double& x : draw) x /= sum;
    return draw;
}

// True/naive counts share this helper so that scenario arithmetic is
// bit-identical whenever the inputs coincide.
double expected_unique(std::int64_t transactions,
                       std::span<const double> mix,
                       std::span<const double> frequencies) {
    return unique_customers(mix, frequencies, static_cast<double>(transactions)).count;
}

double ape_percent(double true_value, double estimate) {
    return 100.0 * std::abs(true_value - estimate) / true_value;
}

}  // namespace

void validate_scenario(const ScenarioConfig& config) {
    if (config.monitored_transactions <= 0 || config.unmonitored_transactions <= 0)
        throw input_error("scenario sample sizes must be positive");
    if (config.replications < 1) throw input_error("scenario needs at least one replication");
    if (!is_simplex(config.monitored_mix, 1e-9) || !is_simplex(config.unmonitored_mix, 1e-9))
        throw input_error("scenario segment mixes must be simplex vectors");
    const std::size_t m = config.monitored_mix.size();
    if (config.unmonitored_mix.size() != m || config.frequencies.size() != m ||
        config.conditional.cols() != m)
        throw input_error("scenario dimensions are inconsistent");
    for (double f : config.frequencies)
        if (!(f > 0.0)) throw input_error("scenario frequencies must be positive");
    for (std::size_t j = 0; j < m; ++j) {
        if (!is_simplex(config.conditional.column(j), 1e-9))
            throw input_error("scenario conditional column " + std::to_string(j + 1) +
                              " is not a simplex vector");
    }
    if (config.alpha_conditional && !(*config.alpha_conditional > 0.0))
        throw input_error("conditional perturbation strength must be positive");
    if (config.alpha_frequency && !(*config.alpha_frequency > 0.0))
        throw input_error("frequency perturbation strength must be positive");
}

ScenarioConfig benchmark_parameters() {
    ScenarioConfig config;
    config.label = "ii";
    config.description = "Benchmark scenario";
    config.monitored_transactions = 1000000;
    config.unmonitored_transactions = 1000000;
    config.monitored_mix = {0.60, 0.20, 0.20};
    config.unmonitored_mix = {0.20, 0.20, 0.60};
    config.conditional = Matrix::from_rows({
        {0.40, 0.10, 0.10},
        {0.20, 0.10, 0.10},
        {0.10, 0.40, 0.10},
        {0.10, 0.20, 0.10},
        {0.10, 0.10, 0.40},
        {0.10, 0.10, 0.20},
    });
    config.frequencies = {6.0, 3.0, 1.5};
    config.replications = 2000;
    return config;
}

std::vector<ScenarioConfig> scenario_catalog() {
    std::vector<ScenarioConfig> catalog;
    catalog.reserve(9);

    ScenarioConfig base = benchmark_parameters();

    ScenarioConfig s = base;
    s.label = "i";
    s.description = "No change in segment mix";
    s.unmonitored_mix = s.monitored_mix;
    catalog.push_back(s);

    catalog.push_back(base);

    s = base;
    s.label = "iii";
    s.description = "Small monitored sample (1000)";
    s.monitored_transactions = 1000;
    catalog.push_back(s);

    s = base;
    s.label = "iv";
    s.description = "Small unmonitored sample (1000)";
    s.unmonitored_transactions = 1000;
    catalog.push_back(s);

    s = base;
    s.label = "v";
    s.description = "Both samples small (1000)";
    s.monitored_transactions = 1000;
    s.unmonitored_transactions = 1000;
    catalog.push_back(s);

    s = base;
    s.label = "vi";
    s.description = "Perturbed conditional matrix (alpha 100)";
    s.alpha_conditional = 100.0;
    catalog.push_back(s);

    s = base;
    s.label = "vii";
    s.description = "Perturbed frequencies (alpha 100)";
    s.alpha_frequency = 100.0;
    catalog.push_back(s);

    s = base;
    s.label = "viii";
    s.description = "Perturbed conditional and frequencies (alpha 100)";
    s.alpha_conditional = 100.0;
    s.alpha_frequency = 100.0;
    catalog.push_back(s);

    s = base;
    s.label = "ix";
    s.description = "Linearly dependent conditional column";
    for (std::size_t i = 0; i < s.conditional.rows(); ++i)
        s.conditional(i, 2) = 0.5 * (s.conditional(i, 0) + s.conditional(i, 1));
    s.dependent_last_column = true;
    catalog.push_back(s);

    return catalog;
}

Matrix dirichlet_perturb_columns(const Matrix& base, double alpha, std::mt19937_64& rng) {
    if (!(alpha > 0.0)) throw input_error("Dirichlet strength must be positive");
    Matrix out(base.rows(), base.cols());
    for (std::size_t j = 0; j < base.cols(); ++j) {
        std::vector<double> concentration = base.column(j);
        for (double& c : concentration) {
            if (!(c > 0.0))
                throw input_error("Dirichlet perturbation needs strictly positive entries");
            c *= alpha;
        }
        const std::vector<double> column = dirichlet_draw(concentration, rng);
        out.set_column(j, column);
    }
    return out;
}

std::vector<double> dirichlet_perturb_frequencies(std::span<const double> base,
                                                  double alpha, std::mt19937_64& rng) {
    if (!(alpha > 0.0)) throw input_error("Dirichlet strength must be positive");
    const double sum = std::accumulate(base.begin(), base.end(), 0.0);
    std::vector<double> concentration(base.size());
    for (std::size_t j = 0; j < base.size(); ++j) {
        if (!(base[j] > 0.0))
            throw input_error("Dirichlet perturbation needs strictly positive entries");
        concentration[j] = alpha * base[j] / sum;
    }
    std::vector<double> draw = dirichlet_draw(concentration, rng);
    for (double& x : draw) x *= sum;
    return draw;
}

std::vector<std::int64_t> sample_multinomial(std::int64_t total,
                                             std::span<const double> probabilities,
                                             std::mt19937_64& rng) {
    if (total < 0) throw input_error("multinomial total must be non-negative");
    std::vector<std::int64_t> counts(probabilities.size(), 0);
    std::int64_t remaining = total;
    double mass = 1.0;
    for (std::size_t i = 0; i + 1 < probabilities.size() && remaining > 0; ++i) {
        const double p = std::clamp(probabilities[i] / mass, 0.0, 1.0);
        std::binomial_distribution<std::int64_t> binom(remaining, p);
        const std::int64_t c = binom(rng);
        counts[i] = c;
        remaining -= c;
        mass -= probabilities[i];
        if (mass <= 0.0) break;
    }
    if (!counts.empty()) counts.back() += remaining;
    return counts;
}

ReplicationOutcome run_replication(const ScenarioConfig& config,
                                   std::mt19937_64& rng,
                                   const SimulationOptions& options) {
    const std::size_t n = config.conditional.rows();
    const std::size_t m = config.conditional.cols();

    ReplicationOutcome outcome;

    // Realized unmonitored parameters for this draw.
    Matrix realized_conditional = config.conditional;
    if (config.alpha_conditional)
        realized_conditional =
            dirichlet_perturb_columns(config.conditional, *config.alpha_conditional, rng);
    std::vector<double> realized_frequencies = config.frequencies;
    if (config.alpha_frequency)
        realized_frequencies =
            dirichlet_perturb_frequencies(config.frequencies, *config.alpha_frequency, rng);

    // Monitored sample: segment totals, then basket types per segment.
    // Redrawn in the (practically unreachable) event of an empty segment,
    // since segments are defined on the monitored sample.
    std::vector<std::int64_t> segment_totals;
    for (;;) {
        segment_totals = sample_multinomial(config.monitored_transactions, config.monitored_mix, rng);
        if (std::all_of(segment_totals.begin(), segment_totals.end(),
                        [](std::int64_t c) { return c > 0; }))
            break;
        ++outcome.monitored_redraws;
    }

    CountsTable monitored;
    monitored.total = config.monitored_transactions;
    monitored.basket_counts.assign(n, 0);
    monitored.segment_counts = segment_totals;
    monitored.joint_counts.emplace(n * m, 0);
    for (std::size_t j = 0; j < m; ++j) {
        const std::vector<double> column = config.conditional.column(j);
        const std::vector<std::int64_t> per_type = sample_multinomial(segment_totals[j], column, rng);
        for (std::size_t i = 0; i < n; ++i) {
            (*monitored.joint_counts)[i * m + j] = per_type[i];
            monitored.basket_counts[i] += per_type[i];
        }
    }

    // Unmonitored sample: only basket-type totals are observable.
    std::vector<double> basket_counts(n, 0.0);
    const std::vector<std::int64_t> unmonitored_segments =
        sample_multinomial(config.unmonitored_transactions, config.unmonitored_mix, rng);
    for (std::size_t j = 0; j < m; ++j) {
        const std::vector<double> column = realized_conditional.column(j);
        const std::vector<std::int64_t> per_type =
            sample_multinomial(unmonitored_segments[j], column, rng);
        for (std::size_t i = 0; i < n; ++i) basket_counts[i] += static_cast<double>(per_type[i]);
    }

    outcome.true_count = expected_unique(config.unmonitored_transactions, config.unmonitored_mix,
                                         realized_frequencies);
    outcome.naive_count = expected_unique(config.unmonitored_transactions, config.monitored_mix,
                                          config.frequencies);

    // The proposed estimator sees sampled frequencies: per-segment
    // transactions over the monitored customer count implied by the
    // configuration. Loyalty customers are identified, so that count is
    // known; the randomness of the transaction tally is not.
    std::vector<double> estimated_frequencies(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double implied_customers = static_cast<double>(config.monitored_transactions) *
                                         config.monitored_mix[j] / config.frequencies[j];
        estimated_frequencies[j] = static_cast<double>(segment_totals[j]) / implied_customers;
    }

    try {
        const MonitoredEstimate monitored_estimate =
            estimate_monitored(monitored, estimated_frequencies);
        const OptimizeResult fit =
            mle_estimate(basket_counts, monitored_estimate.model.conditional, options.optimizer);
        if (!fit.converged) return outcome;
        outcome.proposed_count =
            unique_customers(fit.segment_mix, estimated_frequencies,
                             static_cast<double>(config.unmonitored_transactions))
                .count;

        if (options.with_least_squares) {
            std::vector<double> basket_probs(n);
            for (std::size_t i = 0; i < n; ++i)
                basket_probs[i] =
                    basket_counts[i] / static_cast<double>(config.unmonitored_transactions);
            const OptimizeResult ls =
                ls_estimate(basket_probs, monitored_estimate.model.conditional, options.optimizer);
            if (!ls.converged) return outcome;
            outcome.least_squares_count =
                unique_customers(ls.segment_mix, estimated_frequencies,
                                 static_cast<double>(config.unmonitored_transactions))
                    .count;
        }
        if (options.map_prior) {
            const OptimizeResult posterior =
                map_estimate(basket_counts, monitored_estimate.model.conditional,
                             PriorSpec{*options.map_prior}, options.optimizer);
            if (!posterior.converged) return outcome;
            outcome.map_count =
                unique_customers(posterior.segment_mix, estimated_frequencies,
                                 static_cast<double>(config.unmonitored_transactions))
                    .count;
        }
    } catch (const input_error&) {
        return outcome;
    } catch (const identifiability_error&) {
        return outcome;
    }
    outcome.ok = true;
    return outcome;
}

double mape(std::span<const double> true_counts, std::span<const double> estimates) {
    if (true_counts.size() != estimates.size()) throw input_error("APE series differ in length");
    if (true_counts.empty()) throw input_error("APE of an empty series");
    double acc = 0.0;
    for (std::size_t s = 0; s < true_counts.size(); ++s) {
        if (!(true_counts[s] > 0.0)) throw input_error("true counts must be positive");
        acc += ape_percent(true_counts[s], estimates[s]);
    }
    return acc / static_cast<double>(true_counts.size());
}

EstimatorStats ape_stats(std::span<const double> true_counts, std::span<const double> estimates) {
    if (true_counts.size() != estimates.size()) throw input_error("APE series differ in length");
    if (true_counts.empty()) throw input_error("APE of an empty series");
    std::vector<double> apes(true_counts.size());
    for (std::size_t s = 0; s < true_counts.size(); ++s) {
        if (!(true_counts[s] > 0.0)) throw input_error("true counts must be positive");
        apes[s] = ape_percent(true_counts[s], estimates[s]);
    }
    EstimatorStats stats;
    stats.mean_ape = mean(apes);
    stats.sd_ape = apes.size() > 1 ? sample_sd(apes) : 0.0;
    stats.q95_ape = quantile(apes, 0.95);
    return stats;
}

ScenarioResult run_scenario(const ScenarioConfig& config, const SimulationOptions& options) {
    validate_scenario(config);

    ScenarioResult result;
    result.label = config.label;
    result.description = config.description;
    result.replications = config.replications;
    result.master_seed = config.master_seed;
    result.trace.reserve(static_cast<std::size_t>(config.replications));

    for (int rep = 0; rep < config.replications; ++rep) {
        auto rng = derive_stream(config.master_seed, static_cast<std::uint64_t>(rep));
        ReplicationOutcome outcome = run_replication(config, rng, options);
        result.monitored_redraws += outcome.monitored_redraws;
        if (!outcome.ok) ++result.failures;
        result.trace.push_back(std::move(outcome));
    }

    std::vector<double> truth, naive, proposed, least_squares, map_counts;
    for (const ReplicationOutcome& outcome : result.trace) {
        if (!outcome.ok) continue;
        truth.push_back(outcome.true_count);
        naive.push_back(outcome.naive_count);
        proposed.push_back(outcome.proposed_count);
        if (options.with_least_squares) least_squares.push_back(outcome.least_squares_count);
        if (options.map_prior) map_counts.push_back(outcome.map_count);
    }
    if (truth.empty()) throw empty_sample_error("every replication failed in scenario " + config.label);

    result.naive = ape_stats(truth, naive);
    result.proposed = ape_stats(truth, proposed);
    if (options.with_least_squares) result.least_squares = ape_stats(truth, least_squares);
    if (options.map_prior) result.map = ape_stats(truth, map_counts);
    return result;
}

std::string sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::monitored_size: return "a0";
        case SweepAxis::unmonitored_size: return "a";
        case SweepAxis::alpha_conditional: return "alpha_r";
        case SweepAxis::alpha_frequency: return "alpha_f";
    }
    return "unknown";
}

std::vector<SweepPoint> run_sweep(SweepAxis axis, std::span<const double> grid,
                                  ScenarioConfig base, int replications,
                                  const SimulationOptions& options) {
    if (grid.empty()) throw input_error("sweep grid is empty");
    std::vector<SweepPoint> points;
    points.reserve(grid.size());
    for (double value : grid) {
        ScenarioConfig config = base;
        config.replications = replications;
        switch (axis) {
            case SweepAxis::monitored_size:
                config.monitored_transactions = static_cast<std::int64_t>(value);
                break;
            case SweepAxis::unmonitored_size:
                config.unmonitored_transactions = static_cast<std::int64_t>(value);
                break;
            case SweepAxis::alpha_conditional:
                config.alpha_conditional = value;
                break;
            case SweepAxis::alpha_frequency:
                config.alpha_frequency = value;
                break;
        }
        config.label = sweep_axis_name(axis) + "=" + format_fixed(value, 0);
        config.description = "Sweep point";
        points.push_back({value, run_scenario(config, options)});
    }
    return points;
}

std::string scenario_table_csv(std::span<const ScenarioResult> results) {
    std::ostringstream out;
    out << "scenario,description,naive_m,naive_sd,naive_q95,"
           "proposed_m,proposed_sd,proposed_q95,replications,failures,seed\n";
    for (const ScenarioResult& r : results) {
        out << r.label << ',' << r.description << ','
            << format_fixed(r.naive.mean_ape, 2) << ',' << format_fixed(r.naive.sd_ape, 2) << ','
            << format_fixed(r.naive.q95_ape, 2) << ',' << format_fixed(r.proposed.mean_ape, 2)
            << ',' << format_fixed(r.proposed.sd_ape, 2) << ','
            << format_fixed(r.proposed.q95_ape, 2) << ',' << r.replications << ',' << r.failures
            << ',' << r.master_seed << '\n';
    }
    return out.str();
}

std::string sweep_table_csv(SweepAxis axis, std::span<const SweepPoint> points) {
    std::ostringstream out;
    out << "axis,value,estimator,mean_ape,ci_half_width,sd_ape,q95_ape,replications,failures\n";
    const std::string axis_name = sweep_axis_name(axis);
    for (const SweepPoint& point : points) {
        const int done = point.result.replications - point.result.failures;
        auto emit = [&](const char* estimator, const EstimatorStats& stats) {
            const double half_width =
                done > 1 ? 1.96 * stats.sd_ape / std::sqrt(static_cast<double>(done)) : 0.0;
            out << axis_name << ',' << format_fixed(point.value, 6) << ',' << estimator << ','
                << format_fixed(stats.mean_ape, 6) << ',' << format_fixed(half_width, 6) << ','
                << format_fixed(stats.sd_ape, 6) << ',' << format_fixed(stats.q95_ape, 6) << ','
                << point.result.replications << ',' << point.result.failures << '\n';
        };
        emit("naive", point.result.naive);
        emit("proposed", point.result.proposed);
        if (point.result.least_squares) emit("least-squares", *point.result.least_squares);
        if (point.result.map) emit("map", *point.result.map);
    }
    return out.str();
}

std::string scenario_summary_json(std::span<const ScenarioResult> results) {
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    for (const ScenarioResult& r : results) {
        auto emit = [&](const char* estimator, const EstimatorStats& stats) {
            nlohmann::ordered_json record;
            record["label"] = r.label;
            record["description"] = r.description;
            record["estimator"] = estimator;
            record["mean_ape"] = stats.mean_ape;
            record["sd_ape"] = stats.sd_ape;
            record["q95_ape"] = stats.q95_ape;
            record["replications"] = r.replications;
            record["failures"] = r.failures;
            record["seed"] = r.master_seed;
            records.push_back(std::move(record));
        };
        emit("naive", r.naive);
        emit("proposed", r.proposed);
        if (r.least_squares) emit("least-squares", *r.least_squares);
        if (r.map) emit("map", *r.map);
    }
    return records.dump(2) + "\n";
}

}  // namespace custcount
