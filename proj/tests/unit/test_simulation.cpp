#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "custcount/errors.hpp"
#include "custcount/simulation.hpp"
#include "custcount/stats.hpp"

using namespace custcount;

TEST_CASE("benchmark parameters match the reference setup") {
    const ScenarioConfig benchmark = benchmark_parameters();
    CHECK(benchmark.monitored_mix == std::vector<double>{0.6, 0.2, 0.2});
    CHECK(benchmark.unmonitored_mix == std::vector<double>{0.2, 0.2, 0.6});
    CHECK(benchmark.frequencies == std::vector<double>{6.0, 3.0, 1.5});
    CHECK(benchmark.monitored_transactions == 1000000);
    CHECK(benchmark.unmonitored_transactions == 1000000);
    REQUIRE(benchmark.conditional.rows() == 6);
    REQUIRE(benchmark.conditional.cols() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 6; ++i) sum += benchmark.conditional(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Implied uniques: 300000 monitored, 500000 unmonitored.
    const UniqueCustomers monitored = unique_customers(
        benchmark.monitored_mix, benchmark.frequencies, 1e6);
    CHECK(monitored.count == doctest::Approx(300000.0).epsilon(1e-12));
    const UniqueCustomers unmonitored = unique_customers(
        benchmark.unmonitored_mix, benchmark.frequencies, 1e6);
    CHECK(unmonitored.count == doctest::Approx(500000.0).epsilon(1e-12));
    CHECK_NOTHROW(validate_scenario(benchmark));
}

TEST_CASE("scenario catalog covers the nine variations") {
    const auto catalog = scenario_catalog();
    REQUIRE(catalog.size() == 9);
    CHECK(catalog[0].label == "i");
    CHECK(catalog[0].unmonitored_mix == catalog[0].monitored_mix);
    CHECK(catalog[1].label == "ii");
    CHECK(catalog[2].monitored_transactions == 1000);
    CHECK(catalog[2].unmonitored_transactions == 1000000);
    CHECK(catalog[3].unmonitored_transactions == 1000);
    CHECK(catalog[4].monitored_transactions == 1000);
    CHECK(catalog[4].unmonitored_transactions == 1000);
    CHECK(catalog[5].alpha_conditional == 100.0);
    CHECK_FALSE(catalog[5].alpha_frequency.has_value());
    CHECK(catalog[6].alpha_frequency == 100.0);
    CHECK(catalog[7].alpha_conditional == 100.0);
    CHECK(catalog[7].alpha_frequency == 100.0);
    CHECK(catalog[8].dependent_last_column);
    const std::vector<double> dependent_column{0.25, 0.15, 0.25, 0.15, 0.10, 0.10};
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(catalog[8].conditional(i, 2) == doctest::Approx(dependent_column[i]).epsilon(1e-12));
    for (const ScenarioConfig& config : catalog) CHECK_NOTHROW(validate_scenario(config));
}

TEST_CASE("dirichlet column perturbation is calibrated") {
    const ScenarioConfig benchmark = benchmark_parameters();
    auto rng = derive_stream(1000, 0);
    const int draws = 2000;

    for (const auto& [alpha, expected] : {std::pair{100.0, 0.03}, {10.0, 0.08}}) {
        double total_abs = 0.0;
        auto local = derive_stream(1000, static_cast<std::uint64_t>(alpha));
        for (int d = 0; d < draws; ++d) {
            const Matrix drawn = dirichlet_perturb_columns(benchmark.conditional, alpha, local);
            for (std::size_t j = 0; j < 3; ++j) {
                double column_sum = 0.0;
                for (std::size_t i = 0; i < 6; ++i) {
                    total_abs += std::abs(drawn(i, j) - benchmark.conditional(i, j));
                    column_sum += drawn(i, j);
                }
                CHECK(column_sum == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
        CHECK(std::abs(total_abs / (draws * 18.0) - expected) < 0.005);
    }

    // Concentration limit: enormous alpha pins the draw to the base.
    const Matrix pinned = dirichlet_perturb_columns(benchmark.conditional, 1e8, rng);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(pinned(i, j) - benchmark.conditional(i, j)) < 1e-3);

    CHECK_THROWS_AS(dirichlet_perturb_columns(benchmark.conditional, 0.0, rng), input_error);
    CHECK_THROWS_AS(dirichlet_perturb_columns(Matrix(2, 2), 10.0, rng), input_error);
}

TEST_CASE("dirichlet column means track the base columns") {
    const ScenarioConfig benchmark = benchmark_parameters();
    auto rng = derive_stream(1001, 0);
    const int draws = 10000;
    Matrix sum(6, 3);
    for (int d = 0; d < draws; ++d) {
        const Matrix drawn = dirichlet_perturb_columns(benchmark.conditional, 100.0, rng);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 3; ++j) sum(i, j) += drawn(i, j);
    }
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double base = benchmark.conditional(i, j);
            const double se = std::sqrt(base * (1.0 - base) / 101.0 / draws);
            CHECK(std::abs(sum(i, j) / draws - base) < 3.0 * se);
        }
}

TEST_CASE("dirichlet frequency perturbation preserves the sum") {
    const std::vector<double> base{6.0, 3.0, 1.5};
    for (const auto& [alpha, expected] : {std::pair{100.0, 0.36}, {10.0, 1.10}}) {
        auto rng = derive_stream(1002, static_cast<std::uint64_t>(alpha));
        const int draws = 2000;
        double total_abs = 0.0;
        for (int d = 0; d < draws; ++d) {
            const auto drawn = dirichlet_perturb_frequencies(base, alpha, rng);
            CHECK(std::accumulate(drawn.begin(), drawn.end(), 0.0) ==
                  doctest::Approx(10.5).epsilon(1e-9));
            for (std::size_t j = 0; j < 3; ++j) total_abs += std::abs(drawn[j] - base[j]);
        }
        CHECK(std::abs(total_abs / (draws * 3.0) - expected) < 0.05);
    }
    auto rng = derive_stream(1002, 9);
    CHECK_THROWS_AS(dirichlet_perturb_frequencies(base, -1.0, rng), input_error);
}

TEST_CASE("sample_multinomial totals, degenerate cases and marginals") {
    auto rng = derive_stream(1003, 0);
    const std::vector<double> probs{0.5, 0.5};
    CHECK(sample_multinomial(0, probs, rng) == std::vector<std::int64_t>{0, 0});
    const std::vector<double> point_mass{0.0, 1.0, 0.0};
    CHECK(sample_multinomial(100, point_mass, rng) == std::vector<std::int64_t>{0, 100, 0});
    CHECK_THROWS_AS(sample_multinomial(-1, probs, rng), input_error);

    double sum_first = 0.0;
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) {
        const auto counts = sample_multinomial(100, probs, rng);
        CHECK(counts[0] + counts[1] == 100);
        sum_first += static_cast<double>(counts[0]);
    }
    // Binomial(100, 0.5) marginal: mean 50, se of the mean over the draws.
    const double se = 5.0 / std::sqrt(static_cast<double>(draws));
    CHECK(std::abs(sum_first / draws - 50.0) < 3.0 * se);
}

TEST_CASE("mape arithmetic anchors") {
    CHECK(mape(std::vector<double>{500000.0}, std::vector<double>{300000.0}) ==
          doctest::Approx(40.0).epsilon(1e-12));
    CHECK(mape(std::vector<double>{500.0}, std::vector<double>{300.0}) ==
          doctest::Approx(40.0).epsilon(1e-12));
    CHECK(mape(std::vector<double>{123.0, 7.0}, std::vector<double>{123.0, 7.0}) == 0.0);
    CHECK_THROWS_AS(mape(std::vector<double>{0.0}, std::vector<double>{1.0}), input_error);
    CHECK_THROWS_AS(mape(std::vector<double>{1.0}, std::vector<double>{}), input_error);

    const EstimatorStats stats =
        ape_stats(std::vector<double>{100.0, 100.0}, std::vector<double>{90.0, 120.0});
    CHECK(stats.mean_ape == doctest::Approx(15.0));
    CHECK(stats.q95_ape == doctest::Approx(19.5));
}

TEST_CASE("replication on the identical-mix scenario has exactly zero naive error") {
    auto catalog = scenario_catalog();
    ScenarioConfig scenario_one = catalog[0];
    for (int rep = 0; rep < 20; ++rep) {
        auto rng = derive_stream(5, static_cast<std::uint64_t>(rep));
        const ReplicationOutcome outcome = run_replication(scenario_one, rng);
        REQUIRE(outcome.ok);
        CHECK(outcome.naive_count == outcome.true_count);  // bitwise: same formula, same inputs
    }
}

TEST_CASE("replication on the benchmark has exactly 40 percent naive error") {
    ScenarioConfig benchmark = benchmark_parameters();
    auto rng = derive_stream(6, 0);
    const ReplicationOutcome outcome = run_replication(benchmark, rng);
    REQUIRE(outcome.ok);
    CHECK(100.0 * std::abs(outcome.true_count - outcome.naive_count) / outcome.true_count ==
          doctest::Approx(40.0).epsilon(1e-9));
    CHECK(outcome.true_count == doctest::Approx(500000.0).epsilon(1e-9));
    // The proposed estimate is far closer than the naive one.
    CHECK(std::abs(outcome.proposed_count - outcome.true_count) <
          std::abs(outcome.naive_count - outcome.true_count));
}

TEST_CASE("frequency perturbation makes the true count vary across replications") {
    auto catalog = scenario_catalog();
    ScenarioConfig scenario_vii = catalog[6];
    std::vector<double> trues;
    for (int rep = 0; rep < 5; ++rep) {
        auto rng = derive_stream(7, static_cast<std::uint64_t>(rep));
        const ReplicationOutcome outcome = run_replication(scenario_vii, rng);
        REQUIRE(outcome.ok);
        trues.push_back(outcome.true_count);
    }
    for (std::size_t s = 1; s < trues.size(); ++s) CHECK(trues[s] != trues[0]);
}

TEST_CASE("run_scenario is bit-reproducible and its trace matches the aggregates") {
    ScenarioConfig benchmark = benchmark_parameters();
    benchmark.replications = 25;
    benchmark.master_seed = 11;
    const ScenarioResult first = run_scenario(benchmark);
    const ScenarioResult second = run_scenario(benchmark);
    REQUIRE(first.trace.size() == second.trace.size());
    for (std::size_t s = 0; s < first.trace.size(); ++s) {
        CHECK(first.trace[s].true_count == second.trace[s].true_count);
        CHECK(first.trace[s].proposed_count == second.trace[s].proposed_count);
        CHECK(first.trace[s].naive_count == second.trace[s].naive_count);
    }
    CHECK(first.proposed.mean_ape == second.proposed.mean_ape);
    CHECK(first.failures == 0);

    // Recompute the aggregates from the stored trace.
    std::vector<double> trues, proposed;
    for (const ReplicationOutcome& outcome : first.trace) {
        trues.push_back(outcome.true_count);
        proposed.push_back(outcome.proposed_count);
    }
    const EstimatorStats recomputed = ape_stats(trues, proposed);
    CHECK(std::abs(recomputed.mean_ape - first.proposed.mean_ape) < 1e-12);
    CHECK(std::abs(recomputed.sd_ape - first.proposed.sd_ape) < 1e-12);
    CHECK(std::abs(recomputed.q95_ape - first.proposed.q95_ape) < 1e-12);
}

TEST_CASE("run_scenario can carry the optional estimators") {
    ScenarioConfig benchmark = benchmark_parameters();
    benchmark.replications = 5;
    benchmark.master_seed = 3;
    SimulationOptions options;
    options.with_least_squares = true;
    options.map_prior = std::vector<double>{1.0, 1.0, 1.0};
    const ScenarioResult result = run_scenario(benchmark, options);
    REQUIRE(result.least_squares.has_value());
    REQUIRE(result.map.has_value());
    // A flat prior reproduces the likelihood fit.
    CHECK(result.map->mean_ape == doctest::Approx(result.proposed.mean_ape).epsilon(1e-6));
    CHECK(result.least_squares->mean_ape < 5.0);
}

TEST_CASE("run_sweep emits one result per grid value with plot-ready tables") {
    ScenarioConfig base = benchmark_parameters();
    base.master_seed = 13;
    const std::vector<double> grid{100.0, 1000.0, 10000.0};
    const auto points = run_sweep(SweepAxis::monitored_size, grid, base, 20);
    REQUIRE(points.size() == 3);
    CHECK(points[0].result.replications == 20);

    const std::string table = sweep_table_csv(SweepAxis::monitored_size, points);
    CHECK(table.find("a0,") != std::string::npos);
    // Header plus naive+proposed rows per grid point.
    CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 2 * 3);

    CHECK_THROWS_AS(run_sweep(SweepAxis::monitored_size, std::vector<double>{}, base, 5),
                    input_error);
}

TEST_CASE("scenario tables and summaries are stable") {
    ScenarioConfig benchmark = benchmark_parameters();
    benchmark.replications = 10;
    benchmark.master_seed = 21;
    const ScenarioResult result = run_scenario(benchmark);
    const std::vector<ScenarioResult> results{result};
    const std::string csv = scenario_table_csv(results);
    CHECK(csv.find("scenario,description,naive_m") == 0);
    CHECK(csv.find("ii,Benchmark scenario,40.00") != std::string::npos);
    CHECK(scenario_table_csv(results) == csv);
    const std::string json = scenario_summary_json(results);
    CHECK(json.find("\"estimator\": \"proposed\"") != std::string::npos);
    CHECK(scenario_summary_json(results) == json);
}
