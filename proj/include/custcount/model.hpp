#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "custcount/matrix.hpp"

namespace custcount {

// Transaction tallies for one sample. Per-segment and joint counts are
// present only for monitored samples, where segments are observable.
struct CountsTable {
    std::int64_t total = 0;                                   // all transactions
    std::vector<std::int64_t> basket_counts;                  // per basket type
    std::optional<std::vector<std::int64_t>> segment_counts;  // per segment
    std::optional<std::vector<std::int64_t>> joint_counts;    // basket x segment, row-major

    std::size_t basket_types() const { return basket_counts.size(); }
    std::size_t segments() const { return segment_counts ? segment_counts->size() : 0; }
    std::int64_t joint(std::size_t basket_type, std::size_t segment) const;
};

// Tally 1-based labels into a counts table. Out-of-range labels and
// length mismatches are input errors naming the offending position.
CountsTable tabulate_counts(std::span<const int> basket_labels, int basket_types);
CountsTable tabulate_counts(std::span<const int> basket_labels,
                            std::span<const int> segment_labels,
                            int basket_types, int segments);

// Ground-truth or estimated parameter set: basket-type distribution,
// transaction-level segment mix, per-segment conditional basket-type
// distributions (one column per segment), and mean visit frequencies.
struct ProbabilityModel {
    std::vector<double> basket_probs;  // length = basket types
    std::vector<double> segment_mix;   // length = segments
    Matrix conditional;                // basket types x segments, column-simplex
    std::vector<double> frequencies;   // visits per period, strictly positive

    std::size_t basket_types() const { return conditional.rows(); }
    std::size_t segments() const { return conditional.cols(); }
};

// Simplex/positivity/shape violations raise input_error; linearly
// dependent conditional columns raise identifiability_error.
void validate_model(const ProbabilityModel& model,
                    double simplex_tol = 1e-9,
                    double rank_tol = 1e-8);

struct MonitoredEstimate {
    ProbabilityModel model;
    bool rank_ok = true;  // conditional columns independent at tolerance
};

// Relative-frequency estimates from a fully observed sample:
// basket_probs = basket_counts / total, segment_mix = segment_counts /
// total, conditional(i, j) = joint(i, j) / segment_counts[j].
MonitoredEstimate estimate_monitored(const CountsTable& counts,
                                     std::span<const double> frequencies,
                                     double rank_tol = 1e-8);

// Law of total probability: basket_probs = conditional * segment_mix.
std::vector<double> mixture_probabilities(const Matrix& conditional,
                                          std::span<const double> segment_mix);

struct UniqueCustomers {
    double count = 0.0;                // estimated unique customers
    std::vector<double> distribution;  // customer-level segment mix
};

// count = sum_j mix[j] * transactions / frequency[j];
// distribution[j] = mix[j] * transactions / (frequency[j] * count).
UniqueCustomers unique_customers(std::span<const double> segment_mix,
                                 std::span<const double> frequencies,
                                 double transactions);

enum class EstimatorKind { naive, mle, least_squares, map };
std::string estimator_name(EstimatorKind kind);

struct EstimationResult {
    EstimatorKind estimator = EstimatorKind::naive;
    std::vector<double> segment_mix;   // transaction-level
    double unique_count = 0.0;
    std::vector<double> customer_mix;  // customer-level
    double objective = 0.0;
    int iterations = 0;
    bool converged = true;
};

// Baseline that assumes the unmonitored mix equals the monitored one.
EstimationResult naive_estimate(std::span<const double> monitored_mix,
                                std::span<const double> frequencies,
                                double transactions);

// Attach unique-customer figures to an optimizer output.
EstimationResult finalize_estimate(EstimatorKind kind,
                                   std::vector<double> segment_mix,
                                   double objective, int iterations, bool converged,
                                   std::span<const double> frequencies,
                                   double transactions);

struct SquareInverse {
    std::vector<double> segment_mix;
    bool feasible = true;  // every entry within [0, 1] up to tolerance
};

// Direct inversion for the square full-rank case. Out-of-range entries
// are flagged, never clipped.
SquareInverse square_invert_estimate(std::span<const double> basket_probs,
                                     const Matrix& conditional,
                                     double feasibility_tol = 1e-9,
                                     double max_condition = 1e12);

}  // namespace custcount
