#include "custcount/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "custcount/errors.hpp"
#include "custcount/stats.hpp"

namespace custcount {

namespace {

void check_labels(std::span<const int> labels, int limit, const char* what) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] < 1 || labels[k] > limit) {
            throw input_error(std::string(what) + " label out of range at position " +
                              std::to_string(k) + ": " + std::to_string(labels[k]));
        }
    }
}

void check_frequencies(std::span<const double> frequencies, std::size_t segments) {
    if (frequencies.size() != segments)
        throw input_error("frequency vector length does not match segment count");
    for (std::size_t j = 0; j < frequencies.size(); ++j) {
        if (!(frequencies[j] > 0.0))
            throw input_error("non-positive visit frequency for segment " + std::to_string(j + 1));
    }
}

}  // namespace

std::int64_t CountsTable::joint(std::size_t basket_type, std::size_t segment) const {
    return (*joint_counts)[basket_type * segments() + segment];
}

CountsTable tabulate_counts(std::span<const int> basket_labels, int basket_types) {
    if (basket_types < 1) throw input_error("basket type count must be at least 1");
    check_labels(basket_labels, basket_types, "basket");
    CountsTable out;
    out.total = static_cast<std::int64_t>(basket_labels.size());
    out.basket_counts.assign(static_cast<std::size_t>(basket_types), 0);
    for (int label : basket_labels) ++out.basket_counts[static_cast<std::size_t>(label - 1)];
    return out;
}

CountsTable tabulate_counts(std::span<const int> basket_labels,
                            std::span<const int> segment_labels,
                            int basket_types, int segments) {
    if (segments < 1) throw input_error("segment count must be at least 1");
    if (basket_labels.size() != segment_labels.size())
        throw input_error("basket and segment label sequences differ in length");
    check_labels(segment_labels, segments, "segment");

    CountsTable out = tabulate_counts(basket_labels, basket_types);
    out.segment_counts.emplace(static_cast<std::size_t>(segments), 0);
    out.joint_counts.emplace(static_cast<std::size_t>(basket_types) * static_cast<std::size_t>(segments), 0);
    for (std::size_t k = 0; k < basket_labels.size(); ++k) {
        const auto i = static_cast<std::size_t>(basket_labels[k] - 1);
        const auto j = static_cast<std::size_t>(segment_labels[k] - 1);
        ++(*out.segment_counts)[j];
        ++(*out.joint_counts)[i * static_cast<std::size_t>(segments) + j];
    }
    return out;
}

void validate_model(const ProbabilityModel& model, double simplex_tol, double rank_tol) {
    const std::size_t n = model.basket_types();
    const std::size_t m = model.segments();
    if (n < m) throw input_error("fewer basket types than segments");
    if (model.basket_probs.size() != n) throw input_error("basket probability length mismatch");
    if (model.segment_mix.size() != m) throw input_error("segment mix length mismatch");
    if (!is_simplex(model.basket_probs, simplex_tol)) throw input_error("basket probabilities are not a simplex vector");
    if (!is_simplex(model.segment_mix, simplex_tol)) throw input_error("segment mix is not a simplex vector");
    for (std::size_t j = 0; j < m; ++j) {
        if (!is_simplex(model.conditional.column(j), simplex_tol))
            throw input_error("conditional column " + std::to_string(j + 1) + " is not a simplex vector");
    }
    check_frequencies(model.frequencies, m);
    if (!has_full_column_rank(model.conditional, rank_tol))
        throw identifiability_error("conditional basket-type columns are linearly dependent");
}

MonitoredEstimate estimate_monitored(const CountsTable& counts,
                                     std::span<const double> frequencies,
                                     double rank_tol) {
    if (counts.total <= 0) throw empty_sample_error("monitored sample holds no transactions");
    if (!counts.segment_counts || !counts.joint_counts)
        throw input_error("monitored estimation needs segment and joint counts");

    const std::size_t n = counts.basket_types();
    const std::size_t m = counts.segments();
    check_frequencies(frequencies, m);

    const auto& segment_counts = *counts.segment_counts;
    for (std::size_t j = 0; j < m; ++j) {
        if (segment_counts[j] <= 0)
            throw degenerate_segment_error("segment " + std::to_string(j + 1) +
                                           " has no transactions in the monitored sample");
    }

    ProbabilityModel model;
    const double total = static_cast<double>(counts.total);
    model.basket_probs.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        model.basket_probs[i] = static_cast<double>(counts.basket_counts[i]) / total;
    model.segment_mix.resize(m);
    for (std::size_t j = 0; j < m; ++j)
        model.segment_mix[j] = static_cast<double>(segment_counts[j]) / total;
    model.conditional = Matrix(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            model.conditional(i, j) =
                static_cast<double>(counts.joint(i, j)) / static_cast<double>(segment_counts[j]);
    model.frequencies.assign(frequencies.begin(), frequencies.end());

    const bool rank_ok = has_full_column_rank(model.conditional, rank_tol);
    return {std::move(model), rank_ok};
}

std::vector<double> mixture_probabilities(const Matrix& conditional,
                                          std::span<const double> segment_mix) {
    if (segment_mix.size() != conditional.cols())
        throw input_error("segment mix length does not match conditional columns");
    return matvec(conditional, segment_mix);
}

UniqueCustomers unique_customers(std::span<const double> segment_mix,
                                 std::span<const double> frequencies,
                                 double transactions) {
    check_frequencies(frequencies, segment_mix.size());
    if (!(transactions > 0.0)) throw input_error("transaction count must be positive");
    if (!is_simplex(segment_mix, 1e-6)) throw input_error("segment mix is not a simplex vector");

    UniqueCustomers out;
    out.distribution.resize(segment_mix.size());
    for (std::size_t j = 0; j < segment_mix.size(); ++j) {
        const double customers = segment_mix[j] * transactions / frequencies[j];
        out.distribution[j] = customers;  // raw per-segment counts for now
        out.count += customers;
    }
    for (double& u : out.distribution) u /= out.count;
    return out;
}

std::string estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::naive: return "naive";
        case EstimatorKind::mle: return "mle";
        case EstimatorKind::least_squares: return "least-squares";
        case EstimatorKind::map: return "map";
    }
    return "unknown";
}

EstimationResult naive_estimate(std::span<const double> monitored_mix,
                                std::span<const double> frequencies,
                                double transactions) {
    return finalize_estimate(EstimatorKind::naive,
                             std::vector<double>(monitored_mix.begin(), monitored_mix.end()),
                             0.0, 0, true, frequencies, transactions);
}

EstimationResult finalize_estimate(EstimatorKind kind,
                                   std::vector<double> segment_mix,
                                   double objective, int iterations, bool converged,
                                   std::span<const double> frequencies,
                                   double transactions) {
    UniqueCustomers uniques = unique_customers(segment_mix, frequencies, transactions);
    EstimationResult out;
    out.estimator = kind;
    out.segment_mix = std::move(segment_mix);
    out.unique_count = uniques.count;
    out.customer_mix = std::move(uniques.distribution);
    out.objective = objective;
    out.iterations = iterations;
    out.converged = converged;
    return out;
}

SquareInverse square_invert_estimate(std::span<const double> basket_probs,
                                     const Matrix& conditional,
                                     double feasibility_tol,
                                     double max_condition) {
    if (conditional.rows() != conditional.cols())
        throw input_error("square inversion needs as many basket types as segments");
    if (basket_probs.size() != conditional.rows())
        throw input_error("basket probability length does not match conditional rows");

    const InverseResult inv = invert(conditional);
    if (inv.condition > max_condition)
        throw conditioning_error("conditional matrix is too ill-conditioned to invert (condition " +
                                 std::to_string(inv.condition) + ")");

    SquareInverse out;
    out.segment_mix = matvec(inv.inverse, basket_probs);
    out.feasible = true;
    for (double q : out.segment_mix) {
        if (q < -feasibility_tol || q > 1.0 + feasibility_tol) {
            out.feasible = false;
            break;
        }
    }
    return out;
}

}  // namespace custcount
