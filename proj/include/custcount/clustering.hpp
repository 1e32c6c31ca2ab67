#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "custcount/matrix.hpp"

namespace custcount {

enum class PriceLevel { low_end, standard, high_end };

// One product line of a receipt, reduced to what the features need.
struct ProductLine {
    double unit_price = 0.0;
    int quantity = 1;
    PriceLevel price_level = PriceLevel::standard;
    bool children = false;
};

struct Basket {
    std::vector<ProductLine> lines;
};

// Monetary content of one basket; the raw material for both basket and
// customer features.
struct BasketSummary {
    double value = 0.0;
    double premium_value = 0.0;
    double children_value = 0.0;
    int product_count = 0;
};

BasketSummary summarize_basket(const Basket& basket);

// Four indicators per basket, each mapped into [0, 1]: value against
// the 95% value quantile (capped), value shares of high-end and
// children products, and product count against the 90% count quantile
// (capped).
struct BasketFeatureVector {
    double value_scaled = 0.0;
    double premium_share = 0.0;
    double children_share = 0.0;
    double diversity_scaled = 0.0;
};

struct BasketFeatureResult {
    std::vector<BasketFeatureVector> features;  // one per retained basket
    std::vector<std::size_t> retained;          // indices into the input
    std::vector<BasketSummary> summaries;       // aligned with `features`
    double value_quantile95 = 0.0;
    double count_quantile90 = 0.0;
    std::size_t excluded_zero_value = 0;        // degenerate baskets dropped
};

BasketFeatureResult basket_features(std::span<const Basket> baskets);

// The same four indicators aggregated over one customer's baskets:
// total value against the 95% quantile across customers, value-weighted
// premium/children shares, and the mean of the baskets' scaled
// diversities.
struct CustomerProfile {
    std::string customer_id;
    double total_value_scaled = 0.0;
    double premium_share = 0.0;
    double children_share = 0.0;
    double mean_diversity = 0.0;
    int visit_count = 0;
};

struct CustomerBaskets {
    std::string customer_id;
    std::vector<BasketSummary> baskets;
};

struct CustomerFeatureResult {
    std::vector<CustomerProfile> profiles;
    double value_quantile95 = 0.0;
};

CustomerFeatureResult customer_features(std::span<const CustomerBaskets> customers,
                                        double count_quantile90);

struct Standardization {
    std::vector<double> mean;
    std::vector<double> sd;  // sample sd, (n - 1) normalization
};

struct StandardizeResult {
    Matrix points;
    Standardization stats;
};

// Column-wise z-scoring. A zero-variance column raises
// standardization_error naming the dimension.
StandardizeResult standardize(const Matrix& points);

struct ClusteringResult {
    int k = 0;
    Matrix centers;                     // k x dims
    std::vector<int> assignments;       // 1-based cluster ids
    double inertia = 0.0;               // within-cluster sum of squares
    double db_index = 0.0;              // Davies-Bouldin; NaN when undefined
    Standardization standardization;    // filled by callers that standardized
    std::vector<double> inertia_trace;  // per Lloyd sweep, non-increasing
};

// Lloyd iterations from explicit starting centers, to an assignment
// fixed point. An emptied cluster is re-seeded at the point farthest
// from its own center.
ClusteringResult kmeans_lloyd(const Matrix& points, Matrix centers);

// Distance-weighted probabilistic seeding, best inertia over
// `restarts` independent runs. Deterministic for a fixed (seed,
// restarts) pair.
ClusteringResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 10);

// Mean over clusters of the worst (scatter_i + scatter_j) /
// center-distance ratio; scatter is the mean distance of a cluster's
// points to its center. Lower is better.
double davies_bouldin(const Matrix& points,
                      std::span<const int> assignments,
                      const Matrix& centers);

struct SelectKResult {
    int k = 0;
    ClusteringResult clustering;
    std::vector<double> db_by_k;  // aligned with k_min..k_max
};

// Smallest Davies-Bouldin value wins; ties go to the smaller k.
SelectKResult select_k(const Matrix& points, int k_min, int k_max,
                       std::uint64_t seed, int restarts = 10);

struct SegmentFrequencies {
    std::vector<double> mean_visits;            // per segment
    std::vector<std::int64_t> unique_customers; // per segment
};

// Mean visits and customer counts per segment; every segment must be
// non-empty and every visit count at least 1.
SegmentFrequencies segment_frequencies(std::span<const int> segment_of_customer,
                                       std::span<const int> visit_counts,
                                       int segments);

}  // namespace custcount
