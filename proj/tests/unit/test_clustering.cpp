#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "custcount/clustering.hpp"
#include "custcount/errors.hpp"
#include "custcount/matrix.hpp"
#include "custcount/stats.hpp"

using namespace custcount;

namespace {

Basket make_basket(std::initializer_list<ProductLine> lines) {
    Basket b;
    b.lines = lines;
    return b;
}

Matrix one_dimensional(std::initializer_list<double> xs) {
    Matrix points(xs.size(), 1);
    std::size_t r = 0;
    for (double x : xs) points(r++, 0) = x;
    return points;
}

// Every 2-partition of a tiny point set, evaluated directly.
double best_two_partition_inertia(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        double sum[2] = {0, 0};
        int count[2] = {0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const int side = (mask >> i) & 1;
            sum[side] += xs[i];
            ++count[side];
        }
        if (count[0] == 0 || count[1] == 0) continue;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int side = (mask >> i) & 1;
            const double center = sum[side] / count[side];
            inertia += (xs[i] - center) * (xs[i] - center);
        }
        best = std::min(best, inertia);
    }
    return best;
}

}  // namespace

TEST_CASE("basket features: caps, shares and quantiles") {
    std::vector<Basket> baskets;
    // 1000 baskets of known values 1..1000, one standard product each.
    for (int v = 1; v <= 1000; ++v)
        baskets.push_back(make_basket({{static_cast<double>(v), 1, PriceLevel::standard, false}}));
    const BasketFeatureResult features = basket_features(baskets);
    // Sort-based oracle for the 95% quantile of 1..1000.
    CHECK(features.value_quantile95 == doctest::Approx(950.05));
    CHECK(features.count_quantile90 == doctest::Approx(1.0));
    CHECK(features.excluded_zero_value == 0);

    // A basket at twice the quantile is capped at 1.
    baskets.push_back(make_basket({{2.0 * features.value_quantile95, 1, PriceLevel::standard, false}}));
    const BasketFeatureResult capped = basket_features(baskets);
    CHECK(capped.features.back().value_scaled == 1.0);

    // A single standard-price non-children product has empty shares.
    CHECK(capped.features.back().premium_share == 0.0);
    CHECK(capped.features.back().children_share == 0.0);
}

TEST_CASE("basket features exclude zero-value baskets with a count") {
    std::vector<Basket> baskets;
    baskets.push_back(make_basket({{10.0, 1, PriceLevel::standard, false}}));
    baskets.push_back(make_basket({{0.0, 1, PriceLevel::standard, false}}));
    baskets.push_back(make_basket({{20.0, 2, PriceLevel::high_end, true}}));
    const BasketFeatureResult features = basket_features(baskets);
    CHECK(features.excluded_zero_value == 1);
    CHECK(features.retained == std::vector<std::size_t>{0, 2});
    CHECK(features.features[1].premium_share == doctest::Approx(1.0));
    CHECK(features.features[1].children_share == doctest::Approx(1.0));

    std::vector<Basket> empty{make_basket({{0.0, 1, PriceLevel::standard, false}})};
    CHECK_THROWS_AS(basket_features(empty), input_error);
}

TEST_CASE("customer features aggregate value-weighted shares") {
    // Two baskets of equal value with premium shares 0 and 1.
    CustomerBaskets customer;
    customer.customer_id = "C1";
    customer.baskets.push_back({50.0, 0.0, 0.0, 2});
    customer.baskets.push_back({50.0, 50.0, 0.0, 4});
    CustomerBaskets other;
    other.customer_id = "C2";
    other.baskets.push_back({10.0, 0.0, 10.0, 1});

    const std::vector<CustomerBaskets> customers{customer, other};
    const CustomerFeatureResult result = customer_features(customers, 4.0);
    CHECK(result.profiles[0].premium_share == doctest::Approx(0.5));
    CHECK(result.profiles[0].visit_count == 2);
    CHECK(result.profiles[0].mean_diversity == doctest::Approx((2.0 / 4.0 + 1.0) / 2.0));
    // Single-basket customer inherits that basket's features.
    CHECK(result.profiles[1].visit_count == 1);
    CHECK(result.profiles[1].children_share == doctest::Approx(1.0));
    CHECK(result.profiles[1].mean_diversity == doctest::Approx(0.25));
}

TEST_CASE("customer features match a line-level oracle on random histories") {
    auto rng = derive_stream(120, 0);
    std::uniform_real_distribution<double> value(1.0, 50.0);
    std::uniform_int_distribution<int> baskets(1, 6);
    std::uniform_real_distribution<double> share(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        CustomerBaskets customer;
        customer.customer_id = "C";
        double total = 0.0, premium = 0.0;
        const int count = baskets(rng);
        for (int b = 0; b < count; ++b) {
            const double v = value(rng);
            const double p = share(rng) * v;
            customer.baskets.push_back({v, p, 0.0, 3});
            total += v;
            premium += p;
        }
        const std::vector<CustomerBaskets> one{customer};
        const CustomerFeatureResult result = customer_features(one, 10.0);
        CHECK(result.profiles[0].premium_share == doctest::Approx(premium / total).epsilon(1e-12));
    }
}

TEST_CASE("standardize produces zero mean, unit sample sd, and is idempotent") {
    const Matrix points = one_dimensional({0.0, 2.0});
    const StandardizeResult standardized = standardize(points);
    CHECK(standardized.points(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(standardized.points(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

    auto rng = derive_stream(121, 1);
    std::normal_distribution<double> normal(3.0, 2.5);
    Matrix sample(50, 2);
    for (std::size_t r = 0; r < 50; ++r) {
        sample(r, 0) = normal(rng);
        sample(r, 1) = normal(rng) * 0.1;
    }
    const StandardizeResult once = standardize(sample);
    for (std::size_t d = 0; d < 2; ++d) {
        double m = 0.0;
        for (std::size_t r = 0; r < 50; ++r) m += once.points(r, d);
        m /= 50.0;
        CHECK(std::abs(m) < 1e-9);
        double var = 0.0;
        for (std::size_t r = 0; r < 50; ++r) var += (once.points(r, d) - m) * (once.points(r, d) - m);
        CHECK(std::abs(std::sqrt(var / 49.0) - 1.0) < 1e-9);
    }
    const StandardizeResult twice = standardize(once.points);
    for (std::size_t r = 0; r < 50; ++r)
        for (std::size_t d = 0; d < 2; ++d)
            CHECK(twice.points(r, d) == doctest::Approx(once.points(r, d)).epsilon(1e-9));

    Matrix constant(3, 1);
    CHECK_THROWS_WITH_AS(standardize(constant), doctest::Contains("dimension 1"),
                         standardization_error);
}

TEST_CASE("kmeans splits well-separated 1-D points like the partition oracle") {
    const Matrix points = one_dimensional({0.0, 1.0, 9.0, 10.0});
    const ClusteringResult result = kmeans(points, 2, 7, 10);
    std::vector<double> centers{result.centers(0, 0), result.centers(1, 0)};
    std::sort(centers.begin(), centers.end());
    CHECK(centers[0] == doctest::Approx(0.5));
    CHECK(centers[1] == doctest::Approx(9.5));
    CHECK(result.inertia == doctest::Approx(best_two_partition_inertia({0.0, 1.0, 9.0, 10.0})));
}

TEST_CASE("kmeans with k equal to the point count has zero inertia") {
    const Matrix points = one_dimensional({1.0, 4.0, 9.0});
    const ClusteringResult result = kmeans(points, 3, 3, 5);
    CHECK(result.inertia == doctest::Approx(0.0));
    std::vector<int> seen = result.assignments;
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<int>{1, 2, 3});
    CHECK_THROWS_AS(kmeans(points, 4, 3, 5), input_error);
}

TEST_CASE("Lloyd fixed points are invariant under dataset duplication from identical starts") {
    const Matrix points = one_dimensional({0.0, 1.0, 2.0, 8.0, 9.0, 14.0});
    Matrix doubled(12, 1);
    for (std::size_t r = 0; r < 6; ++r) {
        doubled(2 * r, 0) = points(r, 0);
        doubled(2 * r + 1, 0) = points(r, 0);
    }
    Matrix starts(2, 1);
    starts(0, 0) = 0.0;
    starts(1, 0) = 10.0;
    const ClusteringResult single = kmeans_lloyd(points, starts);
    const ClusteringResult twice = kmeans_lloyd(doubled, starts);
    CHECK(single.centers == twice.centers);
    CHECK(twice.inertia == doctest::Approx(2.0 * single.inertia));
}

TEST_CASE("kmeans inertia trace never increases") {
    auto rng = derive_stream(122, 2);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix points(60, 3);
    for (std::size_t r = 0; r < 60; ++r)
        for (std::size_t d = 0; d < 3; ++d)
            points(r, d) = normal(rng) + (r % 3 == 0 ? 4.0 : 0.0);
    for (int k : {2, 3, 5}) {
        const ClusteringResult result = kmeans(points, k, 11, 4);
        for (std::size_t t = 1; t < result.inertia_trace.size(); ++t)
            CHECK(result.inertia_trace[t] <= result.inertia_trace[t - 1] + 1e-9);
        // Nearest-center property of the final assignment.
        for (std::size_t p = 0; p < points.rows(); ++p) {
            double assigned = 0.0, nearest = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double dist = 0.0;
                for (std::size_t d = 0; d < 3; ++d) {
                    const double diff = points(p, d) - result.centers(static_cast<std::size_t>(c), d);
                    dist += diff * diff;
                }
                nearest = std::min(nearest, dist);
                if (c + 1 == result.assignments[p]) assigned = dist;
            }
            CHECK(assigned <= nearest + 1e-12);
        }
    }
}

TEST_CASE("davies_bouldin hand values and invariances") {
    // Two singleton clusters at distance 1: zero scatter.
    Matrix singles = one_dimensional({0.0, 1.0});
    Matrix single_centers = one_dimensional({0.0, 1.0});
    const std::vector<int> single_assign{1, 2};
    CHECK(davies_bouldin(singles, single_assign, single_centers) == doctest::Approx(0.0));

    // Two clusters of two points at +-0.5 around centers 0 and 10.
    Matrix points = one_dimensional({-0.5, 0.5, 9.5, 10.5});
    Matrix centers = one_dimensional({0.0, 10.0});
    const std::vector<int> assign{1, 1, 2, 2};
    const double db = davies_bouldin(points, assign, centers);
    CHECK(db == doctest::Approx(0.1));

    // Relabeling invariance.
    Matrix swapped_centers = one_dimensional({10.0, 0.0});
    const std::vector<int> relabeled{2, 2, 1, 1};
    CHECK(davies_bouldin(points, relabeled, swapped_centers) == doctest::Approx(db));

    // Isometry invariance: shift everything by 42 and flip the sign.
    Matrix shifted = one_dimensional({-41.5 + 0.0, -42.5, -51.5, -52.5});
    for (std::size_t r = 0; r < 4; ++r) shifted(r, 0) = -(points(r, 0) + 42.0);
    Matrix shifted_centers = one_dimensional({-(0.0 + 42.0), -(10.0 + 42.0)});
    CHECK(davies_bouldin(shifted, assign, shifted_centers) == doctest::Approx(db));

    // Coincident centers are a division-by-zero error.
    Matrix coincident = one_dimensional({0.0, 0.0});
    CHECK_THROWS_AS(davies_bouldin(points, assign, coincident), input_error);
    CHECK_THROWS_AS(davies_bouldin(points, std::vector<int>{1, 1, 1, 1}, centers), input_error);
    CHECK(db >= 0.0);
}

TEST_CASE("select_k finds three separated blobs and is seed-stable") {
    auto rng = derive_stream(123, 3);
    std::normal_distribution<double> noise(0.0, 0.05);
    const double centers[3][2] = {{0.0, 0.0}, {5.0, 0.0}, {0.0, 5.0}};
    Matrix points(90, 2);
    for (std::size_t r = 0; r < 90; ++r) {
        const auto blob = r % 3;
        points(r, 0) = centers[blob][0] + noise(rng);
        points(r, 1) = centers[blob][1] + noise(rng);
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SelectKResult selected = select_k(points, 2, 6, seed);
        CHECK(selected.k == 3);
        // The reported minimum really is the minimum of the evaluated values.
        for (double db : selected.db_by_k)
            CHECK(selected.clustering.db_index <= db + 1e-12);
    }
    const SelectKResult only_two = select_k(points, 2, 2, 1);
    CHECK(only_two.k == 2);
}

TEST_CASE("segment_frequencies means, floors and errors") {
    const std::vector<int> segments{1, 1};
    const std::vector<int> visits{2, 4};
    const SegmentFrequencies f = segment_frequencies(segments, visits, 1);
    CHECK(f.mean_visits[0] == doctest::Approx(3.0));
    CHECK(f.unique_customers[0] == 2);

    const std::vector<int> all_single{1, 2, 1, 2};
    const std::vector<int> ones{1, 1, 1, 1};
    const SegmentFrequencies floor = segment_frequencies(all_single, ones, 2);
    CHECK(floor.mean_visits == std::vector<double>{1.0, 1.0});

    CHECK_THROWS_AS(segment_frequencies(segments, visits, 2), degenerate_segment_error);
    const std::vector<int> zero_visits{0, 1};
    CHECK_THROWS_AS(segment_frequencies(segments, zero_visits, 1), input_error);
}

TEST_CASE("segment_frequencies recovers shifted-Poisson visit means") {
    auto rng = derive_stream(124, 4);
    const double lambdas[3] = {1.0, 3.0, 6.0};
    std::vector<int> segments, visits;
    const int per_segment = 4000;
    for (int j = 0; j < 3; ++j) {
        std::poisson_distribution<int> poisson(lambdas[j]);
        for (int c = 0; c < per_segment; ++c) {
            segments.push_back(j + 1);
            visits.push_back(1 + poisson(rng));
        }
    }
    const SegmentFrequencies f = segment_frequencies(segments, visits, 3);
    for (int j = 0; j < 3; ++j) {
        const double expected = lambdas[j] + 1.0;
        const double se = std::sqrt(lambdas[j] / per_segment);
        CHECK(std::abs(f.mean_visits[static_cast<std::size_t>(j)] - expected) < 3.0 * se);
        CHECK(f.mean_visits[static_cast<std::size_t>(j)] >= 1.0);
    }
}
