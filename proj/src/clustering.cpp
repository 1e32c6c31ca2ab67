#include "custcount/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "custcount/errors.hpp"
#include "custcount/stats.hpp"

namespace custcount {

namespace {

constexpr int kMaxLloydSweeps = 500;

double squared_distance(const Matrix& points, std::size_t p, const Matrix& centers, std::size_t c) {
    double acc = 0.0;
    for (std::size_t d = 0; d < points.cols(); ++d) {
        const double diff = points(p, d) - centers(c, d);
        acc += diff * diff;
    }
    return acc;
}

}  // namespace

BasketSummary summarize_basket(const Basket& basket) {
    BasketSummary out;
    for (const ProductLine& line : basket.lines) {
        const double value = line.unit_price * static_cast<double>(line.quantity);
        out.value += value;
        if (line.price_level == PriceLevel::high_end) out.premium_value += value;
        if (line.children) out.children_value += value;
        ++out.product_count;
    }
    return out;
}

BasketFeatureResult basket_features(std::span<const Basket> baskets) {
    if (baskets.empty()) throw input_error("no baskets to featurize");

    BasketFeatureResult out;
    std::vector<double> values, counts;
    for (std::size_t b = 0; b < baskets.size(); ++b) {
        if (baskets[b].lines.empty()) {
            ++out.excluded_zero_value;
            continue;
        }
        BasketSummary summary = summarize_basket(baskets[b]);
        if (!(summary.value > 0.0)) {
            ++out.excluded_zero_value;
            continue;
        }
        out.retained.push_back(b);
        out.summaries.push_back(summary);
        values.push_back(summary.value);
        counts.push_back(static_cast<double>(summary.product_count));
    }
    if (out.retained.empty()) throw input_error("every basket has zero value");

    out.value_quantile95 = quantile(values, 0.95);
    out.count_quantile90 = quantile(counts, 0.90);

    out.features.reserve(out.summaries.size());
    for (const BasketSummary& s : out.summaries) {
        BasketFeatureVector f;
        f.value_scaled = out.value_quantile95 > 0.0 ? std::min(s.value / out.value_quantile95, 1.0) : 1.0;
        f.premium_share = s.premium_value / s.value;
        f.children_share = s.children_value / s.value;
        f.diversity_scaled = out.count_quantile90 > 0.0
                                 ? std::min(static_cast<double>(s.product_count) / out.count_quantile90, 1.0)
                                 : 1.0;
        out.features.push_back(f);
    }
    return out;
}

CustomerFeatureResult customer_features(std::span<const CustomerBaskets> customers,
                                        double count_quantile90) {
    if (customers.empty()) throw input_error("no customers to featurize");

    CustomerFeatureResult out;
    std::vector<double> totals;
    totals.reserve(customers.size());
    out.profiles.reserve(customers.size());

    for (const CustomerBaskets& customer : customers) {
        if (customer.baskets.empty())
            throw input_error("customer " + customer.customer_id + " has no baskets in the period");
        CustomerProfile profile;
        profile.customer_id = customer.customer_id;
        profile.visit_count = static_cast<int>(customer.baskets.size());
        double total = 0.0, premium = 0.0, children = 0.0, diversity = 0.0;
        for (const BasketSummary& s : customer.baskets) {
            total += s.value;
            premium += s.premium_value;
            children += s.children_value;
            diversity += count_quantile90 > 0.0
                             ? std::min(static_cast<double>(s.product_count) / count_quantile90, 1.0)
                             : 1.0;
        }
        if (!(total > 0.0))
            throw input_error("customer " + customer.customer_id + " has zero total value");
        profile.premium_share = premium / total;
        profile.children_share = children / total;
        profile.mean_diversity = diversity / static_cast<double>(customer.baskets.size());
        profile.total_value_scaled = total;  // scaled below once the quantile is known
        totals.push_back(total);
        out.profiles.push_back(std::move(profile));
    }

    out.value_quantile95 = quantile(totals, 0.95);
    for (CustomerProfile& profile : out.profiles) {
        profile.total_value_scaled =
            out.value_quantile95 > 0.0 ? std::min(profile.total_value_scaled / out.value_quantile95, 1.0)
                                       : 1.0;
    }
    return out;
}

StandardizeResult standardize(const Matrix& points) {
    if (points.rows() < 2) throw input_error("standardization needs at least two points");
    const std::size_t n = points.rows(), dims = points.cols();

    StandardizeResult out;
    out.stats.mean.resize(dims);
    out.stats.sd.resize(dims);
    out.points = Matrix(n, dims);

    for (std::size_t d = 0; d < dims; ++d) {
        double m = 0.0;
        for (std::size_t r = 0; r < n; ++r) m += points(r, d);
        m /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double diff = points(r, d) - m;
            var += diff * diff;
        }
        var /= static_cast<double>(n - 1);
        const double sd = std::sqrt(var);
        if (!(sd > 0.0))
            throw standardization_error("dimension " + std::to_string(d + 1) + " has zero variance");
        out.stats.mean[d] = m;
        out.stats.sd[d] = sd;
        for (std::size_t r = 0; r < n; ++r) out.points(r, d) = (points(r, d) - m) / sd;
    }
    return out;
}

ClusteringResult kmeans_lloyd(const Matrix& points, Matrix centers) {
    const std::size_t n = points.rows();
    const auto k = centers.rows();
    if (k == 0 || k > n) throw input_error("cluster count must be in [1, point count]");
    if (centers.cols() != points.cols()) throw input_error("center dimensionality mismatch");

    ClusteringResult out;
    out.k = static_cast<int>(k);
    out.assignments.assign(n, 0);

    std::vector<int> previous(n, -1);
    for (int sweep = 0; sweep < kMaxLloydSweeps; ++sweep) {
        // Assignment pass; ties go to the lowest center index.
        double inertia = 0.0;
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t p = 0; p < n; ++p) {
            std::size_t best = 0;
            double best_dist = squared_distance(points, p, centers, 0);
            for (std::size_t c = 1; c < k; ++c) {
                const double dist = squared_distance(points, p, centers, c);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = c;
                }
            }
            out.assignments[p] = static_cast<int>(best + 1);
            ++sizes[best];
            inertia += best_dist;
        }

        // Re-seed emptied clusters at the point farthest from its own center.
        bool reseeded = false;
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) continue;
            std::size_t farthest = 0;
            double farthest_dist = -1.0;
            for (std::size_t p = 0; p < n; ++p) {
                const auto assigned = static_cast<std::size_t>(out.assignments[p] - 1);
                if (sizes[assigned] <= 1) continue;  // do not empty another cluster
                const double dist = squared_distance(points, p, centers, assigned);
                if (dist > farthest_dist) {
                    farthest_dist = dist;
                    farthest = p;
                }
            }
            if (farthest_dist < 0.0) continue;
            const auto donor = static_cast<std::size_t>(out.assignments[farthest] - 1);
            --sizes[donor];
            inertia -= farthest_dist;
            for (std::size_t d = 0; d < points.cols(); ++d) centers(c, d) = points(farthest, d);
            out.assignments[farthest] = static_cast<int>(c + 1);
            ++sizes[c];
            reseeded = true;
        }

        out.inertia_trace.push_back(inertia);
        out.inertia = inertia;
        if (!reseeded && out.assignments == previous) break;
        previous = out.assignments;

        // Update pass: centers move to their cluster means.
        Matrix sums(k, points.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t p = 0; p < n; ++p) {
            const auto c = static_cast<std::size_t>(out.assignments[p] - 1);
            ++counts[c];
            for (std::size_t d = 0; d < points.cols(); ++d) sums(c, d) += points(p, d);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < points.cols(); ++d)
                centers(c, d) = sums(c, d) / static_cast<double>(counts[c]);
        }
    }

    out.centers = std::move(centers);
    out.db_index = std::numeric_limits<double>::quiet_NaN();
    if (out.k >= 2) {
        try {
            out.db_index = davies_bouldin(points, out.assignments, out.centers);
        } catch (const input_error&) {
            // coincident centers or a single populated cluster: leave NaN
        }
    }
    return out;
}

ClusteringResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts) {
    const std::size_t n = points.rows();
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw input_error("cluster count must be in [1, point count]");
    if (restarts < 1) throw input_error("at least one restart is required");

    ClusteringResult best;
    bool have_best = false;
    for (int restart = 0; restart < restarts; ++restart) {
        auto rng = derive_stream(seed, static_cast<std::uint64_t>(restart));

        // Distance-weighted seeding: first center uniform, later centers
        // drawn with probability proportional to squared distance from
        // the chosen set.
        Matrix centers(static_cast<std::size_t>(k), points.cols());
        std::vector<bool> taken(n, false);
        std::uniform_int_distribution<std::size_t> uniform_index(0, n - 1);
        std::size_t first = uniform_index(rng);
        taken[first] = true;
        for (std::size_t d = 0; d < points.cols(); ++d) centers(0, d) = points(first, d);

        std::vector<double> dist2(n, 0.0);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                double nearest = std::numeric_limits<double>::infinity();
                for (int chosen = 0; chosen < c; ++chosen)
                    nearest = std::min(nearest,
                                       squared_distance(points, p, centers, static_cast<std::size_t>(chosen)));
                dist2[p] = taken[p] ? 0.0 : nearest;
                total += dist2[p];
            }
            std::size_t pick = n;
            if (total > 0.0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double target = u(rng), acc = 0.0;
                for (std::size_t p = 0; p < n; ++p) {
                    acc += dist2[p];
                    if (acc >= target && !taken[p]) {
                        pick = p;
                        break;
                    }
                }
            }
            if (pick == n) {
                for (std::size_t p = 0; p < n; ++p) {
                    if (!taken[p]) {
                        pick = p;
                        break;
                    }
                }
            }
            if (pick == n) pick = uniform_index(rng);
            taken[pick] = true;
            for (std::size_t d = 0; d < points.cols(); ++d)
                centers(static_cast<std::size_t>(c), d) = points(pick, d);
        }

        ClusteringResult candidate = kmeans_lloyd(points, std::move(centers));
        if (!have_best || candidate.inertia < best.inertia) {
            best = std::move(candidate);
            have_best = true;
        }
    }
    return best;
}

double davies_bouldin(const Matrix& points,
                      std::span<const int> assignments,
                      const Matrix& centers) {
    const std::size_t k = centers.rows();
    if (assignments.size() != points.rows()) throw input_error("assignment length mismatch");

    std::vector<double> scatter(k, 0.0);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t p = 0; p < points.rows(); ++p) {
        const int a = assignments[p];
        if (a < 1 || static_cast<std::size_t>(a) > k) throw input_error("assignment id out of range");
        const auto c = static_cast<std::size_t>(a - 1);
        scatter[c] += std::sqrt(squared_distance(points, p, centers, c));
        ++sizes[c];
    }
    std::size_t populated = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) continue;
        scatter[c] /= static_cast<double>(sizes[c]);
        ++populated;
    }
    if (populated < 2) throw input_error("Davies-Bouldin needs at least two non-empty clusters");

    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (sizes[i] == 0) continue;
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == i || sizes[j] == 0) continue;
            double sep = 0.0;
            for (std::size_t d = 0; d < centers.cols(); ++d) {
                const double diff = centers(i, d) - centers(j, d);
                sep += diff * diff;
            }
            sep = std::sqrt(sep);
            if (sep == 0.0) throw input_error("coincident cluster centers");
            worst = std::max(worst, (scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    return total / static_cast<double>(populated);
}

SelectKResult select_k(const Matrix& points, int k_min, int k_max,
                       std::uint64_t seed, int restarts) {
    if (k_min < 2) throw input_error("k selection starts at 2");
    if (k_max < k_min) throw input_error("empty k range");
    if (static_cast<std::size_t>(k_max) > points.rows())
        throw input_error("k range exceeds the number of points");

    SelectKResult out;
    double best_db = std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        ClusteringResult clustering = kmeans(points, k, seed, restarts);
        out.db_by_k.push_back(clustering.db_index);
        const double db = std::isnan(clustering.db_index) ? std::numeric_limits<double>::infinity()
                                                          : clustering.db_index;
        if (out.k == 0 || db < best_db) {
            out.k = k;
            best_db = db;
            out.clustering = std::move(clustering);
        }
    }
    return out;
}

SegmentFrequencies segment_frequencies(std::span<const int> segment_of_customer,
                                       std::span<const int> visit_counts,
                                       int segments) {
    if (segment_of_customer.size() != visit_counts.size())
        throw input_error("segment and visit sequences differ in length");
    if (segments < 1) throw input_error("segment count must be at least 1");

    SegmentFrequencies out;
    out.mean_visits.assign(static_cast<std::size_t>(segments), 0.0);
    out.unique_customers.assign(static_cast<std::size_t>(segments), 0);
    for (std::size_t c = 0; c < segment_of_customer.size(); ++c) {
        const int s = segment_of_customer[c];
        if (s < 1 || s > segments)
            throw input_error("segment id out of range at customer " + std::to_string(c));
        if (visit_counts[c] < 1)
            throw input_error("customer " + std::to_string(c) + " has fewer than one visit");
        out.mean_visits[static_cast<std::size_t>(s - 1)] += static_cast<double>(visit_counts[c]);
        ++out.unique_customers[static_cast<std::size_t>(s - 1)];
    }
    for (std::size_t j = 0; j < out.mean_visits.size(); ++j) {
        if (out.unique_customers[j] == 0)
            throw degenerate_segment_error("segment " + std::to_string(j + 1) + " has no customers");
        out.mean_visits[j] /= static_cast<double>(out.unique_customers[j]);
    }
    return out;
}

}  // namespace custcount
