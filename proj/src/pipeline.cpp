#include "custcount/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "custcount/errors.hpp"
#include "custcount/estimators.hpp"
#include "custcount/stats.hpp"

namespace custcount {

namespace {

constexpr double kDaysPerMonth = 30.4375;

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == delimiter) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

bool parse_double(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !text.empty();
}

bool parse_int(const std::string& text, int& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !text.empty();
}

bool parse_price_level(const std::string& text, PriceLevel& out) {
    if (text == "low-end") out = PriceLevel::low_end;
    else if (text == "standard") out = PriceLevel::standard;
    else if (text == "high-end") out = PriceLevel::high_end;
    else return false;
    return true;
}

bool parse_flag(const std::string& text, bool& out) {
    if (text == "0" || text == "false") out = false;
    else if (text == "1" || text == "true") out = true;
    else return false;
    return true;
}

struct CivilDate {
    int year = 0;
    int month = 0;
    int day = 0;
};

bool parse_date(const std::string& text, CivilDate& out) {
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return false;
    auto digits = [](const std::string& s, std::size_t from, std::size_t count, int& value) {
        value = 0;
        for (std::size_t i = from; i < from + count; ++i) {
            if (s[i] < '0' || s[i] > '9') return false;
            value = value * 10 + (s[i] - '0');
        }
        return true;
    };
    if (!digits(text, 0, 4, out.year) || !digits(text, 5, 2, out.month) ||
        !digits(text, 8, 2, out.day))
        return false;
    return out.month >= 1 && out.month <= 12 && out.day >= 1 && out.day <= 31;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
long days_from_civil(const CivilDate& date) {
    int y = date.year;
    const unsigned m = static_cast<unsigned>(date.month);
    const unsigned d = static_cast<unsigned>(date.day);
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<long>(era) * 146097 + static_cast<long>(doe) - 719468;
}

CivilDate civil_from_days(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned long>(z - era * 146097);
    const unsigned long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned long mp = (5 * doy + 2) / 153;
    const unsigned long d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned long m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

std::string iso_week_label(const CivilDate& date) {
    const long z = days_from_civil(date);
    const long weekday_monday0 = ((z % 7) + 7 + 3) % 7;  // 1970-01-01 was a Thursday
    const long thursday = z - weekday_monday0 + 3;
    const CivilDate anchor = civil_from_days(thursday);
    const long jan1 = days_from_civil({anchor.year, 1, 1});
    const long week = (thursday - jan1) / 7 + 1;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-W%02ld", anchor.year, week);
    return buf;
}

std::string period_label_for(const CivilDate& date, PeriodKind kind) {
    char buf[32];
    switch (kind) {
        case PeriodKind::all:
            return "all";
        case PeriodKind::weekly:
            return iso_week_label(date);
        case PeriodKind::monthly:
            std::snprintf(buf, sizeof(buf), "%04d-%02d", date.year, date.month);
            return buf;
        case PeriodKind::quarterly:
            std::snprintf(buf, sizeof(buf), "%04d-Q%d", date.year, (date.month - 1) / 3 + 1);
            return buf;
        case PeriodKind::yearly:
            std::snprintf(buf, sizeof(buf), "%04d", date.year);
            return buf;
    }
    return "all";
}

// Baskets in first-appearance order so that everything downstream is
// deterministic for identical inputs.
struct BasketGroup {
    std::string basket_id;
    std::optional<std::string> customer_id;
    std::vector<const TransactionRecord*> lines;
};

std::vector<BasketGroup> group_baskets(std::span<const TransactionRecord> records) {
    std::vector<BasketGroup> groups;
    std::unordered_map<std::string, std::size_t> index;
    for (const TransactionRecord& record : records) {
        auto [it, inserted] = index.emplace(record.basket_id, groups.size());
        if (inserted) {
            groups.push_back({record.basket_id, record.customer_id, {}});
        } else {
            const BasketGroup& group = groups[it->second];
            if (group.customer_id != record.customer_id)
                throw input_error("basket " + record.basket_id +
                                  " mixes different customer ids across its lines");
        }
        groups[it->second].lines.push_back(&record);
    }
    return groups;
}

// Collapse a basket's lines into one line per product so that the
// diversity feature counts distinct products.
Basket build_feature_basket(const BasketGroup& group) {
    Basket basket;
    std::unordered_map<std::string, std::size_t> by_product;
    for (const TransactionRecord* record : group.lines) {
        const double value = record->unit_price * static_cast<double>(record->quantity);
        auto [it, inserted] = by_product.emplace(record->product_id, basket.lines.size());
        if (inserted) {
            basket.lines.push_back({value, 1, record->price_level, record->children_flag});
        } else {
            basket.lines[it->second].unit_price += value;
        }
    }
    return basket;
}

Matrix basket_feature_matrix(std::span<const BasketFeatureVector> features) {
    Matrix points(features.size(), 4);
    for (std::size_t r = 0; r < features.size(); ++r) {
        points(r, 0) = features[r].value_scaled;
        points(r, 1) = features[r].premium_share;
        points(r, 2) = features[r].children_share;
        points(r, 3) = features[r].diversity_scaled;
    }
    return points;
}

Matrix customer_feature_matrix(std::span<const CustomerProfile> profiles) {
    Matrix points(profiles.size(), 4);
    for (std::size_t r = 0; r < profiles.size(); ++r) {
        points(r, 0) = profiles[r].total_value_scaled;
        points(r, 1) = profiles[r].premium_share;
        points(r, 2) = profiles[r].children_share;
        points(r, 3) = profiles[r].mean_diversity;
    }
    return points;
}

ClusteringResult cluster_points(const Matrix& raw_points, int fixed_k, int k_min, int k_max,
                                std::uint64_t seed, int restarts, const char* what) {
    StandardizeResult standardized = standardize(raw_points);
    ClusteringResult result;
    if (fixed_k > 0) {
        if (static_cast<std::size_t>(fixed_k) > raw_points.rows())
            throw input_error(std::string(what) + " cluster count exceeds the number of points");
        result = kmeans(standardized.points, fixed_k, seed, restarts);
    } else {
        const int hi = std::min<int>(k_max, static_cast<int>(raw_points.rows()));
        if (k_min > hi)
            throw input_error(std::string(what) + " has too few points for the selection range");
        result = select_k(standardized.points, k_min, hi, seed, restarts).clustering;
    }
    result.standardization = std::move(standardized.stats);
    return result;
}

double ape_percent(double truth, double estimate) {
    return 100.0 * std::abs(truth - estimate) / truth;
}

}  // namespace

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options) {
    std::ifstream input(path, std::ios::binary);
    if (!input) throw io_error("cannot open input file: " + path.string());
    std::ostringstream buffer;
    buffer << input.rdbuf();
    return ingest_text(buffer.str(), options);
}

IngestResult ingest_text(const std::string& text, const IngestOptions& options) {
    std::istringstream stream(text);
    std::string line;
    if (!std::getline(stream, line)) throw empty_sample_error("input holds no rows");

    const std::vector<std::string> header = split_line(line, options.delimiter);
    auto find_column = [&](const std::string& name) -> int {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<int>(c);
        return -1;
    };
    const int col_basket = find_column("basket_id");
    const int col_customer = find_column("customer_id");
    const int col_product = find_column("product_id");
    const int col_price = find_column("unit_price");
    const int col_quantity = find_column("quantity");
    const int col_level = find_column("price_level");
    const int col_children = find_column("children_flag");
    const int col_timestamp = find_column("timestamp");
    for (const auto& [column, name] :
         {std::pair{col_basket, "basket_id"}, {col_product, "product_id"},
          {col_price, "unit_price"}, {col_quantity, "quantity"}, {col_level, "price_level"},
          {col_children, "children_flag"}}) {
        if (column < 0) throw io_error(std::string("missing mandatory column: ") + name);
    }

    IngestResult out;
    std::size_t line_number = 1;
    while (std::getline(stream, line)) {
        ++line_number;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_line(line, options.delimiter);
        auto reject = [&](const std::string& reason) {
            ++out.summary.rows_rejected;
            out.summary.rejects.push_back({line_number, reason});
        };
        if (fields.size() != header.size()) {
            reject("expected " + std::to_string(header.size()) + " fields, found " +
                   std::to_string(fields.size()));
            continue;
        }
        TransactionRecord record;
        record.basket_id = fields[static_cast<std::size_t>(col_basket)];
        record.product_id = fields[static_cast<std::size_t>(col_product)];
        if (record.basket_id.empty()) {
            reject("empty basket_id");
            continue;
        }
        if (record.product_id.empty()) {
            reject("empty product_id");
            continue;
        }
        if (col_customer >= 0) {
            const std::string& customer = fields[static_cast<std::size_t>(col_customer)];
            if (!customer.empty()) record.customer_id = customer;
        }
        if (!parse_double(fields[static_cast<std::size_t>(col_price)], record.unit_price) ||
            record.unit_price < 0.0) {
            reject("bad unit_price: " + fields[static_cast<std::size_t>(col_price)]);
            continue;
        }
        if (!parse_int(fields[static_cast<std::size_t>(col_quantity)], record.quantity) ||
            record.quantity < 1) {
            reject("bad quantity: " + fields[static_cast<std::size_t>(col_quantity)]);
            continue;
        }
        if (!parse_price_level(fields[static_cast<std::size_t>(col_level)], record.price_level)) {
            reject("bad price_level: " + fields[static_cast<std::size_t>(col_level)]);
            continue;
        }
        if (!parse_flag(fields[static_cast<std::size_t>(col_children)], record.children_flag)) {
            reject("bad children_flag: " + fields[static_cast<std::size_t>(col_children)]);
            continue;
        }
        if (col_timestamp >= 0) {
            const std::string& ts = fields[static_cast<std::size_t>(col_timestamp)];
            if (!ts.empty()) {
                CivilDate date;
                if (!parse_date(ts, date)) {
                    reject("bad timestamp: " + ts);
                    continue;
                }
                record.timestamp = ts;
            }
        }
        ++out.summary.rows_accepted;
        out.records.push_back(std::move(record));
    }
    if (out.records.empty() && out.summary.rows_rejected == 0)
        throw empty_sample_error("input holds no data rows");

    // Basket-level consistency and the monitored share of receipts.
    const std::vector<BasketGroup> groups = group_baskets(out.records);
    out.summary.baskets = groups.size();
    if (!groups.empty()) {
        std::size_t monitored = 0;
        for (const BasketGroup& group : groups)
            if (group.customer_id) ++monitored;
        out.summary.monitored_share =
            static_cast<double>(monitored) / static_cast<double>(groups.size());
    }
    return out;
}

FrequencyFilterResult filter_extreme_frequency(std::span<const TransactionRecord> records,
                                               double cap, double period_months) {
    if (!(cap > 0.0)) throw input_error("frequency cap must be positive");
    if (!(period_months > 0.0)) throw input_error("period length must be positive");

    std::map<std::string, std::set<std::string>> baskets_by_customer;
    for (const TransactionRecord& record : records)
        if (record.customer_id) baskets_by_customer[*record.customer_id].insert(record.basket_id);

    std::set<std::string> removed;
    for (const auto& [customer, baskets] : baskets_by_customer) {
        const double per_month = static_cast<double>(baskets.size()) / period_months;
        if (per_month > cap) removed.insert(customer);
    }

    FrequencyFilterResult out;
    out.customers_removed = removed.size();
    out.records.reserve(records.size());
    for (const TransactionRecord& record : records) {
        if (record.customer_id && removed.count(*record.customer_id)) continue;
        out.records.push_back(record);
    }
    return out;
}

void validate_run_config(const RunConfig& config) {
    if (!(config.frequency_cap > 0.0)) throw input_error("frequency cap must be positive");
    if (config.basket_types < 0 || config.segments < 0)
        throw input_error("cluster counts cannot be negative");
    if (config.basket_types == 0 && config.basket_k_min < 2)
        throw input_error("basket selection range must start at 2");
    if (config.segments == 0 && config.segment_k_min < 2)
        throw input_error("segment selection range must start at 2");
    if (config.restarts < 1) throw input_error("at least one clustering restart is required");
    const bool is_map = config.estimator == EstimatorKind::map;
    if (is_map != config.prior.has_value())
        throw input_error("a prior is required exactly when the estimator is map");
    if (config.estimator == EstimatorKind::naive)
        throw input_error("the naive estimate is always reported; pick mle, least-squares or map");
}

namespace {

// Shared front half of the workflow: filtering, grouping, features and
// both clustering passes, through the per-segment frequencies.
struct PipelineStages {
    std::size_t extreme_frequency_removed = 0;
    std::size_t degenerate_baskets_excluded = 0;
    ClusteringResult basket_clusters;
    ClusteringResult customer_clusters;
    CountsTable monitored_counts;
    std::vector<int> unmonitored_labels;
    SegmentFrequencies frequencies;
};

PipelineStages run_stages(std::span<const TransactionRecord> records,
                          const RunConfig& config,
                          double period_months,
                          bool require_unmonitored) {
    validate_run_config(config);
    if (records.empty()) throw empty_sample_error("no records in the period");

    PipelineStages stages;
    const FrequencyFilterResult filtered =
        filter_extreme_frequency(records, config.frequency_cap, period_months);
    stages.extreme_frequency_removed = filtered.customers_removed;

    const std::vector<BasketGroup> groups = group_baskets(filtered.records);
    bool any_monitored = false, any_unmonitored = false;
    for (const BasketGroup& group : groups) {
        (group.customer_id ? any_monitored : any_unmonitored) = true;
    }
    if (require_unmonitored && !any_unmonitored)
        throw input_error("no unmonitored receipts: nothing to estimate");
    if (!any_monitored) throw input_error("no monitored receipts: segments cannot be built");

    // Basket features over the whole period, monitored and unmonitored alike.
    std::vector<Basket> baskets;
    baskets.reserve(groups.size());
    for (const BasketGroup& group : groups) baskets.push_back(build_feature_basket(group));
    const BasketFeatureResult features = basket_features(baskets);
    stages.degenerate_baskets_excluded = features.excluded_zero_value;

    stages.basket_clusters =
        cluster_points(basket_feature_matrix(features.features), config.basket_types,
                       config.basket_k_min, config.basket_k_max, config.seed, config.restarts,
                       "basket clustering");
    const int n = stages.basket_clusters.k;

    // Customers are built from retained monitored baskets only.
    std::vector<CustomerBaskets> customers;
    std::unordered_map<std::string, std::size_t> customer_index;
    std::vector<int> monitored_rows_basket_label;
    std::vector<std::size_t> monitored_rows_customer;
    for (std::size_t row = 0; row < features.retained.size(); ++row) {
        const BasketGroup& group = groups[features.retained[row]];
        const int basket_label = stages.basket_clusters.assignments[row];
        if (!group.customer_id) {
            stages.unmonitored_labels.push_back(basket_label);
            continue;
        }
        auto [it, inserted] = customer_index.emplace(*group.customer_id, customers.size());
        if (inserted) customers.push_back({*group.customer_id, {}});
        customers[it->second].baskets.push_back(features.summaries[row]);
        monitored_rows_basket_label.push_back(basket_label);
        monitored_rows_customer.push_back(it->second);
    }
    if (customers.empty()) throw input_error("no monitored baskets survive featurization");
    if (require_unmonitored && stages.unmonitored_labels.empty())
        throw input_error("no unmonitored baskets survive featurization");

    const CustomerFeatureResult profiles =
        customer_features(customers, features.count_quantile90);
    const int max_segments = std::min<int>(config.segment_k_max, n);
    stages.customer_clusters =
        cluster_points(customer_feature_matrix(profiles.profiles), config.segments,
                       config.segment_k_min, max_segments, config.seed + 1, config.restarts,
                       "customer clustering");
    const int m = stages.customer_clusters.k;
    if (m > n)
        throw input_error("more customer segments than basket types; identifiability needs m <= n");

    // Monitored tallies: basket type by the basket's cluster, segment by
    // the purchasing customer's cluster.
    std::vector<int> monitored_segment_labels(monitored_rows_basket_label.size());
    for (std::size_t r = 0; r < monitored_rows_basket_label.size(); ++r)
        monitored_segment_labels[r] =
            stages.customer_clusters.assignments[monitored_rows_customer[r]];
    stages.monitored_counts =
        tabulate_counts(monitored_rows_basket_label, monitored_segment_labels, n, m);

    std::vector<int> customer_segments(customers.size());
    std::vector<int> visit_counts(customers.size());
    for (std::size_t c = 0; c < customers.size(); ++c) {
        customer_segments[c] = stages.customer_clusters.assignments[c];
        visit_counts[c] = static_cast<int>(customers[c].baskets.size());
    }
    stages.frequencies = segment_frequencies(customer_segments, visit_counts, m);
    return stages;
}

}  // namespace

Report estimate_pipeline(std::span<const TransactionRecord> records,
                         const RunConfig& config,
                         const std::string& period_label,
                         double period_months) {
    Report report;
    report.period_label = period_label;
    report.period_months = period_months;
    report.estimator = estimator_name(config.estimator);

    const PipelineStages stages = run_stages(records, config, period_months, true);
    report.extreme_frequency_removed = stages.extreme_frequency_removed;
    report.degenerate_baskets_excluded = stages.degenerate_baskets_excluded;
    const int n = stages.basket_clusters.k;
    const int m = stages.customer_clusters.k;
    report.basket_types = n;
    report.basket_db_index = stages.basket_clusters.db_index;
    report.segment_count = m;
    report.customer_db_index = stages.customer_clusters.db_index;
    const ClusteringResult& customer_clusters = stages.customer_clusters;
    const CountsTable& monitored_counts = stages.monitored_counts;
    const std::vector<int>& unmonitored_labels = stages.unmonitored_labels;
    const SegmentFrequencies& frequencies = stages.frequencies;

    const MonitoredEstimate monitored = estimate_monitored(monitored_counts, frequencies.mean_visits);
    report.rank_ok = monitored.rank_ok;
    if (!monitored.rank_ok)
        throw identifiability_error(
            "estimated conditional matrix is rank deficient; choose a different segmentation "
            "(adjust cluster counts or features)");

    const CountsTable unmonitored_counts = tabulate_counts(unmonitored_labels, n);
    const auto transactions = static_cast<double>(unmonitored_counts.total);
    report.monitored_transactions = monitored_counts.total;
    report.unmonitored_transactions = unmonitored_counts.total;

    std::vector<double> counts(unmonitored_counts.basket_counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        counts[i] = static_cast<double>(unmonitored_counts.basket_counts[i]);

    OptimizeResult fit;
    switch (config.estimator) {
        case EstimatorKind::mle:
            fit = mle_estimate(counts, monitored.model.conditional);
            break;
        case EstimatorKind::least_squares: {
            std::vector<double> probs(counts.size());
            for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = counts[i] / transactions;
            fit = ls_estimate(probs, monitored.model.conditional);
            break;
        }
        case EstimatorKind::map:
            fit = map_estimate(counts, monitored.model.conditional, PriorSpec{*config.prior});
            break;
        case EstimatorKind::naive:
            break;  // rejected by validate_run_config
    }

    const EstimationResult proposed =
        finalize_estimate(config.estimator, fit.segment_mix, fit.objective, fit.iterations,
                          fit.converged, frequencies.mean_visits, transactions);
    const EstimationResult baseline =
        naive_estimate(monitored.model.segment_mix, frequencies.mean_visits, transactions);

    report.objective = proposed.objective;
    report.iterations = proposed.iterations;
    report.converged = proposed.converged;
    report.estimated_uniques = proposed.unique_count;
    report.naive_uniques = baseline.unique_count;

    report.segments.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        SegmentRow row;
        row.id = j + 1;
        row.monitored_mix = monitored.model.segment_mix[static_cast<std::size_t>(j)];
        row.estimated_mix = proposed.segment_mix[static_cast<std::size_t>(j)];
        row.frequency = frequencies.mean_visits[static_cast<std::size_t>(j)];
        row.monitored_uniques = frequencies.unique_customers[static_cast<std::size_t>(j)];
        row.estimated_unmonitored_uniques =
            proposed.unique_count * proposed.customer_mix[static_cast<std::size_t>(j)];
        row.penetration = static_cast<double>(row.monitored_uniques) /
                          (static_cast<double>(row.monitored_uniques) +
                           row.estimated_unmonitored_uniques);
        row.center = customer_clusters.centers.row(static_cast<std::size_t>(j));
        report.monitored_uniques += row.monitored_uniques;
        report.segments.push_back(std::move(row));
    }
    return report;
}

ClusterSummary cluster_summary(std::span<const TransactionRecord> records,
                               const RunConfig& config,
                               const std::string& period_label,
                               double period_months) {
    const PipelineStages stages = run_stages(records, config, period_months, false);
    ClusterSummary summary;
    summary.period_label = period_label;
    summary.basket_types = stages.basket_clusters.k;
    summary.segment_count = stages.customer_clusters.k;
    summary.basket_db_index = stages.basket_clusters.db_index;
    summary.customer_db_index = stages.customer_clusters.db_index;
    for (std::int64_t count : stages.frequencies.unique_customers)
        summary.segment_customers.push_back(static_cast<int>(count));
    summary.segment_frequencies = stages.frequencies.mean_visits;
    summary.segment_centers = stages.customer_clusters.centers;
    summary.degenerate_baskets_excluded = stages.degenerate_baskets_excluded;
    summary.extreme_frequency_removed = stages.extreme_frequency_removed;
    return summary;
}

ValidationOutcome validation_split(std::span<const TransactionRecord> records,
                                   const std::set<std::string>& flagged_customers,
                                   const RunConfig& config,
                                   const std::string& period_label,
                                   double period_months) {
    std::vector<TransactionRecord> pseudo;
    std::set<std::string> kept, hidden;
    for (const TransactionRecord& record : records) {
        if (!record.customer_id) continue;  // the validation works inside the monitored data
        TransactionRecord copy = record;
        if (flagged_customers.count(*record.customer_id)) {
            kept.insert(*record.customer_id);
        } else {
            hidden.insert(*record.customer_id);
            copy.customer_id.reset();
        }
        pseudo.push_back(std::move(copy));
    }
    if (kept.empty() || hidden.empty())
        throw split_error("validation split needs customers on both sides");

    ValidationOutcome outcome;
    outcome.true_uniques = static_cast<std::int64_t>(hidden.size());
    outcome.report = estimate_pipeline(pseudo, config, period_label, period_months);
    outcome.proposed_ape =
        ape_percent(static_cast<double>(outcome.true_uniques), outcome.report.estimated_uniques);
    outcome.naive_ape =
        ape_percent(static_cast<double>(outcome.true_uniques), outcome.report.naive_uniques);
    return outcome;
}

PeriodKind parse_period_kind(const std::string& text) {
    if (text == "all") return PeriodKind::all;
    if (text == "weekly") return PeriodKind::weekly;
    if (text == "monthly") return PeriodKind::monthly;
    if (text == "quarterly") return PeriodKind::quarterly;
    if (text == "yearly") return PeriodKind::yearly;
    throw input_error("unknown period kind: " + text);
}

std::string period_kind_name(PeriodKind kind) {
    switch (kind) {
        case PeriodKind::all: return "all";
        case PeriodKind::weekly: return "weekly";
        case PeriodKind::monthly: return "monthly";
        case PeriodKind::quarterly: return "quarterly";
        case PeriodKind::yearly: return "yearly";
    }
    return "all";
}

std::vector<PeriodSlice> slice_by_period(std::span<const TransactionRecord> records,
                                         PeriodKind kind) {
    if (kind == PeriodKind::all) {
        PeriodSlice slice;
        slice.label = "all";
        slice.records.assign(records.begin(), records.end());
        long lo = 0, hi = 0;
        bool any = false;
        for (const TransactionRecord& record : records) {
            if (!record.timestamp) {
                any = false;
                break;
            }
            CivilDate date;
            if (!parse_date(*record.timestamp, date)) continue;
            const long z = days_from_civil(date);
            if (!any) {
                lo = hi = z;
                any = true;
            } else {
                lo = std::min(lo, z);
                hi = std::max(hi, z);
            }
        }
        slice.months = any ? std::max(static_cast<double>(hi - lo + 1) / kDaysPerMonth,
                                      1.0 / kDaysPerMonth)
                           : 1.0;
        return {std::move(slice)};
    }

    std::map<std::string, std::vector<TransactionRecord>> by_label;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const TransactionRecord& record = records[r];
        if (!record.timestamp)
            throw input_error("record " + std::to_string(r) +
                              " has no timestamp; period slicing needs one on every record");
        CivilDate date;
        if (!parse_date(*record.timestamp, date))
            throw input_error("record " + std::to_string(r) + " has a malformed timestamp: " +
                              *record.timestamp);
        by_label[period_label_for(date, kind)].push_back(record);
    }

    double months = 1.0;
    switch (kind) {
        case PeriodKind::weekly: months = 7.0 / kDaysPerMonth; break;
        case PeriodKind::monthly: months = 1.0; break;
        case PeriodKind::quarterly: months = 3.0; break;
        case PeriodKind::yearly: months = 12.0; break;
        case PeriodKind::all: break;
    }

    std::vector<PeriodSlice> slices;
    slices.reserve(by_label.size());
    for (auto& [label, slice_records] : by_label)
        slices.push_back({label, months, std::move(slice_records)});
    return slices;
}

std::string report_to_json(const Report& report) {
    nlohmann::ordered_json doc;
    doc["period"] = report.period_label;
    doc["period_months"] = report.period_months;
    doc["monitored_transactions"] = report.monitored_transactions;
    doc["unmonitored_transactions"] = report.unmonitored_transactions;
    doc["basket_types"] = report.basket_types;
    doc["segment_count"] = report.segment_count;
    doc["estimator"] = report.estimator;

    nlohmann::ordered_json segments = nlohmann::ordered_json::array();
    for (const SegmentRow& row : report.segments) {
        nlohmann::ordered_json segment;
        segment["segment"] = row.id;
        segment["monitored_mix"] = row.monitored_mix;
        segment["estimated_mix"] = row.estimated_mix;
        segment["frequency"] = row.frequency;
        segment["monitored_uniques"] = row.monitored_uniques;
        segment["estimated_unmonitored_uniques"] = row.estimated_unmonitored_uniques;
        segment["penetration"] = row.penetration;
        segment["center"] = row.center;
        segments.push_back(std::move(segment));
    }
    doc["segments"] = std::move(segments);

    doc["monitored_uniques"] = report.monitored_uniques;
    doc["estimated_uniques"] = report.estimated_uniques;
    doc["naive_uniques"] = report.naive_uniques;

    nlohmann::ordered_json diagnostics;
    diagnostics["objective"] = report.objective;
    diagnostics["iterations"] = report.iterations;
    diagnostics["converged"] = report.converged;
    diagnostics["rank_ok"] = report.rank_ok;
    diagnostics["basket_db_index"] = report.basket_db_index;
    diagnostics["customer_db_index"] = report.customer_db_index;
    diagnostics["degenerate_baskets_excluded"] = report.degenerate_baskets_excluded;
    diagnostics["extreme_frequency_removed"] = report.extreme_frequency_removed;
    doc["diagnostics"] = std::move(diagnostics);
    return doc.dump(2) + "\n";
}

std::string segments_csv(const Report& report) {
    std::ostringstream out;
    out << "segment,monitored_mix,estimated_mix,frequency,monitored_uniques,"
           "estimated_unmonitored_uniques,penetration,center_value,center_premium,"
           "center_children,center_diversity\n";
    for (const SegmentRow& row : report.segments) {
        out << row.id << ',' << format_fixed(row.monitored_mix, 6) << ','
            << format_fixed(row.estimated_mix, 6) << ',' << format_fixed(row.frequency, 6) << ','
            << row.monitored_uniques << ',' << format_fixed(row.estimated_unmonitored_uniques, 2)
            << ',' << format_fixed(row.penetration, 6);
        for (double c : row.center) out << ',' << format_fixed(c, 6);
        out << '\n';
    }
    return out.str();
}

std::string validation_csv(std::span<const ValidationOutcome> outcomes) {
    std::ostringstream out;
    out << "period,true_uniques,estimated_uniques,naive_uniques,proposed_ape,naive_ape\n";
    for (const ValidationOutcome& outcome : outcomes) {
        out << outcome.report.period_label << ',' << outcome.true_uniques << ','
            << format_fixed(outcome.report.estimated_uniques, 2) << ','
            << format_fixed(outcome.report.naive_uniques, 2) << ','
            << format_fixed(outcome.proposed_ape, 4) << ',' << format_fixed(outcome.naive_ape, 4)
            << '\n';
    }
    return out.str();
}

std::string validation_summary_csv(const std::string& period_kind,
                                   std::span<const ValidationOutcome> outcomes) {
    std::vector<double> naive, proposed;
    for (const ValidationOutcome& outcome : outcomes) {
        naive.push_back(outcome.naive_ape);
        proposed.push_back(outcome.proposed_ape);
    }
    std::ostringstream out;
    out << "period_kind,observations,naive_m,naive_sd,naive_wc,proposed_m,proposed_sd,"
           "proposed_wc\n";
    if (!outcomes.empty()) {
        const double naive_sd = naive.size() > 1 ? sample_sd(naive) : 0.0;
        const double proposed_sd = proposed.size() > 1 ? sample_sd(proposed) : 0.0;
        out << period_kind << ',' << outcomes.size() << ',' << format_fixed(mean(naive), 2) << ','
            << format_fixed(naive_sd, 2) << ','
            << format_fixed(*std::max_element(naive.begin(), naive.end()), 2) << ','
            << format_fixed(mean(proposed), 2) << ',' << format_fixed(proposed_sd, 2) << ','
            << format_fixed(*std::max_element(proposed.begin(), proposed.end()), 2) << '\n';
    }
    return out.str();
}

}  // namespace custcount
