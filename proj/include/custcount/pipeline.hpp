#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "custcount/clustering.hpp"
#include "custcount/model.hpp"

namespace custcount {

// One product line of one receipt, as ingested.
struct TransactionRecord {
    std::string basket_id;
    std::optional<std::string> customer_id;  // absent = unmonitored receipt
    std::string product_id;
    double unit_price = 0.0;
    int quantity = 1;
    PriceLevel price_level = PriceLevel::standard;
    bool children_flag = false;
    std::optional<std::string> timestamp;  // ISO-8601 date prefix
};

struct IngestOptions {
    char delimiter = ',';
};

struct RejectedRow {
    std::size_t line = 0;
    std::string reason;
};

struct IngestSummary {
    std::size_t rows_accepted = 0;
    std::size_t rows_rejected = 0;
    std::size_t baskets = 0;
    double monitored_share = 0.0;  // receipts carrying a customer id
    std::vector<RejectedRow> rejects;
};

struct IngestResult {
    std::vector<TransactionRecord> records;
    IngestSummary summary;
};

// Header-bearing delimited text, one product line per row. Malformed
// rows are rejected with their line numbers; a missing column, an
// unreadable file, or a basket with conflicting customer ids is a hard
// error.
IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options = {});

// Same parser over an in-memory document; ingest() delegates here.
IngestResult ingest_text(const std::string& text, const IngestOptions& options = {});

struct FrequencyFilterResult {
    std::vector<TransactionRecord> records;
    std::size_t customers_removed = 0;
};

// Drops every record of monitored customers whose visits per month
// exceed the cap ("more than" is strict).
FrequencyFilterResult filter_extreme_frequency(std::span<const TransactionRecord> records,
                                               double cap, double period_months);

struct RunConfig {
    int basket_types = 0;  // 0 = select by Davies-Bouldin over the range below
    int segments = 0;      // 0 = likewise
    int basket_k_min = 2, basket_k_max = 8;
    int segment_k_min = 2, segment_k_max = 6;
    double frequency_cap = 15.0;  // visits per month
    EstimatorKind estimator = EstimatorKind::mle;
    std::optional<std::vector<double>> prior;  // required iff estimator == map
    std::uint64_t seed = 1;
    int restarts = 10;
};

void validate_run_config(const RunConfig& config);

struct SegmentRow {
    int id = 0;
    double monitored_mix = 0.0;      // transaction share, monitored sample
    double estimated_mix = 0.0;      // transaction share, unmonitored sample
    double frequency = 0.0;          // mean visits per customer
    std::int64_t monitored_uniques = 0;
    double estimated_unmonitored_uniques = 0.0;
    double penetration = 0.0;        // monitored / (monitored + estimated)
    std::vector<double> center;      // standardized cluster center
};

struct Report {
    std::string period_label;
    double period_months = 1.0;
    std::int64_t monitored_transactions = 0;
    std::int64_t unmonitored_transactions = 0;
    int basket_types = 0;
    int segment_count = 0;
    std::vector<SegmentRow> segments;
    std::int64_t monitored_uniques = 0;
    double estimated_uniques = 0.0;
    double naive_uniques = 0.0;
    std::string estimator;
    double objective = 0.0;
    int iterations = 0;
    bool converged = true;
    bool rank_ok = true;
    double basket_db_index = 0.0;
    double customer_db_index = 0.0;
    std::size_t degenerate_baskets_excluded = 0;
    std::size_t extreme_frequency_removed = 0;
};

// Full workflow on one period's records: basket features and clustering,
// customer features and clustering, monitored estimation, per-segment
// frequencies, the chosen mix estimator on the unmonitored tallies, and
// unique-customer conversion. Deterministic for a fixed seed.
Report estimate_pipeline(std::span<const TransactionRecord> records,
                         const RunConfig& config,
                         const std::string& period_label = "all",
                         double period_months = 1.0);

// The clustering stages alone: basket types, customer segments and
// per-segment frequencies, with no estimation. Works without any
// unmonitored receipts.
struct ClusterSummary {
    std::string period_label;
    int basket_types = 0;
    int segment_count = 0;
    double basket_db_index = 0.0;
    double customer_db_index = 0.0;
    std::vector<int> segment_customers;       // monitored uniques per segment
    std::vector<double> segment_frequencies;  // mean visits per segment
    Matrix segment_centers;                   // standardized coordinates
    std::size_t degenerate_baskets_excluded = 0;
    std::size_t extreme_frequency_removed = 0;
};

ClusterSummary cluster_summary(std::span<const TransactionRecord> records,
                               const RunConfig& config,
                               const std::string& period_label = "all",
                               double period_months = 1.0);

struct ValidationOutcome {
    Report report;
    std::int64_t true_uniques = 0;   // pseudo-unmonitored side, known by construction
    double proposed_ape = 0.0;
    double naive_ape = 0.0;
};

// Emulates the monitored/unmonitored divide inside the monitored data:
// flagged customers stay monitored, the rest have their ids hidden but
// their true unique count is kept for scoring.
ValidationOutcome validation_split(std::span<const TransactionRecord> records,
                                   const std::set<std::string>& flagged_customers,
                                   const RunConfig& config,
                                   const std::string& period_label = "all",
                                   double period_months = 1.0);

enum class PeriodKind { all, weekly, monthly, quarterly, yearly };
PeriodKind parse_period_kind(const std::string& text);
std::string period_kind_name(PeriodKind kind);

struct PeriodSlice {
    std::string label;
    double months = 1.0;
    std::vector<TransactionRecord> records;
};

// Splits records on calendar labels derived from their timestamps;
// PeriodKind::all returns a single slice. Slicing modes other than
// `all` require a timestamp on every record.
std::vector<PeriodSlice> slice_by_period(std::span<const TransactionRecord> records,
                                         PeriodKind kind);

// Serialized outputs; all byte-deterministic for identical inputs.
std::string report_to_json(const Report& report);
std::string segments_csv(const Report& report);
std::string validation_csv(std::span<const ValidationOutcome> outcomes);
std::string validation_summary_csv(const std::string& period_kind,
                                   std::span<const ValidationOutcome> outcomes);

}  // namespace custcount
