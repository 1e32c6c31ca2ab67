#pragma once

#include <stdexcept>

namespace custcount {

// Invalid or inconsistent caller input.
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A sample with no transactions where at least one is required.
struct empty_sample_error : input_error {
    using input_error::input_error;
};

// A customer segment with no transactions or no customers.
struct degenerate_segment_error : input_error {
    using input_error::input_error;
};

// A feature dimension with zero variance.
struct standardization_error : input_error {
    using input_error::input_error;
};

// A validation split that leaves one side empty.
struct split_error : input_error {
    using input_error::input_error;
};

// File-level problems during ingestion.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Segment mix not identifiable from the data: the conditional
// basket-type columns are (numerically) linearly dependent.
struct identifiability_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Matrix too close to singular for a reliable inverse.
struct conditioning_error : identifiability_error {
    using identifiability_error::identifiability_error;
};

}  // namespace custcount
