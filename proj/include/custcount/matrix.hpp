#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace custcount {

// Dense row-major matrix of doubles. Problem sizes here are tiny
// (basket types x customer segments), so no fancy storage is needed.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix from_columns(const std::vector<std::vector<double>>& columns);
    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double> column(std::size_t c) const;
    std::vector<double> row(std::size_t r) const;
    void set_column(std::size_t c, std::span<const double> values);

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// a * v for v of length a.cols().
std::vector<double> matvec(const Matrix& a, std::span<const double> v);

double one_norm(const Matrix& a);

// Numerical column rank via modified Gram-Schmidt with column pivoting.
// A column counts toward the rank while its residual norm stays above
// rel_tol times the largest original column norm.
std::size_t column_rank(const Matrix& a, double rel_tol = 1e-8);
bool has_full_column_rank(const Matrix& a, double rel_tol = 1e-8);

struct InverseResult {
    Matrix inverse;
    double condition = 0.0;  // one-norm condition estimate
};

// Gauss-Jordan with partial pivoting. Throws conditioning_error when a
// pivot vanishes.
InverseResult invert(const Matrix& a);

}  // namespace custcount
