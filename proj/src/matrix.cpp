#include "custcount/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "custcount/errors.hpp"

namespace custcount {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix out(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != out.cols_) throw input_error("ragged initializer for matrix rows");
        std::size_t c = 0;
        for (double v : row) out(r, c++) = v;
        ++r;
    }
    return out;
}

Matrix Matrix::from_columns(const std::vector<std::vector<double>>& columns) {
    if (columns.empty()) return {};
    Matrix out(columns.front().size(), columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].size() != out.rows_) throw input_error("ragged initializer for matrix columns");
        for (std::size_t r = 0; r < out.rows_; ++r) out(r, c) = columns[c][r];
    }
    return out;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

std::vector<double> Matrix::row(std::size_t r) const {
    std::vector<double> out(cols_);
    for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
    return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> values) {
    if (values.size() != rows_) throw input_error("column length does not match matrix rows");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

std::vector<double> matvec(const Matrix& a, std::span<const double> v) {
    if (v.size() != a.cols()) throw input_error("matrix-vector dimension mismatch");
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) acc += a(r, c) * v[c];
        out[r] = acc;
    }
    return out;
}

double one_norm(const Matrix& a) {
    double best = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < a.rows(); ++r) sum += std::abs(a(r, c));
        best = std::max(best, sum);
    }
    return best;
}

std::size_t column_rank(const Matrix& a, double rel_tol) {
    const std::size_t n = a.rows(), m = a.cols();
    if (n == 0 || m == 0) return 0;

    std::vector<std::vector<double>> cols(m);
    for (std::size_t c = 0; c < m; ++c) cols[c] = a.column(c);

    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };

    double max_norm = 0.0;
    for (const auto& c : cols) max_norm = std::max(max_norm, norm(c));
    if (max_norm == 0.0) return 0;
    const double threshold = rel_tol * max_norm;

    std::vector<bool> used(m, false);
    std::size_t rank = 0;
    for (std::size_t step = 0; step < m; ++step) {
        std::size_t pivot = m;
        double pivot_norm = threshold;
        for (std::size_t c = 0; c < m; ++c) {
            if (used[c]) continue;
            double nc = norm(cols[c]);
            if (nc > pivot_norm) {
                pivot_norm = nc;
                pivot = c;
            }
        }
        if (pivot == m) break;
        used[pivot] = true;
        ++rank;
        for (double& x : cols[pivot]) x /= pivot_norm;
        for (std::size_t c = 0; c < m; ++c) {
            if (used[c]) continue;
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += cols[pivot][r] * cols[c][r];
            for (std::size_t r = 0; r < n; ++r) cols[c][r] -= dot * cols[pivot][r];
        }
    }
    return rank;
}

bool has_full_column_rank(const Matrix& a, double rel_tol) {
    return column_rank(a, rel_tol) == a.cols();
}

InverseResult invert(const Matrix& a) {
    if (a.rows() != a.cols()) throw input_error("cannot invert a non-square matrix");
    const std::size_t n = a.rows();
    if (n == 0) throw input_error("cannot invert an empty matrix");

    Matrix work = a;
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
        if (std::abs(work(pivot, col)) < 1e-14 * std::max(1.0, one_norm(a)))
            throw conditioning_error("matrix is singular to working precision");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(work(pivot, c), work(col, c));
                std::swap(inv(pivot, c), inv(col, c));
            }
        }
        const double d = work(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            work(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double factor = work(r, col);
            if (factor == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                work(r, c) -= factor * work(col, c);
                inv(r, c) -= factor * inv(col, c);
            }
        }
    }
    return {inv, one_norm(a) * one_norm(inv)};
}

}  // namespace custcount
