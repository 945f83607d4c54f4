#pragma once

#include <cstdint>
#include <cstddef>
#include <utility>
#include <vector>

namespace lowml {

// One sparse feature vector: (column, value) pairs sorted by column.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

// Row-major CSR matrix.
struct SparseMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_ptr{0};  // n_rows + 1 entries
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    void append_row(const SparseVector& row) {
        for (const auto& [c, x] : row) {
            col.push_back(c);
            val.push_back(x);
        }
        row_ptr.push_back(col.size());
        ++n_rows;
    }

    std::size_t nnz() const { return col.size(); }

    std::size_t row_begin(std::size_t i) const { return row_ptr[i]; }
    std::size_t row_end(std::size_t i) const { return row_ptr[i + 1]; }

    SparseVector row(std::size_t i) const {
        SparseVector r;
        r.reserve(row_end(i) - row_begin(i));
        for (std::size_t k = row_begin(i); k < row_end(i); ++k)
            r.emplace_back(col[k], val[k]);
        return r;
    }

    // Select a subset of rows, preserving the given order.
    SparseMatrix select_rows(const std::vector<std::size_t>& idx) const {
        SparseMatrix out;
        out.n_cols = n_cols;
        for (std::size_t i : idx) out.append_row(row(i));
        return out;
    }
};

inline double dot(const SparseVector& a, const SparseVector& b) {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first < b[j].first) ++i;
        else if (a[i].first > b[j].first) ++j;
        else { s += a[i].second * b[j].second; ++i; ++j; }
    }
    return s;
}

}  // namespace lowml
