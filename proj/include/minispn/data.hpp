#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace minispn {

using VarId = std::uint32_t;
using RowId = std::uint32_t;

// Cells are stored as doubles. Discrete values are non-negative integers held
// exactly; a missing cell is NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double cell) { return std::isnan(cell); }

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ColumnKind { Discrete, Continuous };

struct ColumnMeta {
    std::string name;
    ColumnKind kind = ColumnKind::Discrete;
    int arity = 2;  // meaningful for Discrete only

    static ColumnMeta discrete(std::string name, int arity) {
        return {std::move(name), ColumnKind::Discrete, arity};
    }
    static ColumnMeta continuous(std::string name) {
        return {std::move(name), ColumnKind::Continuous, 0};
    }
    bool is_discrete() const { return kind == ColumnKind::Discrete; }

    friend bool operator==(const ColumnMeta&, const ColumnMeta&) = default;
};

using Schema = std::vector<ColumnMeta>;

using Row = std::vector<double>;
using RowView = std::span<const double>;

class Dataset {
public:
    Dataset() = default;
    Dataset(Schema schema, std::vector<double> cells);

    const Schema& schema() const { return schema_; }
    std::size_t num_vars() const { return schema_.size(); }
    std::size_t num_rows() const { return num_vars() == 0 ? 0 : cells_.size() / num_vars(); }
    bool empty() const { return num_rows() == 0; }

    RowView row(std::size_t r) const { return {cells_.data() + r * num_vars(), num_vars()}; }
    double at(std::size_t r, VarId v) const { return cells_[r * num_vars() + v]; }
    const std::vector<double>& cells() const { return cells_; }

    void append_row(RowView row);

    // Copy of the given rows, in order.
    Dataset select_rows(std::span<const RowId> rows) const;

private:
    Schema schema_;
    std::vector<double> cells_;
};

// Every violated Dataset invariant as a human-readable line; empty = ok.
std::vector<std::string> audit(const Dataset& data);

// Row/column index view over a dataset. Views never own the data.
class DataSlice {
public:
    DataSlice(const Dataset& data, std::vector<RowId> rows, std::vector<VarId> vars);
    static DataSlice whole(const Dataset& data);

    const Dataset& dataset() const { return *data_; }
    const std::vector<RowId>& rows() const { return rows_; }
    const std::vector<VarId>& vars() const { return vars_; }
    std::size_t num_rows() const { return rows_.size(); }
    std::size_t num_vars() const { return vars_.size(); }

    // Positions are indices into this slice's row/var lists.
    DataSlice sub(std::span<const std::size_t> row_positions,
                  std::span<const std::size_t> var_positions) const;
    DataSlice with_rows(std::vector<RowId> rows) const;
    DataSlice with_vars(std::vector<VarId> vars) const;

private:
    const Dataset* data_;
    std::vector<RowId> rows_;
    std::vector<VarId> vars_;
};

struct BenchmarkTriplet {
    Dataset train;
    Dataset valid;
    Dataset test;
};

// Reads <stem>.ts.data, <stem>.valid.data and <stem>.test.data.
BenchmarkTriplet load_benchmark_triplet(const std::string& path_stem);

// Comma-separated integers, one row per line, '\n' terminated.
std::string format_benchmark_rows(const Dataset& data);
void write_benchmark_file(const Dataset& data, const std::filesystem::path& path);

Dataset parse_mixed_csv(const std::string& text, const std::string& missing_token = "?");
Dataset load_mixed_csv(const std::string& path, const std::string& missing_token = "?");
// Rows typed by a known schema (e.g. a model's). All-missing columns are fine;
// discrete values must be below the column arity.
Dataset parse_rows_with_schema(const std::string& text, const Schema& schema, bool has_header,
                               const std::string& missing_token = "?");
Dataset load_rows_with_schema(const std::string& path, const Schema& schema, bool has_header,
                              const std::string& missing_token = "?");
std::string format_csv(const Dataset& data, const std::string& missing_token = "?");

// Median of observed values of a continuous variable over the slice rows.
// nullopt when nothing is observed. Throws DataError for discrete variables.
std::optional<double> median_cutoff(const DataSlice& slice, VarId var);

struct RowSplit {
    std::vector<RowId> train;
    std::vector<RowId> valid;
};
RowSplit split_rows(const Dataset& data, double valid_fraction, std::uint64_t seed);

}  // namespace minispn
