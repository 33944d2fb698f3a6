#include "minispn/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "minispn/random.hpp"

namespace minispn {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Splits on '\n', dropping a trailing '\r' from each line and a final empty line.
std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto end = line.find(sep, start);
        if (end == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::optional<long long> parse_nonneg_int(std::string_view tok) {
    long long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || v < 0) return std::nullopt;
    return v;
}

std::optional<double> parse_real(std::string_view tok) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct IntTable {
    std::vector<long long> cells;
    std::size_t width = 0;
};

IntTable read_int_table(const std::string& path) {
    const std::string text = read_file(path);
    IntTable t;
    std::size_t lineno = 0;
    for (auto line : split_lines(text)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (t.width == 0) {
            t.width = fields.size();
        } else if (fields.size() != t.width) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.width) +
                            " fields, found " + std::to_string(fields.size()));
        }
        for (auto f : fields) {
            auto v = parse_nonneg_int(f);
            if (!v) {
                throw DataError(path + ":" + std::to_string(lineno) + ": not a non-negative integer: '" +
                                std::string(f) + "'");
            }
            t.cells.push_back(*v);
        }
    }
    return t;
}

}  // namespace

Dataset::Dataset(Schema schema, std::vector<double> cells) : schema_(std::move(schema)), cells_(std::move(cells)) {
    if (schema_.empty()) {
        if (!cells_.empty()) throw DataError("cells given for an empty schema");
        return;
    }
    if (cells_.size() % schema_.size() != 0) throw DataError("cell count is not a multiple of the row width");
}

void Dataset::append_row(RowView row) {
    if (row.size() != num_vars()) throw DataError("row width mismatch");
    cells_.insert(cells_.end(), row.begin(), row.end());
}

Dataset Dataset::select_rows(std::span<const RowId> rows) const {
    std::vector<double> cells;
    cells.reserve(rows.size() * num_vars());
    for (RowId r : rows) {
        auto src = row(r);
        cells.insert(cells.end(), src.begin(), src.end());
    }
    return Dataset(schema_, std::move(cells));
}

std::vector<std::string> audit(const Dataset& data) {
    std::vector<std::string> issues;
    std::set<std::string> names;
    for (std::size_t v = 0; v < data.num_vars(); ++v) {
        const auto& col = data.schema()[v];
        if (!names.insert(col.name).second) issues.push_back("duplicate column name '" + col.name + "'");
        if (col.is_discrete() && col.arity < 2) issues.push_back("column '" + col.name + "' has arity < 2");
    }
    for (std::size_t r = 0; r < data.num_rows(); ++r) {
        for (VarId v = 0; v < data.num_vars(); ++v) {
            const double x = data.at(r, v);
            if (is_missing(x)) continue;
            const auto& col = data.schema()[v];
            const std::string where = "row " + std::to_string(r) + ", column '" + col.name + "'";
            if (!std::isfinite(x)) {
                issues.push_back(where + ": non-finite value");
            } else if (col.is_discrete() && (x < 0 || x != std::floor(x) || x >= col.arity)) {
                issues.push_back(where + ": invalid discrete value " + std::to_string(x));
            }
        }
    }
    return issues;
}

DataSlice::DataSlice(const Dataset& data, std::vector<RowId> rows, std::vector<VarId> vars)
    : data_(&data), rows_(std::move(rows)), vars_(std::move(vars)) {
    for (RowId r : rows_)
        if (r >= data.num_rows()) throw DataError("slice row index out of range");
    for (VarId v : vars_)
        if (v >= data.num_vars()) throw DataError("slice variable index out of range");
    auto unique = [](auto ids) {
        std::sort(ids.begin(), ids.end());
        return std::adjacent_find(ids.begin(), ids.end()) == ids.end();
    };
    if (!unique(rows_) || !unique(vars_)) throw DataError("slice indices contain duplicates");
}

DataSlice DataSlice::whole(const Dataset& data) {
    std::vector<RowId> rows(data.num_rows());
    std::iota(rows.begin(), rows.end(), RowId{0});
    std::vector<VarId> vars(data.num_vars());
    std::iota(vars.begin(), vars.end(), VarId{0});
    return DataSlice(data, std::move(rows), std::move(vars));
}

DataSlice DataSlice::sub(std::span<const std::size_t> row_positions,
                         std::span<const std::size_t> var_positions) const {
    std::vector<RowId> rows;
    rows.reserve(row_positions.size());
    for (auto p : row_positions) rows.push_back(rows_.at(p));
    std::vector<VarId> vars;
    vars.reserve(var_positions.size());
    for (auto p : var_positions) vars.push_back(vars_.at(p));
    return DataSlice(*data_, std::move(rows), std::move(vars));
}

DataSlice DataSlice::with_rows(std::vector<RowId> rows) const { return DataSlice(*data_, std::move(rows), vars_); }
DataSlice DataSlice::with_vars(std::vector<VarId> vars) const { return DataSlice(*data_, rows_, std::move(vars)); }

BenchmarkTriplet load_benchmark_triplet(const std::string& path_stem) {
    const std::array<std::string, 3> suffixes = {".ts.data", ".valid.data", ".test.data"};
    std::array<IntTable, 3> tables;
    std::size_t width = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        tables[i] = read_int_table(path_stem + suffixes[i]);
        if (tables[i].width == 0) continue;
        if (width == 0) {
            width = tables[i].width;
        } else if (tables[i].width != width) {
            throw DataError(path_stem + suffixes[i] + ": row width " + std::to_string(tables[i].width) +
                            " differs from " + std::to_string(width));
        }
    }
    if (width == 0) throw DataError(path_stem + ": no rows in benchmark files");

    std::vector<long long> max_value(width, 0);
    for (const auto& t : tables)
        for (std::size_t k = 0; k < t.cells.size(); ++k)
            max_value[k % width] = std::max(max_value[k % width], t.cells[k]);

    Schema schema;
    for (std::size_t v = 0; v < width; ++v)
        schema.push_back(ColumnMeta::discrete("x" + std::to_string(v), static_cast<int>(std::max(2LL, max_value[v] + 1))));

    auto to_dataset = [&](const IntTable& t) {
        return Dataset(schema, std::vector<double>(t.cells.begin(), t.cells.end()));
    };
    return {to_dataset(tables[0]), to_dataset(tables[1]), to_dataset(tables[2])};
}

std::string format_benchmark_rows(const Dataset& data) {
    std::string out;
    out.reserve(data.num_rows() * data.num_vars() * 2);
    for (std::size_t r = 0; r < data.num_rows(); ++r) {
        for (VarId v = 0; v < data.num_vars(); ++v) {
            if (v) out.push_back(',');
            out += std::to_string(static_cast<long long>(data.at(r, v)));
        }
        out.push_back('\n');
    }
    return out;
}

void write_benchmark_file(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << format_benchmark_rows(data);
}

Dataset parse_mixed_csv(const std::string& text, const std::string& missing_token) {
    auto lines = split_lines(text);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw DataError("CSV has no header row");

    std::vector<std::string> names;
    for (auto f : split_fields(lines[0])) names.emplace_back(trim(f));
    const std::size_t width = names.size();

    std::vector<std::vector<std::string_view>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto fields = split_fields(lines[i]);
        if (fields.size() != width) {
            throw DataError("line " + std::to_string(i + 1) + ": expected " + std::to_string(width) +
                            " fields, found " + std::to_string(fields.size()));
        }
        for (auto& f : fields) f = trim(f);
        rows.push_back(std::move(fields));
    }

    auto missing = [&](std::string_view cell) { return cell.empty() || cell == missing_token; };

    Schema schema;
    std::vector<double> cells(rows.size() * width, kMissing);
    for (std::size_t v = 0; v < width; ++v) {
        bool continuous = false;
        bool any_observed = false;
        for (const auto& row : rows) {
            if (missing(row[v])) continue;
            any_observed = true;
            if (row[v].find_first_of(".eE") != std::string_view::npos) continuous = true;
        }
        if (!any_observed) throw DataError("column '" + names[v] + "' has no observed values");

        long long max_value = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto cell = rows[r][v];
            if (missing(cell)) continue;
            const std::string where = "line " + std::to_string(r + 2) + ", column '" + names[v] + "'";
            if (continuous) {
                auto x = parse_real(cell);
                if (!x) throw DataError(where + ": cannot parse '" + std::string(cell) + "' as a real");
                cells[r * width + v] = *x;
            } else {
                auto x = parse_nonneg_int(cell);
                if (!x) throw DataError(where + ": cannot parse '" + std::string(cell) + "' as a non-negative integer");
                max_value = std::max(max_value, *x);
                cells[r * width + v] = static_cast<double>(*x);
            }
        }
        schema.push_back(continuous ? ColumnMeta::continuous(names[v])
                                    : ColumnMeta::discrete(names[v], static_cast<int>(std::max(2LL, max_value + 1))));
    }

    Dataset data(std::move(schema), std::move(cells));
    if (auto issues = audit(data); !issues.empty()) throw DataError(issues.front());
    return data;
}

Dataset load_mixed_csv(const std::string& path, const std::string& missing_token) {
    return parse_mixed_csv(read_file(path), missing_token);
}

Dataset parse_rows_with_schema(const std::string& text, const Schema& schema, bool has_header,
                               const std::string& missing_token) {
    auto lines = split_lines(text);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    const std::size_t width = schema.size();
    std::size_t first = 0;
    if (has_header) {
        if (lines.empty()) throw DataError("CSV has no header row");
        const auto names = split_fields(lines[0]);
        if (names.size() != width) {
            throw DataError("header has " + std::to_string(names.size()) + " columns, model expects " +
                            std::to_string(width));
        }
        first = 1;
    }
    std::vector<double> cells;
    for (std::size_t i = first; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = split_fields(lines[i]);
        if (fields.size() != width) {
            throw DataError("line " + std::to_string(i + 1) + ": expected " + std::to_string(width) +
                            " fields, found " + std::to_string(fields.size()));
        }
        for (std::size_t v = 0; v < width; ++v) {
            const auto cell = trim(fields[v]);
            if (cell.empty() || cell == missing_token) {
                cells.push_back(kMissing);
                continue;
            }
            const std::string where = "line " + std::to_string(i + 1) + ", column " + std::to_string(v);
            if (schema[v].is_discrete()) {
                auto x = parse_nonneg_int(cell);
                if (!x || *x >= schema[v].arity) {
                    throw DataError(where + ": '" + std::string(cell) + "' is not a value in 0.." +
                                    std::to_string(schema[v].arity - 1));
                }
                cells.push_back(static_cast<double>(*x));
            } else {
                auto x = parse_real(cell);
                if (!x) throw DataError(where + ": cannot parse '" + std::string(cell) + "' as a real");
                cells.push_back(*x);
            }
        }
    }
    return Dataset(schema, std::move(cells));
}

Dataset load_rows_with_schema(const std::string& path, const Schema& schema, bool has_header,
                              const std::string& missing_token) {
    return parse_rows_with_schema(read_file(path), schema, has_header, missing_token);
}

std::string format_csv(const Dataset& data, const std::string& missing_token) {
    std::ostringstream out;
    out.precision(17);
    for (VarId v = 0; v < data.num_vars(); ++v) out << (v ? "," : "") << data.schema()[v].name;
    out << '\n';
    for (std::size_t r = 0; r < data.num_rows(); ++r) {
        for (VarId v = 0; v < data.num_vars(); ++v) {
            if (v) out << ',';
            const double x = data.at(r, v);
            if (is_missing(x)) {
                out << missing_token;
            } else if (data.schema()[v].is_discrete()) {
                out << static_cast<long long>(x);
            } else {
                // Keep a decimal point so the column re-reads as continuous.
                char buf[40];
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
                std::string_view s(buf, static_cast<std::size_t>(p - buf));
                out << s;
                if (s.find_first_of(".eE") == std::string_view::npos) out << ".0";
            }
        }
        out << '\n';
    }
    return out.str();
}

std::optional<double> median_cutoff(const DataSlice& slice, VarId var) {
    const auto& data = slice.dataset();
    if (var >= data.num_vars()) throw DataError("variable out of range");
    if (data.schema()[var].is_discrete()) throw DataError("median cutoff requested for discrete column '" + data.schema()[var].name + "'");
    std::vector<double> values;
    values.reserve(slice.num_rows());
    for (RowId r : slice.rows()) {
        const double x = data.at(r, var);
        if (!is_missing(x)) values.push_back(x);
    }
    if (values.empty()) return std::nullopt;
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const double upper = values[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lower + upper);
}

RowSplit split_rows(const Dataset& data, double valid_fraction, std::uint64_t seed) {
    const std::size_t n = data.num_rows();
    if (n < 2) throw DataError("need at least 2 rows to split");
    if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) throw DataError("valid_fraction must lie in (0, 1)");
    std::vector<RowId> ids(n);
    std::iota(ids.begin(), ids.end(), RowId{0});
    Rng rng(seed);
    rng.shuffle(ids.begin(), ids.end());
    auto n_valid = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(n)));
    n_valid = std::clamp<std::size_t>(n_valid, 1, n - 1);
    RowSplit split;
    split.valid.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_valid));
    split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_valid), ids.end());
    std::sort(split.valid.begin(), split.valid.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

}  // namespace minispn
