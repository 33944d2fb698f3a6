#include "minispn/bench.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace minispn {

namespace {

std::string fixed(double x, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
    return buf;
}

std::vector<std::vector<std::string>> table_rows(const BenchReport& report) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"dataset", "method", "test_ll", "runtime_s", "dof", "seed"});
    for (const auto& c : report.cells) {
        std::vector<std::string> row{c.dataset, method_name(c.method)};
        switch (c.status) {
            case BenchCell::Status::Ok:
                row.push_back(fixed(c.test_ll, 4));
                row.push_back(fixed(c.runtime_s, 3));
                row.push_back(std::to_string(c.dof));
                break;
            case BenchCell::Status::Timeout:
                row.push_back("TIMEOUT");
                row.push_back(fixed(c.runtime_s, 3));
                row.push_back("-");
                break;
            case BenchCell::Status::Error:
                row.push_back("ERROR");
                row.push_back("-");
                row.push_back("-");
                break;
        }
        row.push_back(std::to_string(c.seed));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::MiniSpn: return "minispn";
        case Method::Pareto: return "pareto";
        case Method::Hybrid: return "hybrid";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view name) {
    if (name == "minispn") return Method::MiniSpn;
    if (name == "pareto") return Method::Pareto;
    if (name == "hybrid") return Method::Hybrid;
    return std::nullopt;
}

TrainResult train_model(Method method, const Dataset& train, const Dataset& valid, const LearnConfig& learn_config,
                        const ParetoConfig& pareto_config, const Deadline& deadline, DecisionLog* log) {
    const auto start = std::chrono::steady_clock::now();
    TrainResult out;
    switch (method) {
        case Method::MiniSpn:
            out.spn = learn(train, valid, learn_config, log, deadline);
            break;
        case Method::Pareto: {
            auto res = pareto_search(train, valid, pareto_config, learn_config, std::nullopt, deadline);
            out.spn = *res.best.spn;
            out.front_trace = std::move(res.trace);
            break;
        }
        case Method::Hybrid: {
            std::optional<Spn> init = learn(train, valid, learn_config, log, deadline);
            auto res = pareto_search(train, valid, pareto_config, learn_config, init, deadline);
            out.spn = *res.best.spn;
            out.front_trace = std::move(res.trace);
            break;
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::optional<std::string> resolve_stem(const std::string& data_dir, const std::string& name) {
    namespace fs = std::filesystem;
    const fs::path dir = data_dir.empty() ? fs::path(".") : fs::path(data_dir);
    for (const fs::path& stem : {dir / name / name, dir / name}) {
        if (fs::exists(stem.string() + ".ts.data")) return stem.string();
    }
    return std::nullopt;
}

std::uint64_t cell_seed(std::uint64_t base, std::string_view dataset, Method method) {
    std::uint64_t h = fnv1a(dataset);
    h = fnv1a("/", h);
    h = fnv1a(method_name(method), h);
    return derive_seed(base, h);
}

const BenchCell* BenchReport::find(std::string_view dataset, Method method) const {
    for (const auto& c : cells)
        if (c.dataset == dataset && c.method == method) return &c;
    return nullptr;
}

std::string BenchReport::to_text() const {
    const auto rows = table_rows(*this);
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < r.size(); ++j) width[j] = std::max(width[j], r[j].size());
    std::ostringstream out;
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            // Text columns left-aligned, numeric columns right-aligned.
            const bool left = j < 2;
            const std::string pad(width[j] - r[j].size(), ' ');
            if (j) out << "  ";
            out << (left ? r[j] + pad : pad + r[j]);
        }
        out << '\n';
    }
    return out.str();
}

std::string BenchReport::to_tsv() const {
    std::ostringstream out;
    for (const auto& r : table_rows(*this)) {
        for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "\t" : "") << r[j];
        out << '\n';
    }
    return out.str();
}

BenchReport run_bench(const BenchOptions& options) {
    BenchReport report;
    for (const auto& name : options.datasets) {
        std::optional<BenchmarkTriplet> data;
        std::string load_error;
        if (auto stem = resolve_stem(options.data_dir, name)) {
            try {
                data = load_benchmark_triplet(*stem);
            } catch (const std::exception& e) {
                load_error = e.what();
            }
        } else {
            load_error = "cannot find benchmark files for '" + name + "' under '" + options.data_dir + "'";
        }

        for (Method method : options.methods) {
            BenchCell cell;
            cell.dataset = name;
            cell.method = method;
            cell.seed = cell_seed(options.seed, name, method);
            if (!data) {
                cell.status = BenchCell::Status::Error;
                cell.error = load_error;
                report.cells.push_back(std::move(cell));
                continue;
            }
            LearnConfig lc = options.learn;
            lc.seed = cell.seed;
            ParetoConfig pc = options.pareto;
            pc.seed = cell.seed;
            const Deadline deadline =
                options.timeout_s ? Deadline::after(std::chrono::duration<double>(*options.timeout_s)) : Deadline{};
            const auto start = std::chrono::steady_clock::now();
            try {
                auto trained = train_model(method, data->train, data->valid, lc, pc, deadline);
                cell.runtime_s = trained.seconds;
                cell.dof = num_free_parameters(trained.spn);
                cell.test_ll = mean_log_likelihood(trained.spn, data->test);
            } catch (const TimeoutError&) {
                cell.status = BenchCell::Status::Timeout;
                cell.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            } catch (const std::exception& e) {
                cell.status = BenchCell::Status::Error;
                cell.error = e.what();
            }
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

}  // namespace minispn
