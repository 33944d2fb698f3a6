#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "minispn/minispn.hpp"
#include "minispn/pareto.hpp"

namespace minispn {

enum class Method { MiniSpn, Pareto, Hybrid };

const char* method_name(Method m);
std::optional<Method> parse_method(std::string_view name);

struct TrainResult {
    Spn spn;
    double seconds = 0.0;
    std::vector<ParetoTraceRow> front_trace;  // pareto and hybrid only
};

// Runs one learner. Hybrid = MiniSPN followed by a Pareto search seeded with it.
TrainResult train_model(Method method, const Dataset& train, const Dataset& valid, const LearnConfig& learn_config,
                        const ParetoConfig& pareto_config, const Deadline& deadline = {}, DecisionLog* log = nullptr);

// Finds <dir>/<name>/<name>.ts.data or <dir>/<name>.ts.data; returns the stem.
std::optional<std::string> resolve_stem(const std::string& data_dir, const std::string& name);

// Seed for one (dataset, method) cell; independent of cell execution order.
std::uint64_t cell_seed(std::uint64_t base, std::string_view dataset, Method method);

struct BenchOptions {
    std::vector<std::string> datasets;
    std::vector<Method> methods{Method::MiniSpn, Method::Pareto, Method::Hybrid};
    std::string data_dir = ".";
    std::uint64_t seed = 0;
    LearnConfig learn;
    ParetoConfig pareto;
    std::optional<double> timeout_s;
};

struct BenchCell {
    enum class Status { Ok, Timeout, Error };
    std::string dataset;
    Method method = Method::MiniSpn;
    Status status = Status::Ok;
    double test_ll = 0.0;
    double runtime_s = 0.0;
    std::int64_t dof = 0;
    std::uint64_t seed = 0;
    std::string error;
};

struct BenchReport {
    std::vector<BenchCell> cells;

    const BenchCell* find(std::string_view dataset, Method method) const;
    std::string to_text() const;
    std::string to_tsv() const;
};

BenchReport run_bench(const BenchOptions& options);

}  // namespace minispn
