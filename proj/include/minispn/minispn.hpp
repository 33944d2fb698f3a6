#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "minispn/data.hpp"
#include "minispn/random.hpp"
#include "minispn/spn.hpp"
#include "minispn/stats.hpp"

namespace minispn {

class LearnError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class TimeoutError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Optional wall-clock budget, polled by the learners.
class Deadline {
public:
    using Clock = std::chrono::steady_clock;

    Deadline() = default;
    static Deadline after(std::chrono::duration<double> budget) {
        Deadline d;
        d.at_ = Clock::now() + std::chrono::duration_cast<Clock::duration>(budget);
        return d;
    }
    bool expired() const { return at_ && Clock::now() >= *at_; }
    void check() const {
        if (expired()) throw TimeoutError("learning exceeded its time budget");
    }

private:
    std::optional<Clock::time_point> at_;
};

struct LearnConfig {
    std::size_t min_instances = 30;  // below this many rows a slice is factorized
    double alpha = 0.05;             // G-test significance level
    std::size_t min_overlap = 30;    // fewer pairwise-complete rows => independent
    int em_max_iters = 100;
    double laplace = 0.1;            // categorical pseudo-count
    double variance_floor = 1e-6;    // times the squared range of the column
    std::uint64_t seed = 0;

    // Throws LearnError on an out-of-range field.
    void check() const;
};

// Per-column variance floor: config.variance_floor * range^2 over the
// observed cells of `data` (range 0 counts as 1).
std::vector<double> variance_floors(const Dataset& data, double variance_floor);

// Independent univariate leaves over a set of variables.
struct FactorizedModel {
    std::vector<VarId> vars;
    std::vector<LeafDistribution> leaves;

    double log_density(RowView row) const;
};

// Categorical: (count + laplace) / (n_obs + laplace * arity) on observed cells.
// Gaussian: sample mean and variance clamped to the floor. A variable with no
// observed cells gets a uniform categorical or a standard normal.
FactorizedModel fit_factorized_model(const DataSlice& slice, double laplace, std::span<const double> floors);

// Adds the fitted leaves to `out`: a Product of leaves, or a bare Leaf for a
// single variable.
NodeId emit_factorized(const FactorizedModel& model, Spn& out);
NodeId fit_factorized(const DataSlice& slice, const LearnConfig& config, Spn& out);

struct HardEmResult {
    std::vector<std::uint8_t> assignments;  // per slice row, cluster 0 or 1
    // Objective after each M-step: sum over rows of the assigned cluster's
    // log-likelihood plus log weight, plus the log-prior terms that the
    // pseudo-count smoothing corresponds to. Non-decreasing.
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;
    bool degenerate = false;
};

HardEmResult hard_em_two_clusters(const DataSlice& slice, const LearnConfig& config, Rng& rng);

struct SliceContext {
    DataSlice train;
    DataSlice valid;
};

struct SplitDecision {
    enum class Outcome { Accept, RejectLikelihood, RejectDegenerate, RejectNoValidation };
    Outcome outcome = Outcome::RejectNoValidation;
    std::vector<std::uint8_t> assignments;
    std::array<double, 2> log_weights{};
    std::array<FactorizedModel, 2> clusters;
    double valid_ll_single = 0.0;   // summed over validation rows
    double valid_ll_mixture = 0.0;

    bool accepted() const { return outcome == Outcome::Accept; }
    // Cluster with the higher log weight + log-likelihood; ties go to 0.
    int route(RowView row) const;
};

SplitDecision try_instance_split(const SliceContext& ctx, const LearnConfig& config, Rng& rng);

// Edges are pairs of positions into slice.vars(), first < second, ascending.
struct DependencyGraph {
    std::size_t num_vars = 0;
    std::vector<Edge> edges;
};

DependencyGraph dependency_graph(const DataSlice& slice, const LearnConfig& config);

struct DecisionRecord {
    std::size_t train_rows = 0;
    std::size_t valid_rows = 0;
    std::size_t num_vars = 0;
    std::string attempt;           // "instance" or "variable"
    std::optional<double> valid_ll_single;
    std::optional<double> valid_ll_split;
    bool accepted = false;
    std::string detail;
};

struct DecisionLog {
    std::vector<DecisionRecord> records;

    std::string to_tsv() const;
    static DecisionLog from_tsv(const std::string& text);
};

// Accepted instance splits whose split validation LL is not strictly higher
// than the factorized alternative, one message each.
std::vector<std::string> replay_gate_violations(const DecisionLog& log);

Spn learn(const Dataset& train, const Dataset& valid, const LearnConfig& config, DecisionLog* log = nullptr,
          const Deadline& deadline = {});

}  // namespace minispn
