#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "minispn/data.hpp"
#include "minispn/random.hpp"

namespace minispn {

using NodeId = std::uint32_t;

class SpnError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Categorical leaf. Linear-space probabilities are the stored parameters; the
// log table is derived from them once, so a serialized model reproduces the
// same log values bit for bit.
struct Categorical {
    std::vector<double> probs;
    std::vector<double> log_probs;

    static Categorical from_probs(std::vector<double> probs);
    int arity() const { return static_cast<int>(probs.size()); }
};

struct Gaussian {
    double mean = 0.0;
    double variance = 1.0;
};

using LeafDistribution = std::variant<Categorical, Gaussian>;

// Log density of one observed value; 0 for a missing value.
double leaf_log_density(const LeafDistribution& dist, double value);
int num_leaf_parameters(const LeafDistribution& dist);

struct SumNode {
    std::vector<NodeId> children;
    std::vector<double> weights;
    std::vector<double> log_weights;
};

struct ProductNode {
    std::vector<NodeId> children;
};

struct LeafNode {
    VarId var = 0;
    LeafDistribution dist;
};

using SpnNode = std::variant<SumNode, ProductNode, LeafNode>;

using Scope = std::vector<VarId>;  // sorted, unique

// Arena of nodes plus a root. Built bottom-up through add_* and then frozen by
// set_root(); all evaluation entry points are const and thread-safe.
class Spn {
public:
    Spn() = default;
    explicit Spn(Schema schema) : schema_(std::move(schema)) {}

    // Accepts arbitrary (possibly broken) structure; use validate() to check.
    static Spn from_nodes(Schema schema, std::vector<SpnNode> nodes, NodeId root);

    NodeId add_leaf(VarId var, LeafDistribution dist);
    NodeId add_product(std::vector<NodeId> children);
    NodeId add_sum(std::vector<NodeId> children, std::vector<double> weights);
    void set_root(NodeId root);

    const Schema& schema() const { return schema_; }
    std::size_t num_vars() const { return schema_.size(); }
    std::size_t num_nodes() const { return nodes_.size(); }
    const std::vector<SpnNode>& nodes() const { return nodes_; }
    const SpnNode& node(NodeId id) const;
    NodeId root() const { return root_; }
    bool has_root() const { return has_root_; }

    // Reachable nodes, children before parents.
    const std::vector<NodeId>& eval_order() const { return order_; }

    // Copy with unreachable nodes dropped and ids renumbered in evaluation order.
    Spn pruned() const;

private:
    NodeId push(SpnNode node);

    Schema schema_;
    std::vector<SpnNode> nodes_;
    std::vector<NodeId> order_;
    NodeId root_ = 0;
    bool has_root_ = false;
};

struct Violation {
    enum class Kind {
        DanglingChild,
        Cycle,
        Unreachable,
        TooFewChildren,
        WeightCount,
        Unnormalized,
        BadLeaf,
        Completeness,
        Decomposability,
        RootScope,
    };
    Kind kind;
    NodeId node;
    std::string message;
};

const char* to_string(Violation::Kind kind);

using ValidationReport = std::vector<Violation>;

ValidationReport validate(const Spn& spn);

Scope scope_of(const Spn& spn, NodeId node);

struct EvalStats {
    std::size_t nodes_visited = 0;
};

// Exact log density; missing cells are marginalized. Throws SpnError on a
// width mismatch or out-of-range discrete value.
double log_density(const Spn& spn, RowView row, EvalStats* stats = nullptr);

// Reusable scratch for repeated evaluation over many rows.
class Evaluator {
public:
    explicit Evaluator(const Spn& spn);
    double log_density(RowView row);
    // Values of every reachable node from the most recent call.
    const std::vector<double>& node_values() const { return values_; }

private:
    const Spn* spn_;
    std::vector<double> values_;
};

double mean_log_likelihood(const Spn& spn, const Dataset& data);
double total_log_likelihood(const Spn& spn, const Dataset& data, std::span<const RowId> rows);

Row sample(const Spn& spn, Rng& rng);

std::int64_t num_free_parameters(const Spn& spn);

std::string serialize(const Spn& spn);
// Parses without structural validation; deserialize() also validates.
Spn parse_model(const std::string& text);
Spn deserialize(const std::string& text);

// True when rows of `data` can be evaluated by a model over `model`: equal
// width and matching column kinds.
bool schema_compatible(const Schema& model, const Schema& data, std::string* why = nullptr);

}  // namespace minispn
