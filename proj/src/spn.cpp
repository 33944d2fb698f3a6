#include "minispn/spn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "minispn/numeric.hpp"

namespace minispn {

namespace {

constexpr double kNormTolerance = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

const std::vector<NodeId>* children_of(const SpnNode& node) {
    if (auto* s = std::get_if<SumNode>(&node)) return &s->children;
    if (auto* p = std::get_if<ProductNode>(&node)) return &p->children;
    return nullptr;
}

// Post-order from root over valid child ids. Nodes on a cycle are visited once.
std::vector<NodeId> post_order(const std::vector<SpnNode>& nodes, NodeId root) {
    std::vector<NodeId> order;
    if (root >= nodes.size()) return order;
    std::vector<std::uint8_t> state(nodes.size(), 0);  // 0 new, 1 open, 2 done
    std::vector<std::pair<NodeId, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
        auto& [id, next] = stack.back();
        const auto* kids = children_of(nodes[id]);
        if (kids && next < kids->size()) {
            const NodeId c = (*kids)[next++];
            if (c < nodes.size() && state[c] == 0) {
                state[c] = 1;
                stack.emplace_back(c, 0);
            }
            continue;
        }
        state[id] = 2;
        order.push_back(id);
        stack.pop_back();
    }
    return order;
}

std::string fmt17(double x) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, p);
}

Scope merge_scopes(const Scope& a, const Scope& b) {
    Scope out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool scopes_disjoint(const Scope& a, const Scope& b) {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) return false;
        if (*i < *j) ++i;
        else ++j;
    }
    return true;
}

}  // namespace

Categorical Categorical::from_probs(std::vector<double> probs) {
    Categorical c;
    c.log_probs.reserve(probs.size());
    for (double p : probs) c.log_probs.push_back(std::log(p));
    c.probs = std::move(probs);
    return c;
}

double leaf_log_density(const LeafDistribution& dist, double value) {
    if (is_missing(value)) return 0.0;
    if (const auto* c = std::get_if<Categorical>(&dist)) {
        if (!(value >= 0.0) || value >= static_cast<double>(c->arity()) || value != std::floor(value))
            throw SpnError("discrete value " + fmt17(value) + " outside [0, " + std::to_string(c->arity()) + ")");
        return c->log_probs[static_cast<std::size_t>(value)];
    }
    const auto& g = std::get<Gaussian>(dist);
    const double d = value - g.mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * g.variance) + d * d / g.variance);
}

int num_leaf_parameters(const LeafDistribution& dist) {
    if (const auto* c = std::get_if<Categorical>(&dist)) return c->arity() - 1;
    return 2;
}

Spn Spn::from_nodes(Schema schema, std::vector<SpnNode> nodes, NodeId root) {
    Spn spn(std::move(schema));
    spn.nodes_ = std::move(nodes);
    spn.set_root(root);
    return spn;
}

NodeId Spn::push(SpnNode node) {
    nodes_.push_back(std::move(node));
    has_root_ = false;
    order_.clear();
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Spn::add_leaf(VarId var, LeafDistribution dist) { return push(LeafNode{var, std::move(dist)}); }

NodeId Spn::add_product(std::vector<NodeId> children) { return push(ProductNode{std::move(children)}); }

NodeId Spn::add_sum(std::vector<NodeId> children, std::vector<double> weights) {
    SumNode s;
    s.children = std::move(children);
    s.log_weights.reserve(weights.size());
    for (double w : weights) s.log_weights.push_back(std::log(w));
    s.weights = std::move(weights);
    return push(std::move(s));
}

void Spn::set_root(NodeId root) {
    if (root >= nodes_.size()) throw SpnError("root id " + std::to_string(root) + " does not exist");
    root_ = root;
    has_root_ = true;
    order_ = post_order(nodes_, root_);
}

const SpnNode& Spn::node(NodeId id) const {
    if (id >= nodes_.size()) throw SpnError("unknown node id " + std::to_string(id));
    return nodes_[id];
}

Spn Spn::pruned() const {
    if (!has_root_) throw SpnError("model has no root");
    std::vector<NodeId> remap(nodes_.size(), 0);
    for (std::size_t i = 0; i < order_.size(); ++i) remap[order_[i]] = static_cast<NodeId>(i);
    std::vector<SpnNode> nodes;
    nodes.reserve(order_.size());
    for (NodeId id : order_) {
        SpnNode n = nodes_[id];
        std::visit(overloaded{[&](SumNode& s) { for (auto& c : s.children) c = remap[c]; },
                              [&](ProductNode& p) { for (auto& c : p.children) c = remap[c]; },
                              [](LeafNode&) {}},
                   n);
        nodes.push_back(std::move(n));
    }
    return from_nodes(schema_, std::move(nodes), remap[root_]);
}

const char* to_string(Violation::Kind kind) {
    switch (kind) {
        case Violation::Kind::DanglingChild: return "dangling-child";
        case Violation::Kind::Cycle: return "cycle";
        case Violation::Kind::Unreachable: return "unreachable";
        case Violation::Kind::TooFewChildren: return "too-few-children";
        case Violation::Kind::WeightCount: return "weight-count";
        case Violation::Kind::Unnormalized: return "unnormalized";
        case Violation::Kind::BadLeaf: return "bad-leaf";
        case Violation::Kind::Completeness: return "completeness";
        case Violation::Kind::Decomposability: return "decomposability";
        case Violation::Kind::RootScope: return "root-scope";
    }
    return "unknown";
}

ValidationReport validate(const Spn& spn) {
    using K = Violation::Kind;
    ValidationReport report;
    const auto& nodes = spn.nodes();
    const std::size_t n = nodes.size();
    auto add = [&](K kind, NodeId id, std::string msg) { report.push_back({kind, id, std::move(msg)}); };

    if (n == 0 || !spn.has_root()) {
        add(K::RootScope, 0, "model has no root");
        return report;
    }

    bool dangling = false;
    for (NodeId id = 0; id < n; ++id) {
        const auto& node = nodes[id];
        if (const auto* kids = children_of(node)) {
            for (NodeId c : *kids) {
                if (c >= n) {
                    add(K::DanglingChild, id, "child id " + std::to_string(c) + " does not exist");
                    dangling = true;
                }
            }
            if (kids->size() < 2) add(K::TooFewChildren, id, "internal node with fewer than 2 children");
        }
        if (const auto* s = std::get_if<SumNode>(&node)) {
            if (s->weights.size() != s->children.size() || s->log_weights.size() != s->children.size()) {
                add(K::WeightCount, id, "weight count differs from child count");
            } else {
                double total = 0.0;
                bool finite = true;
                for (double w : s->weights) {
                    if (!std::isfinite(w) || w < 0.0) finite = false;
                    total += w;
                }
                if (!finite || std::abs(total - 1.0) > kNormTolerance)
                    add(K::Unnormalized, id, "sum weights total " + fmt17(total));
            }
        } else if (const auto* leaf = std::get_if<LeafNode>(&node)) {
            if (leaf->var >= spn.num_vars()) {
                add(K::BadLeaf, id, "variable " + std::to_string(leaf->var) + " outside schema");
                continue;
            }
            const auto& col = spn.schema()[leaf->var];
            if (const auto* c = std::get_if<Categorical>(&leaf->dist)) {
                if (!col.is_discrete()) {
                    add(K::BadLeaf, id, "categorical leaf on continuous column");
                } else if (c->arity() != col.arity || c->arity() < 2 || c->log_probs.size() != c->probs.size()) {
                    add(K::BadLeaf, id, "categorical arity " + std::to_string(c->arity()) + " does not match column arity " +
                                            std::to_string(col.arity));
                } else {
                    double total = 0.0;
                    bool finite = true;
                    for (std::size_t k = 0; k < c->probs.size(); ++k) {
                        total += c->probs[k];
                        if (!std::isfinite(c->log_probs[k])) finite = false;
                    }
                    if (!finite) add(K::BadLeaf, id, "categorical leaf has a zero or non-finite probability");
                    if (std::abs(total - 1.0) > kNormTolerance)
                        add(K::Unnormalized, id, "categorical probabilities total " + fmt17(total));
                }
            } else {
                const auto& g = std::get<Gaussian>(leaf->dist);
                if (col.is_discrete()) add(K::BadLeaf, id, "gaussian leaf on discrete column");
                if (!std::isfinite(g.mean) || !std::isfinite(g.variance) || !(g.variance > 0.0))
                    add(K::BadLeaf, id, "gaussian leaf needs finite mean and positive variance");
            }
        }
    }
    if (dangling) return report;

    // Cycle detection over the whole arena.
    std::vector<std::uint8_t> state(n, 0);
    bool cyclic = false;
    for (NodeId start = 0; start < n; ++start) {
        if (state[start]) continue;
        std::vector<std::pair<NodeId, std::size_t>> stack{{start, 0}};
        state[start] = 1;
        while (!stack.empty()) {
            auto& [id, next] = stack.back();
            const auto* kids = children_of(nodes[id]);
            if (kids && next < kids->size()) {
                const NodeId c = (*kids)[next++];
                if (state[c] == 1) {
                    add(K::Cycle, id, "edge to node " + std::to_string(c) + " closes a cycle");
                    cyclic = true;
                } else if (state[c] == 0) {
                    state[c] = 1;
                    stack.emplace_back(c, 0);
                }
                continue;
            }
            state[id] = 2;
            stack.pop_back();
        }
    }

    std::vector<bool> reachable(n, false);
    for (NodeId id : spn.eval_order()) reachable[id] = true;
    for (NodeId id = 0; id < n; ++id)
        if (!reachable[id]) add(K::Unreachable, id, "not reachable from root");

    if (cyclic) return report;

    // Scopes bottom-up; eval_order covers the reachable part, which is all
    // that completeness and decomposability concern.
    std::vector<Scope> scopes(n);
    for (NodeId id : spn.eval_order()) {
        const auto& node = nodes[id];
        if (const auto* leaf = std::get_if<LeafNode>(&node)) {
            scopes[id] = {leaf->var};
        } else if (const auto* p = std::get_if<ProductNode>(&node)) {
            Scope acc;
            bool reported = false;
            for (NodeId c : p->children) {
                if (!reported && !scopes_disjoint(acc, scopes[c])) {
                    add(K::Decomposability, id, "product children have overlapping scopes");
                    reported = true;
                }
                acc = merge_scopes(acc, scopes[c]);
            }
            scopes[id] = std::move(acc);
        } else {
            const auto& s = std::get<SumNode>(node);
            if (s.children.empty()) continue;
            scopes[id] = scopes[s.children.front()];
            for (NodeId c : s.children) {
                if (scopes[c] != scopes[id]) {
                    add(K::Completeness, id, "sum children have differing scopes");
                    break;
                }
            }
        }
    }
    const Scope& root_scope = scopes[spn.root()];
    if (root_scope.size() != spn.num_vars())
        add(K::RootScope, spn.root(),
            "root scope covers " + std::to_string(root_scope.size()) + " of " + std::to_string(spn.num_vars()) + " variables");
    return report;
}

Scope scope_of(const Spn& spn, NodeId node) {
    const auto& nodes = spn.nodes();
    if (node >= nodes.size()) throw SpnError("unknown node id " + std::to_string(node));
    std::unordered_map<NodeId, Scope> memo;
    std::vector<std::uint8_t> state(nodes.size(), 0);
    std::vector<std::pair<NodeId, std::size_t>> stack{{node, 0}};
    state[node] = 1;
    while (!stack.empty()) {
        auto& [id, next] = stack.back();
        const auto* kids = children_of(nodes[id]);
        if (kids && next < kids->size()) {
            const NodeId c = (*kids)[next++];
            if (c >= nodes.size()) throw SpnError("node " + std::to_string(id) + " has a dangling child");
            if (state[c] == 1) throw SpnError("cycle through node " + std::to_string(c));
            if (state[c] == 0) {
                state[c] = 1;
                stack.emplace_back(c, 0);
            }
            continue;
        }
        Scope s;
        if (const auto* leaf = std::get_if<LeafNode>(&nodes[id])) {
            s = {leaf->var};
        } else if (const auto* sum = std::get_if<SumNode>(&nodes[id])) {
            if (!sum->children.empty()) s = memo.at(sum->children.front());
        } else {
            for (NodeId c : std::get<ProductNode>(nodes[id]).children) s = merge_scopes(s, memo.at(c));
        }
        memo[id] = std::move(s);
        state[id] = 2;
        stack.pop_back();
    }
    return memo.at(node);
}

Evaluator::Evaluator(const Spn& spn) : spn_(&spn), values_(spn.num_nodes(), 0.0) {
    if (!spn.has_root()) throw SpnError("model has no root");
}

double Evaluator::log_density(RowView row) {
    const Spn& spn = *spn_;
    if (row.size() != spn.num_vars())
        throw SpnError("row has " + std::to_string(row.size()) + " cells, model expects " + std::to_string(spn.num_vars()));
    const auto& nodes = spn.nodes();
    for (NodeId id : spn.eval_order()) {
        const auto& node = nodes[id];
        double v;
        if (const auto* leaf = std::get_if<LeafNode>(&node)) {
            v = leaf_log_density(leaf->dist, row[leaf->var]);
        } else if (const auto* p = std::get_if<ProductNode>(&node)) {
            v = 0.0;
            for (NodeId c : p->children) v += values_[c];
        } else {
            const auto& s = std::get<SumNode>(node);
            double m = kNegInf;
            for (std::size_t k = 0; k < s.children.size(); ++k) m = std::max(m, s.log_weights[k] + values_[s.children[k]]);
            if (!std::isfinite(m)) {
                v = m;
            } else {
                double acc = 0.0;
                for (std::size_t k = 0; k < s.children.size(); ++k)
                    acc += std::exp(s.log_weights[k] + values_[s.children[k]] - m);
                v = m + std::log(acc);
            }
        }
        values_[id] = v;
    }
    return values_[spn.root()];
}

double log_density(const Spn& spn, RowView row, EvalStats* stats) {
    Evaluator eval(spn);
    const double v = eval.log_density(row);
    if (stats) stats->nodes_visited += spn.eval_order().size();
    return v;
}

double total_log_likelihood(const Spn& spn, const Dataset& data, std::span<const RowId> rows) {
    Evaluator eval(spn);
    double total = 0.0;
    for (RowId r : rows) total += eval.log_density(data.row(r));
    return total;
}

double mean_log_likelihood(const Spn& spn, const Dataset& data) {
    if (data.empty()) throw SpnError("mean log-likelihood of an empty dataset");
    Evaluator eval(spn);
    double total = 0.0;
    for (std::size_t r = 0; r < data.num_rows(); ++r) total += eval.log_density(data.row(r));
    return total / static_cast<double>(data.num_rows());
}

Row sample(const Spn& spn, Rng& rng) {
    if (!spn.has_root()) throw SpnError("model has no root");
    Row row(spn.num_vars(), kMissing);
    std::vector<NodeId> stack{spn.root()};
    const auto& nodes = spn.nodes();
    auto pick = [&](const std::vector<double>& probs) {
        const double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) return k;
        }
        // u landed in the rounding gap at the top; take the last positive entry.
        std::size_t k = probs.size() - 1;
        while (k > 0 && probs[k] <= 0.0) --k;
        return k;
    };
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        const auto& node = nodes[id];
        if (const auto* s = std::get_if<SumNode>(&node)) {
            stack.push_back(s->children[pick(s->weights)]);
        } else if (const auto* p = std::get_if<ProductNode>(&node)) {
            for (auto it = p->children.rbegin(); it != p->children.rend(); ++it) stack.push_back(*it);
        } else {
            const auto& leaf = std::get<LeafNode>(node);
            if (const auto* c = std::get_if<Categorical>(&leaf.dist)) {
                row[leaf.var] = static_cast<double>(pick(c->probs));
            } else {
                const auto& g = std::get<Gaussian>(leaf.dist);
                row[leaf.var] = g.mean + std::sqrt(g.variance) * rng.normal();
            }
        }
    }
    return row;
}

std::int64_t num_free_parameters(const Spn& spn) {
    std::int64_t total = 0;
    for (NodeId id : spn.eval_order()) {
        const auto& node = spn.nodes()[id];
        if (const auto* s = std::get_if<SumNode>(&node)) total += static_cast<std::int64_t>(s->children.size()) - 1;
        else if (const auto* leaf = std::get_if<LeafNode>(&node)) total += num_leaf_parameters(leaf->dist);
    }
    return total;
}

std::string serialize(const Spn& spn) {
    if (!spn.has_root()) throw SpnError("model has no root");
    std::vector<NodeId> out_id(spn.num_nodes(), 0);
    const auto& order = spn.eval_order();
    for (std::size_t i = 0; i < order.size(); ++i) out_id[order[i]] = static_cast<NodeId>(i);

    std::string out = "spnmodel v1 vars=" + std::to_string(spn.num_vars()) + "\n";
    for (NodeId id : order) {
        const auto& node = spn.nodes()[id];
        std::string line;
        if (const auto* leaf = std::get_if<LeafNode>(&node)) {
            if (const auto* c = std::get_if<Categorical>(&leaf->dist)) {
                line = "leaf " + std::to_string(out_id[id]) + " cat " + std::to_string(leaf->var);
                for (double p : c->probs) line += " " + fmt17(p);
            } else {
                const auto& g = std::get<Gaussian>(leaf->dist);
                line = "leaf " + std::to_string(out_id[id]) + " gauss " + std::to_string(leaf->var) + " " + fmt17(g.mean) +
                       " " + fmt17(g.variance);
            }
        } else if (const auto* p = std::get_if<ProductNode>(&node)) {
            line = "prod " + std::to_string(out_id[id]);
            for (NodeId c : p->children) line += " " + std::to_string(out_id[c]);
        } else {
            const auto& s = std::get<SumNode>(node);
            line = "sum " + std::to_string(out_id[id]);
            for (std::size_t k = 0; k < s.children.size(); ++k)
                line += " (" + std::to_string(out_id[s.children[k]]) + ":" + fmt17(s.weights[k]) + ")";
        }
        out += line;
        out += '\n';
    }
    out += "root " + std::to_string(out_id[spn.root()]) + "\n";
    return out;
}

namespace {

class ModelParser {
public:
    explicit ModelParser(const std::string& text) : text_(text) {}

    Spn parse() {
        std::size_t pos = 0;
        bool have_header = false;
        bool have_root = false;
        std::size_t num_vars = 0;
        std::vector<SpnNode> nodes;
        std::unordered_map<long long, NodeId> ids;
        NodeId root = 0;

        while (pos < text_.size()) {
            auto end = text_.find('\n', pos);
            if (end == std::string::npos) end = text_.size();
            std::string_view line(text_.data() + pos, end - pos);
            pos = end + 1;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            ++line_no_;
            line_ = line;
            col_ = 0;

            skip_ws();
            if (at_end() || line_[col_] == '#') continue;
            if (have_root) fail("content after root line");

            const auto keyword = word();
            if (!have_header) {
                if (keyword != "spnmodel") fail("expected header 'spnmodel v1 vars=<n>'");
                if (word() != "v1") fail("unsupported format version");
                const auto vars = word();
                if (vars.substr(0, 5) != "vars=") fail("expected vars=<n>");
                num_vars = static_cast<std::size_t>(parse_int(vars.substr(5)));
                expect_end();
                have_header = true;
            } else if (keyword == "leaf") {
                const long long id = integer();
                const auto kind = word();
                const long long var = integer();
                if (var < 0 || static_cast<std::size_t>(var) >= num_vars) fail("leaf variable outside vars range");
                LeafNode leaf;
                leaf.var = static_cast<VarId>(var);
                if (kind == "cat") {
                    std::vector<double> probs;
                    while (skip_ws(), !at_end()) probs.push_back(real());
                    if (probs.empty()) fail("categorical leaf without probabilities");
                    leaf.dist = Categorical::from_probs(std::move(probs));
                } else if (kind == "gauss") {
                    Gaussian g;
                    g.mean = real();
                    g.variance = real();
                    expect_end();
                    leaf.dist = g;
                } else {
                    fail("unknown leaf kind '" + std::string(kind) + "'");
                }
                define(ids, id, nodes, std::move(leaf));
            } else if (keyword == "prod") {
                const long long id = integer();
                ProductNode p;
                while (skip_ws(), !at_end()) p.children.push_back(lookup(ids, integer()));
                define(ids, id, nodes, std::move(p));
            } else if (keyword == "sum") {
                const long long id = integer();
                std::vector<NodeId> children;
                std::vector<double> weights;
                while (skip_ws(), !at_end()) {
                    expect('(');
                    children.push_back(lookup(ids, integer()));
                    expect(':');
                    weights.push_back(real());
                    expect(')');
                }
                SumNode s;
                for (double w : weights) s.log_weights.push_back(std::log(w));
                s.children = std::move(children);
                s.weights = std::move(weights);
                define(ids, id, nodes, std::move(s));
            } else if (keyword == "root") {
                root = lookup(ids, integer());
                expect_end();
                have_root = true;
            } else {
                fail("unknown record '" + std::string(keyword) + "'");
            }
        }
        if (!have_header) fail("empty model text");
        if (!have_root) fail("missing root line");

        Schema schema(num_vars, ColumnMeta::discrete("", 2));
        std::vector<bool> seen(num_vars, false);
        for (const auto& n : nodes) {
            const auto* leaf = std::get_if<LeafNode>(&n);
            if (!leaf) continue;
            ColumnMeta col = std::holds_alternative<Gaussian>(leaf->dist)
                                 ? ColumnMeta::continuous("")
                                 : ColumnMeta::discrete("", std::get<Categorical>(leaf->dist).arity());
            if (seen[leaf->var] && (schema[leaf->var].kind != col.kind || schema[leaf->var].arity != col.arity))
                throw SpnError("variable " + std::to_string(leaf->var) + " has leaves of differing kinds or arities");
            schema[leaf->var] = col;
            seen[leaf->var] = true;
        }
        for (std::size_t v = 0; v < num_vars; ++v) schema[v].name = "x" + std::to_string(v);

        return Spn::from_nodes(std::move(schema), std::move(nodes), root);
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw SpnError("parse error at line " + std::to_string(line_no_) + ", column " + std::to_string(col_ + 1) + ": " + msg);
    }

    bool at_end() const { return col_ >= line_.size(); }

    void skip_ws() {
        while (!at_end() && (line_[col_] == ' ' || line_[col_] == '\t')) ++col_;
    }

    std::string_view word() {
        skip_ws();
        if (at_end()) fail("unexpected end of line");
        const std::size_t start = col_;
        while (!at_end() && line_[col_] != ' ' && line_[col_] != '\t') ++col_;
        return line_.substr(start, col_ - start);
    }

    long long parse_int(std::string_view tok) const {
        long long v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size()) fail("expected an integer, found '" + std::string(tok) + "'");
        return v;
    }

    std::string_view token() {
        skip_ws();
        if (at_end()) fail("unexpected end of line");
        const std::size_t start = col_;
        while (!at_end() && line_[col_] != ' ' && line_[col_] != '\t' && line_[col_] != ':' && line_[col_] != ')' &&
               line_[col_] != '(')
            ++col_;
        if (col_ == start) fail("expected a value");
        return line_.substr(start, col_ - start);
    }

    long long integer() {
        const auto start = col_;
        auto tok = token();
        long long v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size() || v < 0) {
            col_ = start;
            fail("expected a non-negative integer, found '" + std::string(tok) + "'");
        }
        return v;
    }

    double real() {
        const auto start = col_;
        auto tok = token();
        double v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size()) {
            col_ = start;
            fail("expected a real number, found '" + std::string(tok) + "'");
        }
        return v;
    }

    void expect(char c) {
        skip_ws();
        if (at_end() || line_[col_] != c) fail(std::string("expected '") + c + "'");
        ++col_;
    }

    void expect_end() {
        skip_ws();
        if (!at_end()) fail("unexpected trailing content");
    }

    NodeId lookup(const std::unordered_map<long long, NodeId>& ids, long long id) const {
        auto it = ids.find(id);
        if (it == ids.end()) fail("reference to undefined node " + std::to_string(id));
        return it->second;
    }

    void define(std::unordered_map<long long, NodeId>& ids, long long id, std::vector<SpnNode>& nodes, SpnNode node) {
        if (!ids.emplace(id, static_cast<NodeId>(nodes.size())).second) fail("duplicate node id " + std::to_string(id));
        nodes.push_back(std::move(node));
    }

    const std::string& text_;
    std::string_view line_;
    std::size_t line_no_ = 0;
    std::size_t col_ = 0;
};

}  // namespace

Spn parse_model(const std::string& text) { return ModelParser(text).parse(); }

Spn deserialize(const std::string& text) {
    Spn spn = parse_model(text);
    if (auto report = validate(spn); !report.empty()) {
        std::string msg = "model failed validation:";
        for (const auto& v : report) msg += "\n  node " + std::to_string(v.node) + ": " + to_string(v.kind) + ": " + v.message;
        throw SpnError(msg);
    }
    return spn;
}

bool schema_compatible(const Schema& model, const Schema& data, std::string* why) {
    auto reject = [&](std::string msg) {
        if (why) *why = std::move(msg);
        return false;
    };
    if (model.size() != data.size())
        return reject("model has " + std::to_string(model.size()) + " variables, data has " + std::to_string(data.size()));
    for (std::size_t v = 0; v < model.size(); ++v) {
        if (model[v].kind != data[v].kind) return reject("column " + std::to_string(v) + " kind differs between model and data");
        if (model[v].is_discrete() && data[v].arity > model[v].arity)
            return reject("column " + std::to_string(v) + " has arity " + std::to_string(data[v].arity) +
                          " in the data but " + std::to_string(model[v].arity) + " in the model");
    }
    return true;
}

}  // namespace minispn
