#include "minispn/pareto.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

namespace minispn {

namespace {

const std::vector<NodeId>* children_of(const SpnNode& node) {
    if (auto* s = std::get_if<SumNode>(&node)) return &s->children;
    if (auto* p = std::get_if<ProductNode>(&node)) return &p->children;
    return nullptr;
}

// Path from the root down to target, inclusive, following first parents.
std::vector<NodeId> path_to(const Spn& spn, NodeId target) {
    std::vector<NodeId> parent(spn.num_nodes(), spn.num_nodes());
    for (NodeId id : spn.eval_order())
        if (const auto* kids = children_of(spn.nodes()[id]))
            for (NodeId c : *kids)
                if (parent[c] == spn.num_nodes()) parent[c] = id;
    std::vector<NodeId> path{target};
    while (path.back() != spn.root()) {
        const NodeId p = parent[path.back()];
        if (p == spn.num_nodes()) throw SpnError("target node is not reachable from the root");
        path.push_back(p);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

// Training rows that reach `target` when every sum node sends a row to its
// best-scoring child (log weight + child log density) and product nodes pass
// rows to all children.
std::vector<RowId> route_rows(const Spn& spn, NodeId target, const Dataset& train) {
    const auto path = path_to(spn, target);
    std::vector<RowId> out;
    Evaluator eval(spn);
    for (RowId r = 0; r < train.num_rows(); ++r) {
        eval.log_density(train.row(r));
        const auto& values = eval.node_values();
        bool reached = true;
        for (std::size_t i = 0; i + 1 < path.size() && reached; ++i) {
            const auto* s = std::get_if<SumNode>(&spn.nodes()[path[i]]);
            if (!s) continue;
            std::size_t best = 0;
            double best_score = s->log_weights[0] + values[s->children[0]];
            for (std::size_t k = 1; k < s->children.size(); ++k) {
                const double score = s->log_weights[k] + values[s->children[k]];
                if (score > best_score) {
                    best_score = score;
                    best = k;
                }
            }
            reached = s->children[best] == path[i + 1];
        }
        if (reached) out.push_back(r);
    }
    return out;
}

// Copies scratch's nodes reachable from its root into `nodes`; returns the
// new id of scratch's root.
NodeId append_subtree(std::vector<SpnNode>& nodes, const Spn& scratch, NodeId scratch_root) {
    const auto offset = static_cast<NodeId>(nodes.size());
    for (const auto& n : scratch.nodes()) {
        SpnNode copy = n;
        if (auto* s = std::get_if<SumNode>(&copy))
            for (auto& c : s->children) c += offset;
        if (auto* p = std::get_if<ProductNode>(&copy))
            for (auto& c : p->children) c += offset;
        nodes.push_back(std::move(copy));
    }
    return scratch_root + offset;
}

Spn replace_node(const Spn& spn, NodeId target, const Spn& scratch, NodeId scratch_root) {
    std::vector<SpnNode> nodes = spn.nodes();
    const NodeId replacement = append_subtree(nodes, scratch, scratch_root);
    NodeId root = spn.root();
    if (target == root) {
        root = replacement;
    } else {
        for (NodeId id : spn.eval_order()) {
            auto& node = nodes[id];
            std::vector<NodeId>* kids = nullptr;
            if (auto* s = std::get_if<SumNode>(&node)) kids = &s->children;
            if (auto* p = std::get_if<ProductNode>(&node)) kids = &p->children;
            if (kids) std::replace(kids->begin(), kids->end(), target, replacement);
        }
    }
    return Spn::from_nodes(spn.schema(), std::move(nodes), root).pruned();
}

std::vector<VarId> node_vars(const Spn& spn, NodeId id) { return scope_of(spn, id); }

LeafDistribution leaf_for(const Spn& spn, NodeId id, VarId var) {
    const auto& node = spn.nodes()[id];
    if (const auto* leaf = std::get_if<LeafNode>(&node)) return leaf->dist;
    for (NodeId c : std::get<ProductNode>(node).children) {
        const auto& leaf = std::get<LeafNode>(spn.nodes()[c]);
        if (leaf.var == var) return leaf.dist;
    }
    throw SpnError("variable not found under factorized node");
}

CandidateModel apply_at(const CandidateModel& m, NodeId target, ProductionRule rule, const Dataset& train,
                        const Dataset& valid, Rng& rng, const ParetoConfig& config, const LearnConfig& leaf_config,
                        std::span<const double> floors) {
    const Spn& spn = *m.spn;
    const auto vars = node_vars(spn, target);
    Spn scratch(spn.schema());
    NodeId sub_root = 0;

    if (rule == ProductionRule::Partition) {
        if (vars.size() < 2) return m;
        std::vector<VarId> shuffled = vars;
        rng.shuffle(shuffled.begin(), shuffled.end());
        const auto cut = static_cast<std::ptrdiff_t>(1 + rng.below(shuffled.size() - 1));
        std::array<std::vector<VarId>, 2> sides{std::vector<VarId>(shuffled.begin(), shuffled.begin() + cut),
                                                std::vector<VarId>(shuffled.begin() + cut, shuffled.end())};
        std::vector<RowId> rows;
        if (config.refit_after_rule) rows = route_rows(spn, target, train);
        std::vector<NodeId> parts;
        for (auto& side : sides) {
            std::sort(side.begin(), side.end());
            FactorizedModel fm;
            if (config.refit_after_rule) {
                fm = fit_factorized_model(DataSlice(train, rows, side), leaf_config.laplace, floors);
            } else {
                fm.vars = side;
                for (VarId v : side) fm.leaves.push_back(leaf_for(spn, target, v));
            }
            parts.push_back(emit_factorized(fm, scratch));
        }
        sub_root = scratch.add_product(std::move(parts));
    } else {
        std::vector<RowId> rows = route_rows(spn, target, train);
        if (rows.size() < 2) return m;
        std::array<std::vector<RowId>, 2> halves;
        for (RowId r : rows) halves[rng.coin() ? 1 : 0].push_back(r);
        if (halves[0].empty() || halves[1].empty()) {
            auto& full = halves[0].empty() ? halves[1] : halves[0];
            auto& empty = halves[0].empty() ? halves[0] : halves[1];
            const auto pick = static_cast<std::ptrdiff_t>(rng.below(full.size()));
            empty.push_back(full[static_cast<std::size_t>(pick)]);
            full.erase(full.begin() + pick);
        }
        const double n = static_cast<double>(rows.size());
        const double lambda = leaf_config.laplace;
        std::vector<NodeId> comps;
        std::vector<double> weights;
        for (const auto& half : halves) {
            comps.push_back(emit_factorized(fit_factorized_model(DataSlice(train, half, vars), lambda, floors), scratch));
            weights.push_back((static_cast<double>(half.size()) + lambda) / (n + 2.0 * lambda));
        }
        sub_root = scratch.add_sum(std::move(comps), std::move(weights));
    }
    scratch.set_root(sub_root);
    return make_candidate(replace_node(spn, target, scratch, sub_root), valid);
}

}  // namespace

CandidateModel make_candidate(Spn spn, const Dataset& valid) {
    CandidateModel c;
    c.dof = num_free_parameters(spn);
    c.valid_ll = mean_log_likelihood(spn, valid);
    c.spn = std::make_shared<const Spn>(std::move(spn));
    return c;
}

bool dominates(const CandidateModel& a, const CandidateModel& b) {
    return a.dof <= b.dof && a.valid_ll >= b.valid_ll && (a.dof < b.dof || a.valid_ll > b.valid_ll);
}

bool ParetoSet::insert(CandidateModel m) {
    for (const auto& x : models_)
        if (dominates(x, m)) return false;
    std::erase_if(models_, [&](const CandidateModel& x) { return dominates(m, x); });
    m.order = next_order_++;
    models_.push_back(std::move(m));
    return true;
}

bool ParetoSet::is_antichain() const {
    for (const auto& a : models_)
        for (const auto& b : models_)
            if (dominates(a, b)) return false;
    return true;
}

const CandidateModel& ParetoSet::best() const {
    if (models_.empty()) throw std::logic_error("best() of an empty Pareto set");
    const CandidateModel* best = &models_.front();
    for (const auto& m : models_) {
        if (m.valid_ll > best->valid_ll ||
            (m.valid_ll == best->valid_ll && (m.dof < best->dof || (m.dof == best->dof && m.order < best->order))))
            best = &m;
    }
    return *best;
}

ParetoSet pareto_insert(ParetoSet set, CandidateModel m) {
    set.insert(std::move(m));
    return set;
}

void ParetoConfig::check() const {
    if (iterations < 0) throw LearnError("iterations must be non-negative");
    if (expansions_per_iteration < 1) throw LearnError("expansions_per_iteration must be positive");
}

std::vector<NodeId> factorized_nodes(const Spn& spn) {
    std::vector<bool> covered(spn.num_nodes(), false);
    std::vector<NodeId> out;
    for (NodeId id : spn.eval_order()) {
        const auto* p = std::get_if<ProductNode>(&spn.nodes()[id]);
        if (!p) continue;
        const bool all_leaves = std::all_of(p->children.begin(), p->children.end(),
                                            [&](NodeId c) { return std::holds_alternative<LeafNode>(spn.nodes()[c]); });
        if (!all_leaves) continue;
        out.push_back(id);
        for (NodeId c : p->children) covered[c] = true;
    }
    for (NodeId id : spn.eval_order())
        if (std::holds_alternative<LeafNode>(spn.nodes()[id]) && !covered[id]) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

CandidateModel apply_rule(const CandidateModel& m, ProductionRule rule, const Dataset& train, const Dataset& valid,
                          Rng& rng, const ParetoConfig& config, const LearnConfig& leaf_config) {
    const auto targets = factorized_nodes(*m.spn);
    if (targets.empty()) return m;
    const NodeId target = targets[rng.below(targets.size())];
    const auto floors = variance_floors(train, leaf_config.variance_floor);
    return apply_at(m, target, rule, train, valid, rng, config, leaf_config, floors);
}

CandidateModel apply_production(const CandidateModel& m, const Dataset& train, const Dataset& valid, Rng& rng,
                                const ParetoConfig& config, const LearnConfig& leaf_config) {
    const auto targets = factorized_nodes(*m.spn);
    if (targets.empty()) return m;
    const NodeId target = targets[rng.below(targets.size())];
    const auto rule = rng.coin() ? ProductionRule::Mixture : ProductionRule::Partition;
    const auto floors = variance_floors(train, leaf_config.variance_floor);
    return apply_at(m, target, rule, train, valid, rng, config, leaf_config, floors);
}

ParetoResult pareto_search(const Dataset& train, const Dataset& valid, const ParetoConfig& config,
                           const LearnConfig& leaf_config, const std::optional<Spn>& init, const Deadline& deadline) {
    config.check();
    leaf_config.check();
    if (train.empty()) throw LearnError("training data is empty");
    if (valid.empty()) throw LearnError("validation data is empty");
    if (train.schema() != valid.schema()) throw LearnError("training and validation schemas differ");

    ParetoResult res;
    auto& front = res.front;
    {
        Spn base(train.schema());
        base.set_root(fit_factorized(DataSlice::whole(train), leaf_config, base));
        front.insert(make_candidate(std::move(base), valid));
    }
    if (init) {
        if (!schema_compatible(init->schema(), train.schema())) throw LearnError("initial model does not match the data schema");
        front.insert(make_candidate(*init, valid));
    }
    auto snapshot = [&](int iteration) {
        for (const auto& m : front.models()) res.trace.push_back({iteration, m.dof, m.valid_ll});
    };
    snapshot(0);

    const auto per_iter = static_cast<std::uint64_t>(config.expansions_per_iteration);
    for (int iter = 0; iter < config.iterations; ++iter) {
        const std::vector<CandidateModel> members = front.models();
        std::vector<CandidateModel> expanded;
        expanded.reserve(per_iter);
        for (std::uint64_t e = 0; e < per_iter; ++e) {
            deadline.check();
            Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(iter) * per_iter + e));
            const auto& parent = members[rng.below(members.size())];
            CandidateModel child = apply_production(parent, train, valid, rng, config, leaf_config);
            if (child.spn != parent.spn) expanded.push_back(std::move(child));
        }
        for (auto& c : expanded) front.insert(std::move(c));
        snapshot(iter + 1);
    }
    res.best = front.best();
    return res;
}

void write_front_trace(std::ostream& out, const std::vector<ParetoTraceRow>& trace) {
    out << "iteration\tdof\tvalid_ll\n";
    for (const auto& row : trace) {
        char buf[40];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, row.valid_ll, std::chars_format::general, 17);
        out << row.iteration << '\t' << row.dof << '\t' << std::string_view(buf, static_cast<std::size_t>(p - buf)) << '\n';
    }
}

}  // namespace minispn
