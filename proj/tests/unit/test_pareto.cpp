#include <doctest.h>

#include <algorithm>

#include "../support/testing.hpp"
#include "minispn/minispn.hpp"
#include "minispn/pareto.hpp"
#include "minispn/synthetic.hpp"

using namespace minispn;
using namespace testing_support;

namespace {

CandidateModel point(std::int64_t dof, double ll) {
    CandidateModel m;
    m.dof = dof;
    m.valid_ll = ll;
    return m;
}

Spn factorized(const Dataset& train) {
    Spn spn(train.schema());
    LearnConfig cfg;
    spn.set_root(fit_factorized(DataSlice::whole(train), cfg, spn));
    return spn;
}

Dataset binary_rows(std::size_t n_vars, std::size_t n_rows, Rng& rng) {
    std::vector<double> cells;
    for (std::size_t i = 0; i < n_rows * n_vars; ++i) cells.push_back(rng.uniform() < 0.3 ? 1.0 : 0.0);
    return Dataset(binary_schema(n_vars), cells);
}

Spn two_cluster_truth(std::size_t n) {
    Spn spn(binary_schema(n));
    std::vector<NodeId> comps;
    for (double p : {0.9, 0.1}) {
        std::vector<NodeId> leaves;
        for (VarId v = 0; v < n; ++v) leaves.push_back(spn.add_leaf(v, bernoulli(p)));
        comps.push_back(spn.add_product(leaves));
    }
    spn.set_root(spn.add_sum(comps, {0.5, 0.5}));
    return spn;
}

}  // namespace

TEST_SUITE("learn_pareto") {

TEST_CASE("dominates") {
    CHECK(dominates(point(10, -5), point(12, -6)));
    CHECK_FALSE(dominates(point(10, -5), point(8, -7)));
    CHECK_FALSE(dominates(point(8, -7), point(10, -5)));
    CHECK_FALSE(dominates(point(10, -5), point(10, -5)));
    CHECK(dominates(point(10, -5), point(10, -5.5)));
    CHECK(dominates(point(9, -5), point(10, -5)));
}

TEST_CASE("pareto_insert") {
    ParetoSet set;
    set = pareto_insert(set, point(10, -5));
    set = pareto_insert(set, point(5, -8));
    REQUIRE(set.size() == 2);

    const auto before = set.size();
    set = pareto_insert(set, point(12, -6));
    CHECK(set.size() == before);

    set = pareto_insert(set, point(4, -4));
    REQUIRE(set.size() == 1);
    CHECK(set.models()[0].dof == 4);
}

TEST_CASE("pareto_insert matches the brute-force non-dominated set") {
    Rng rng(19);
    for (int t = 0; t < 200; ++t) {
        const auto n = 1 + rng.below(100);
        std::vector<CandidateModel> all;
        ParetoSet set;
        for (std::size_t i = 0; i < n; ++i) {
            // Small grids force ties and equal pairs.
            auto m = point(static_cast<std::int64_t>(rng.below(12)), -static_cast<double>(rng.below(12)));
            m.order = i;
            all.push_back(m);
            set.insert(m);
            REQUIRE(set.is_antichain());
        }
        std::vector<std::pair<std::int64_t, double>> expect, got;
        for (const auto& m : all) {
            const bool dominated = std::any_of(all.begin(), all.end(), [&](const CandidateModel& o) { return dominates(o, m); });
            if (!dominated) expect.emplace_back(m.dof, m.valid_ll);
        }
        for (const auto& m : set.models()) got.emplace_back(m.dof, m.valid_ll);
        std::sort(expect.begin(), expect.end());
        std::sort(got.begin(), got.end());
        CHECK(got == expect);
    }
}

TEST_CASE("best prefers likelihood, then fewer parameters, then earlier insertion") {
    ParetoSet set;
    set.insert(point(3, -7));
    set.insert(point(9, -5));
    set.insert(point(6, -6));
    CHECK(set.best().dof == 9);

    ParetoSet tie;
    auto a = point(5, -5);
    auto b = point(5, -5);
    tie.insert(a);
    tie.insert(b);
    CHECK(tie.size() == 2);
    CHECK(tie.best().order == 0);
}

TEST_CASE("partition rule on a factorized model") {
    Rng gen(2);
    const auto train = binary_rows(4, 300, gen);
    const auto valid = binary_rows(4, 100, gen);
    const auto base = make_candidate(factorized(train), valid);
    ParetoConfig cfg;
    LearnConfig leaf;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const auto child = apply_rule(base, ProductionRule::Partition, train, valid, rng, cfg, leaf);
        REQUIRE(child.spn != base.spn);
        CHECK(validate(*child.spn).empty());
        CHECK(child.dof == base.dof);
        CHECK(scope_of(*child.spn, child.spn->root()) == Scope{0, 1, 2, 3});
        const auto& root = std::get<ProductNode>(child.spn->node(child.spn->root()));
        CHECK(root.children.size() == 2);
        const bool nested = std::any_of(root.children.begin(), root.children.end(), [&](NodeId c) {
            return std::holds_alternative<ProductNode>(child.spn->node(c));
        });
        CHECK(nested);
        // Refit on the same rows: a product of the same leaves.
        CHECK(child.valid_ll == doctest::Approx(base.valid_ll).epsilon(1e-12));
    }
}

TEST_CASE("partition rule leaves a single-variable model unchanged") {
    Rng gen(3);
    const auto train = binary_rows(1, 50, gen);
    const auto base = make_candidate(factorized(train), train);
    Rng rng(1);
    const auto child = apply_rule(base, ProductionRule::Partition, train, train, rng, ParetoConfig{}, LearnConfig{});
    CHECK(child.spn == base.spn);
    CHECK(child.dof == base.dof);
}

TEST_CASE("mixture rule adds one weight plus a copy of the leaf parameters") {
    SyntheticSpec spec;
    spec.n_rows = 400;
    spec.n_discrete = 3;
    spec.n_continuous = 2;
    spec.missing_rate = 0.2;
    spec.seed = 8;
    const auto data = generate_synthetic(spec).data;
    const auto split = split_rows(data, 0.25, 1);
    const auto train = data.select_rows(split.train);
    const auto valid = data.select_rows(split.valid);
    auto current = make_candidate(factorized(train), valid);
    Rng rng(5);
    for (int step = 0; step < 8; ++step) {
        const auto targets = factorized_nodes(*current.spn);
        REQUIRE_FALSE(targets.empty());
        const auto child = apply_rule(current, ProductionRule::Mixture, train, valid, rng, ParetoConfig{}, LearnConfig{});
        if (child.spn == current.spn) continue;
        CHECK(validate(*child.spn).empty());
        const auto gained = child.dof - current.dof;
        CHECK(gained >= 1);
        // The new sum has two factorized components over the target's scope;
        // each matches the target's own leaf-parameter count.
        std::int64_t leaf_params = 0;
        for (const auto& col : train.schema()) leaf_params += col.is_discrete() ? col.arity - 1 : 2;
        CHECK(gained <= 1 + leaf_params);
        CHECK(child.valid_ll == doctest::Approx(mean_log_likelihood(*child.spn, valid)).epsilon(1e-12));
        current = child;
    }
}

TEST_CASE("mixture rule dof on the whole factorized model") {
    Rng gen(4);
    const auto train = binary_rows(5, 200, gen);
    const auto base = make_candidate(factorized(train), train);
    Rng rng(9);
    const auto child = apply_rule(base, ProductionRule::Mixture, train, train, rng, ParetoConfig{}, LearnConfig{});
    REQUIRE(child.spn != base.spn);
    CHECK(child.dof == base.dof + 1 + base.dof);
    CHECK(std::holds_alternative<SumNode>(child.spn->node(child.spn->root())));
}

TEST_CASE("factorized_nodes") {
    const auto tri = three_product_spn();
    const auto nodes = factorized_nodes(tri);
    CHECK(nodes.size() == 3);
    for (NodeId id : nodes) CHECK(std::holds_alternative<ProductNode>(tri.node(id)));

    Spn mix(binary_schema(1));
    const auto a = mix.add_leaf(0, bernoulli(0.2));
    const auto b = mix.add_leaf(0, bernoulli(0.7));
    mix.set_root(mix.add_sum({a, b}, {0.5, 0.5}));
    CHECK(factorized_nodes(mix) == std::vector<NodeId>{a, b});
}

TEST_CASE("search with no iterations returns the factorized model") {
    Rng gen(6);
    const auto train = binary_rows(5, 300, gen);
    const auto valid = binary_rows(5, 100, gen);
    ParetoConfig cfg;
    cfg.iterations = 0;
    const auto res = pareto_search(train, valid, cfg, LearnConfig{});
    CHECK(serialize(*res.best.spn) == serialize(factorized(train)));
    CHECK(res.front.size() == 1);
}

TEST_CASE("search: invariants, front monotonicity and determinism") {
    SyntheticSpec spec;
    spec.n_rows = 1200;
    spec.n_discrete = 5;
    spec.n_continuous = 2;
    spec.missing_rate = 0.1;
    spec.seed = 12;
    const auto data = generate_synthetic(spec).data;
    const auto split = split_rows(data, 0.25, 2);
    const auto train = data.select_rows(split.train);
    const auto valid = data.select_rows(split.valid);
    ParetoConfig cfg;
    cfg.iterations = 15;
    cfg.expansions_per_iteration = 6;
    cfg.seed = 44;
    const auto res = pareto_search(train, valid, cfg, LearnConfig{});
    CHECK(res.front.is_antichain());
    for (const auto& m : res.front.models()) {
        CHECK(validate(*m.spn).empty());
        CHECK(m.dof == num_free_parameters(*m.spn));
        CHECK(m.valid_ll == doctest::Approx(mean_log_likelihood(*m.spn, valid)).epsilon(1e-12));
    }
    double prev = -1e300;
    for (int it = 0; it <= cfg.iterations; ++it) {
        double best = -1e300;
        for (const auto& row : res.trace)
            if (row.iteration == it) best = std::max(best, row.valid_ll);
        CHECK(best >= prev);
        prev = best;
    }
    const auto again = pareto_search(train, valid, cfg, LearnConfig{});
    CHECK(serialize(*again.best.spn) == serialize(*res.best.spn));
    CHECK(again.trace.size() == res.trace.size());
}

TEST_CASE("search on planted clusters beats the factorized baseline") {
    const auto truth = two_cluster_truth(6);
    Rng rng(31);
    const auto train = sample_dataset(truth, 2000, rng);
    const auto valid = sample_dataset(truth, 400, rng);
    ParetoConfig cfg;
    cfg.seed = 3;
    const auto res = pareto_search(train, valid, cfg, LearnConfig{});
    const auto base = make_candidate(factorized(train), valid);
    CHECK(res.best.valid_ll > base.valid_ll);
}

TEST_CASE("hybrid never scores below its initial model on validation") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        SyntheticSpec spec;
        spec.n_rows = 1500;
        spec.n_discrete = 4;
        spec.n_continuous = 2;
        spec.missing_rate = 0.2;
        spec.seed = seed + 50;
        const auto data = generate_synthetic(spec).data;
        const auto split = split_rows(data, 0.2, seed);
        const auto train = data.select_rows(split.train);
        const auto valid = data.select_rows(split.valid);
        LearnConfig leaf;
        leaf.seed = seed;
        const auto init = learn(train, valid, leaf);
        ParetoConfig cfg;
        cfg.seed = seed;
        cfg.iterations = 10;
        const auto res = pareto_search(train, valid, cfg, leaf, init);
        CHECK(res.best.valid_ll >= mean_log_likelihood(init, valid));
    }
}

TEST_CASE("search: errors") {
    Rng gen(1);
    const auto train = binary_rows(3, 20, gen);
    const Dataset empty(binary_schema(3), {});
    CHECK_THROWS_AS(pareto_search(empty, train, ParetoConfig{}, LearnConfig{}), LearnError);
    ParetoConfig bad;
    bad.expansions_per_iteration = 0;
    CHECK_THROWS_AS(pareto_search(train, train, bad, LearnConfig{}), LearnError);
    const auto other = binary_rows(4, 20, gen);
    CHECK_THROWS_AS(pareto_search(train, train, ParetoConfig{}, LearnConfig{}, factorized(other)), LearnError);
    const auto expired = Deadline::after(std::chrono::duration<double>(0.0));
    CHECK_THROWS_AS(pareto_search(train, train, ParetoConfig{}, LearnConfig{}, std::nullopt, expired), TimeoutError);
}

}
