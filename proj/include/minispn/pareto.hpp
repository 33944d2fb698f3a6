#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "minispn/data.hpp"
#include "minispn/minispn.hpp"
#include "minispn/spn.hpp"

namespace minispn {

struct CandidateModel {
    std::shared_ptr<const Spn> spn;
    std::int64_t dof = 0;
    double valid_ll = 0.0;      // mean per validation row
    std::uint64_t order = 0;    // insertion sequence number, for tie-breaking
};

CandidateModel make_candidate(Spn spn, const Dataset& valid);

// Fewer-or-equal parameters and higher-or-equal likelihood, one strictly.
bool dominates(const CandidateModel& a, const CandidateModel& b);

// Antichain of candidates under dominates().
class ParetoSet {
public:
    // Returns false (set unchanged) when an existing member dominates m.
    bool insert(CandidateModel m);

    const std::vector<CandidateModel>& models() const { return models_; }
    std::size_t size() const { return models_.size(); }
    bool is_antichain() const;

    // Highest valid_ll; ties to lower dof, then earlier insertion.
    const CandidateModel& best() const;

private:
    std::vector<CandidateModel> models_;
    std::uint64_t next_order_ = 0;
};

ParetoSet pareto_insert(ParetoSet set, CandidateModel m);

struct ParetoConfig {
    int iterations = 50;
    int expansions_per_iteration = 10;
    std::uint64_t seed = 0;
    bool refit_after_rule = true;

    void check() const;
};

enum class ProductionRule { Partition, Mixture };

// Applies one randomly chosen rule at one randomly chosen factorized node.
// Returns m unchanged when the chosen rule does not apply there.
CandidateModel apply_production(const CandidateModel& m, const Dataset& train, const Dataset& valid, Rng& rng,
                                const ParetoConfig& config, const LearnConfig& leaf_config);

// Same, with the rule fixed by the caller.
CandidateModel apply_rule(const CandidateModel& m, ProductionRule rule, const Dataset& train, const Dataset& valid,
                          Rng& rng, const ParetoConfig& config, const LearnConfig& leaf_config);

// Nodes a production may target: products whose children are all leaves, and
// leaves not under such a product.
std::vector<NodeId> factorized_nodes(const Spn& spn);

struct ParetoTraceRow {
    int iteration = 0;
    std::int64_t dof = 0;
    double valid_ll = 0.0;
};

struct ParetoResult {
    CandidateModel best;
    ParetoSet front;
    std::vector<ParetoTraceRow> trace;
};

// Random production-rule search over the (dof, validation LL) front. With an
// initial model this is the hybrid learner.
ParetoResult pareto_search(const Dataset& train, const Dataset& valid, const ParetoConfig& config,
                           const LearnConfig& leaf_config, const std::optional<Spn>& init = std::nullopt,
                           const Deadline& deadline = {});

void write_front_trace(std::ostream& out, const std::vector<ParetoTraceRow>& trace);

}  // namespace minispn
