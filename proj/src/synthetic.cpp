#include "minispn/synthetic.hpp"

namespace minispn {

Dataset sample_dataset(const Spn& spn, std::size_t n_rows, Rng& rng) {
    std::vector<double> cells;
    cells.reserve(n_rows * spn.num_vars());
    for (std::size_t r = 0; r < n_rows; ++r) {
        const Row row = sample(spn, rng);
        cells.insert(cells.end(), row.begin(), row.end());
    }
    return Dataset(spn.schema(), std::move(cells));
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    const std::size_t n_vars = spec.n_discrete + spec.n_continuous;
    if (n_vars == 0) throw DataError("synthetic data needs at least one variable");
    if (!(spec.missing_rate >= 0.0 && spec.missing_rate < 1.0)) throw DataError("missing_rate must lie in [0, 1)");

    Schema schema;
    for (std::size_t v = 0; v < spec.n_discrete; ++v) schema.push_back(ColumnMeta::discrete("d" + std::to_string(v), 2));
    for (std::size_t v = 0; v < spec.n_continuous; ++v) schema.push_back(ColumnMeta::continuous("c" + std::to_string(v)));

    Rng rng(spec.seed);
    Spn truth(schema);
    const std::size_t n_components = 2 + rng.below(3);
    std::vector<NodeId> components;
    std::vector<double> weights;
    double weight_total = 0.0;
    for (std::size_t k = 0; k < n_components; ++k) {
        std::vector<NodeId> leaves;
        for (VarId v = 0; v < n_vars; ++v) {
            if (schema[v].is_discrete()) {
                const double p = rng.uniform(0.05, 0.95);
                leaves.push_back(truth.add_leaf(v, Categorical::from_probs({1.0 - p, p})));
            } else {
                leaves.push_back(truth.add_leaf(v, Gaussian{rng.uniform(-4.0, 4.0), rng.uniform(0.3, 1.5)}));
            }
        }
        components.push_back(leaves.size() == 1 ? leaves.front() : truth.add_product(std::move(leaves)));
        weights.push_back(rng.uniform(0.5, 1.5));
        weight_total += weights.back();
    }
    for (double& w : weights) w /= weight_total;
    truth.set_root(truth.add_sum(std::move(components), std::move(weights)));

    std::vector<double> cells;
    cells.reserve(spec.n_rows * n_vars);
    for (std::size_t r = 0; r < spec.n_rows; ++r) {
        const Row row = sample(truth, rng);
        cells.insert(cells.end(), row.begin(), row.end());
    }
    if (spec.missing_rate > 0.0) {
        for (double& c : cells)
            if (rng.uniform() < spec.missing_rate) c = kMissing;
    }
    return {Dataset(std::move(schema), std::move(cells)), std::move(truth)};
}

}  // namespace minispn
