#pragma once

#include <cstdint>

#include "minispn/data.hpp"
#include "minispn/spn.hpp"

namespace minispn {

struct SyntheticSpec {
    std::size_t n_rows = 1000;
    std::size_t n_discrete = 4;
    std::size_t n_continuous = 0;
    double missing_rate = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    Dataset data;
    Spn truth;  // the model the rows were drawn from, before masking
};

// Random 2-4 component mixture of factorized models over binary and Gaussian
// columns; rows are sampled from it and cells masked independently (MCAR).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Draws n fully observed rows from a model.
Dataset sample_dataset(const Spn& spn, std::size_t n_rows, Rng& rng);

}  // namespace minispn
