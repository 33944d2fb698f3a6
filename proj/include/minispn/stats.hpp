#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace minispn {

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double regularized_gamma_q(double a, double x);

// Upper tail P(X > x) of a chi-square variable with `dof` degrees of freedom.
double chi_square_sf(double x, int dof);

// Dense r x c table of counts, row-major.
struct ContingencyTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> counts;

    ContingencyTable() = default;
    ContingencyTable(std::size_t r, std::size_t c) : rows(r), cols(c), counts(r * c, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return counts[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return counts[i * cols + j]; }
};

struct GTestResult {
    double g = 0.0;
    int dof = 0;
    double p = 1.0;
};

// Likelihood-ratio test of independence. Degrees of freedom count only rows
// and columns with non-zero totals. Throws std::invalid_argument on an empty
// table or negative counts.
GTestResult pairwise_g_test(const ContingencyTable& table);

using Edge = std::pair<std::size_t, std::size_t>;

// Undirected components over vertices [0, n); groups are ordered by smallest
// member, members ascending.
std::vector<std::vector<std::size_t>> connected_components(std::size_t n, std::span<const Edge> edges);

}  // namespace minispn
