#include "minispn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace minispn {

namespace {

constexpr int kMaxIter = 1000;
constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Lower series: P(a, x) for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction (modified Lentz) for Q(a, x), x >= a + 1.
double gamma_q_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<int> rank_;
};

}  // namespace

double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw std::invalid_argument("regularized_gamma_q: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_fraction(a, x);
}

double chi_square_sf(double x, int dof) {
    if (dof <= 0) return 1.0;
    if (x <= 0.0) return 1.0;
    return regularized_gamma_q(0.5 * dof, 0.5 * x);
}

GTestResult pairwise_g_test(const ContingencyTable& table) {
    if (table.rows == 0 || table.cols == 0) throw std::invalid_argument("g-test on an empty table");
    std::vector<double> row_tot(table.rows, 0.0), col_tot(table.cols, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < table.rows; ++i) {
        for (std::size_t j = 0; j < table.cols; ++j) {
            const double o = table.at(i, j);
            if (o < 0.0) throw std::invalid_argument("g-test with a negative count");
            row_tot[i] += o;
            col_tot[j] += o;
            total += o;
        }
    }
    if (total <= 0.0) throw std::invalid_argument("g-test on a table with zero total");

    GTestResult res;
    for (std::size_t i = 0; i < table.rows; ++i) {
        for (std::size_t j = 0; j < table.cols; ++j) {
            const double o = table.at(i, j);
            if (o <= 0.0) continue;
            const double e = row_tot[i] * col_tot[j] / total;
            res.g += o * std::log(o / e);
        }
    }
    res.g = std::max(0.0, 2.0 * res.g);
    const auto nonzero = [](const std::vector<double>& v) {
        return static_cast<int>(std::count_if(v.begin(), v.end(), [](double t) { return t > 0.0; }));
    };
    res.dof = (nonzero(row_tot) - 1) * (nonzero(col_tot) - 1);
    res.p = res.dof == 0 ? 1.0 : chi_square_sf(res.g, res.dof);
    return res;
}

std::vector<std::vector<std::size_t>> connected_components(std::size_t n, std::span<const Edge> edges) {
    UnionFind uf(n);
    for (const auto& [a, b] : edges) {
        if (a >= n || b >= n) throw std::out_of_range("edge endpoint outside vertex range");
        uf.unite(a, b);
    }
    // Vertices visited in ascending order, so groups come out sorted by their
    // smallest member and members are ascending.
    std::vector<std::size_t> group_of(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t v = 0; v < n; ++v) {
        const auto r = uf.find(v);
        if (group_of[r] == std::numeric_limits<std::size_t>::max()) {
            group_of[r] = groups.size();
            groups.emplace_back();
        }
        groups[group_of[r]].push_back(v);
    }
    return groups;
}

}  // namespace minispn
