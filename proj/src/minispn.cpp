#include "minispn/minispn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "minispn/numeric.hpp"

namespace minispn {

namespace {

struct ColumnInfo {
    bool discrete = true;
    int arity = 2;
    double floor = 1e-6;
    double shift = 0.0;  // centring constant for continuous sums
};

// Slice cells copied into a dense row-major block over the slice's variables.
struct SliceMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> cells;

    double at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
    const double* row(std::size_t r) const { return cells.data() + r * cols; }
};

SliceMatrix gather(const DataSlice& slice) {
    SliceMatrix m;
    m.rows = slice.num_rows();
    m.cols = slice.num_vars();
    m.cells.resize(m.rows * m.cols);
    const auto& data = slice.dataset();
    const auto& vars = slice.vars();
    for (std::size_t i = 0; i < m.rows; ++i) {
        const auto src = data.row(slice.rows()[i]);
        for (std::size_t j = 0; j < m.cols; ++j) m.cells[i * m.cols + j] = src[vars[j]];
    }
    return m;
}

std::vector<ColumnInfo> column_info(const DataSlice& slice, const SliceMatrix& m, std::span<const double> floors) {
    std::vector<ColumnInfo> info(slice.num_vars());
    for (std::size_t j = 0; j < info.size(); ++j) {
        const auto& col = slice.dataset().schema()[slice.vars()[j]];
        info[j].discrete = col.is_discrete();
        info[j].arity = col.arity;
        info[j].floor = floors[slice.vars()[j]];
        if (!info[j].discrete) {
            for (std::size_t r = 0; r < m.rows; ++r) {
                if (!is_missing(m.at(r, j))) {
                    info[j].shift = m.at(r, j);
                    break;
                }
            }
        }
    }
    return info;
}

// Sufficient statistics of one cluster over the slice columns.
struct ClusterStats {
    double n = 0.0;
    std::vector<std::vector<double>> counts;  // discrete columns
    std::vector<double> n_obs, sum, sumsq;    // continuous columns, shifted

    explicit ClusterStats(const std::vector<ColumnInfo>& info)
        : counts(info.size()), n_obs(info.size(), 0.0), sum(info.size(), 0.0), sumsq(info.size(), 0.0) {
        for (std::size_t j = 0; j < info.size(); ++j)
            if (info[j].discrete) counts[j].assign(static_cast<std::size_t>(info[j].arity), 0.0);
    }

    void add(const double* row, const std::vector<ColumnInfo>& info) {
        n += 1.0;
        for (std::size_t j = 0; j < info.size(); ++j) {
            const double x = row[j];
            if (is_missing(x)) continue;
            if (info[j].discrete) {
                counts[j][static_cast<std::size_t>(x)] += 1.0;
            } else {
                const double d = x - info[j].shift;
                n_obs[j] += 1.0;
                sum[j] += d;
                sumsq[j] += d * d;
            }
        }
    }
};

// Fitted parameters of one cluster, in the layout the E-step reads.
struct ClusterParams {
    std::vector<std::vector<double>> probs;      // discrete
    std::vector<std::vector<double>> log_probs;  // discrete
    std::vector<double> mean, variance, log_norm;  // continuous; log_norm = -0.5 log(2 pi var)
    std::vector<double> mle_variance;            // continuous, unclamped (0 when < 1 obs)

    double log_density(const double* row, const std::vector<ColumnInfo>& info) const {
        double ll = 0.0;
        for (std::size_t j = 0; j < info.size(); ++j) {
            const double x = row[j];
            if (is_missing(x)) continue;
            if (info[j].discrete) {
                ll += log_probs[j][static_cast<std::size_t>(x)];
            } else {
                const double d = x - mean[j];
                ll += log_norm[j] - 0.5 * d * d / variance[j];
            }
        }
        return ll;
    }
};

ClusterParams fit_params(const ClusterStats& s, const std::vector<ColumnInfo>& info, double laplace) {
    const std::size_t k = info.size();
    ClusterParams p;
    p.probs.resize(k);
    p.log_probs.resize(k);
    p.mean.assign(k, 0.0);
    p.variance.assign(k, 1.0);
    p.log_norm.assign(k, 0.0);
    p.mle_variance.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        if (info[j].discrete) {
            const auto& c = s.counts[j];
            double n_obs = 0.0;
            for (double x : c) n_obs += x;
            const double denom = n_obs + laplace * info[j].arity;
            p.probs[j].resize(c.size());
            p.log_probs[j].resize(c.size());
            for (std::size_t v = 0; v < c.size(); ++v) {
                p.probs[j][v] = (c[v] + laplace) / denom;
                p.log_probs[j][v] = std::log(p.probs[j][v]);
            }
        } else {
            const double n_obs = s.n_obs[j];
            if (n_obs > 0.0) {
                const double m = s.sum[j] / n_obs;
                const double var = std::max(0.0, s.sumsq[j] / n_obs - m * m);
                p.mean[j] = m + info[j].shift;
                p.mle_variance[j] = var;
                p.variance[j] = std::max(var, info[j].floor);
            }
            p.log_norm[j] = -0.5 * std::log(2.0 * std::numbers::pi * p.variance[j]);
        }
    }
    return p;
}

// Log-likelihood of the cluster's own rows under its fitted parameters, plus
// the pseudo-count log-prior of the categorical tables. Uses only the
// sufficient statistics.
double cluster_objective(const ClusterStats& s, const ClusterParams& p, const std::vector<ColumnInfo>& info,
                         double laplace) {
    double total = 0.0;
    for (std::size_t j = 0; j < info.size(); ++j) {
        if (info[j].discrete) {
            for (std::size_t v = 0; v < s.counts[j].size(); ++v) total += (s.counts[j][v] + laplace) * p.log_probs[j][v];
        } else if (s.n_obs[j] > 0.0) {
            total += s.n_obs[j] * p.log_norm[j] - 0.5 * s.n_obs[j] * p.mle_variance[j] / p.variance[j];
        }
    }
    return total;
}

FactorizedModel to_model(const ClusterParams& p, const std::vector<ColumnInfo>& info, const std::vector<VarId>& vars) {
    FactorizedModel m;
    m.vars = vars;
    m.leaves.reserve(vars.size());
    for (std::size_t j = 0; j < vars.size(); ++j) {
        if (info[j].discrete) m.leaves.emplace_back(Categorical::from_probs(p.probs[j]));
        else m.leaves.emplace_back(Gaussian{p.mean[j], p.variance[j]});
    }
    return m;
}

std::string fmt17(double x) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

template <typename F>
void parallel_for(std::size_t n, std::size_t work, F&& body) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t threads = std::min<std::size_t>({hw, 8, n});
    if (threads <= 1 || work < (1u << 21)) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) body(i);
        });
}

}  // namespace

void LearnConfig::check() const {
    if (min_instances < 1) throw LearnError("min_instances must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw LearnError("alpha must lie in (0, 1)");
    if (em_max_iters < 1) throw LearnError("em_max_iters must be positive");
    if (!(laplace > 0.0) || !std::isfinite(laplace)) throw LearnError("laplace must be positive");
    if (!(variance_floor > 0.0) || !std::isfinite(variance_floor)) throw LearnError("variance_floor must be positive");
}

std::vector<double> variance_floors(const Dataset& data, double variance_floor) {
    std::vector<double> floors(data.num_vars(), variance_floor);
    for (VarId v = 0; v < data.num_vars(); ++v) {
        if (data.schema()[v].is_discrete()) continue;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t r = 0; r < data.num_rows(); ++r) {
            const double x = data.at(r, v);
            if (is_missing(x)) continue;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        const double range = hi > lo ? hi - lo : 1.0;
        floors[v] = variance_floor * range * range;
    }
    return floors;
}

double FactorizedModel::log_density(RowView row) const {
    double ll = 0.0;
    for (std::size_t j = 0; j < vars.size(); ++j) ll += leaf_log_density(leaves[j], row[vars[j]]);
    return ll;
}

FactorizedModel fit_factorized_model(const DataSlice& slice, double laplace, std::span<const double> floors) {
    if (slice.num_vars() == 0) throw LearnError("factorized fit over zero variables");
    const SliceMatrix m = gather(slice);
    const auto info = column_info(slice, m, floors);
    ClusterStats stats(info);
    for (std::size_t r = 0; r < m.rows; ++r) stats.add(m.row(r), info);
    return to_model(fit_params(stats, info, laplace), info, slice.vars());
}

NodeId emit_factorized(const FactorizedModel& model, Spn& out) {
    if (model.vars.size() == 1) return out.add_leaf(model.vars[0], model.leaves[0]);
    std::vector<NodeId> leaves;
    leaves.reserve(model.vars.size());
    for (std::size_t j = 0; j < model.vars.size(); ++j) leaves.push_back(out.add_leaf(model.vars[j], model.leaves[j]));
    return out.add_product(std::move(leaves));
}

NodeId fit_factorized(const DataSlice& slice, const LearnConfig& config, Spn& out) {
    const auto floors = variance_floors(slice.dataset(), config.variance_floor);
    return emit_factorized(fit_factorized_model(slice, config.laplace, floors), out);
}

namespace {

HardEmResult hard_em_impl(const DataSlice& slice, const LearnConfig& config, std::span<const double> floors, Rng& rng,
                          const Deadline& deadline) {
    HardEmResult res;
    const SliceMatrix m = gather(slice);
    const std::size_t n = m.rows;
    if (n < 2) {
        res.degenerate = true;
        return res;
    }
    const auto info = column_info(slice, m, floors);
    const double lambda = config.laplace;

    auto& assign = res.assignments;
    assign.resize(n);
    std::size_t ones = 0;
    for (auto& a : assign) {
        a = rng.coin() ? 1 : 0;
        ones += a;
    }
    // An empty starting cluster would end the run before it begins; seed it
    // with one row instead.
    if (ones == 0 || ones == n) assign[rng.below(n)] ^= 1;

    for (int iter = 0; iter < config.em_max_iters; ++iter) {
        deadline.check();
        std::array<ClusterStats, 2> stats{ClusterStats(info), ClusterStats(info)};
        for (std::size_t r = 0; r < n; ++r) stats[assign[r]].add(m.row(r), info);
        if (stats[0].n == 0.0 || stats[1].n == 0.0) {
            res.degenerate = true;
            return res;
        }
        std::array<ClusterParams, 2> params{fit_params(stats[0], info, lambda), fit_params(stats[1], info, lambda)};
        std::array<double, 2> log_w{};
        double objective = 0.0;
        for (int k = 0; k < 2; ++k) {
            log_w[k] = std::log((stats[k].n + lambda) / (static_cast<double>(n) + 2.0 * lambda));
            objective += (stats[k].n + lambda) * log_w[k] + cluster_objective(stats[k], params[k], info, lambda);
        }
        res.objective_trace.push_back(objective);
        res.iterations = iter + 1;

        bool changed = false;
        std::size_t count1 = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const double s0 = log_w[0] + params[0].log_density(m.row(r), info);
            const double s1 = log_w[1] + params[1].log_density(m.row(r), info);
            const std::uint8_t a = s1 > s0 ? 1 : 0;
            changed |= a != assign[r];
            assign[r] = a;
            count1 += a;
        }
        if (count1 == 0 || count1 == n) {
            res.degenerate = true;
            return res;
        }
        if (!changed) {
            res.converged = true;
            break;
        }
    }
    return res;
}

SplitDecision try_split_impl(const SliceContext& ctx, const LearnConfig& config, std::span<const double> floors, Rng& rng,
                             const Deadline& deadline) {
    SplitDecision d;
    if (ctx.valid.num_rows() == 0) {
        d.outcome = SplitDecision::Outcome::RejectNoValidation;
        return d;
    }
    if (ctx.train.num_rows() < 2) {
        d.outcome = SplitDecision::Outcome::RejectDegenerate;
        return d;
    }
    auto em = hard_em_impl(ctx.train, config, floors, rng, deadline);
    if (em.degenerate) {
        d.outcome = SplitDecision::Outcome::RejectDegenerate;
        return d;
    }
    std::array<std::vector<RowId>, 2> rows;
    for (std::size_t i = 0; i < em.assignments.size(); ++i) rows[em.assignments[i]].push_back(ctx.train.rows()[i]);
    const double n = static_cast<double>(ctx.train.num_rows());
    for (int k = 0; k < 2; ++k) {
        d.clusters[k] = fit_factorized_model(ctx.train.with_rows(rows[k]), config.laplace, floors);
        d.log_weights[k] = std::log((static_cast<double>(rows[k].size()) + config.laplace) / (n + 2.0 * config.laplace));
    }
    const FactorizedModel single = fit_factorized_model(ctx.train, config.laplace, floors);

    const auto& vdata = ctx.valid.dataset();
    for (RowId r : ctx.valid.rows()) {
        const auto row = vdata.row(r);
        d.valid_ll_single += single.log_density(row);
        d.valid_ll_mixture += log_add(d.log_weights[0] + d.clusters[0].log_density(row),
                                      d.log_weights[1] + d.clusters[1].log_density(row));
    }
    d.assignments = std::move(em.assignments);
    d.outcome = d.valid_ll_mixture > d.valid_ll_single ? SplitDecision::Outcome::Accept
                                                       : SplitDecision::Outcome::RejectLikelihood;
    return d;
}

}  // namespace

HardEmResult hard_em_two_clusters(const DataSlice& slice, const LearnConfig& config, Rng& rng) {
    const auto floors = variance_floors(slice.dataset(), config.variance_floor);
    return hard_em_impl(slice, config, floors, rng, Deadline{});
}

int SplitDecision::route(RowView row) const {
    const double s0 = log_weights[0] + clusters[0].log_density(row);
    const double s1 = log_weights[1] + clusters[1].log_density(row);
    return s1 > s0 ? 1 : 0;
}

SplitDecision try_instance_split(const SliceContext& ctx, const LearnConfig& config, Rng& rng) {
    if (ctx.train.vars() != ctx.valid.vars()) throw LearnError("train and validation slices must share variables");
    const auto floors = variance_floors(ctx.train.dataset(), config.variance_floor);
    return try_split_impl(ctx, config, floors, rng, Deadline{});
}

DependencyGraph dependency_graph(const DataSlice& slice, const LearnConfig& config) {
    const std::size_t nv = slice.num_vars();
    const std::size_t n = slice.num_rows();
    DependencyGraph graph;
    graph.num_vars = nv;
    if (nv < 2) return graph;

    const auto& data = slice.dataset();
    struct Column {
        bool discrete;
        int arity;
        bool has_missing = false;
        std::vector<std::int32_t> codes;  // discrete, -1 = missing
        std::vector<double> values;       // continuous
    };
    std::vector<Column> cols(nv);
    for (std::size_t j = 0; j < nv; ++j) {
        const auto& meta = data.schema()[slice.vars()[j]];
        auto& c = cols[j];
        c.discrete = meta.is_discrete();
        c.arity = c.discrete ? meta.arity : 2;
        if (c.discrete) c.codes.resize(n);
        else c.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = data.at(slice.rows()[i], slice.vars()[j]);
            if (is_missing(x)) c.has_missing = true;
            if (c.discrete) c.codes[i] = is_missing(x) ? -1 : static_cast<std::int32_t>(x);
            else c.values[i] = x;
        }
    }

    std::vector<Edge> pairs;
    pairs.reserve(nv * (nv - 1) / 2);
    for (std::size_t a = 0; a < nv; ++a)
        for (std::size_t b = a + 1; b < nv; ++b) pairs.emplace_back(a, b);
    std::vector<std::uint8_t> dependent(pairs.size(), 0);

    auto test_pair = [&](std::size_t idx) {
        const auto [a, b] = pairs[idx];
        const Column& ca = cols[a];
        const Column& cb = cols[b];
        auto observed = [](const Column& c, std::size_t i) {
            return c.discrete ? c.codes[i] >= 0 : !is_missing(c.values[i]);
        };

        std::vector<std::uint32_t> complete;
        const bool all_rows = !ca.has_missing && !cb.has_missing;
        if (!all_rows) {
            for (std::size_t i = 0; i < n; ++i)
                if (observed(ca, i) && observed(cb, i)) complete.push_back(static_cast<std::uint32_t>(i));
        }
        const std::size_t count = all_rows ? n : complete.size();
        if (count == 0 || count < config.min_overlap) return;
        auto row_at = [&](std::size_t k) { return all_rows ? k : static_cast<std::size_t>(complete[k]); };

        // Continuous members are binarized at their median over the
        // pairwise-complete rows.
        auto cutoff = [&](const Column& c) {
            std::vector<double> vals(count);
            for (std::size_t k = 0; k < count; ++k) vals[k] = c.values[row_at(k)];
            const std::size_t mid = count / 2;
            std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
            const double upper = vals[mid];
            if (count % 2 == 1) return upper;
            return 0.5 * (upper + *std::max_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid)));
        };
        const double cut_a = ca.discrete ? 0.0 : cutoff(ca);
        const double cut_b = cb.discrete ? 0.0 : cutoff(cb);
        auto code = [](const Column& c, double cut, std::size_t i) -> std::size_t {
            if (c.discrete) return static_cast<std::size_t>(c.codes[i]);
            return c.values[i] <= cut ? 0 : 1;
        };

        ContingencyTable table(static_cast<std::size_t>(ca.arity), static_cast<std::size_t>(cb.arity));
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t i = row_at(k);
            table.at(code(ca, cut_a, i), code(cb, cut_b, i)) += 1.0;
        }
        if (pairwise_g_test(table).p < config.alpha) dependent[idx] = 1;
    };

    parallel_for(pairs.size(), pairs.size() * n, test_pair);

    for (std::size_t idx = 0; idx < pairs.size(); ++idx)
        if (dependent[idx]) graph.edges.push_back(pairs[idx]);
    return graph;
}

std::string DecisionLog::to_tsv() const {
    std::ostringstream out;
    out << "train_rows\tvalid_rows\tnum_vars\tattempt\tvalid_ll_single\tvalid_ll_split\tdecision\tdetail\n";
    auto ll = [](const std::optional<double>& v) { return v ? fmt17(*v) : std::string("NA"); };
    for (const auto& r : records) {
        out << r.train_rows << '\t' << r.valid_rows << '\t' << r.num_vars << '\t' << r.attempt << '\t'
            << ll(r.valid_ll_single) << '\t' << ll(r.valid_ll_split) << '\t' << (r.accepted ? "accept" : "reject") << '\t'
            << (r.detail.empty() ? "-" : r.detail) << '\n';
    }
    return out.str();
}

DecisionLog DecisionLog::from_tsv(const std::string& text) {
    DecisionLog log;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw LearnError("decision log line " + std::to_string(lineno) + ": " + msg);
    };
    auto parse_size = [&](const std::string& s) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) fail("bad count '" + s + "'");
        return v;
    };
    auto parse_ll = [&](const std::string& s) -> std::optional<double> {
        if (s == "NA") return std::nullopt;
        double v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) fail("bad log-likelihood '" + s + "'");
        return v;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || lineno == 1) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, '\t')) f.push_back(field);
        if (f.size() != 8) fail("expected 8 fields");
        DecisionRecord r;
        r.train_rows = parse_size(f[0]);
        r.valid_rows = parse_size(f[1]);
        r.num_vars = parse_size(f[2]);
        r.attempt = f[3];
        r.valid_ll_single = parse_ll(f[4]);
        r.valid_ll_split = parse_ll(f[5]);
        if (f[6] != "accept" && f[6] != "reject") fail("bad decision '" + f[6] + "'");
        r.accepted = f[6] == "accept";
        r.detail = f[7] == "-" ? "" : f[7];
        log.records.push_back(std::move(r));
    }
    return log;
}

std::vector<std::string> replay_gate_violations(const DecisionLog& log) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const auto& r = log.records[i];
        if (r.attempt != "instance" || !r.accepted) continue;
        if (!r.valid_ll_single || !r.valid_ll_split) {
            out.push_back("record " + std::to_string(i) + ": accepted split without validation scores");
        } else if (!(*r.valid_ll_split > *r.valid_ll_single)) {
            out.push_back("record " + std::to_string(i) + ": split LL " + fmt17(*r.valid_ll_split) +
                          " does not exceed factorized LL " + fmt17(*r.valid_ll_single));
        }
    }
    return out;
}

namespace {

class MiniSpnBuilder {
public:
    MiniSpnBuilder(const Dataset& train, const Dataset& valid, const LearnConfig& config, DecisionLog* log,
                   const Deadline& deadline)
        : train_(train),
          valid_(valid),
          config_(config),
          log_(log),
          deadline_(deadline),
          rng_(config.seed),
          floors_(variance_floors(train, config.variance_floor)),
          out_(train.schema()) {}

    Spn run() {
        std::vector<RowId> train_rows(train_.num_rows());
        std::iota(train_rows.begin(), train_rows.end(), RowId{0});
        std::vector<RowId> valid_rows(valid_.num_rows());
        std::iota(valid_rows.begin(), valid_rows.end(), RowId{0});
        std::vector<VarId> vars(train_.num_vars());
        std::iota(vars.begin(), vars.end(), VarId{0});
        const NodeId root = build(std::move(train_rows), std::move(valid_rows), std::move(vars));
        out_.set_root(root);
        return std::move(out_);
    }

private:
    NodeId factorized(const DataSlice& slice) {
        return emit_factorized(fit_factorized_model(slice, config_.laplace, floors_), out_);
    }

    NodeId build(std::vector<RowId> train_rows, std::vector<RowId> valid_rows, std::vector<VarId> vars) {
        deadline_.check();
        SliceContext ctx{DataSlice(train_, std::move(train_rows), vars), DataSlice(valid_, std::move(valid_rows), vars)};
        if (vars.size() == 1 || ctx.train.num_rows() < std::max<std::size_t>(config_.min_instances, 2))
            return factorized(ctx.train);

        SplitDecision split = try_split_impl(ctx, config_, floors_, rng_, deadline_);
        record_instance(ctx, split);
        if (split.accepted()) {
            std::array<std::vector<RowId>, 2> t_rows, v_rows;
            for (std::size_t i = 0; i < split.assignments.size(); ++i)
                t_rows[split.assignments[i]].push_back(ctx.train.rows()[i]);
            for (RowId r : ctx.valid.rows()) v_rows[split.route(valid_.row(r))].push_back(r);
            std::vector<double> weights{std::exp(split.log_weights[0]), std::exp(split.log_weights[1])};
            split = {};  // release before recursing
            const NodeId left = build(std::move(t_rows[0]), std::move(v_rows[0]), vars);
            const NodeId right = build(std::move(t_rows[1]), std::move(v_rows[1]), vars);
            return out_.add_sum({left, right}, std::move(weights));
        }

        const auto graph = dependency_graph(ctx.train, config_);
        const auto groups = connected_components(graph.num_vars, graph.edges);
        record_variable(ctx, groups.size());
        if (groups.size() < 2) return factorized(ctx.train);

        std::vector<NodeId> children;
        children.reserve(groups.size());
        for (const auto& g : groups) {
            std::vector<VarId> sub;
            sub.reserve(g.size());
            for (auto pos : g) sub.push_back(vars[pos]);
            children.push_back(build(ctx.train.rows(), ctx.valid.rows(), std::move(sub)));
        }
        return out_.add_product(std::move(children));
    }

    void record_instance(const SliceContext& ctx, const SplitDecision& d) {
        if (!log_) return;
        DecisionRecord r;
        r.train_rows = ctx.train.num_rows();
        r.valid_rows = ctx.valid.num_rows();
        r.num_vars = ctx.train.num_vars();
        r.attempt = "instance";
        r.accepted = d.accepted();
        switch (d.outcome) {
            case SplitDecision::Outcome::Accept:
            case SplitDecision::Outcome::RejectLikelihood:
                r.valid_ll_single = d.valid_ll_single;
                r.valid_ll_split = d.valid_ll_mixture;
                break;
            case SplitDecision::Outcome::RejectDegenerate: r.detail = "degenerate"; break;
            case SplitDecision::Outcome::RejectNoValidation: r.detail = "no-validation-rows"; break;
        }
        log_->records.push_back(std::move(r));
    }

    void record_variable(const SliceContext& ctx, std::size_t components) {
        if (!log_) return;
        DecisionRecord r;
        r.train_rows = ctx.train.num_rows();
        r.valid_rows = ctx.valid.num_rows();
        r.num_vars = ctx.train.num_vars();
        r.attempt = "variable";
        r.accepted = components >= 2;
        r.detail = "components=" + std::to_string(components);
        log_->records.push_back(std::move(r));
    }

    const Dataset& train_;
    const Dataset& valid_;
    const LearnConfig& config_;
    DecisionLog* log_;
    const Deadline& deadline_;
    Rng rng_;
    std::vector<double> floors_;
    Spn out_;
};

}  // namespace

Spn learn(const Dataset& train, const Dataset& valid, const LearnConfig& config, DecisionLog* log,
          const Deadline& deadline) {
    config.check();
    if (train.schema() != valid.schema()) throw LearnError("training and validation schemas differ");
    if (train.empty()) throw LearnError("training data is empty");
    if (train.num_vars() == 0) throw LearnError("training data has no variables");
    return MiniSpnBuilder(train, valid, config, log, deadline).run();
}

}  // namespace minispn
