#include "minispn/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "minispn/bench.hpp"
#include "minispn/synthetic.hpp"

namespace minispn {

namespace {

namespace fs = std::filesystem;

// Failures that map to exit code 1.
struct CliFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliFailure("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CliFailure("cannot write '" + path + "'");
    out << text;
    if (!out) throw CliFailure("error writing '" + path + "'");
}

std::string fmt(const char* spec, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, x);
    return buf;
}

bool is_csv(const std::string& path) { return fs::path(path).extension() == ".csv"; }

Spn load_model(const std::string& path) {
    try {
        return deserialize(read_text(path));
    } catch (const CliFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw CliFailure(path + ": " + e.what());
    }
}

struct TuningFlags {
    LearnConfig learn;
    ParetoConfig pareto;
    bool no_refit = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--min-instances", learn.min_instances, "rows below which a slice is factorized")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--alpha", learn.alpha, "G-test significance level")->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--min-overlap", learn.min_overlap, "pairwise-complete rows needed to test a pair");
        cmd->add_option("--em-iters", learn.em_max_iters, "hard-EM iteration cap")->check(CLI::PositiveNumber);
        cmd->add_option("--laplace", learn.laplace, "categorical pseudo-count")->check(CLI::PositiveNumber);
        cmd->add_option("--variance-floor", learn.variance_floor, "Gaussian variance floor, relative to range^2")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--iterations", pareto.iterations, "Pareto search iterations")->check(CLI::NonNegativeNumber);
        cmd->add_option("--expansions", pareto.expansions_per_iteration, "children per Pareto iteration")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--no-refit", no_refit, "keep parent parameters after a production");
    }

    void finish(std::uint64_t seed) {
        learn.seed = seed;
        pareto.seed = seed;
        pareto.refit_after_rule = !no_refit;
        learn.check();
        pareto.check();
    }
};

struct LearnArgs {
    std::string method = "minispn";
    std::string data;
    std::string data_dir;
    std::string out;
    std::uint64_t seed = 0;
    double valid_fraction = 0.1;
    std::string missing_token = "?";
    std::optional<double> timeout_s;
    std::string decision_log;
    std::string front_trace;
    TuningFlags tuning;
};

int cmd_learn(LearnArgs& a, std::ostream& out) {
    a.tuning.finish(a.seed);
    Dataset train, valid;
    if (is_csv(a.data)) {
        const fs::path path = a.data_dir.empty() ? fs::path(a.data) : fs::path(a.data_dir) / a.data;
        Dataset all = load_mixed_csv(path.string(), a.missing_token);
        if (all.num_rows() < 2) throw CliFailure("need at least 2 rows to split train/validation");
        auto split = split_rows(all, a.valid_fraction, a.seed);
        train = all.select_rows(split.train);
        valid = all.select_rows(split.valid);
    } else {
        std::optional<std::string> stem;
        if (a.data_dir.empty() && fs::exists(a.data + ".ts.data")) stem = a.data;
        else stem = resolve_stem(a.data_dir.empty() ? "." : a.data_dir, a.data);
        if (!stem) throw CliFailure("cannot find benchmark files for '" + a.data + "'");
        auto trio = load_benchmark_triplet(*stem);
        train = std::move(trio.train);
        valid = std::move(trio.valid);
    }

    const Method method = *parse_method(a.method);
    DecisionLog log;
    const Deadline deadline =
        a.timeout_s ? Deadline::after(std::chrono::duration<double>(*a.timeout_s)) : Deadline{};
    TrainResult trained;
    try {
        trained = train_model(method, train, valid, a.tuning.learn, a.tuning.pareto, deadline,
                              a.decision_log.empty() ? nullptr : &log);
    } catch (const TimeoutError&) {
        throw CliFailure("timed out after " + fmt("%g", *a.timeout_s) + " s");
    }

    write_text(a.out, serialize(trained.spn));
    if (!a.decision_log.empty()) write_text(a.decision_log, log.to_tsv());
    if (!a.front_trace.empty()) {
        std::ostringstream trace;
        write_front_trace(trace, trained.front_trace);
        write_text(a.front_trace, trace.str());
    }
    out << "method=" << a.method << " nodes=" << trained.spn.eval_order().size()
        << " dof=" << num_free_parameters(trained.spn)
        << " train_ll=" << fmt("%.4f", mean_log_likelihood(trained.spn, train))
        << " valid_ll=" << fmt("%.4f", mean_log_likelihood(trained.spn, valid))
        << " seconds=" << fmt("%.3f", trained.seconds) << '\n';
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& missing_token,
             std::ostream& out) {
    const Spn spn = load_model(model_path);
    Dataset data;
    try {
        data = load_rows_with_schema(data_path, spn.schema(), is_csv(data_path), missing_token);
    } catch (const DataError& e) {
        throw CliFailure(data_path + ": " + e.what());
    }
    if (data.empty()) throw CliFailure(data_path + ": no rows");
    out << fmt("%.4f", mean_log_likelihood(spn, data)) << '\n';
    return 0;
}

int cmd_sample(const std::string& model_path, std::size_t n, std::uint64_t seed, std::ostream& out) {
    const Spn spn = load_model(model_path);
    Rng rng(seed);
    out << format_csv(sample_dataset(spn, n, rng));
    return 0;
}

int cmd_validate(const std::string& model_path, std::ostream& out) {
    Spn spn;
    try {
        spn = parse_model(read_text(model_path));
    } catch (const SpnError& e) {
        throw CliFailure(model_path + ": " + e.what());
    }
    const auto report = validate(spn);
    for (const auto& v : report) out << "node " << v.node << ": " << to_string(v.kind) << ": " << v.message << '\n';
    if (!report.empty()) return 1;
    out << "valid: " << spn.eval_order().size() << " nodes, " << spn.num_vars() << " variables, "
        << num_free_parameters(spn) << " free parameters\n";
    return 0;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"MiniSPN structure learning toolkit", "spn"};
    app.require_subcommand(1);

    LearnArgs la;
    auto* learn_cmd = app.add_subcommand("learn", "learn a model from data");
    learn_cmd->add_option("--method", la.method, "minispn, pareto or hybrid")
        ->check(CLI::IsMember({"minispn", "pareto", "hybrid"}));
    learn_cmd->add_option("--data", la.data, "CSV file or benchmark name/stem")->required();
    learn_cmd->add_option("--data-dir", la.data_dir, "directory holding the data");
    learn_cmd->add_option("--out", la.out, "model output path")->required();
    learn_cmd->add_option("--seed", la.seed, "random seed");
    learn_cmd->add_option("--valid-fraction", la.valid_fraction, "held-out share of CSV rows")
        ->check(CLI::Range(0.0, 1.0))
        ->check([](const std::string& s) {
            const double f = std::stod(s);
            return (f > 0.0 && f < 1.0) ? std::string{} : std::string("must be strictly between 0 and 1");
        });
    learn_cmd->add_option("--missing-token", la.missing_token, "CSV token for a missing cell");
    learn_cmd->add_option("--timeout-s", la.timeout_s, "wall-clock budget")->check(CLI::PositiveNumber);
    learn_cmd->add_option("--decision-log", la.decision_log, "write split decisions as TSV");
    learn_cmd->add_option("--front-trace", la.front_trace, "write the Pareto front per iteration as TSV");
    la.tuning.attach(learn_cmd);

    std::string model_path, data_path, missing_token = "?";
    auto* eval_cmd = app.add_subcommand("eval", "mean log-likelihood of a model on data");
    eval_cmd->add_option("model", model_path, "model file")->required();
    eval_cmd->add_option("data", data_path, "CSV (with header) or benchmark data file")->required();
    eval_cmd->add_option("--missing-token", missing_token, "token for a missing cell");

    std::size_t n_samples = 0;
    std::uint64_t sample_seed = 0;
    auto* sample_cmd = app.add_subcommand("sample", "draw rows from a model as CSV");
    sample_cmd->add_option("model", model_path, "model file")->required();
    sample_cmd->add_option("-n,--num", n_samples, "number of rows")->required()->check(CLI::PositiveNumber);
    sample_cmd->add_option("--seed", sample_seed, "random seed");

    auto* validate_cmd = app.add_subcommand("validate", "check that a model file is a valid SPN");
    validate_cmd->add_option("model", model_path, "model file")->required();

    std::string datasets, methods = "minispn,pareto,hybrid", bench_out;
    BenchOptions bo;
    TuningFlags bench_tuning;
    auto* bench_cmd = app.add_subcommand("bench", "compare learners on benchmark datasets");
    bench_cmd->add_option("--datasets", datasets, "comma-separated dataset names")->required();
    bench_cmd->add_option("--methods", methods, "comma-separated learners");
    bench_cmd->add_option("--data-dir", bo.data_dir, "directory holding the datasets");
    bench_cmd->add_option("--seed", bo.seed, "base random seed");
    bench_cmd->add_option("--timeout-s", bo.timeout_s, "per-cell wall-clock budget")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bench_out, "write the text table here and a .tsv copy beside it");
    bench_tuning.attach(bench_cmd);

    SyntheticSpec spec;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic mixed dataset and its true model");
    synth_cmd->add_option("--rows", spec.n_rows, "number of rows")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--discrete", spec.n_discrete, "binary columns");
    synth_cmd->add_option("--continuous", spec.n_continuous, "Gaussian columns");
    synth_cmd->add_option("--missing-rate", spec.missing_rate, "MCAR masking probability")
        ->check(CLI::Range(0.0, 1.0));
    synth_cmd->add_option("--seed", spec.seed, "random seed");
    synth_cmd->add_option("--out", synth_out, "CSV output path; the model goes to <stem>.spn")->required();

    std::vector<std::string> argv_store{"spn"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store) argv.push_back(s.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "spn: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*learn_cmd) return cmd_learn(la, out);
        if (*eval_cmd) return cmd_eval(model_path, data_path, missing_token, out);
        if (*sample_cmd) return cmd_sample(model_path, n_samples, sample_seed, out);
        if (*validate_cmd) return cmd_validate(model_path, out);
        if (*bench_cmd) {
            bo.datasets = split_list(datasets);
            if (bo.datasets.empty()) {
                err << "spn: --datasets is empty\n";
                return 2;
            }
            bo.methods.clear();
            for (const auto& m : split_list(methods)) {
                auto parsed = parse_method(m);
                if (!parsed) {
                    err << "spn: unknown method '" << m << "'\n";
                    return 2;
                }
                bo.methods.push_back(*parsed);
            }
            if (bo.methods.empty()) {
                err << "spn: --methods is empty\n";
                return 2;
            }
            bench_tuning.finish(bo.seed);
            bo.learn = bench_tuning.learn;
            bo.pareto = bench_tuning.pareto;
            const BenchReport report = run_bench(bo);
            const std::string text = report.to_text();
            out << text;
            for (const auto& c : report.cells)
                if (!c.error.empty()) err << "spn: " << c.dataset << "/" << method_name(c.method) << ": " << c.error << '\n';
            if (!bench_out.empty()) {
                write_text(bench_out, text);
                fs::path tsv = fs::path(bench_out).replace_extension(".tsv");
                if (tsv == fs::path(bench_out)) tsv += ".tsv";
                write_text(tsv.string(), report.to_tsv());
            }
            return 0;
        }
        if (*synth_cmd) {
            const SyntheticData synth = generate_synthetic(spec);
            write_text(synth_out, format_csv(synth.data));
            write_text(fs::path(synth_out).replace_extension(".spn").string(), serialize(synth.truth));
            out << "wrote " << synth.data.num_rows() << " rows to " << synth_out << '\n';
            return 0;
        }
    } catch (const LearnError& e) {
        err << "spn: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "spn: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace minispn
