#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/testing.hpp"
#include "minispn/bench.hpp"
#include "minispn/cli.hpp"
#include "minispn/synthetic.hpp"

using namespace minispn;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("minispn_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name, std::ios::binary) << text;
        return file(name);
    }
    std::string read(const std::string& name) const {
        std::ifstream in(path / name, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

Spn uniform_product(std::size_t n) {
    Spn spn(binary_schema(n));
    std::vector<NodeId> leaves;
    for (VarId v = 0; v < n; ++v) leaves.push_back(spn.add_leaf(v, bernoulli(0.5)));
    spn.set_root(spn.add_product(leaves));
    return spn;
}

// Benchmark-style triplet drawn from a small two-component mixture.
void write_triplet(const TempDir& dir, const std::string& name, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n_rows = 10;
    spec.n_discrete = 6;
    spec.seed = seed;
    const auto truth = generate_synthetic(spec).truth;
    Rng rng(seed);
    fs::create_directories(dir.path / name);
    write_benchmark_file(sample_dataset(truth, 300, rng), dir.path / name / (name + ".ts.data"));
    write_benchmark_file(sample_dataset(truth, 80, rng), dir.path / name / (name + ".valid.data"));
    write_benchmark_file(sample_dataset(truth, 80, rng), dir.path / name / (name + ".test.data"));
}

std::vector<std::string> tsv_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

}  // namespace

TEST_SUITE("bench_cli") {

TEST_CASE("method names") {
    for (Method m : {Method::MiniSpn, Method::Pareto, Method::Hybrid}) CHECK(parse_method(method_name(m)) == m);
    CHECK_FALSE(parse_method("bogus").has_value());
}

TEST_CASE("cell seeds depend on dataset and method only") {
    CHECK(cell_seed(1, "nltcs", Method::Pareto) == cell_seed(1, "nltcs", Method::Pareto));
    CHECK(cell_seed(1, "nltcs", Method::Pareto) != cell_seed(1, "nltcs", Method::Hybrid));
    CHECK(cell_seed(1, "nltcs", Method::Pareto) != cell_seed(1, "plants", Method::Pareto));
    CHECK(cell_seed(1, "nltcs", Method::Pareto) != cell_seed(2, "nltcs", Method::Pareto));
}

TEST_CASE("usage errors exit 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    const auto r = cli({"learn", "--method", "bogus", "--data", "x.csv", "--out", "m.spn"});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    CHECK(cli({"learn", "--data", "x.csv", "--out", "m.spn", "--valid-fraction", "1.5"}).code == 2);
    CHECK(cli({"bench", "--datasets", ""}).code == 2);
    CHECK(cli({"bench", "--datasets", "a", "--methods", "minispn,nope"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("learn reports missing data as a runtime failure") {
    TempDir dir;
    const auto r = cli({"learn", "--data", dir.file("absent.csv"), "--out", dir.file("m.spn")});
    CHECK(r.code == 1);
    CHECK(r.err.find("absent.csv") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.file("m.spn")));
}

TEST_CASE("synth, learn, validate and eval round trip") {
    TempDir dir;
    REQUIRE(cli({"synth", "--rows", "600", "--discrete", "4", "--continuous", "2", "--missing-rate", "0.1", "--seed", "3",
                 "--out", dir.file("d.csv")})
                .code == 0);
    CHECK(fs::exists(dir.file("d.spn")));
    for (const char* method : {"minispn", "pareto", "hybrid"}) {
        CAPTURE(method);
        const auto model = dir.file(std::string(method) + ".spn");
        const auto learned = cli({"learn", "--method", method, "--data", dir.file("d.csv"), "--out", model, "--seed", "1",
                                  "--iterations", "5"});
        REQUIRE(learned.code == 0);
        CHECK(learned.out.find("method=" + std::string(method)) == 0);
        CHECK(cli({"validate", model}).code == 0);

        const auto ev = cli({"eval", model, dir.file("d.csv")});
        REQUIRE(ev.code == 0);
        const auto spn = deserialize(dir.read(std::string(method) + ".spn"));
        const auto data = load_rows_with_schema(dir.file("d.csv"), spn.schema(), true);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f\n", mean_log_likelihood(spn, data));
        CHECK(ev.out == buf);
    }
}

TEST_CASE("eval of a uniform product and of an all-missing file") {
    TempDir dir;
    dir.write("u.spn", serialize(uniform_product(16)));
    std::string complete = "x0";
    std::string missing = "x0";
    for (int v = 1; v < 16; ++v) {
        complete += ",x" + std::to_string(v);
        missing += ",x" + std::to_string(v);
    }
    complete += "\n";
    missing += "\n";
    for (int r = 0; r < 3; ++r) {
        for (int v = 0; v < 16; ++v) {
            complete += std::string(v ? "," : "") + std::to_string((r + v) % 2);
            missing += std::string(v ? "," : "") + "?";
        }
        complete += "\n";
        missing += "\n";
    }
    const auto a = cli({"eval", dir.file("u.spn"), dir.write("c.csv", complete)});
    CHECK(a.code == 0);
    CHECK(a.out == "-11.0904\n");
    const auto b = cli({"eval", dir.file("u.spn"), dir.write("m.csv", missing)});
    CHECK(b.code == 0);
    CHECK(b.out == "0.0000\n");

    // Headerless benchmark rows are read by the model schema too.
    const auto c = cli({"eval", dir.file("u.spn"), dir.write("rows.data", "0,1,0,1,0,1,0,1,0,1,0,1,0,1,0,1\n")});
    CHECK(c.out == "-11.0904\n");

    CHECK(cli({"eval", dir.file("u.spn"), dir.write("w.csv", "a,b\n0,1\n")}).code == 1);
    CHECK(cli({"eval", dir.file("absent.spn"), dir.file("c.csv")}).code == 1);
}

TEST_CASE("sample") {
    TempDir dir;
    dir.write("f.spn", serialize(three_product_spn()));
    CHECK(cli({"sample", dir.file("f.spn"), "-n", "0"}).code == 2);
    const auto a = cli({"sample", dir.file("f.spn"), "-n", "5", "--seed", "7"});
    const auto b = cli({"sample", dir.file("f.spn"), "-n", "5", "--seed", "7"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(tsv_lines(a.out).size() == 6);

    const std::size_t n = 100000;
    const auto big = cli({"sample", dir.file("f.spn"), "-n", std::to_string(n), "--seed", "1"});
    REQUIRE(big.code == 0);
    const auto data = parse_mixed_csv(big.out);
    REQUIRE(data.num_rows() == n);
    // P(x0 = 1) = 0.5*0.8 + 0.2*0.3 + 0.3*0.55; P(x1 = 1) likewise.
    const double expect[] = {0.625, 0.455};
    for (VarId v = 0; v < 2; ++v) {
        double ones = 0;
        for (std::size_t r = 0; r < n; ++r) ones += data.at(r, v);
        const double se = std::sqrt(expect[v] * (1 - expect[v]) / n);
        CHECK(std::abs(ones / n - expect[v]) < 4 * se);
    }
}

TEST_CASE("validate") {
    TempDir dir;
    dir.write("ok.spn", serialize(three_product_spn()));
    const auto ok = cli({"validate", dir.file("ok.spn")});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("valid:") == 0);

    const std::string bad =
        "spnmodel v1 vars=1\n"
        "leaf 0 cat 0 0.5 0.5\n"
        "leaf 1 cat 0 0.2 0.8\n"
        "sum 2 (0:0.5) (1:0.4)\n"
        "root 2\n";
    const auto r = cli({"validate", dir.write("bad.spn", bad)});
    CHECK(r.code == 1);
    CHECK(r.out.find("unnormalized") != std::string::npos);

    const auto text = serialize(three_product_spn());
    const auto t = cli({"validate", dir.write("cut.spn", text.substr(0, text.size() / 2))});
    CHECK(t.code == 1);
}

TEST_CASE("bench on small benchmark triplets") {
    TempDir dir;
    write_triplet(dir, "alpha", 1);
    write_triplet(dir, "beta", 2);
    const std::string args_iter = "4";

    const auto r = cli({"bench", "--datasets", "alpha,missing,beta", "--methods", "minispn,pareto", "--data-dir",
                        dir.path.string(), "--iterations", args_iter, "--seed", "5", "--out", dir.file("table.txt")});
    REQUIRE(r.code == 0);
    CHECK(r.out == dir.read("table.txt"));
    CHECK(r.err.find("missing") != std::string::npos);
    const auto tsv = tsv_lines(dir.read("table.tsv"));
    REQUIRE(tsv.size() == 7);
    CHECK(tsv[0] == "dataset\tmethod\ttest_ll\truntime_s\tdof\tseed");
    int errors = 0;
    for (std::size_t i = 1; i < tsv.size(); ++i) {
        if (tsv[i].find("ERROR") != std::string::npos) {
            ++errors;
            CHECK(tsv[i].rfind("missing\t", 0) == 0);
        }
        // Every number in the TSV row also appears in the text table.
        std::istringstream fields(tsv[i]);
        std::string field;
        int col = 0;
        while (std::getline(fields, field, '\t')) {
            if (col == 2 || col == 4) CHECK(r.out.find(field) != std::string::npos);
            ++col;
        }
    }
    CHECK(errors == 2);

    BenchOptions opts;
    opts.data_dir = dir.path.string();
    opts.methods = {Method::MiniSpn, Method::Pareto};
    opts.pareto.iterations = 4;
    opts.seed = 5;
    opts.datasets = {"beta", "alpha"};
    const auto reversed = run_bench(opts);
    opts.datasets = {"alpha"};
    const auto alone = run_bench(opts);
    for (Method m : opts.methods) {
        const auto* x = reversed.find("alpha", m);
        const auto* y = alone.find("alpha", m);
        REQUIRE(x);
        REQUIRE(y);
        CHECK(x->status == BenchCell::Status::Ok);
        CHECK(x->test_ll == y->test_ll);
        CHECK(x->dof == y->dof);
        CHECK(x->seed == cell_seed(5, "alpha", m));
    }
}

}
