#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "minispn/data.hpp"
#include "minispn/random.hpp"
#include "minispn/synthetic.hpp"

using namespace minispn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("minispn_data_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name, std::ios::binary) << text;
        return (path / name).string();
    }
};

Dataset one_column(const std::vector<double>& values, bool continuous = true) {
    Schema s{continuous ? ColumnMeta::continuous("v") : ColumnMeta::discrete("v", 8)};
    return Dataset(s, values);
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("benchmark triplet: binary columns") {
    TempDir dir;
    dir.write("t.ts.data", "0,1,0\n1,1,0\n");
    dir.write("t.valid.data", "0,0,1\n");
    dir.write("t.test.data", "1,0,0\n0,0,0\n");
    const auto trio = load_benchmark_triplet((dir.path / "t").string());
    REQUIRE(trio.train.num_vars() == 3);
    for (const auto& col : trio.train.schema()) CHECK(col.arity == 2);
    CHECK(trio.train.num_rows() == 2);
    CHECK(trio.valid.num_rows() == 1);
    CHECK(trio.test.num_rows() == 2);
    CHECK(audit(trio.train).empty());
    CHECK(audit(trio.test).empty());
}

TEST_CASE("benchmark triplet: arity comes from the maximum across all three files") {
    TempDir dir;
    dir.write("t.ts.data", "0,1,0\n");
    dir.write("t.valid.data", "0,2,0\n");
    dir.write("t.test.data", "1,0,0\n");
    const auto trio = load_benchmark_triplet((dir.path / "t").string());
    CHECK(trio.train.schema()[0].arity == 2);
    CHECK(trio.train.schema()[1].arity == 3);
    CHECK(trio.test.schema()[1].arity == 3);
    CHECK(trio.train.schema()[2].arity == 2);
}

TEST_CASE("benchmark triplet: CRLF newlines and byte-exact re-serialization") {
    TempDir dir;
    const std::string train = "0,1,0,3\n1,1,0,0\n0,0,0,2\n";
    dir.write("t.ts.data", train);
    dir.write("t.valid.data", "0,0,1,1\r\n1,0,1,0\r\n");
    dir.write("t.test.data", "1,0,0,0");
    const auto trio = load_benchmark_triplet((dir.path / "t").string());
    CHECK(format_benchmark_rows(trio.train) == train);
    CHECK(format_benchmark_rows(trio.valid) == "0,0,1,1\n1,0,1,0\n");
    CHECK(format_benchmark_rows(trio.test) == "1,0,0,0\n");
    write_benchmark_file(trio.train, dir.path / "copy.data");
    std::ifstream in(dir.path / "copy.data", std::ios::binary);
    std::string back((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(back == train);
}

TEST_CASE("benchmark triplet: errors") {
    TempDir dir;
    dir.write("a.ts.data", "0,1\n1\n");
    dir.write("a.valid.data", "0,1\n");
    dir.write("a.test.data", "0,1\n");
    CHECK_THROWS_AS(load_benchmark_triplet((dir.path / "a").string()), DataError);

    dir.write("b.ts.data", "0,1\n");
    dir.write("b.valid.data", "0,x\n");
    dir.write("b.test.data", "0,1\n");
    CHECK_THROWS_AS(load_benchmark_triplet((dir.path / "b").string()), DataError);

    dir.write("c.ts.data", "0,1\n");
    CHECK_THROWS_AS(load_benchmark_triplet((dir.path / "c").string()), DataError);

    dir.write("d.ts.data", "0,-1\n");
    dir.write("d.valid.data", "0,1\n");
    dir.write("d.test.data", "0,1\n");
    CHECK_THROWS_AS(load_benchmark_triplet((dir.path / "d").string()), DataError);
}

TEST_CASE("mixed CSV: typing rules") {
    const auto d = parse_mixed_csv("a,b\n1,0.5\n?,1.5\n");
    REQUIRE(d.num_vars() == 2);
    CHECK(d.schema()[0].kind == ColumnKind::Discrete);
    CHECK(d.schema()[0].arity == 2);
    CHECK(d.schema()[1].kind == ColumnKind::Continuous);
    CHECK(is_missing(d.at(1, 0)));
    CHECK(d.at(1, 1) == 1.5);

    const auto e = parse_mixed_csv("a\n3\n1\n");
    CHECK(e.schema()[0].arity == 4);

    CHECK_THROWS_AS(parse_mixed_csv("a\n?\n?\n"), DataError);
}

TEST_CASE("mixed CSV: empty cells, custom token, exponents and errors") {
    const auto d = parse_mixed_csv("a,b,c\n1,,2e1\nNA,3,1\n", "NA");
    CHECK(is_missing(d.at(0, 1)));
    CHECK(is_missing(d.at(1, 0)));
    CHECK(d.schema()[2].kind == ColumnKind::Continuous);
    CHECK(d.at(0, 2) == 20.0);
    CHECK(audit(d).empty());

    CHECK_THROWS_AS(parse_mixed_csv("a,b\n1,2\n3\n"), DataError);
    CHECK_THROWS_AS(parse_mixed_csv("a\n1\nfoo\n"), DataError);
    CHECK_THROWS_AS(parse_mixed_csv(""), DataError);
}

TEST_CASE("mixed CSV: format then parse preserves values and kinds") {
    SyntheticSpec spec;
    spec.n_rows = 200;
    spec.n_discrete = 3;
    spec.n_continuous = 2;
    spec.missing_rate = 0.2;
    spec.seed = 4;
    const auto d = generate_synthetic(spec).data;
    const auto back = parse_mixed_csv(format_csv(d));
    REQUIRE(back.num_rows() == d.num_rows());
    for (std::size_t v = 0; v < d.num_vars(); ++v) CHECK(back.schema()[v].kind == d.schema()[v].kind);
    for (std::size_t i = 0; i < d.cells().size(); ++i) {
        const double a = d.cells()[i], b = back.cells()[i];
        CHECK((a == b || (is_missing(a) && is_missing(b))));
    }
}

TEST_CASE("rows typed by a given schema") {
    Schema s{ColumnMeta::discrete("a", 2), ColumnMeta::continuous("b")};
    const auto d = parse_rows_with_schema("a,b\n?,?\n1,2\n", s, true);
    CHECK(d.num_rows() == 2);
    CHECK(is_missing(d.at(0, 0)));
    CHECK(d.at(1, 1) == 2.0);
    CHECK_THROWS_AS(parse_rows_with_schema("2,0.5\n", s, false), DataError);
    CHECK_THROWS_AS(parse_rows_with_schema("1,0.5,3\n", s, false), DataError);
}

TEST_CASE("median cutoff") {
    const auto d = one_column({1, 3, 2, kMissing, 5});
    CHECK(median_cutoff(DataSlice::whole(d), 0) == 2.5);

    const auto one = one_column({7});
    CHECK(median_cutoff(DataSlice::whole(one), 0) == 7.0);

    const auto none = one_column({kMissing, kMissing});
    CHECK_FALSE(median_cutoff(DataSlice::whole(none), 0).has_value());

    const auto disc = one_column({1, 0}, false);
    CHECK_THROWS_AS(median_cutoff(DataSlice::whole(disc), 0), DataError);
}

TEST_CASE("median cutoff ignores row order") {
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> values;
        const auto n = 1 + rng.below(30);
        for (std::size_t i = 0; i < n; ++i) values.push_back(rng.uniform() < 0.2 ? kMissing : std::floor(rng.uniform(0, 10)));
        const auto d = one_column(values);
        std::vector<RowId> rows(n);
        std::iota(rows.begin(), rows.end(), RowId{0});
        const auto base = median_cutoff(DataSlice(d, rows, {0}), 0);
        rng.shuffle(rows.begin(), rows.end());
        CHECK(median_cutoff(DataSlice(d, rows, {0}), 0) == base);
    }
}

TEST_CASE("split_rows") {
    const auto d = one_column(std::vector<double>(10, 1.0));
    const auto a = split_rows(d, 0.2, 7);
    CHECK(a.train.size() == 8);
    CHECK(a.valid.size() == 2);
    const auto b = split_rows(d, 0.2, 7);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);

    std::vector<RowId> all = a.train;
    all.insert(all.end(), a.valid.begin(), a.valid.end());
    std::sort(all.begin(), all.end());
    for (RowId i = 0; i < 10; ++i) CHECK(all[i] == i);

    const auto three = one_column({1, 2, 3});
    const auto c = split_rows(three, 0.01, 1);
    CHECK(c.train.size() == 2);
    CHECK(c.valid.size() == 1);

    CHECK_THROWS_AS(split_rows(one_column({1}), 0.5, 1), DataError);
    CHECK_THROWS_AS(split_rows(d, 0.0, 1), DataError);
    CHECK_THROWS_AS(split_rows(d, 1.0, 1), DataError);
}

TEST_CASE("data slices compose") {
    Rng rng(12);
    std::vector<double> cells(20 * 6);
    for (auto& c : cells) c = rng.uniform();
    Schema schema;
    for (int v = 0; v < 6; ++v) schema.push_back(ColumnMeta::continuous("c" + std::to_string(v)));
    const Dataset d(schema, cells);
    const auto whole = DataSlice::whole(d);
    for (int t = 0; t < 30; ++t) {
        std::vector<std::size_t> r1(20), v1(6);
        std::iota(r1.begin(), r1.end(), 0);
        std::iota(v1.begin(), v1.end(), 0);
        rng.shuffle(r1.begin(), r1.end());
        rng.shuffle(v1.begin(), v1.end());
        r1.resize(1 + rng.below(20));
        v1.resize(1 + rng.below(6));
        const auto s1 = whole.sub(r1, v1);

        std::vector<std::size_t> r2(s1.num_rows()), v2(s1.num_vars());
        std::iota(r2.begin(), r2.end(), 0);
        std::iota(v2.begin(), v2.end(), 0);
        rng.shuffle(r2.begin(), r2.end());
        r2.resize(1 + rng.below(r2.size()));
        v2.resize(1 + rng.below(v2.size()));
        const auto twice = s1.sub(r2, v2);

        std::vector<std::size_t> rc, vc;
        for (auto p : r2) rc.push_back(r1[p]);
        for (auto p : v2) vc.push_back(v1[p]);
        const auto once = whole.sub(rc, vc);
        CHECK(twice.rows() == once.rows());
        CHECK(twice.vars() == once.vars());
    }
}

TEST_CASE("slice invariants are enforced") {
    const auto d = one_column({1, 2, 3});
    CHECK_THROWS_AS(DataSlice(d, {0, 3}, {0}), DataError);
    CHECK_THROWS_AS(DataSlice(d, {0, 0}, {0}), DataError);
    CHECK_THROWS_AS(DataSlice(d, {0}, {1}), DataError);
}

TEST_CASE("audit flags invariant violations") {
    Schema s{ColumnMeta::discrete("a", 2), ColumnMeta::discrete("a", 2)};
    const Dataset d(s, {0, 2, 0.5, 1});
    const auto issues = audit(d);
    CHECK(issues.size() == 3);
}

TEST_CASE("synthetic data") {
    SyntheticSpec spec;
    spec.n_rows = 500;
    spec.n_discrete = 5;
    spec.n_continuous = 2;
    spec.seed = 3;
    const auto a = generate_synthetic(spec);
    CHECK(audit(a.data).empty());
    CHECK(std::none_of(a.data.cells().begin(), a.data.cells().end(), [](double x) { return is_missing(x); }));
    CHECK(validate(a.truth).empty());

    const auto b = generate_synthetic(spec);
    CHECK(format_csv(a.data) == format_csv(b.data));
    CHECK(serialize(a.truth) == serialize(b.truth));

    SyntheticSpec kg;
    kg.n_rows = 10000;
    kg.n_discrete = 0;
    kg.n_continuous = 14;
    kg.missing_rate = 0.95;
    kg.seed = 1;
    const auto m = generate_synthetic(kg).data;
    const auto missing = std::count_if(m.cells().begin(), m.cells().end(), [](double x) { return is_missing(x); });
    const double frac = static_cast<double>(missing) / static_cast<double>(m.cells().size());
    CHECK(std::abs(frac - 0.95) <= 0.01);

    SyntheticSpec empty;
    empty.n_discrete = 0;
    empty.n_continuous = 0;
    CHECK_THROWS(generate_synthetic(empty));
    SyntheticSpec bad_rate;
    bad_rate.missing_rate = 1.0;
    CHECK_THROWS(generate_synthetic(bad_rate));
}

}
