#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "minispn/bench.hpp"
#include "minispn/synthetic.hpp"

namespace py = pybind11;
using namespace minispn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Schemas cross the boundary as a list of ints: arity for a discrete column,
// 0 for a continuous one.
Schema to_schema(const std::vector<int>& spec) {
    Schema s;
    for (std::size_t v = 0; v < spec.size(); ++v) {
        const std::string name = "x" + std::to_string(v);
        if (spec[v] == 0) s.push_back(ColumnMeta::continuous(name));
        else s.push_back(ColumnMeta::discrete(name, spec[v]));
    }
    return s;
}

std::vector<int> from_schema(const Schema& s) {
    std::vector<int> out;
    for (const auto& c : s) out.push_back(c.is_discrete() ? c.arity : 0);
    return out;
}

Dataset to_dataset(const Array& rows, const Schema& schema) {
    if (rows.ndim() != 2) throw py::value_error("expected a 2-d array");
    if (static_cast<std::size_t>(rows.shape(1)) != schema.size())
        throw py::value_error("array has " + std::to_string(rows.shape(1)) + " columns, schema has " +
                              std::to_string(schema.size()));
    std::vector<double> cells(rows.data(), rows.data() + rows.size());
    return Dataset(schema, std::move(cells));
}

Array to_array(const Dataset& data) {
    Array out({data.num_rows(), data.num_vars()});
    std::copy(data.cells().begin(), data.cells().end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sum-product network learning (MiniSPN, Pareto search, hybrid).";

    py::register_exception<SpnError>(m, "SpnError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<LearnError>(m, "LearnError", PyExc_ValueError);

    py::class_<Spn>(m, "Model")
        .def_static("from_text", &deserialize, py::arg("text"))
        .def("to_text", &serialize)
        .def_property_readonly("schema", [](const Spn& s) { return from_schema(s.schema()); })
        .def_property_readonly("num_nodes", [](const Spn& s) { return s.eval_order().size(); })
        .def_property_readonly("dof", &num_free_parameters)
        .def(
            "log_density",
            [](const Spn& s, const Array& rows) {
                const auto data = to_dataset(rows, s.schema());
                py::array_t<double> out(data.num_rows());
                auto* dst = out.mutable_data();
                Evaluator ev(s);
                for (std::size_t r = 0; r < data.num_rows(); ++r) dst[r] = ev.log_density(data.row(r));
                return out;
            },
            py::arg("rows"), "Per-row log density; NaN cells are marginalized.")
        .def(
            "mean_log_likelihood",
            [](const Spn& s, const Array& rows) { return mean_log_likelihood(s, to_dataset(rows, s.schema())); },
            py::arg("rows"))
        .def(
            "sample",
            [](const Spn& s, std::size_t n, std::uint64_t seed) {
                Rng rng(seed);
                return to_array(sample_dataset(s, n, rng));
            },
            py::arg("n"), py::arg("seed") = 0)
        .def("validate", [](const Spn& s) {
            std::vector<std::string> out;
            for (const auto& v : validate(s))
                out.push_back("node " + std::to_string(v.node) + ": " + to_string(v.kind) + ": " + v.message);
            return out;
        });

    m.def(
        "learn",
        [](const Array& train, const Array& valid, const std::vector<int>& schema, const std::string& method,
           std::uint64_t seed, int iterations, int expansions) {
            const auto parsed = parse_method(method);
            if (!parsed) throw py::value_error("unknown method '" + method + "'");
            const Schema s = to_schema(schema);
            const auto tr = to_dataset(train, s);
            const auto va = to_dataset(valid, s);
            LearnConfig lc;
            lc.seed = seed;
            ParetoConfig pc;
            pc.seed = seed;
            pc.iterations = iterations;
            pc.expansions_per_iteration = expansions;
            py::gil_scoped_release release;
            return train_model(*parsed, tr, va, lc, pc).spn;
        },
        py::arg("train"), py::arg("valid"), py::arg("schema"), py::arg("method") = "minispn", py::arg("seed") = 0,
        py::arg("iterations") = 50, py::arg("expansions") = 10);

    m.def(
        "synthetic",
        [](std::size_t rows, std::size_t discrete, std::size_t continuous, double missing_rate, std::uint64_t seed) {
            SyntheticSpec spec{rows, discrete, continuous, missing_rate, seed};
            auto synth = generate_synthetic(spec);
            return py::make_tuple(to_array(synth.data), from_schema(synth.data.schema()), std::move(synth.truth));
        },
        py::arg("rows"), py::arg("discrete"), py::arg("continuous") = 0, py::arg("missing_rate") = 0.0,
        py::arg("seed") = 0, "Returns (rows, schema, true_model).");
}
