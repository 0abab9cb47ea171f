#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wrflow/scenario.hpp"

namespace py = pybind11;
using namespace wrflow;

namespace {

PsdOperator as_psd(const Matrix& r) { return validate_psd(HermitianOperator::from_matrix(r)); }

MeasureSpec make_spec(const std::string& kind, const std::optional<Vector>& x, std::vector<double> q)
{
    const MeasureKind k = measure_kind_from_string(kind);
    if (k == MeasureKind::Trace) return MeasureSpec::trace(std::move(q));
    if (!x) throw Error(ErrorKind::InvalidMeasure, kind + " measure needs a state vector x");
    if (k == MeasureKind::Energy) return MeasureSpec::energy(*x, std::move(q));
    return MeasureSpec::residual_binary(*x, std::move(q));
}

struct Flow {
    PsdOperator r0;
    ProjectionFamily family;

    Flow(const Matrix& r, const std::vector<Matrix>& projections)
        : r0(as_psd(r)), family(ProjectionFamily::build(projections, r0))
    {
    }
};

py::dict sample_to_dict(const BranchSample& s, std::size_t m)
{
    py::dict d;
    d["word"] = s.letters.to_string(m);
    d["letters"] = std::vector<int>(s.letters.letters().begin(), s.letters.letters().end());
    d["values"] = s.values();
    d["step_values"] = s.step_values();
    d["traces"] = s.traces;
    d["stopped_reason"] = to_string(s.stopped_reason);
    d["stream"] = s.stream;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Weighted-residual operator flows";

    static py::exception<Error> wr_error(m, "WrflowError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(wr_error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    m.def("wr_update", [](const Matrix& r, const Matrix& p) {
        return wr_update(as_psd(r), validate_projection(p)).matrix();
    }, py::arg("r"), py::arg("p"), "R^{1/2} (I - P) R^{1/2}");

    m.def("dissipated", [](const Matrix& r, const Matrix& p) {
        return dissipated(as_psd(r), validate_projection(p)).matrix();
    }, py::arg("r"), py::arg("p"), "R^{1/2} P R^{1/2}");

    m.def("psd_sqrt", [](const Matrix& r) { return as_psd(r).sqrt(); }, py::arg("r"));

    m.def("energy_support_basis", [](const Matrix& r) { return energy_support_basis(as_psd(r)).basis; },
          py::arg("r0"));

    py::class_<Flow>(m, "Flow")
        .def(py::init<const Matrix&, const std::vector<Matrix>&>(), py::arg("r0"), py::arg("projections"))
        .def_property_readonly("alpha", [](const Flow& f) { return f.family.alpha(); })
        .def_property_readonly("contraction", [](const Flow& f) { return f.family.contraction(); })
        .def_property_readonly("splitting", [](const Flow& f) { return f.family.splitting(); })
        .def_property_readonly("m", [](const Flow& f) { return f.family.size(); })
        .def_property_readonly("h0_basis", [](const Flow& f) { return f.family.h0_basis(); })
        .def("residual", [](const Flow& f, const std::string& word) {
            TreeCache cache(f.r0, f.family);
            return cache.residual(Word::parse(word, f.family.size())).matrix();
        }, py::arg("word"))
        .def("dissipation", [](const Flow& f, const std::string& word) {
            TreeCache cache(f.r0, f.family);
            return node_dissipation(cache, Word::parse(word, f.family.size())).matrix();
        }, py::arg("word"))
        .def("transition", [](const Flow& f, const std::string& word, const std::string& kind,
                              const std::optional<Vector>& x, std::vector<double> q) {
            TreeCache cache(f.r0, f.family);
            MeasureSpec spec = make_spec(kind, x, std::move(q));
            spec.validate(cache);
            return transition(cache, spec, Word::parse(word, f.family.size())).probs;
        }, py::arg("word"), py::arg("kind") = "energy", py::arg("x") = py::none(),
             py::arg("q") = std::vector<double>{})
        .def("expectation_profile", [](const Flow& f, std::size_t depth, const std::string& kind,
                                       const std::optional<Vector>& x, const std::string& mode,
                                       std::size_t n_samples, std::uint64_t seed) {
            TreeCache cache(f.r0, f.family);
            MeasureSpec spec = make_spec(kind, x, {});
            spec.validate(cache);
            ProfileOptions opts;
            opts.mode = mode == "monte_carlo" ? ProfileMode::MonteCarlo : ProfileMode::Exhaustive;
            opts.n_samples = n_samples;
            opts.seed = seed;
            std::vector<double> values, errors;
            for (const auto& l : expectation_profile(cache, spec, depth, opts)) {
                values.push_back(l.expected_value);
                errors.push_back(l.std_error);
            }
            return py::make_tuple(values, errors);
        }, py::arg("depth"), py::arg("kind") = "energy", py::arg("x") = py::none(),
             py::arg("mode") = "exhaustive", py::arg("n_samples") = 0, py::arg("seed") = 0)
        .def("sample_branches", [](const Flow& f, std::size_t n, std::uint64_t seed, std::size_t max_depth,
                                   const std::string& kind, const std::optional<Vector>& x, double stop_tol,
                                   unsigned threads) {
            MeasureSpec spec = make_spec(kind, x, {});
            {
                TreeCache cache(f.r0, f.family);
                spec.validate(cache);
            }
            py::list out;
            const auto samples = sample_branches(f.r0, f.family, spec, SampleOptions{max_depth, stop_tol, false},
                                                 seed, n, threads);
            for (const auto& s : samples) out.append(sample_to_dict(s, f.family.size()));
            return out;
        }, py::arg("n"), py::arg("seed") = 0, py::arg("max_depth") = 64, py::arg("kind") = "energy",
             py::arg("x") = py::none(), py::arg("stop_tol") = kDefaultStopTol, py::arg("threads") = 1)
        .def("frame_atoms", [](const Flow& f, std::uint64_t seed, std::size_t max_depth, const std::string& kind,
                               const std::optional<Vector>& x, double stop_tol) {
            TreeCache cache(f.r0, f.family);
            MeasureSpec spec = make_spec(kind, x, {});
            spec.validate(cache);
            const auto branch = sample_branch(cache, spec, SampleOptions{max_depth, stop_tol, true}, seed, 0);
            const auto sys = branch_atoms(cache, branch, kDefaultAtomTol, stop_tol);
            Matrix atoms(f.r0.dim(), static_cast<Index>(sys.atoms.size()));
            std::vector<std::size_t> steps;
            for (std::size_t i = 0; i < sys.atoms.size(); ++i) {
                atoms.col(static_cast<Index>(i)) = sys.atoms[i].phi;
                steps.push_back(sys.atoms[i].step);
            }
            py::dict d;
            d["atoms"] = atoms;
            d["steps"] = steps;
            d["word"] = branch.letters.to_string(f.family.size());
            d["extinct"] = sys.extinct;
            d["residual_trace_at_stop"] = sys.residual_trace_at_stop;
            d["frame_operator_defect"] = frame_operator_defect(sys);
            return d;
        }, py::arg("seed") = 0, py::arg("max_depth") = 64, py::arg("kind") = "trace", py::arg("x") = py::none(),
             py::arg("stop_tol") = kDefaultStopTol);

    m.def("run_scenario", [](const std::string& config_json, const std::string& command, unsigned threads) {
        const auto cfg = ScenarioConfig::from_json(io::Json::parse(config_json));
        const auto bundle = run_scenario(cfg, command, RunOptions{threads});
        py::dict d;
        d["run_id"] = bundle.run_id;
        d["all_pass"] = bundle.all_pass;
        d["files"] = bundle.files;
        py::list checks;
        for (const auto& c : bundle.checks)
            checks.append(py::make_tuple(c.name, c.value, c.threshold, c.pass));
        d["checks"] = checks;
        return d;
    }, py::arg("config_json"), py::arg("command"), py::arg("threads") = 1,
       "Runs one CLI command on a JSON config; returns the in-memory report bundle.");
}
