#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>

#include "fracavg/chain.hpp"
#include "fracavg/config.hpp"
#include "fracavg/effective_diffusion.hpp"
#include "fracavg/experiments.hpp"
#include "fracavg/fbm.hpp"
#include "fracavg/graph.hpp"
#include "fracavg/outputs.hpp"

namespace py = pybind11;
using namespace fracavg;

namespace {

std::string run_experiment(const std::string& name, const std::string& config, std::optional<std::uint64_t> seed) {
    static const std::map<std::string, StatReport (*)(ExperimentConfig&)> table{
        {"sample-fbm", run_sample_fbm},   {"simulate", run_simulate},
        {"sigma", run_sigma},             {"clt", run_clt_experiment},
        {"second-order", run_second_order_experiment},
        {"homogenize", run_homogenization_experiment},
        {"lln", run_lln_check},           {"rough-check", run_rough_check},
        {"graph-check", [](ExperimentConfig& c) { return run_graph_check(c); }},
    };
    const auto it = table.find(name);
    if (it == table.end()) throw config_error("unknown experiment: " + name);
    ExperimentConfig cfg = parse_config(json::parse(config, nullptr, true, true));
    if (seed) cfg.mc.seed = *seed;
    StatReport rep = it->second(cfg);
    rep.apply_thresholds(cfg.mc.z_threshold, cfg.mc.p_threshold, cfg.mc.bonferroni);
    json out = report_json(rep);
    out["passed"] = rep.passed();
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_fracavg, m) {
    py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<numerical_error>(m, "NumericalError", PyExc_ArithmeticError);

    m.def(
        "sample_fbm",
        [](double H, double dt, std::size_t n, std::uint64_t seed, std::size_t components) {
            return sample_fbm(FbmGrid(HurstParam(H), dt, n, components), seed).values;
        },
        py::arg("H"), py::arg("dt"), py::arg("n"), py::arg("seed") = 1, py::arg("components") = 1);
    m.def("fgn_target_error", [](double H, double dt, std::size_t n) { return FgnSampler(H, dt, n).target_error(); });
    m.def("stationary_measure", [](const Eigen::MatrixXd& Q) { return ChainModel(Q).mu(); });
    m.def("fractional_power",
          [](const Eigen::MatrixXd& Q, double alpha, const Eigen::VectorXd& f) {
              return fractional_power(ChainModel(Q), alpha, f);
          });
    m.def(
        "sigma",
        [](const Eigen::MatrixXd& Q, const std::vector<Eigen::VectorXd>& fs, double H) {
            ChainModel chain(Q);
            std::vector<Observable> centered;
            for (const auto& f : fs) centered.push_back(chain.center(f));
            EffectiveDiffusion ed(chain, observable_field(centered), HurstParam(H));
            const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
            return ed.sigma(x, x);
        },
        py::arg("Q"), py::arg("observables"), py::arg("H"));
    m.def("graph_verdicts", [](const std::string& text) {
        std::istringstream in(text);
        const auto g = read_graph(in);
        const auto r = is_regular(g);
        const auto i = is_integrable(g);
        py::dict d;
        d["regular"] = r.regular;
        d["regularity_witness"] = r.witness;
        d["integrable"] = i.integrable;
        d["integrability_witness"] = i.witness;
        return d;
    });
    m.def("run_experiment", &run_experiment, py::arg("name"), py::arg("config"), py::arg("seed") = std::nullopt);
}
