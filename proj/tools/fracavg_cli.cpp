#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "fracavg/config.hpp"
#include "fracavg/experiments.hpp"
#include "fracavg/outputs.hpp"

using namespace fracavg;

namespace {

enum Exit { kPass = 0, kStatFail = 1, kConfigError = 2, kNumericalError = 3 };

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::string& cmd, const std::string& config_path, std::optional<std::uint64_t> seed,
        const std::string& out) {
    const std::string text = slurp(config_path);
    const auto first = text.find_first_not_of(" \t\r\n");
    // graph-check also takes a bare graph description file
    const bool graph_file = cmd == "graph-check" && (first == std::string::npos || text[first] != '{');
    ExperimentConfig cfg = graph_file ? parse_config(json::object()) : load_config(config_path);
    if (seed) {
        cfg.mc.seed = *seed;
        cfg.resolved["mc"]["seed"] = *seed;
    }
    if (!out.empty()) {
        cfg.output.dir = out;
        cfg.resolved["output"]["dir"] = out;
    }
    static const std::map<std::string, StatReport (*)(ExperimentConfig&)> table{
        {"sample-fbm", run_sample_fbm},
        {"simulate", run_simulate},
        {"sigma", run_sigma},
        {"clt", run_clt_experiment},
        {"second-order", run_second_order_experiment},
        {"homogenize", run_homogenization_experiment},
        {"lln", run_lln_check},
        {"rough-check", run_rough_check},
    };
    StatReport rep = cmd == "graph-check" ? run_graph_check(cfg, graph_file ? text : std::string())
                                          : table.at(cmd)(cfg);
    rep.apply_thresholds(cfg.mc.z_threshold, cfg.mc.p_threshold, cfg.mc.bonferroni);
    emit_outputs(rep, cfg, cfg.output.dir);
    std::cout << report_table(rep);
    if (cmd == "graph-check" && rep.extra.contains("graph")) {
        const auto& g = rep.extra["graph"];
        std::cout << "regular: " << (g["regular"].get<bool>() ? "yes" : "no");
        if (g.contains("regularity_witness")) std::cout << "  witness subset " << g["regularity_witness"].get<std::string>();
        std::cout << "\nintegrable: " << (g["integrable"].get<bool>() ? "yes" : "no");
        if (g.contains("integrability_witness"))
            std::cout << "  witness partition " << g["integrability_witness"].get<std::string>();
        std::cout << "\n";
    }
    std::cout << rep.experiment << ": " << (rep.passed() ? "PASS" : "FAIL") << " (outputs in " << cfg.output.dir << ")\n";
    return rep.passed() ? kPass : kStatFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fracavg: slow/fast systems driven by fractional Brownian motion"};
    app.require_subcommand(1);
    std::string config, out;
    std::uint64_t seed = 0;
    const std::vector<std::pair<std::string, std::string>> cmds{
        {"sample-fbm", "sample fBM paths and check their covariance"},
        {"simulate", "simulate the slow/fast system; endpoint CSV"},
        {"sigma", "effective diffusion at (x, xbar); JSON"},
        {"clt", "functional CLT for x-independent coefficients"},
        {"second-order", "mean of the second-order process"},
        {"homogenize", "slow/fast endpoints against the limit SDE"},
        {"lln", "law of large numbers rate for the fast chain"},
        {"rough-check", "Chen relation, iterated-integral mean, chaos and moment scaling"},
        {"graph-check", "power counting verdicts for a labelled graph"},
    };
    for (const auto& [name, help] : cmds) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "config file (JSON; graph-check also takes a graph file)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "base seed, overrides mc.seed");
        sub->add_option("--out", out, "output directory, overrides output.dir");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kPass : kConfigError;
    }
    const auto* sub = app.get_subcommands().front();
    std::optional<std::uint64_t> seed_opt;
    if (sub->count("--seed")) seed_opt = seed;
    try {
        return run(sub->get_name(), config, seed_opt, out);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalError;
    }
}
