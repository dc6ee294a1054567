#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fracavg/chain.hpp"
#include "fracavg/coefficients.hpp"
#include "fracavg/fbm.hpp"

namespace fracavg {

// std::map-backed: references to members stay valid while siblings are added
using json = nlohmann::json;

// Typed access to one JSON object. Missing keys take the default, which is
// written back so the resolved config records every value actually used.
// Errors name the full key path, e.g. "coefficients.F[1].coeffs[0]".
class Section {
public:
    Section(json& node, std::string path);

    const std::string& path() const { return path_; }
    bool has(const std::string& key) const;
    std::string key_path(const std::string& key) const;

    double number(const std::string& key, std::optional<double> def = std::nullopt,
                  std::optional<double> lo = std::nullopt, std::optional<double> hi = std::nullopt);
    // strictly positive
    double positive(const std::string& key, std::optional<double> def = std::nullopt);
    std::int64_t integer(const std::string& key, std::optional<std::int64_t> def = std::nullopt,
                         std::int64_t lo = 0, std::int64_t hi = INT64_MAX);
    bool boolean(const std::string& key, std::optional<bool> def = std::nullopt);
    std::string string(const std::string& key, std::optional<std::string> def = std::nullopt,
                       const std::vector<std::string>& allowed = {});
    std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def = std::nullopt);
    Eigen::VectorXd vector(const std::string& key, std::optional<Eigen::VectorXd> def = std::nullopt);
    Section child(const std::string& key);  // created empty when missing
    json& raw(const std::string& key);      // must exist
    void set(const std::string& key, json v) { node_[key] = std::move(v); }

private:
    json& node_;
    std::string path_;
};

// "eps^2", "0.5*eps^1.5", or a plain number.
double resolve_delta_rule(const std::string& rule, double epsilon);

struct ModelConfig {
    double H = 0.4;
    double epsilon = 0.01;
    double delta = 1e-4;
    std::string delta_rule = "eps^2";
    double T = 1.0;
    double h = 0.0;       // 0: delta / 20
    double fbm_dt = 0.0;  // 0: solver default
    Extension ext = Extension::independent;
    std::vector<Eigen::VectorXd> x0;
};

struct McConfig {
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    std::size_t batches = 20;
    double z_threshold = 3.0;
    double p_threshold = 0.01;
    bool bonferroni = false;
    std::size_t workers = 1;
};

struct OutputConfig {
    std::string dir = "out";
    bool csv = true, json = true, plot = true;
};

struct ExperimentConfig {
    ModelConfig model;
    Eigen::MatrixXd Q;
    CoefficientField F, F0;
    bool auto_center = false;
    McConfig mc;
    OutputConfig output;
    json resolved;  // whole document with defaults filled in

    ChainModel chain() const { return ChainModel(Q); }
    // experiment-specific section, created empty when missing
    Section section(const std::string& name) { return Section(resolved[name], name); }
};

// Sections chain and coefficients are optional for experiments that do not
// need them (sample_fbm, graph); their defaults are a two-state chain with
// rates 1 and a zero field.
ExperimentConfig parse_config(json doc);
ExperimentConfig load_config(const std::string& path);

// Coefficient block list -> field. Each block: {"basis", "k"|"center", "phase"|"width",
// "coeffs": [per state: number | d-vector | d x m nested array]}.
CoefficientField parse_field(json& blocks, const std::string& path, std::size_t d, std::size_t m, std::size_t n);
json field_to_json(const CoefficientField& F);

// Observable list [[f(0), ..., f(n-1)], ...].
std::vector<Observable> parse_observables(Section& s, const std::string& key, std::size_t n,
                                          std::optional<std::vector<Observable>> def = std::nullopt);

}  // namespace fracavg
