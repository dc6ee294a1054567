#include "fracavg/config.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace fracavg {

namespace {

std::string describe(const json& v) {
    std::string s = v.dump();
    return s.size() > 60 ? s.substr(0, 57) + "..." : s;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw config_error(path + ": expected a number, got " + describe(v));
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw config_error(path + ": must be finite");
    return x;
}

std::vector<double> as_numbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw config_error(path + ": expected an array of numbers, got " + describe(v));
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

json to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

void check_keys(const json& node, const std::string& path, const std::vector<std::string>& allowed) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw config_error((path.empty() ? "" : path + ".") + it.key() + ": unknown key (allowed: " + list + ")");
        }
    }
}

}  // namespace

Section::Section(json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_.is_null()) node_ = json::object();
    if (!node_.is_object()) throw config_error(path_ + ": expected an object");
}

bool Section::has(const std::string& key) const { return node_.contains(key) && !node_[key].is_null(); }

std::string Section::key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

double Section::number(const std::string& key, std::optional<double> def, std::optional<double> lo,
                       std::optional<double> hi) {
    if (!has(key)) {
        if (!def) throw config_error(key_path(key) + ": required");
        node_[key] = *def;
    }
    const double x = as_number(node_[key], key_path(key));
    if (lo && x < *lo) throw config_error(key_path(key) + ": must be >= " + std::to_string(*lo));
    if (hi && x > *hi) throw config_error(key_path(key) + ": must be <= " + std::to_string(*hi));
    return x;
}

double Section::positive(const std::string& key, std::optional<double> def) {
    const double x = number(key, def);
    if (!(x > 0.0)) throw config_error(key_path(key) + ": must be positive");
    return x;
}

std::int64_t Section::integer(const std::string& key, std::optional<std::int64_t> def, std::int64_t lo,
                              std::int64_t hi) {
    if (!has(key)) {
        if (!def) throw config_error(key_path(key) + ": required");
        node_[key] = *def;
    }
    const json& v = node_[key];
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw config_error(key_path(key) + ": expected an integer, got " + describe(v));
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi)
        throw config_error(key_path(key) + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
}

bool Section::boolean(const std::string& key, std::optional<bool> def) {
    if (!has(key)) {
        if (!def) throw config_error(key_path(key) + ": required");
        node_[key] = *def;
    }
    if (!node_[key].is_boolean()) throw config_error(key_path(key) + ": expected true or false");
    return node_[key].get<bool>();
}

std::string Section::string(const std::string& key, std::optional<std::string> def,
                            const std::vector<std::string>& allowed) {
    if (!has(key)) {
        if (!def) throw config_error(key_path(key) + ": required");
        node_[key] = *def;
    }
    if (!node_[key].is_string()) throw config_error(key_path(key) + ": expected a string");
    auto s = node_[key].get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw config_error(key_path(key) + ": '" + s + "' is not one of " + list);
    }
    return s;
}

std::vector<double> Section::numbers(const std::string& key, std::optional<std::vector<double>> def) {
    if (!has(key)) {
        if (!def) throw config_error(key_path(key) + ": required");
        node_[key] = *def;
    }
    return as_numbers(node_[key], key_path(key));
}

Eigen::VectorXd Section::vector(const std::string& key, std::optional<Eigen::VectorXd> def) {
    std::optional<std::vector<double>> d;
    if (def) d = std::vector<double>(def->data(), def->data() + def->size());
    auto v = numbers(key, d);
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Section Section::child(const std::string& key) { return Section(node_[key], key_path(key)); }

json& Section::raw(const std::string& key) {
    if (!has(key)) throw config_error(key_path(key) + ": required");
    return node_[key];
}

double resolve_delta_rule(const std::string& rule, double epsilon) {
    static const std::regex re(R"(\s*(?:([0-9.eE+-]+)\s*\*\s*)?eps(?:\s*\^\s*([0-9.eE+-]+))?\s*)");
    std::smatch m;
    if (std::regex_match(rule, m, re)) {
        try {
            const double c = m[1].matched ? std::stod(m[1].str()) : 1.0;
            const double p = m[2].matched ? std::stod(m[2].str()) : 1.0;
            return c * std::pow(epsilon, p);
        } catch (const std::exception&) {
        }
    }
    try {
        std::size_t used = 0;
        const double x = std::stod(rule, &used);
        if (used == rule.size()) return x;
    } catch (const std::exception&) {
    }
    throw config_error("delta rule '" + rule + "': expected e.g. \"eps^2\", \"0.5*eps^1.5\" or a number");
}

CoefficientField parse_field(json& blocks, const std::string& path, std::size_t d, std::size_t m, std::size_t n) {
    if (blocks.is_null()) return CoefficientField::zero(d, m, n);
    if (!blocks.is_array()) throw config_error(path + ": expected an array of basis blocks");
    if (blocks.empty()) return CoefficientField::zero(d, m, n);
    std::vector<BasisFunction> basis;
    std::vector<std::vector<Eigen::MatrixXd>> coeffs;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string bp = path + "[" + std::to_string(b) + "]";
        Section s(blocks[b], bp);
        check_keys(blocks[b], bp, {"basis", "k", "phase", "center", "width", "coeffs"});
        const auto kind = s.string("basis", "constant", {"constant", "sin", "cos", "tanh", "gauss"});
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
        if (kind == "constant") {
            basis.push_back(BasisFunction::constant());
        } else if (kind == "gauss") {
            auto c = s.vector("center", zero);
            if (static_cast<std::size_t>(c.size()) != d) throw config_error(s.key_path("center") + ": length must be dim");
            basis.push_back(BasisFunction::gauss(c, s.positive("width", 1.0)));
        } else {
            auto k = s.vector("k");
            if (static_cast<std::size_t>(k.size()) != d) throw config_error(s.key_path("k") + ": length must be dim");
            const double ph = s.number("phase", 0.0);
            basis.push_back(kind == "sin" ? BasisFunction::sin(k, ph)
                                          : kind == "cos" ? BasisFunction::cos(k, ph) : BasisFunction::tanh(k, ph));
        }
        json& cs = s.raw("coeffs");
        const std::string cp = s.key_path("coeffs");
        if (!cs.is_array() || cs.size() != n)
            throw config_error(cp + ": expected one entry per chain state (" + std::to_string(n) + ")");
        std::vector<Eigen::MatrixXd> per;
        for (std::size_t y = 0; y < n; ++y) {
            const std::string yp = cp + "[" + std::to_string(y) + "]";
            const json& e = cs[y];
            Eigen::MatrixXd c(d, m);
            if (e.is_number()) {
                if (d != 1 || m != 1) throw config_error(yp + ": a scalar needs dim = noise_dim = 1");
                c(0, 0) = as_number(e, yp);
            } else if (e.is_array() && e.size() == d && (d == 0 || e[0].is_number())) {
                if (m != 1) throw config_error(yp + ": a flat vector needs noise_dim = 1");
                auto v = as_numbers(e, yp);
                for (std::size_t i = 0; i < d; ++i) c(static_cast<Eigen::Index>(i), 0) = v[i];
            } else if (e.is_array() && e.size() == d) {
                for (std::size_t i = 0; i < d; ++i) {
                    const std::string rp = yp + "[" + std::to_string(i) + "]";
                    auto row = as_numbers(e[i], rp);
                    if (row.size() != m) throw config_error(rp + ": expected noise_dim entries");
                    for (std::size_t j = 0; j < m; ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
                }
            } else {
                throw config_error(yp + ": expected a number, a dim-vector or a dim x noise_dim array");
            }
            per.push_back(c);
        }
        coeffs.push_back(std::move(per));
    }
    return CoefficientField(d, m, n, std::move(basis), std::move(coeffs));
}

json field_to_json(const CoefficientField& F) {
    json blocks = json::array();
    for (std::size_t b = 0; b < F.basis().size(); ++b) {
        const auto& psi = F.basis()[b];
        json blk;
        blk["basis"] = psi.name();
        if (psi.kind == BasisKind::gauss) {
            blk["center"] = to_json(psi.k);
            blk["width"] = psi.phase;
        } else if (psi.kind != BasisKind::constant) {
            blk["k"] = to_json(psi.k);
            blk["phase"] = psi.phase;
        }
        json cs = json::array();
        for (const auto& c : F.coeffs()[b]) {
            json rows = json::array();
            for (Eigen::Index i = 0; i < c.rows(); ++i) rows.push_back(to_json(c.row(i).transpose()));
            cs.push_back(rows);
        }
        blk["coeffs"] = cs;
        blocks.push_back(blk);
    }
    return blocks;
}

std::vector<Observable> parse_observables(Section& s, const std::string& key, std::size_t n,
                                          std::optional<std::vector<Observable>> def) {
    if (!s.has(key)) {
        if (!def) throw config_error(s.key_path(key) + ": required");
        json a = json::array();
        for (const auto& f : *def) a.push_back(to_json(f));
        s.set(key, std::move(a));
    }
    json& v = s.raw(key);
    if (!v.is_array() || v.empty()) throw config_error(s.key_path(key) + ": expected a non-empty list of observables");
    std::vector<Observable> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = s.key_path(key) + "[" + std::to_string(i) + "]";
        auto x = as_numbers(v[i], p);
        if (x.size() != n) throw config_error(p + ": expected one value per chain state (" + std::to_string(n) + ")");
        out.push_back(Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n)));
    }
    return out;
}

ExperimentConfig parse_config(json doc) {
    if (!doc.is_object()) throw config_error("config: top level must be an object");
    check_keys(doc, "", {"model", "chain", "coefficients", "mc", "output", "sample_fbm", "simulate", "sigma", "clt",
                         "second_order", "homogenize", "lln", "rough", "graph"});
    ExperimentConfig cfg;
    cfg.resolved = std::move(doc);
    json& r = cfg.resolved;

    check_keys(r["model"].is_null() ? json::object() : r["model"], "model",
               {"H", "epsilon", "delta", "delta_rule", "T", "h", "fbm_dt", "extension", "x0"});
    Section model(r["model"], "model");
    auto& M = cfg.model;
    M.H = model.number("H", 0.4);
    try {
        (void)HurstParam(M.H);
    } catch (const std::exception& e) {
        throw config_error(std::string("model.H: ") + e.what());
    }
    M.epsilon = model.positive("epsilon", 0.01);
    if (model.has("delta")) {
        M.delta = model.positive("delta");
        M.delta_rule = "explicit";
    } else {
        M.delta_rule = model.string("delta_rule", "eps^2");
        try {
            M.delta = resolve_delta_rule(M.delta_rule, M.epsilon);
        } catch (const config_error& e) {
            throw config_error(std::string("model.delta_rule: ") + e.what());
        }
        if (!(M.delta > 0.0)) throw config_error("model.delta_rule: gives a nonpositive delta");
        r["model"]["delta"] = M.delta;
    }
    M.T = model.positive("T", 1.0);
    M.h = model.number("h", 0.0, 0.0);
    if (M.h == 0.0) {
        M.h = M.delta / 20.0;
        r["model"]["h"] = M.h;
    }
    M.fbm_dt = model.number("fbm_dt", 0.0, 0.0);
    M.ext = model.string("extension", "independent", {"independent", "reflect"}) == "reflect" ? Extension::reflect
                                                                                          : Extension::independent;

    check_keys(r["chain"].is_null() ? json::object() : r["chain"], "chain", {"Q"});
    Section chain(r["chain"], "chain");
    if (!chain.has("Q")) r["chain"]["Q"] = json::array({json::array({-1.0, 1.0}), json::array({1.0, -1.0})});
    {
        json& q = r["chain"]["Q"];
        if (!q.is_array() || q.empty()) throw config_error("chain.Q: expected a square array of rows");
        const std::size_t n = q.size();
        cfg.Q.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const std::string p = "chain.Q[" + std::to_string(i) + "]";
            auto row = as_numbers(q[i], p);
            if (row.size() != n) throw config_error(p + ": row length must equal the number of rows");
            for (std::size_t j = 0; j < n; ++j) cfg.Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
        try {
            (void)ChainModel(cfg.Q);
        } catch (const config_error& e) {
            throw config_error(std::string("chain.Q: ") + e.what());
        }
    }
    const std::size_t n = static_cast<std::size_t>(cfg.Q.rows());

    check_keys(r["coefficients"].is_null() ? json::object() : r["coefficients"], "coefficients",
               {"dim", "noise_dim", "F", "F0", "auto_center"});
    Section coef(r["coefficients"], "coefficients");
    const auto d = static_cast<std::size_t>(coef.integer("dim", 1, 1, 16));
    const auto m = static_cast<std::size_t>(coef.integer("noise_dim", 1, 1, 16));
    cfg.auto_center = coef.boolean("auto_center", false);
    if (!coef.has("F")) r["coefficients"]["F"] = json::array();
    if (!coef.has("F0")) r["coefficients"]["F0"] = json::array();
    cfg.F = parse_field(r["coefficients"]["F"], "coefficients.F", d, m, n);
    cfg.F0 = parse_field(r["coefficients"]["F0"], "coefficients.F0", d, 1, n);

    if (!model.has("x0")) r["model"]["x0"] = json::array({json(std::vector<double>(d, 0.0))});
    {
        json& xs = r["model"]["x0"];
        if (!xs.is_array() || xs.empty()) throw config_error("model.x0: expected a non-empty list of points");
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const std::string p = "model.x0[" + std::to_string(i) + "]";
            auto x = as_numbers(xs[i], p);
            if (x.size() != d) throw config_error(p + ": expected dim = " + std::to_string(d) + " entries");
            M.x0.push_back(Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(d)));
        }
    }

    check_keys(r["mc"].is_null() ? json::object() : r["mc"], "mc",
               {"n_paths", "seed", "batches", "z_threshold", "p_threshold", "bonferroni", "workers"});
    Section mc(r["mc"], "mc");
    cfg.mc.n_paths = static_cast<std::size_t>(mc.integer("n_paths", 1000, 1));
    cfg.mc.seed = static_cast<std::uint64_t>(mc.integer("seed", 1, 0));
    cfg.mc.batches = static_cast<std::size_t>(mc.integer("batches", 20, 2, 10000));
    cfg.mc.z_threshold = mc.positive("z_threshold", 3.0);
    cfg.mc.p_threshold = mc.number("p_threshold", 0.01, 0.0, 1.0);
    cfg.mc.bonferroni = mc.boolean("bonferroni", false);
    cfg.mc.workers = static_cast<std::size_t>(mc.integer("workers", 1, 1, 256));

    check_keys(r["output"].is_null() ? json::object() : r["output"], "output", {"dir", "formats"});
    Section out(r["output"], "output");
    cfg.output.dir = out.string("dir", "out");
    if (!out.has("formats")) r["output"]["formats"] = json::array({"csv", "json", "plot"});
    {
        json& f = r["output"]["formats"];
        if (!f.is_array()) throw config_error("output.formats: expected an array");
        cfg.output.csv = cfg.output.json = cfg.output.plot = false;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const std::string p = "output.formats[" + std::to_string(i) + "]";
            if (!f[i].is_string()) throw config_error(p + ": expected a string");
            const auto s = f[i].get<std::string>();
            if (s == "csv") cfg.output.csv = true;
            else if (s == "json") cfg.output.json = true;
            else if (s == "plot") cfg.output.plot = true;
            else throw config_error(p + ": '" + s + "' is not one of csv, json, plot");
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.str(), nullptr, true, true);  // comments allowed
    } catch (const json::parse_error& e) {
        throw config_error(path + ": " + e.what());
    }
    return parse_config(std::move(doc));
}

}  // namespace fracavg
