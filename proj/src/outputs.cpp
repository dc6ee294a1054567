#include "fracavg/outputs.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fracavg {

namespace {

const char* kind_name(RowKind k) {
    switch (k) {
        case RowKind::z: return "z";
        case RowKind::p: return "p";
        case RowKind::bound: return "bound";
        case RowKind::tol: return "tol";
        case RowKind::info: return "info";
    }
    return "info";
}

RowKind kind_from(const std::string& s) {
    if (s == "z") return RowKind::z;
    if (s == "p") return RowKind::p;
    if (s == "bound") return RowKind::bound;
    if (s == "tol") return RowKind::tol;
    return RowKind::info;
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double from(const json& j) { return j.is_number() ? j.get<double>() : NAN; }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw config_error(p.string() + ": cannot open for writing");
    out << content;
    if (!out) throw config_error(p.string() + ": write failed");
}

}  // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string report_csv(const StatReport& rep) {
    std::string s = "name,estimate,stderr,target,z,pass\n";
    for (const auto& r : rep.rows)
        s += csv_field(r.name) + "," + format_number(r.estimate) + "," + format_number(r.stderr_) + "," +
             format_number(r.target) + "," + format_number(r.z) + "," + (r.pass ? "true" : "false") + "\n";
    return s;
}

json report_json(const StatReport& rep) {
    json j;
    j["experiment"] = rep.experiment;
    j["seed"] = rep.seed;
    j["passed"] = rep.passed();
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json o{{"name", r.name}, {"kind", kind_name(r.kind)}, {"estimate", num(r.estimate)}, {"stderr", num(r.stderr_)},
               {"target", num(r.target)}, {"z", num(r.z)}, {"tol", num(r.tol)}, {"pass", r.pass}};
        if (!r.oracle.is_null()) o["oracle"] = r.oracle;
        rows.push_back(o);
    }
    j["rows"] = rows;
    j["warnings"] = rep.warnings;
    j["extra"] = rep.extra;
    return j;
}

StatReport report_from_json(const json& j) {
    StatReport rep;
    rep.experiment = j.at("experiment").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& o : j.at("rows")) {
        StatRow r;
        r.name = o.at("name").get<std::string>();
        r.kind = kind_from(o.at("kind").get<std::string>());
        r.estimate = from(o.at("estimate"));
        r.stderr_ = from(o.at("stderr"));
        r.target = from(o.at("target"));
        r.z = from(o.at("z"));
        r.tol = from(o.at("tol"));
        r.pass = o.at("pass").get<bool>();
        if (o.contains("oracle")) r.oracle = o["oracle"];
        rep.rows.push_back(std::move(r));
    }
    rep.warnings = j.at("warnings").get<std::vector<std::string>>();
    rep.extra = j.at("extra");
    return rep;
}

std::string plot_script(const StatReport& rep) {
    const std::string e = rep.experiment;
    std::string s;
    s += "# estimates against targets, and convergence curves for swept rows\n";
    s += "import csv, re, sys\nimport matplotlib\nmatplotlib.use('Agg')\nimport matplotlib.pyplot as plt\n\n";
    s += "rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else '" + e + ".csv')))\n";
    s += "num = lambda v: float(v) if v not in ('', None) else float('nan')\n\n";
    s += "fig, ax = plt.subplots(1, 2, figsize=(12, 4.5))\n";
    s += "tgt = [r for r in rows if r['target'] != '']\n";
    s += "y = range(len(tgt))\n";
    s += "ax[0].errorbar([num(r['estimate']) for r in tgt], y, xerr=[3 * num(r['stderr']) if r['stderr'] else 0 for r in tgt],\n";
    s += "               fmt='o', label='estimate +- 3 se')\n";
    s += "ax[0].plot([num(r['target']) for r in tgt], y, 'rx', label='target')\n";
    s += "ax[0].set_yticks(list(y))\nax[0].set_yticklabels([r['name'] for r in tgt], fontsize=7)\nax[0].legend()\n\n";
    s += "# rows named '... <param>=<value> ...' form curves in <value>\n";
    s += "curves = {}\n";
    s += "for r in rows:\n";
    s += "    m = re.search(r'(eps|delta|T|L)=([0-9.eE+-]+)', r['name'])\n";
    s += "    if m:\n";
    s += "        key = r['name'].replace(m.group(0), m.group(1) + '=*')\n";
    s += "        curves.setdefault(key, []).append((float(m.group(2)), abs(num(r['estimate']))))\n";
    s += "for key, pts in sorted(curves.items()):\n";
    s += "    if len(pts) > 1:\n";
    s += "        pts.sort()\n";
    s += "        ax[1].loglog([p[0] for p in pts], [p[1] for p in pts], 'o-', label=key)\n";
    s += "if curves:\n    ax[1].legend(fontsize=7)\n";
    s += "fig.suptitle('" + e + "')\nfig.tight_layout()\nfig.savefig('" + e + ".png', dpi=120)\n";
    return s;
}

void emit_outputs(const StatReport& rep, const ExperimentConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path d(dir);
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw config_error(dir + ": cannot create output directory (" + ec.message() + ")");
    write_file(d / "resolved_config.json", cfg.resolved.dump(2) + "\n");
    if (cfg.output.csv) write_file(d / (rep.experiment + ".csv"), report_csv(rep));
    if (cfg.output.json) write_file(d / (rep.experiment + ".json"), report_json(rep).dump(2) + "\n");
    if (cfg.output.plot) write_file(d / ("plot_" + rep.experiment + ".py"), plot_script(rep));
    for (const auto& [name, content] : rep.files) write_file(d / name, content);
}

std::string report_table(const StatReport& rep) {
    std::size_t w = 10;
    for (const auto& r : rep.rows) w = std::max(w, r.name.size());
    auto pad = [](std::string s, std::size_t n) { return s.size() < n ? s + std::string(n - s.size(), ' ') : s; };
    auto short_num = [](double x) {
        if (std::isnan(x)) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", x);
        return std::string(buf);
    };
    std::ostringstream os;
    os << pad("check", w) << "  " << pad("value", 30) << "  " << pad("target/bound", 14) << "  pass\n";
    for (const auto& r : rep.rows) {
        std::string tgt = short_num(r.target);
        if (r.kind == RowKind::tol) tgt += " +-" + short_num(r.tol);
        if (r.kind == RowKind::bound) tgt = "<= " + tgt;
        if (r.kind == RowKind::p) tgt = ">= " + tgt;
        std::string val = short_num(r.estimate);
        if (r.kind == RowKind::z) val += " (z=" + short_num(r.z) + ")";
        os << pad(r.name, w) << "  " << pad(val, 30) << "  " << pad(tgt, 14) << "  "
           << (r.kind == RowKind::info ? "-" : (r.pass ? "yes" : "NO")) << "\n";
    }
    for (const auto& wmsg : rep.warnings) os << "warning: " << wmsg << "\n";
    return os.str();
}

}  // namespace fracavg
