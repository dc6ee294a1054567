#include "fracavg/graph.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <istream>
#include <numeric>
#include <sstream>

#include "fracavg/effective_diffusion.hpp"

namespace fracavg {

namespace {

struct UnionFind {
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[std::max(a, b)] = std::min(a, b);
        return true;
    }
    std::vector<int> parent;
};

std::vector<int> block_of(int n, const VertexPartition& p) {
    std::vector<int> b(n, -1);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (int v : p[i]) {
            if (v < 0 || v >= n || b[v] != -1) throw config_error("partition: not a set partition of the vertices");
            b[v] = static_cast<int>(i);
        }
    for (int v = 0; v < n; ++v)
        if (b[v] == -1) throw config_error("partition: vertex " + std::to_string(v) + " not covered");
    return b;
}

// left side of the integrability condition for labels alpha_+ - beta
double cross_sum(const LabelledGraph& g, const std::vector<int>& blk, std::span<const double> beta, int np) {
    double s = static_cast<double>(np);
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        const auto& ed = g.edges()[e];
        if (blk[ed.minus] != blk[ed.plus]) s += ed.alpha_plus - (beta.empty() ? 0.0 : beta[e]);
    }
    return s;
}

}  // namespace

LabelledGraph::LabelledGraph(int n_vertices, std::vector<GraphEdge> edges) : n_(n_vertices), edges_(std::move(edges)) {
    if (n_ < 1) throw config_error("graph: need at least one vertex");
    for (const auto& e : edges_) {
        if (e.minus < 0 || e.minus >= n_ || e.plus < 0 || e.plus >= n_)
            throw config_error("graph: edge endpoint out of range");
        if (e.minus == e.plus) throw config_error("graph: self-loop at vertex " + std::to_string(e.minus));
        if (e.alpha_minus > 0.0 || e.alpha_plus > 0.0) throw config_error("graph: edge labels must be nonpositive");
        if (!(e.norm >= 0.0)) throw config_error("graph: kernel norms must be nonnegative");
    }
    UnionFind uf(n_);
    for (const auto& e : edges_) uf.unite(e.minus, e.plus);
    comp_.assign(n_, -1);
    std::vector<int> id(n_, -1);
    for (int v = 0; v < n_; ++v) {
        const int r = uf.find(v);
        if (id[r] == -1) id[r] = n_comp_++;
        comp_[v] = id[r];
    }
}

LabelledGraph read_graph(std::istream& in) {
    std::string line;
    int n = -1, lineno = 0;
    std::vector<GraphEdge> edges;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        std::istringstream fs(first);
        auto bad = [&](const std::string& what) {
            return config_error("graph file line " + std::to_string(lineno) + ": " + what);
        };
        if (n < 0) {
            if (!(fs >> n) || n < 1) throw bad("expected a positive vertex count");
            continue;
        }
        GraphEdge e;
        if (!(fs >> e.minus) || !(ls >> e.plus >> e.alpha_minus >> e.alpha_plus))
            throw bad("expected 'u v alpha_minus alpha_plus'");
        std::string extra;
        if (ls >> extra) throw bad("trailing token '" + extra + "'");
        edges.push_back(e);
    }
    if (n < 0) throw config_error("graph file: missing vertex count");
    return LabelledGraph(n, std::move(edges));
}

RegularityVerdict is_regular(const LabelledGraph& g) {
    const int n = g.vertices();
    if (n > 20) throw config_error("is_regular: more than 20 vertices");
    RegularityVerdict r;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        const int size = std::popcount(mask);
        if (size < 2) continue;
        double s = size;
        for (const auto& e : g.edges())
            if ((mask >> e.minus & 1u) && (mask >> e.plus & 1u)) s += e.alpha_minus;
        if (!(s > 1.0)) {
            r.regular = false;
            for (int v = 0; v < n; ++v)
                if (mask >> v & 1u) r.witness.push_back(v);
            return r;
        }
    }
    return r;
}

bool is_tight(const LabelledGraph& g, const VertexPartition& p) {
    for (const auto& block : p) {
        std::vector<char> hit(g.components(), 0);
        for (int v : block) hit[g.component_of()[v]] = 1;
        if (std::all_of(hit.begin(), hit.end(), [](char c) { return c != 0; })) return true;
    }
    return false;
}

std::vector<VertexPartition> tight_partitions(const LabelledGraph& g) {
    if (g.vertices() > 12) throw config_error("tight_partitions: more than 12 vertices");
    std::vector<VertexPartition> out;
    for (auto& p : set_partitions(g.vertices()))
        if (p.size() >= 2 && is_tight(g, p)) out.push_back(std::move(p));
    return out;
}

IntegrabilityVerdict is_integrable(const LabelledGraph& g) {
    IntegrabilityVerdict r;
    r.worst = -1e300;
    for (const auto& p : tight_partitions(g)) {
        const double s = cross_sum(g, block_of(g.vertices(), p), {}, static_cast<int>(p.size()));
        if (s > r.worst) {
            r.worst = s;
            if (!(s < 1.0)) {
                r.integrable = false;
                r.witness = p;
            }
        }
    }
    return r;
}

BoundExponent bound_exponent(const LabelledGraph& g, std::span<const double> beta) {
    if (beta.size() != g.edges().size()) throw config_error("bound_exponent: one beta per edge required");
    for (double b : beta)
        if (!(b >= 0.0)) throw config_error("bound_exponent: beta must be nonnegative");
    BoundExponent r;
    r.regular = is_regular(g).regular;
    r.feasible = true;
    for (const auto& p : tight_partitions(g)) {
        if (!(cross_sum(g, block_of(g.vertices(), p), beta, static_cast<int>(p.size())) < 1.0)) {
            r.feasible = false;
            r.witness = p;
            break;
        }
    }
    r.exponent = g.components() + std::accumulate(beta.begin(), beta.end(), 0.0);
    return r;
}

CumulantGraph build_cumulant_graph(const VertexPartition& delta, const Pairing& pairing, double H) {
    if (!(H > 0.5 && H < 1.0)) throw config_error("cumulant graph: needs H in (1/2, 1)");
    const int n = static_cast<int>(2 * pairing.size());
    if (n == 0) throw config_error("cumulant graph: empty pairing");
    std::vector<int> seen(n, 0);
    for (auto [a, b] : pairing) {
        if (a < 0 || b < 0 || a >= n || b >= n || a == b) throw config_error("cumulant graph: bad pair");
        ++seen[a];
        ++seen[b];
    }
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }))
        throw config_error("cumulant graph: pairing is not a perfect matching");
    block_of(n, delta);
    for (const auto& b : delta)
        if (b.size() < 2) throw config_error("cumulant graph: singleton block in the partition");
    CumulantGraph cg{LabelledGraph(1, {}), static_cast<int>(pairing.size()), delta, pairing, {}};
    std::vector<GraphEdge> edges;
    for (auto [a, b] : pairing) {
        cg.pairing_edges.push_back(static_cast<int>(edges.size()));
        edges.push_back({a, b, 2 * H - 2, 2 * H - 2, 1.0});
    }
    for (const auto& blk : delta)
        for (std::size_t i = 0; i < blk.size(); ++i)
            for (std::size_t j = i + 1; j < blk.size(); ++j) edges.push_back({blk[i], blk[j], 0.0, -2.0, 1.0});
    cg.graph = LabelledGraph(n, std::move(edges));
    return cg;
}

std::vector<std::pair<int, int>> quotient_edges(const CumulantGraph& cg) {
    const auto blk = block_of(cg.graph.vertices(), cg.delta);
    std::vector<std::pair<int, int>> out;
    for (int e : cg.pairing_edges) {
        const auto& ed = cg.graph.edges()[e];
        if (blk[ed.minus] != blk[ed.plus]) out.emplace_back(blk[ed.minus], blk[ed.plus]);
    }
    return out;
}

ForestWeights spanning_forest_beta(const CumulantGraph& cg, double kappa, double H) {
    if (!(kappa > 0.0 && kappa < 2.0 - 2.0 * H)) throw config_error("spanning forest: kappa must lie in (0, 2 - 2H)");
    const auto blk = block_of(cg.graph.vertices(), cg.delta);
    ForestWeights fw;
    fw.quotient_vertices = static_cast<int>(cg.delta.size());
    fw.beta.assign(cg.graph.edges().size(), 0.0);
    UnionFind uf(fw.quotient_vertices);
    for (int e : cg.pairing_edges) {
        const auto& ed = cg.graph.edges()[e];
        if (blk[ed.minus] != blk[ed.plus] && uf.unite(blk[ed.minus], blk[ed.plus])) {
            fw.forest.push_back(e);
            fw.beta[e] = 1.0 - kappa;
        }
    }
    fw.m = fw.quotient_vertices - static_cast<int>(fw.forest.size());
    fw.exponent = fw.m + (1.0 - kappa) * static_cast<double>(fw.forest.size());
    fw.bound = cg.p - kappa * (cg.p - fw.m);
    fw.certificate = bound_exponent(cg.graph, fw.beta);
    return fw;
}

std::vector<Pairing> pairings(int p) {
    if (p < 1 || p > 4) throw config_error("pairings: p must lie in [1, 4]");
    std::vector<Pairing> out;
    Pairing cur;
    std::function<void(std::vector<int>)> rec = [&](std::vector<int> rest) {
        if (rest.empty()) {
            out.push_back(cur);
            return;
        }
        const int a = rest[0];
        for (std::size_t i = 1; i < rest.size(); ++i) {
            std::vector<int> r2;
            for (std::size_t j = 1; j < rest.size(); ++j)
                if (j != i) r2.push_back(rest[j]);
            cur.emplace_back(a, rest[i]);
            rec(r2);
            cur.pop_back();
        }
    };
    std::vector<int> all(2 * p);
    std::iota(all.begin(), all.end(), 0);
    rec(all);
    return out;
}

std::vector<VertexPartition> singleton_free_partitions(int k) {
    if (k < 1 || k > 12) throw config_error("partitions: size must lie in [1, 12]");
    std::vector<VertexPartition> out;
    for (auto& p : set_partitions(k))
        if (std::all_of(p.begin(), p.end(), [](const auto& b) { return b.size() >= 2; })) out.push_back(std::move(p));
    return out;
}

std::vector<std::pair<VertexPartition, Pairing>> enumerate_pairings_partitions(int p) {
    const auto prs = pairings(p);
    const auto parts = singleton_free_partitions(2 * p);
    std::vector<std::pair<VertexPartition, Pairing>> out;
    for (const auto& d : parts)
        for (const auto& pr : prs) out.emplace_back(d, pr);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// Golub-Welsch nodes and weights on [0, 1]
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        x[i] = 0.5 * (es.eigenvalues()[i] + 1.0);
        w[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    }
    return {x, w};
}

// sorted, deduplicated cut points of [a, b] at the given breaks and at a
// geometric ladder away from `origin`
std::vector<double> cuts(double a, double b, std::vector<double> breaks) {
    std::vector<double> c{a, b};
    for (double x : breaks)
        if (x > a && x < b) c.push_back(x);
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
}

struct PairNode {
    double s, t, w;
};

// nodes for int_{I1} ds int_{I2} dt F(s, t) |t - s|^{2H-2}
std::vector<PairNode> pair_rule(std::pair<double, double> I1, std::pair<double, double> I2, double H, int order) {
    const auto [x, w] = gauss_legendre(order);
    const double q = 2.0 * H - 1.0;
    std::vector<PairNode> out;
    auto panels = [&](double a, double b) {
        std::vector<double> c{a};
        const int np = std::max(1, static_cast<int>(std::ceil(b - a)));
        for (int i = 1; i < np; ++i) c.push_back(a + (b - a) * i / np);
        c.push_back(b);
        return c;
    };
    const auto sc = cuts(I1.first, I1.second, {I2.first, I2.second});
    for (std::size_t ps = 0; ps + 1 < sc.size(); ++ps) {
        const auto sp = panels(sc[ps], sc[ps + 1]);
        for (std::size_t k = 0; k + 1 < sp.size(); ++k) {
            for (int i = 0; i < order; ++i) {
                const double s = sp[k] + (sp[k + 1] - sp[k]) * x[i];
                const double ws = (sp[k + 1] - sp[k]) * w[i];
                // u = t - s on [I2.first - s, I2.second - s], split at 0
                for (int side : {-1, 1}) {
                    const double lo = side > 0 ? std::max(0.0, I2.first - s) : std::max(0.0, s - I2.second);
                    const double hi = side > 0 ? I2.second - s : s - I2.first;
                    if (!(hi > lo)) continue;
                    // |u| on [lo, hi], unit panels in |u|, Gauss in v = |u|^q on each
                    const auto up = panels(lo, hi);
                    for (std::size_t j = 0; j + 1 < up.size(); ++j) {
                        const double va = std::pow(up[j], q), vb = std::pow(up[j + 1], q);
                        for (int l = 0; l < order; ++l) {
                            const double v = va + (vb - va) * x[l];
                            const double u = std::pow(v, 1.0 / q);
                            out.push_back({s, s + side * u, ws * (vb - va) * w[l] / q});
                        }
                    }
                }
            }
        }
    }
    return out;
}

double overlap(std::pair<double, double> a, std::pair<double, double> b) {
    return std::max(0.0, std::min(a.second, b.second) - std::max(a.first, b.first));
}

// E prod f_i(Y_{t_i}) for arbitrary order of times
template <class Fn>
double ordered(std::span<const Observable> f, std::span<const double> t, Fn&& fn) {
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
    std::vector<Observable> fs;
    std::vector<double> ts;
    for (auto i : idx) {
        fs.push_back(f[i]);
        ts.push_back(t[i]);
    }
    return fn(std::span<const Observable>(fs), std::span<const double>(ts));
}

double moment_any(const ChainModel& c, std::span<const Observable> f, std::span<const double> t) {
    return ordered(f, t, [&](auto fs, auto ts) { return joint_moment(c, fs, ts); });
}

double cumulant_any(const ChainModel& c, std::span<const Observable> f, std::span<const double> t) {
    return ordered(f, t, [&](auto fs, auto ts) { return joint_cumulant(c, fs, ts); });
}

double partition_integrand(const ChainModel& c, std::span<const Observable> f, std::span<const double> t,
                           const std::vector<VertexPartition>& parts) {
    double total = 0.0;
    for (const auto& d : parts) {
        double prod = 1.0;
        for (const auto& b : d) {
            std::vector<Observable> fs;
            std::vector<double> ts;
            for (int i : b) {
                fs.push_back(f[i]);
                ts.push_back(t[i]);
            }
            prod *= cumulant_any(c, fs, ts);
        }
        total += prod;
    }
    return total;
}

// int k(u) |u|^{2H-2} omega(u) du over the lag u = t - s
double lag_integral(const std::function<double(double)>& k, std::pair<double, double> I1,
                    std::pair<double, double> I2, double H) {
    auto omega = [&](double u) { return overlap(I1, {I2.first - u, I2.second - u}); };
    const double q = 2.0 * H - 1.0;
    const double umin = I2.first - I1.second, umax = I2.second - I1.first;
    std::vector<double> br{0.0, I2.first - I1.first, I2.second - I1.second};
    for (double x = 1.0; x < std::max(std::abs(umin), std::abs(umax)); x *= 2.0) {
        br.push_back(x);
        br.push_back(-x);
    }
    const auto c = cuts(umin, umax, br);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        const double a = c[i], b = c[i + 1];
        double err = 0.0, v = 0.0;
        using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
        if (a == 0.0 || b == 0.0) {
            // v = |u|^q removes the singularity
            const double sgn = b > 0.0 ? 1.0 : -1.0, len = sgn > 0 ? b : -a;
            v = GK::integrate(
                [&](double vv) {
                    const double u = sgn * std::pow(vv, 1.0 / q);
                    return k(u) * omega(u) / q;
                },
                0.0, std::pow(len, q), 15, 1e-13, &err);
        } else {
            v = GK::integrate([&](double u) { return k(u) * std::pow(std::abs(u), 2 * H - 2) * omega(u); }, a, b, 15,
                              1e-13, &err);
        }
        if (!std::isfinite(v) || err > 1e-8 * (1.0 + std::abs(v)))
            throw numerical_error("main_term_check: lag quadrature did not converge");
        total += v;
    }
    return total;
}

}  // namespace

MainTermReport main_term_check(const ChainModel& chain, std::span<const Observable> f,
                               std::span<const std::pair<double, double>> intervals, double H,
                               bool with_partition_sum, int order) {
    if (!(H > 0.5 && H < 1.0)) throw config_error("main_term_check: needs H in (1/2, 1)");
    const std::size_t n = f.size();
    if (n != 2 && n != 4) throw config_error("main_term_check: p must be 1 or 2");
    if (intervals.size() != n) throw config_error("main_term_check: one interval per observable");
    if (order < 2 || order > 40) throw config_error("main_term_check: order must lie in [2, 40]");
    for (std::size_t i = 0; i < n; ++i) {
        if (f[i].size() != static_cast<Eigen::Index>(chain.size()))
            throw config_error("main_term_check: observable size mismatch");
        if (std::abs(chain.mean(f[i])) > 1e-10) throw config_error("main_term_check: observables must be centered");
        if (!(intervals[i].second > intervals[i].first)) throw config_error("main_term_check: empty interval");
    }
    MainTermReport r;
    r.p = static_cast<int>(n / 2);
    r.L = 1.0;
    for (const auto& I : intervals) r.L = std::max(r.L, I.second - I.first);
    r.main_term = 1.0;
    for (int k = 0; k < r.p; ++k) {
        r.overlaps.push_back(overlap(intervals[2 * k], intervals[2 * k + 1]));
        r.constants.push_back(c_raw(chain, H, f[2 * k + 1], f[2 * k]));
        r.main_term *= r.overlaps.back() * r.constants.back();
    }
    const auto parts = singleton_free_partitions(static_cast<int>(n));
    if (r.p == 1) {
        // E f_0(Y_0) f_1(Y_u) = sum_j c_j e^{-lambda_j |u|} per sign of u
        std::function<double(double)> k_moment;
        if (chain.diagonalizable()) {
            const auto& V = chain.eigenvectors();
            const auto& Vi = chain.eigenvectors_inv();
            const auto& lam = chain.eigenvalues();
            auto coeffs = [&](const Observable& a, const Observable& b) {
                const Eigen::VectorXcd left = V.transpose() * (chain.mu().array() * a.array()).matrix().cast<std::complex<double>>();
                const Eigen::VectorXcd right = Vi * b.cast<std::complex<double>>();
                return Eigen::VectorXcd(left.array() * right.array());
            };
            const Eigen::VectorXcd cp = coeffs(f[0], f[1]), cm = coeffs(f[1], f[0]);
            k_moment = [cp, cm, lam](double u) {
                const Eigen::VectorXcd& c = u >= 0.0 ? cp : cm;
                std::complex<double> acc = 0.0;
                for (Eigen::Index j = 0; j < c.size(); ++j) acc += c[j] * std::exp(-lam[j] * std::abs(u));
                return acc.real();
            };
        } else {
            k_moment = [&](double u) {
                const double t[2] = {0.0, u};
                return moment_any(chain, f, t);
            };
        }
        r.integral = lag_integral(k_moment, intervals[0], intervals[1], H);
        if (with_partition_sum) {
            auto k_part = [&](double u) {
                const double t[2] = {0.0, u};
                return partition_integrand(chain, f, t, parts);
            };
            r.partition_sum = lag_integral(k_part, intervals[0], intervals[1], H);
        }
    } else {
        const auto n1 = pair_rule(intervals[0], intervals[1], H, order);
        const auto n2 = pair_rule(intervals[2], intervals[3], H, order);
        double acc = 0.0, accp = 0.0;
        for (const auto& a : n1)
            for (const auto& b : n2) {
                const double t[4] = {a.s, a.t, b.s, b.t};
                acc += a.w * b.w * moment_any(chain, f, t);
                if (with_partition_sum) accp += a.w * b.w * partition_integrand(chain, f, t, parts);
            }
        r.integral = acc;
        r.partition_sum = accp;
    }
    r.remainder = r.integral - r.main_term;
    return r;
}

}  // namespace fracavg
