#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "fracavg/chain.hpp"

namespace fracavg {

struct GraphEdge {
    int minus = 0, plus = 0;  // e_-, e_+ (distinct)
    double alpha_minus = 0.0, alpha_plus = 0.0;
    double norm = 1.0;
};

class LabelledGraph {
public:
    LabelledGraph(int n_vertices, std::vector<GraphEdge> edges);

    int vertices() const { return n_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }
    // component id per vertex, ids 0..components()-1 in order of first vertex
    const std::vector<int>& component_of() const { return comp_; }
    int components() const { return n_comp_; }

private:
    int n_;
    std::vector<GraphEdge> edges_;
    std::vector<int> comp_;
    int n_comp_ = 0;
};

// "n" then one "u v alpha_minus alpha_plus" line per edge; '#' starts a comment.
LabelledGraph read_graph(std::istream& in);

using VertexPartition = std::vector<std::vector<int>>;

struct RegularityVerdict {
    bool regular = true;
    std::vector<int> witness;  // violating subset
};

// Power counting over all subsets with at least two vertices; |V| <= 20.
RegularityVerdict is_regular(const LabelledGraph& g);

bool is_tight(const LabelledGraph& g, const VertexPartition& p);
// Every tight partition except the single block; |V| <= 12.
std::vector<VertexPartition> tight_partitions(const LabelledGraph& g);

struct IntegrabilityVerdict {
    bool integrable = true;
    VertexPartition witness;
    double worst = 0.0;  // max over tight partitions of the left side
};

IntegrabilityVerdict is_integrable(const LabelledGraph& g);

struct BoundExponent {
    bool feasible = false;
    bool regular = false;
    double exponent = 0.0;  // m + sum beta
    VertexPartition witness;
};

// Large-scale bound L^{m + sum beta} when alpha_+ - beta is integrable.
BoundExponent bound_exponent(const LabelledGraph& g, std::span<const double> beta);

using Pairing = std::vector<std::pair<int, int>>;

struct CumulantGraph {
    LabelledGraph graph;
    int p = 0;
    VertexPartition delta;
    Pairing pairing;
    std::vector<int> pairing_edges;  // indices into graph.edges()
};

// Vertices 0..2p-1. Pairing edges carry (2H-2, 2H-2), edges inside a block
// of delta carry (0, -2).
CumulantGraph build_cumulant_graph(const VertexPartition& delta, const Pairing& pairing, double H);

struct ForestWeights {
    std::vector<double> beta;  // per edge
    std::vector<int> forest;   // chosen pairing edges (indices into edges)
    int quotient_vertices = 0;
    int m = 0;                 // components of the quotient graph
    double exponent = 0.0;     // m + (1 - kappa) |T|
    double bound = 0.0;        // p - kappa (p - m)
    BoundExponent certificate;
};

ForestWeights spanning_forest_beta(const CumulantGraph& cg, double kappa, double H);

// Quotient of the pairing edges by delta with self-loops removed, as block
// index pairs.
std::vector<std::pair<int, int>> quotient_edges(const CumulantGraph& cg);

std::vector<Pairing> pairings(int p);
std::vector<VertexPartition> singleton_free_partitions(int k);
std::vector<std::pair<VertexPartition, Pairing>> enumerate_pairings_partitions(int p);

struct MainTermReport {
    int p = 0;
    double L = 0.0;
    double integral = 0.0;       // I_{2p}
    double main_term = 0.0;      // prod overlap_k C_raw(f_2k, f_2k-1)
    double remainder = 0.0;
    double partition_sum = 0.0;  // sum over singleton-free Delta of I_Delta (if requested)
    std::vector<double> overlaps, constants;
};

// I_{2p} for p in {1, 2}. p = 1 integrates over the lag with the overlap
// length as weight; p = 2 uses a tensor Gauss-Legendre rule (order per panel)
// with the singular lag substituted away.
MainTermReport main_term_check(const ChainModel& chain, std::span<const Observable> f,
                               std::span<const std::pair<double, double>> intervals, double H,
                               bool with_partition_sum = false, int order = 8);

}  // namespace fracavg
