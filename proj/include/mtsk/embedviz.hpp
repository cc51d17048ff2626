#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "mtsk/dataset.hpp"

namespace mtsk::viz {

struct TsneConfig {
    double perplexity = 30.0;
    int iters = 1000;
    double exaggeration = 12.0;  // applied for the first exaggeration_iters
    int exaggeration_iters = 250;
    double learning_rate = 200.0;
    double momentum = 0.5;
    double final_momentum = 0.8;  // from momentum_switch_iter on
    int momentum_switch_iter = 250;
    std::uint64_t seed = 0;
};

struct Embedding2D {
    Matrix coords;  // n x 2
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::string method;
};

struct TsneResult {
    Embedding2D embedding;
    std::vector<int> trace_iters;   // checkpoints (every 50 iterations)
    std::vector<double> trace_kl;   // KL(P||Q) against the unexaggerated P
};

// Symmetric affinities with per-point Gaussian bandwidths calibrated by
// bisection to the target perplexity.
struct Affinities {
    Matrix P;  // symmetric, non-negative, sums to 1
    Vector achieved_perplexity;  // conditional perplexity per point
};
Affinities gaussian_affinities(const Matrix& X, double perplexity);

// Exact O(n^2) t-SNE, deterministic per seed.
TsneResult tsne(const Matrix& X, const TsneConfig& cfg);

// Per-attribute percentage of records with any observed nonzero value, for the
// four groups (label 1/0) x (inside/outside the selection). Empty groups get
// count 0 and NaN percentages.
struct GroupStat {
    std::string group;  // pos_in, pos_out, neg_in, neg_out
    int count = 0;
    std::vector<double> percent;  // per attribute
};
struct ClusterSummary {
    std::vector<std::string> attributes;
    std::vector<GroupStat> groups;  // always 4, fixed order
};
ClusterSummary cluster_summary(const Embedding2D& emb, const MtsDataset& ds,
                               const std::set<std::string>& selection);

void save_embedding_csv(const Embedding2D& emb, const std::string& path);
Embedding2D load_embedding_csv(const std::string& path);
void save_summary_csv(const ClusterSummary& s, const std::string& path);

// Selection files: one id per line, or {"polygon": [[x,y],...]} applied to the
// embedding coordinates (ray casting).
std::set<std::string> load_selection(const std::string& path, const Embedding2D& emb);

}  // namespace mtsk::viz
