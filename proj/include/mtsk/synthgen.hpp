#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mtsk/dataset.hpp"

namespace mtsk::synth {

struct ClusterSpec {
    int label = 0;
    Matrix mean_curves;  // D x T time-dependent means
};

struct SynthSpec {
    std::vector<ClusterSpec> clusters;
    int n_per_cluster = 100;
    Vector sigma;                      // per-attribute noise std
    std::vector<bool> binary_channel;  // threshold draws at 0.5 into {0,1}
    double missing_rate = 0.0;         // MCAR per cell
    std::uint64_t seed = 0;

    int attrs() const { return clusters.empty() ? 0 : static_cast<int>(clusters[0].mean_curves.rows()); }
    int steps() const { return clusters.empty() ? 0 : static_cast<int>(clusters[0].mean_curves.cols()); }
    void validate() const;
};

// Draws each record from its cluster's Gaussian, masks cells MCAR, returns the
// dataset plus the ground-truth cluster index per record.
std::pair<MtsDataset, std::vector<int>> generate(const SynthSpec& spec);

// Benchmark fixture: two clusters, D=5, T=7, sinusoidal vs linear mean curves,
// sigma 0.5, labels = cluster index.
SynthSpec two_cluster_fixture(int n_per_cluster, double missing_rate, std::uint64_t seed);

void save_ground_truth_csv(const MtsDataset& ds, const std::vector<int>& clusters,
                           const std::string& path);

SynthSpec spec_from_json_file(const std::string& path);
void save_spec_json(const SynthSpec& spec, const std::string& path);

}  // namespace mtsk::synth
