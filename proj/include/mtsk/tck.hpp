#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtsk/dataset.hpp"

namespace mtsk::tck {

struct EmSettings {
    double tol = 1e-6;       // relative log-posterior change
    int max_iter = 100;
    double var_floor = 1e-6;
    double a0 = 1.0;  // inverse squared length-scale of the mean smoothing prior
    double b0 = 1.0;  // scale of the mean smoothing prior
    double n0 = -1.0; // variance prior strength; < 0 selects 0.01 * |record subset|
};

// One ensemble member's sampled subset: component count, record subset,
// attribute subset, contiguous time segment, and its private RNG seed.
struct PartitionConfig {
    int components = 2;
    std::vector<int> record_subset;
    std::vector<int> attribute_subset;
    int t_begin = 0;  // inclusive, 0-based
    int t_end = 0;    // inclusive
    std::uint64_t init_seed = 0;

    int segment_len() const { return t_end - t_begin + 1; }
};

// Diagonal-covariance mixture with time-dependent means, fitted by MAP-EM.
// Means are per (component, attribute) curves over the segment; variances are
// per (component, attribute), constant over time.
struct GmmPartition {
    PartitionConfig config;
    Vector weights;             // c, on the simplex
    std::vector<Matrix> means;  // c entries, V x L
    Matrix variances;           // c x V, >= variance floor
    bool converged = false;
    int n_iter = 0;
    int reseed_count = 0;
    std::vector<double> log_posterior_history;  // one entry per iteration
    std::vector<int> reseed_iterations;         // iterations where a component was re-seeded
    Matrix train_posteriors;  // n_train x c, filled by build_tck
};

struct TckKernel {
    Matrix K;  // n x n, symmetric PSD
    std::vector<GmmPartition> ensemble;
    std::vector<std::string> train_ids;
    bool normalized = true;
    Vector train_self;  // unnormalized self-similarities (diagonal before normalization)
    int attrs = 0;
    int window_len = 0;
};

struct SubsetRules {
    double record_frac = 0.8;   // record subset size = ceil(record_frac * n)
    double attr_min_frac = 0.2; // attribute subset size >= max(attr_min, ceil(frac * D))
    int attr_min = 2;
    int seg_min = 6;            // segment length >= min(seg_min, T)
};

struct TckOptions {
    int C = 40;  // max mixture components; c ranges over 2..C
    int R = 30;  // randomizations per component count
    EmSettings em;
    SubsetRules rules;
    bool normalize = true;    // scale to unit diagonal
    bool drop_failed = false; // drop failed partitions with a warning instead of throwing
    int threads = 0;          // 0 = thread_count()
};

// Exactly (C-1)*R configs, one per (c, r), each drawn from an RNG derived from
// (master_seed, c, r); identical lists for identical seeds. Component counts
// exceeding the record subset size are clamped with a warning.
std::vector<PartitionConfig> sample_partition_configs(int n, int D, int T, int C, int R,
                                                      std::uint64_t master_seed,
                                                      const SubsetRules& rules = {});

// MAP-EM on the config's subsets. Only mask-1 cells enter the likelihood.
// The log posterior (up to additive constants) is recorded per iteration and
// is non-decreasing between re-seed events.
GmmPartition fit_map_em(const MtsDataset& ds, const PartitionConfig& cfg, const EmSettings& em);

// Component-membership probabilities of one record under a fitted partition,
// using the record's observed cells inside the partition's subsets. A record
// with no observed cell there gets the component weights.
Vector posterior(const MtsRecord& rec, const GmmPartition& gmm);

// K[i][j] = sum over partitions of <posterior_i, posterior_j> for all training
// records, normalized to unit diagonal when opt.normalize is set. Partition
// fits run in parallel; the kernel sum is accumulated in a fixed order, so the
// result is bitwise identical for any thread count.
TckKernel build_tck(const MtsDataset& train, const TckOptions& opt, std::uint64_t master_seed);

// Out-of-sample rows: n_test x n_train posterior inner-product sums, scaled by
// the square roots of both sides' self-similarities when the kernel is
// normalized.
Matrix kernel_rows(const TckKernel& kernel, const MtsDataset& test);

void save_tck(const TckKernel& kernel, const std::string& path);
TckKernel load_tck(const std::string& path);

}  // namespace mtsk::tck
