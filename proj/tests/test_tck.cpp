#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cstring>

#include "mtsk/synthgen.hpp"
#include "mtsk/tck.hpp"
#include "test_util.hpp"

using namespace mtsk;
using tck::EmSettings;
using tck::GmmPartition;
using tck::PartitionConfig;
using tck::TckKernel;
using tck::TckOptions;

namespace {

// Direct responsibility formula with plain probability products, independent
// of the library's log-space path.
Vector direct_posterior(const MtsRecord& rec, const GmmPartition& p) {
    const auto& cfg = p.config;
    const int c = static_cast<int>(p.weights.size());
    Vector lik = Vector::Zero(c);
    bool any = false;
    for (int k = 0; k < c; ++k) {
        double prod = p.weights(k);
        for (std::size_t v = 0; v < cfg.attribute_subset.size(); ++v) {
            const int attr = cfg.attribute_subset[v];
            for (int l = 0; l < cfg.segment_len(); ++l) {
                const int t = cfg.t_begin + l;
                if (!rec.mask(attr, t)) continue;
                any = true;
                const double var = p.variances(k, static_cast<Eigen::Index>(v));
                const double d = rec.values(attr, t) - p.means[static_cast<std::size_t>(k)](
                                                           static_cast<Eigen::Index>(v), l);
                prod *= std::exp(-d * d / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
            }
        }
        lik(k) = prod;
    }
    if (!any) return p.weights;
    return lik / lik.sum();
}

Matrix brute_force_kernel(const MtsDataset& ds, const TckKernel& kernel) {
    const int n = ds.n();
    Matrix K = Matrix::Zero(n, n);
    for (const auto& part : kernel.ensemble) {
        Matrix P(n, part.weights.size());
        for (int i = 0; i < n; ++i)
            P.row(i) = direct_posterior(ds.records[static_cast<std::size_t>(i)], part).transpose();
        K += P * P.transpose();
    }
    if (kernel.normalized) {
        Vector d = K.diagonal().array().sqrt();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) K(i, j) /= d(i) * d(j);
    }
    return K;
}

PartitionConfig full_partition(const MtsDataset& ds, int c, std::uint64_t seed) {
    PartitionConfig cfg;
    cfg.components = c;
    for (int i = 0; i < ds.n(); ++i) cfg.record_subset.push_back(i);
    for (int a = 0; a < ds.attrs(); ++a) cfg.attribute_subset.push_back(a);
    cfg.t_begin = 0;
    cfg.t_end = ds.window_len - 1;
    cfg.init_seed = seed;
    return cfg;
}

void check_monotone(const GmmPartition& p) {
    const auto& h = p.log_posterior_history;
    for (std::size_t i = 1; i < h.size(); ++i) {
        // skip across re-seed events, which reset the objective
        if (std::find(p.reseed_iterations.begin(), p.reseed_iterations.end(),
                      static_cast<int>(i + 1)) != p.reseed_iterations.end())
            continue;
        CHECK(h[i] >= h[i - 1] - 1e-8);
    }
}

double em_cluster_accuracy(std::uint64_t seed, double missing_rate) {
    auto spec = synth::two_cluster_fixture(25, missing_rate, seed);
    auto [ds, truth] = synth::generate(spec);
    auto part = tck::fit_map_em(ds, full_partition(ds, 2, seed), EmSettings{});
    check_monotone(part);
    std::vector<int> assign(static_cast<std::size_t>(ds.n()));
    for (int i = 0; i < ds.n(); ++i) {
        Vector p = tck::posterior(ds.records[static_cast<std::size_t>(i)], part);
        assign[static_cast<std::size_t>(i)] = p(1) > p(0) ? 1 : 0;
    }
    return testutil::cluster_agreement(truth, assign, 2);
}

}  // namespace

TEST_CASE("sample_partition_configs cardinality and determinism") {
    auto configs = tck::sample_partition_configs(100, 5, 7, 40, 30, 1);
    CHECK(configs.size() == 1170);  // (40-1) * 30

    auto one = tck::sample_partition_configs(10, 5, 7, 2, 1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].components == 2);
    CHECK(one[0].record_subset.size() == 8);  // ceil(0.8 * 10)

    auto again = tck::sample_partition_configs(100, 5, 7, 40, 30, 1);
    for (std::size_t q = 0; q < configs.size(); ++q) {
        CHECK(configs[q].record_subset == again[q].record_subset);
        CHECK(configs[q].attribute_subset == again[q].attribute_subset);
        CHECK(configs[q].t_begin == again[q].t_begin);
        CHECK(configs[q].t_end == again[q].t_end);
        CHECK(configs[q].init_seed == again[q].init_seed);
    }

    for (const auto& cfg : configs) {
        CHECK(cfg.attribute_subset.size() >= 2);
        CHECK(cfg.segment_len() >= 6);
        CHECK(cfg.components <= static_cast<int>(cfg.record_subset.size()));
    }
}

TEST_CASE("sample_partition_configs rejects n < C") {
    CHECK_THROWS_WITH_AS(tck::sample_partition_configs(5, 5, 7, 10, 3, 1),
                         doctest::Contains("ensemble-size"), std::invalid_argument);
}

TEST_CASE("map-em separates two clean clusters") {
    CHECK(em_cluster_accuracy(17, 0.0) >= 0.99);
}

TEST_CASE("map-em recovers clusters under 30% MCAR (5-seed average)") {
    double sum = 0.0;
    for (std::uint64_t s = 1; s <= 5; ++s) sum += em_cluster_accuracy(s, 0.3);
    CHECK(sum / 5.0 >= 0.95);
}

TEST_CASE("single-component fit gives unit weight and smoothed means") {
    auto spec = synth::two_cluster_fixture(10, 0.1, 3);
    auto [ds, truth] = synth::generate(spec);
    auto part = tck::fit_map_em(ds, full_partition(ds, 1, 3), EmSettings{});
    REQUIRE(part.weights.size() == 1);
    CHECK(part.weights(0) == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < ds.n(); ++i) {
        Vector p = tck::posterior(ds.records[static_cast<std::size_t>(i)], part);
        CHECK(p(0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    check_monotone(part);
    CHECK(part.means[0].allFinite());
}

TEST_CASE("posterior concentrates on a matching component") {
    GmmPartition p;
    p.config.components = 2;
    p.config.record_subset = {0};
    p.config.attribute_subset = {0};
    p.config.t_begin = 0;
    p.config.t_end = 1;
    p.weights = Vector::Constant(2, 0.5);
    p.means = {Matrix::Zero(1, 2), Matrix::Constant(1, 2, 5.0)};
    p.variances = Matrix::Constant(2, 1, 1e-4);

    MtsRecord rec;
    rec.id = "x";
    rec.values = Matrix::Zero(1, 2);
    rec.mask = MaskMatrix::Constant(1, 2, 1);
    Vector post = tck::posterior(rec, p);
    CHECK(post(0) >= 0.99);
    CHECK(post.sum() == doctest::Approx(1.0).epsilon(1e-9));

    // fully-unobserved record returns the weights exactly
    rec.mask.setConstant(0);
    rec.values.setConstant(0.0);
    Vector fallback = tck::posterior(rec, p);
    CHECK(fallback(0) == 0.5);
    CHECK(fallback(1) == 0.5);
}

TEST_CASE("posterior normalizes on arbitrary records") {
    auto spec = synth::two_cluster_fixture(12, 0.25, 8);
    auto [ds, truth] = synth::generate(spec);
    auto part = tck::fit_map_em(ds, full_partition(ds, 3, 8), EmSettings{});
    for (const auto& rec : ds.records) {
        Vector p = tck::posterior(rec, part);
        CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(p.minCoeff() >= 0.0);
    }
}

TEST_CASE("duplicate records have unit normalized similarity") {
    auto spec = synth::two_cluster_fixture(8, 0.0, 4);
    auto [ds, truth] = synth::generate(spec);
    ds.records[1] = ds.records[0];
    ds.records[1].id = "copy";
    TckOptions opt;
    opt.C = 3;
    opt.R = 2;
    auto kernel = tck::build_tck(ds, opt, 5);
    CHECK(kernel.K(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kernel separates clusters and is symmetric PSD") {
    auto spec = synth::two_cluster_fixture(15, 0.1, 6);
    auto [ds, truth] = synth::generate(spec);
    TckOptions opt;
    opt.C = 5;
    opt.R = 3;
    auto kernel = tck::build_tck(ds, opt, 7);
    for (const auto& part : kernel.ensemble) check_monotone(part);

    const int n = ds.n();
    double within = 0.0, between = 0.0;
    int nw = 0, nb = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (truth[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(j)]) {
                within += kernel.K(i, j);
                ++nw;
            } else {
                between += kernel.K(i, j);
                ++nb;
            }
        }
    CHECK(within / nw > between / nb);

    CHECK((kernel.K - kernel.K.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(kernel.K);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * eig.eigenvalues().maxCoeff());
    for (int i = 0; i < n; ++i) CHECK(kernel.K(i, i) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kernel matches the brute-force oracle") {
    auto spec = synth::two_cluster_fixture(5, 0.2, 11);
    auto [ds, truth] = synth::generate(spec);  // n = 10
    TckOptions opt;
    opt.C = 3;
    opt.R = 2;
    auto kernel = tck::build_tck(ds, opt, 13);
    Matrix oracle = brute_force_kernel(ds, kernel);
    CHECK((kernel.K - oracle).cwiseAbs().maxCoeff() <= 1e-9);

    // unnormalized kernels agree too, and entries stay within [0, Q]
    opt.normalize = false;
    auto raw = tck::build_tck(ds, opt, 13);
    Matrix raw_oracle = brute_force_kernel(ds, raw);
    CHECK((raw.K - raw_oracle).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(raw.K.minCoeff() >= 0.0);
    CHECK(raw.K.maxCoeff() <= static_cast<double>(raw.ensemble.size()) + 1e-12);
}

TEST_CASE("build_tck is bitwise independent of the thread count") {
    auto spec = synth::two_cluster_fixture(12, 0.15, 14);
    auto [ds, truth] = synth::generate(spec);
    TckOptions opt;
    opt.C = 4;
    opt.R = 2;
    opt.threads = 1;
    auto serial = tck::build_tck(ds, opt, 21);
    opt.threads = 4;
    auto parallel = tck::build_tck(ds, opt, 21);
    REQUIRE(serial.K.size() == parallel.K.size());
    CHECK(std::memcmp(serial.K.data(), parallel.K.data(),
                      sizeof(double) * static_cast<std::size_t>(serial.K.size())) == 0);
    for (std::size_t q = 0; q < serial.ensemble.size(); ++q) {
        CHECK(std::memcmp(serial.ensemble[q].weights.data(), parallel.ensemble[q].weights.data(),
                          sizeof(double) *
                              static_cast<std::size_t>(serial.ensemble[q].weights.size())) == 0);
    }
}

TEST_CASE("kernel_rows reproduces training rows and classifies test clusters") {
    auto spec = synth::two_cluster_fixture(45, 0.1, 19);
    auto [ds, truth] = synth::generate(spec);
    auto [train, test] = split_train_test(ds, 0.67, 3);
    TckOptions opt;
    opt.C = 5;
    opt.R = 3;
    auto kernel = tck::build_tck(train, opt, 23);

    // a test set equal to the training set reproduces K row-for-row
    Matrix rows = tck::kernel_rows(kernel, train);
    CHECK((rows - kernel.K).cwiseAbs().maxCoeff() <= 1e-6);

    // nearest training neighbor shares the cluster
    Matrix test_rows = tck::kernel_rows(kernel, test);
    const auto train_labels = labels_of(train);
    int hits = 0;
    for (int r = 0; r < test.n(); ++r) {
        Eigen::Index arg;
        test_rows.row(r).maxCoeff(&arg);
        if (train_labels[static_cast<std::size_t>(arg)] ==
            test.records[static_cast<std::size_t>(r)].label)
            ++hits;
    }
    CHECK(static_cast<double>(hits) / test.n() >= 0.95);
}

TEST_CASE("kernel_rows handles an all-missing record via the prior") {
    auto spec = synth::two_cluster_fixture(8, 0.0, 25);
    auto [ds, truth] = synth::generate(spec);
    TckOptions opt;
    opt.C = 3;
    opt.R = 2;
    auto kernel = tck::build_tck(ds, opt, 29);

    MtsDataset test;
    test.attribute_names = ds.attribute_names;
    test.window_len = ds.window_len;
    MtsRecord blank;
    blank.id = "blank";
    blank.values = Matrix::Zero(ds.attrs(), ds.window_len);
    blank.mask = MaskMatrix::Zero(ds.attrs(), ds.window_len);
    test.records.push_back(blank);
    Matrix rows = tck::kernel_rows(kernel, test);
    CHECK(rows.allFinite());
    CHECK(rows.maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("kernel_rows rejects mismatched dimensions") {
    auto spec = synth::two_cluster_fixture(8, 0.0, 31);
    auto [ds, truth] = synth::generate(spec);
    TckOptions opt;
    opt.C = 3;
    opt.R = 2;
    auto kernel = tck::build_tck(ds, opt, 37);
    MtsDataset bad = ds;
    bad.window_len = 5;
    for (auto& r : bad.records) {
        r.values = Matrix::Zero(ds.attrs(), 5);
        r.mask = MaskMatrix::Zero(ds.attrs(), 5);
    }
    CHECK_THROWS_WITH_AS(tck::kernel_rows(kernel, bad), doctest::Contains("shape"),
                         std::invalid_argument);
}

TEST_CASE("tck model file round-trips") {
    const auto dir = testutil::scratch_dir("tck_io");
    auto spec = synth::two_cluster_fixture(8, 0.2, 41);
    auto [ds, truth] = synth::generate(spec);
    TckOptions opt;
    opt.C = 3;
    opt.R = 2;
    auto kernel = tck::build_tck(ds, opt, 43);
    tck::save_tck(kernel, dir + "/m.bin");
    auto back = tck::load_tck(dir + "/m.bin");
    CHECK(std::memcmp(kernel.K.data(), back.K.data(),
                      sizeof(double) * static_cast<std::size_t>(kernel.K.size())) == 0);
    CHECK(back.train_ids == kernel.train_ids);
    Matrix rows_a = tck::kernel_rows(kernel, ds);
    Matrix rows_b = tck::kernel_rows(back, ds);
    CHECK(std::memcmp(rows_a.data(), rows_b.data(),
                      sizeof(double) * static_cast<std::size_t>(rows_a.size())) == 0);
}
