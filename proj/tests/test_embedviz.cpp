#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mtsk/embedviz.hpp"
#include "mtsk/io.hpp"
#include "mtsk/rng.hpp"
#include "mtsk/synthgen.hpp"
#include "test_util.hpp"

using namespace mtsk;

namespace {

Matrix three_blobs(int per_blob, std::uint64_t seed, std::vector<int>* truth) {
    Rng rng(seed);
    const double centers[3][2] = {{0.0, 10.0}, {10.0, -5.0}, {-10.0, -5.0}};
    Matrix x(3 * per_blob, 5);
    for (int b = 0; b < 3; ++b)
        for (int i = 0; i < per_blob; ++i) {
            const int row = b * per_blob + i;
            x(row, 0) = centers[b][0] + rng.normal();
            x(row, 1) = centers[b][1] + rng.normal();
            for (int j = 2; j < 5; ++j) x(row, j) = rng.normal();
            if (truth) truth->push_back(b);
        }
    return x;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("affinities are symmetric, normalized, and perplexity-calibrated") {
    std::vector<int> truth;
    Matrix x = three_blobs(20, 3, &truth);
    auto aff = viz::gaussian_affinities(x, 12.0);
    CHECK((aff.P - aff.P.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(aff.P.minCoeff() >= 0.0);
    CHECK(aff.P.sum() == doctest::Approx(1.0).epsilon(1e-9));
    for (Eigen::Index i = 0; i < aff.achieved_perplexity.size(); ++i)
        CHECK(std::abs(aff.achieved_perplexity(i) - 12.0) <= 1e-3);
}

TEST_CASE("three blobs separate in the embedding") {
    std::vector<int> truth;
    Matrix x = three_blobs(50, 1, &truth);
    viz::TsneConfig cfg;
    cfg.seed = 1;
    auto res = viz::tsne(x, cfg);
    CHECK(res.embedding.coords.allFinite());
    auto assign = testutil::kmeans(res.embedding.coords, 3, 99);
    CHECK(testutil::cluster_agreement(truth, assign, 3) >= 0.95);
}

TEST_CASE("duplicated rows become embedding twins") {
    std::vector<int> truth;
    Matrix x = three_blobs(12, 5, &truth);
    x.row(1) = x.row(0);  // exact duplicate
    viz::TsneConfig cfg;
    cfg.seed = 2;
    cfg.iters = 600;
    cfg.perplexity = 8.0;
    auto res = viz::tsne(x, cfg);
    const auto& y = res.embedding.coords;
    double d01 = (y.row(0) - y.row(1)).norm();
    for (Eigen::Index j = 2; j < y.rows(); ++j) {
        CHECK(d01 <= (y.row(0) - y.row(j)).norm());  // twin is the nearest neighbor
    }
}

TEST_CASE("KL decreases after the exaggeration phase (3-seed average)") {
    double kl300 = 0.0, kl1000 = 0.0;
    for (std::uint64_t s = 1; s <= 3; ++s) {
        std::vector<int> truth;
        Matrix x = three_blobs(15, 7 + s, &truth);
        viz::TsneConfig cfg;
        cfg.seed = s;
        cfg.perplexity = 10.0;
        auto res = viz::tsne(x, cfg);
        const auto at = [&](int iter) {
            for (std::size_t i = 0; i < res.trace_iters.size(); ++i)
                if (res.trace_iters[i] == iter) return res.trace_kl[i];
            REQUIRE(false);
            return 0.0;
        };
        kl300 += at(300);
        kl1000 += at(1000);
    }
    CHECK(kl1000 / 3.0 <= kl300 / 3.0);
}

TEST_CASE("perplexity precondition is enforced") {
    std::vector<int> truth;
    Matrix x = three_blobs(5, 9, &truth);  // n = 15
    viz::TsneConfig cfg;
    cfg.perplexity = 10.0;  // >= (15-1)/3
    CHECK_THROWS_WITH_AS(viz::tsne(x, cfg), doctest::Contains("perplexity"),
                         std::invalid_argument);
    Matrix tiny = x.topRows(8);
    viz::TsneConfig ok;
    CHECK_THROWS_AS(viz::tsne(tiny, ok), std::invalid_argument);  // n < 10
}

TEST_CASE("embedding geometry is invariant to a constant input shift") {
    std::vector<int> truth;
    Matrix x = three_blobs(20, 11, &truth);
    viz::TsneConfig cfg;
    cfg.seed = 4;
    cfg.iters = 500;
    cfg.perplexity = 15.0;
    auto a = viz::tsne(x, cfg);
    Matrix shifted = x;
    shifted.rowwise() += Eigen::RowVectorXd::Constant(x.cols(), 13.5);
    auto b = viz::tsne(shifted, cfg);
    std::vector<double> da, db;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
            da.push_back((a.embedding.coords.row(i) - a.embedding.coords.row(j)).norm());
            db.push_back((b.embedding.coords.row(i) - b.embedding.coords.row(j)).norm());
        }
    CHECK(pearson(da, db) >= 0.99);
}

namespace {

// two-cluster dataset whose first channel fires only in cluster A
struct SummaryFixture {
    MtsDataset ds;
    viz::Embedding2D emb;
    std::set<std::string> cluster_a;
};

SummaryFixture summary_fixture() {
    auto spec = synth::two_cluster_fixture(10, 0.0, 13);
    spec.binary_channel = {true, false, false, false, false};
    spec.clusters[0].mean_curves.row(0).setConstant(5.0);
    spec.clusters[1].mean_curves.row(0).setConstant(-5.0);
    spec.sigma(0) = 0.1;
    SummaryFixture f;
    auto [ds, truth] = synth::generate(spec);
    f.ds = std::move(ds);
    f.emb.method = "PCA";
    Rng rng(17);
    f.emb.coords.resize(f.ds.n(), 2);
    for (int i = 0; i < f.ds.n(); ++i) {
        f.emb.ids.push_back(f.ds.records[static_cast<std::size_t>(i)].id);
        f.emb.labels.push_back(f.ds.records[static_cast<std::size_t>(i)].label);
        f.emb.coords(i, 0) = truth[static_cast<std::size_t>(i)] == 0 ? -5.0 + rng.normal() : 5.0 + rng.normal();
        f.emb.coords(i, 1) = rng.normal();
        if (truth[static_cast<std::size_t>(i)] == 0)
            f.cluster_a.insert(f.ds.records[static_cast<std::size_t>(i)].id);
    }
    return f;
}

const viz::GroupStat& group_of(const viz::ClusterSummary& s, const std::string& name) {
    for (const auto& g : s.groups)
        if (g.group == name) return g;
    throw std::runtime_error("missing group " + name);
}

}  // namespace

TEST_CASE("cluster_summary splits percentage by label and selection") {
    auto f = summary_fixture();
    auto s = viz::cluster_summary(f.emb, f.ds, f.cluster_a);
    // cluster A carries label 0, so neg_in fires channel 1 at 100%
    CHECK(group_of(s, "neg_in").count == 10);
    CHECK(group_of(s, "neg_in").percent[0] == doctest::Approx(100.0));
    CHECK(group_of(s, "pos_out").count == 10);
    CHECK(group_of(s, "pos_out").percent[0] == doctest::Approx(0.0));
    CHECK(group_of(s, "pos_in").count == 0);
    CHECK(std::isnan(group_of(s, "pos_in").percent[0]));
    int total = 0;
    for (const auto& g : s.groups) total += g.count;
    CHECK(total == f.ds.n());

    // percentages stay in range on every attribute
    for (const auto& g : s.groups)
        for (double p : g.percent)
            if (!std::isnan(p)) {
                CHECK(p >= 0.0);
                CHECK(p <= 100.0);
            }
}

TEST_CASE("selecting every point reproduces whole-cohort percentages") {
    auto f = summary_fixture();
    std::set<std::string> all(f.emb.ids.begin(), f.emb.ids.end());
    auto s = viz::cluster_summary(f.emb, f.ds, all);
    CHECK(group_of(s, "pos_in").count == 10);
    CHECK(group_of(s, "neg_in").count == 10);
    CHECK(group_of(s, "pos_out").count == 0);
    CHECK(group_of(s, "neg_out").count == 0);
    CHECK(std::isnan(group_of(s, "pos_out").percent[0]));
    CHECK(group_of(s, "pos_in").percent[0] == doctest::Approx(0.0));
    CHECK(group_of(s, "neg_in").percent[0] == doctest::Approx(100.0));
}

TEST_CASE("cluster_summary rejects empty or unknown selections") {
    auto f = summary_fixture();
    CHECK_THROWS_WITH_AS(viz::cluster_summary(f.emb, f.ds, {}), doctest::Contains("empty"),
                         std::invalid_argument);
    CHECK_THROWS_AS(viz::cluster_summary(f.emb, f.ds, {"nope"}), std::invalid_argument);
}

TEST_CASE("selection files: id list and polygon") {
    const auto dir = testutil::scratch_dir("viz");
    auto f = summary_fixture();

    std::string id_list;
    for (const auto& id : f.cluster_a) id_list += id + "\n";
    write_file(dir + "/sel.txt", id_list);
    CHECK(viz::load_selection(dir + "/sel.txt", f.emb) == f.cluster_a);

    // cluster A sits around x = -5; a box catching x < 0 selects exactly it
    write_file(dir + "/poly.json",
               "{\"polygon\": [[-100, -100], [0, -100], [0, 100], [-100, 100]]}");
    CHECK(viz::load_selection(dir + "/poly.json", f.emb) == f.cluster_a);
}

TEST_CASE("embedding csv round-trips") {
    const auto dir = testutil::scratch_dir("viz_csv");
    auto f = summary_fixture();
    viz::save_embedding_csv(f.emb, dir + "/emb.csv");
    auto back = viz::load_embedding_csv(dir + "/emb.csv");
    CHECK(back.ids == f.emb.ids);
    CHECK(back.labels == f.emb.labels);
    CHECK(back.method == f.emb.method);
    CHECK((back.coords - f.emb.coords).cwiseAbs().maxCoeff() == 0.0);
}
