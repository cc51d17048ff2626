#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mtsk/dimred.hpp"
#include "mtsk/io.hpp"
#include "mtsk/rng.hpp"
#include "mtsk/synthgen.hpp"
#include "mtsk/tck.hpp"
#include "test_util.hpp"

using namespace mtsk;
using dimred::KpcaModel;
using dimred::PcaModel;

namespace {

Matrix random_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal();
    return x;
}

double column_sign_distance(const Matrix& a, const Matrix& b) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    double worst = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double same = (a.col(j) - b.col(j)).cwiseAbs().maxCoeff();
        const double flip = (a.col(j) + b.col(j)).cwiseAbs().maxCoeff();
        worst = std::max(worst, std::min(same, flip));
    }
    return worst;
}

}  // namespace

TEST_CASE("pca on collinear data keeps one component along the line") {
    Matrix x(6, 2);
    for (int i = 0; i < 6; ++i) {
        x(i, 0) = i * 1.0;
        x(i, 1) = 2.0 * i;  // y = 2x
    }
    auto m = dimred::pca_fit(x, 0.99);
    CHECK(m.k() == 1);
    const Vector dir = m.components.col(0);
    const double cosine = std::abs(dir.dot(Vector(Eigen::Vector2d(1.0, 2.0).normalized())));
    CHECK(cosine == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.captured_variance_fraction == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("full-rank pca round-trips the data") {
    Matrix x = random_matrix(30, 6, 5);
    auto m = dimred::pca_fit_k(x, 6);
    Matrix scores = dimred::pca_transform(m, x);
    Matrix rec = scores * m.components.transpose();
    rec.rowwise() += m.mean.transpose();
    CHECK((rec - x).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("pca eigenvalues match the independent jacobi solver") {
    Matrix x = random_matrix(50, 10, 7);
    auto m = dimred::pca_fit(x, 0.99);
    Matrix centered = x.rowwise() - x.colwise().mean();
    Matrix cov = centered.transpose() * centered / (x.rows() - 1.0);
    Vector values;
    Matrix vectors;
    testutil::jacobi_eigen(cov, values, vectors);
    for (Eigen::Index i = 0; i < values.size(); ++i)
        CHECK(m.eigenvalues(i) == doctest::Approx(values(i)).epsilon(1e-8));
    // cumulative variance share at the chosen k agrees
    const double oracle_share = values.head(m.k()).sum() / values.sum();
    CHECK(m.captured_variance_fraction == doctest::Approx(oracle_share).epsilon(1e-8));
}

TEST_CASE("pca rejects rank-0 input") {
    Matrix x = Matrix::Ones(8, 3);
    CHECK_THROWS_WITH_AS(dimred::pca_fit(x, 0.5), doctest::Contains("degenerate"),
                         std::runtime_error);
}

TEST_CASE("pca_transform basics") {
    Matrix x = random_matrix(20, 4, 9);
    auto m = dimred::pca_fit_k(x, 3);
    Matrix scores = dimred::pca_transform(m, x);

    // the mean row maps to the origin
    Matrix mean_row = x.colwise().mean();
    CHECK(dimred::pca_transform(m, mean_row).cwiseAbs().maxCoeff() <= 1e-10);

    // training scores are reproducible and centered
    Matrix scores2 = dimred::pca_transform(m, x);
    CHECK((scores - scores2).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(scores.colwise().mean().cwiseAbs().maxCoeff() <= 1e-9);

    // out-of-sample row equals the explicit dot products
    Matrix row = random_matrix(1, 4, 10);
    Matrix proj = dimred::pca_transform(m, row);
    for (int j = 0; j < 3; ++j) {
        double manual = 0.0;
        for (int f = 0; f < 4; ++f) manual += (row(0, f) - m.mean(f)) * m.components(f, j);
        CHECK(proj(0, j) == doctest::Approx(manual).epsilon(1e-12));
    }

    CHECK_THROWS_WITH_AS(dimred::pca_transform(m, random_matrix(3, 5, 11)),
                         doctest::Contains("shape"), std::invalid_argument);
}

TEST_CASE("pca reconstruction error is non-increasing in k") {
    Matrix x = random_matrix(40, 8, 13);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 8; ++k) {
        auto m = dimred::pca_fit_k(x, k);
        Matrix scores = dimred::pca_transform(m, x);
        Matrix rec = scores * m.components.transpose();
        rec.rowwise() += m.mean.transpose();
        const double err = (rec - x).squaredNorm();
        CHECK(err <= prev + 1e-9);
        prev = err;
    }
}

TEST_CASE("linear-kernel kpca reproduces pca scores up to sign") {
    Matrix x = random_matrix(25, 6, 15);
    Matrix centered = x.rowwise() - x.colwise().mean();
    const int k = 4;
    auto pca = dimred::pca_fit_k(centered, k);
    Matrix pca_scores = dimred::pca_transform(pca, centered);
    auto kpca = dimred::kpca_fit_polynomial(centered, k, 1.0, 1, 0.0);
    Matrix kpca_scores = dimred::kpca_transform(kpca, centered);
    CHECK(column_sign_distance(pca_scores, kpca_scores) <= 1e-6);
}

TEST_CASE("kpca on a tck kernel maps duplicate records identically") {
    auto spec = synth::two_cluster_fixture(8, 0.0, 17);
    auto [ds, truth] = synth::generate(spec);
    ds.records[3] = ds.records[0];
    ds.records[3].id = "dup";
    tck::TckOptions opt;
    opt.C = 3;
    opt.R = 2;
    auto kernel = tck::build_tck(ds, opt, 19);
    auto m = dimred::kpca_fit_precomputed(kernel.K, 5);
    Matrix scores = dimred::kpca_transform(m, kernel.K);
    CHECK((scores.row(0) - scores.row(3)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("kpca eigenvalues match the independent jacobi solver on a 20x20 kernel") {
    Matrix x = random_matrix(20, 5, 21);
    Matrix K = x * x.transpose();
    auto m = dimred::kpca_fit_precomputed(K, 10);

    Matrix H = Matrix::Identity(20, 20) - Matrix::Constant(20, 20, 1.0 / 20.0);
    Matrix Kc = H * K * H;
    Vector values;
    Matrix vectors;
    testutil::jacobi_eigen(Kc, values, vectors);
    for (int i = 0; i < m.k; ++i)
        CHECK(m.eigenvalues(i) == doctest::Approx(values(i)).epsilon(1e-8));
}

TEST_CASE("kpca reduces k when positive eigenvalues run out") {
    Matrix x = random_matrix(12, 3, 23);  // kernel rank <= 3
    Matrix K = x * x.transpose();
    auto m = dimred::kpca_fit_precomputed(K, 10);
    CHECK(m.k <= 3);
    CHECK(m.eigenvalues.minCoeff() > 0.0);
}

TEST_CASE("kpca_transform reproduces training projections and handles test rows") {
    Matrix x = random_matrix(18, 4, 25);
    Matrix K = x * x.transpose();
    auto m = dimred::kpca_fit_precomputed(K, 5);
    Matrix train_scores = dimred::kpca_transform(m, K);

    // a test row equal to training row i projects onto row i's scores
    Matrix row = K.row(6);
    Matrix proj = dimred::kpca_transform(m, row);
    CHECK((proj - train_scores.row(6)).cwiseAbs().maxCoeff() <= 1e-8);

    // manual centering + projection of a random test row
    Matrix test_x = random_matrix(1, 4, 27);
    Matrix test_row = test_x * x.transpose();
    Matrix got = dimred::kpca_transform(m, test_row);
    Vector centered(18);
    const double row_mean = test_row.mean();
    for (int j = 0; j < 18; ++j)
        centered(j) = test_row(0, j) - row_mean - m.col_mean(j) + m.grand_mean;
    for (int c = 0; c < m.k; ++c) {
        double manual = centered.dot(m.alphas.col(c));
        CHECK(got(0, c) == doctest::Approx(manual).epsilon(1e-10));
    }

    CHECK_THROWS_WITH_AS(dimred::kpca_transform(m, random_matrix(2, 7, 29)),
                         doctest::Contains("shape"), std::invalid_argument);
}

TEST_CASE("kpca projections are invariant to a constant kernel shift") {
    Matrix x = random_matrix(15, 4, 31);
    Matrix K = x * x.transpose();
    auto a = dimred::kpca_fit_precomputed(K, 4);
    auto b = dimred::kpca_fit_precomputed((K.array() + 3.7).matrix(), 4);
    Matrix sa = dimred::kpca_transform(a, K);
    Matrix sb = dimred::kpca_transform(b, (K.array() + 3.7).matrix());
    CHECK(column_sign_distance(sa, sb) <= 1e-8);
}

TEST_CASE("kpca rejects an asymmetric kernel") {
    Matrix K = random_matrix(6, 6, 33);
    CHECK_THROWS_WITH_AS(dimred::kpca_fit_precomputed(K, 2), doctest::Contains("symmetric"),
                         std::invalid_argument);
}

TEST_CASE("model json round-trips preserve transforms") {
    Matrix x = random_matrix(16, 5, 35);
    auto pca = dimred::pca_fit(x, 0.95);
    auto pca_back = dimred::pca_from_json(dimred::pca_to_json(pca));
    CHECK((dimred::pca_transform(pca, x) - dimred::pca_transform(pca_back, x))
              .cwiseAbs()
              .maxCoeff() == 0.0);

    auto kpca = dimred::kpca_fit_polynomial(x, 3, 0.5, 2, 1.0);
    auto kpca_back = dimred::kpca_from_json(dimred::kpca_to_json(kpca));
    CHECK((dimred::kpca_transform(kpca, x) - dimred::kpca_transform(kpca_back, x))
              .cwiseAbs()
              .maxCoeff() == 0.0);
}
