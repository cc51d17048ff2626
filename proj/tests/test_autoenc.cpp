#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mtsk/autoenc.hpp"
#include "mtsk/rng.hpp"
#include "test_util.hpp"

using namespace mtsk;

namespace {

// latent 2-factor data scaled into [0,1]
Matrix rank2_data(int n, int p, std::uint64_t seed) {
    Rng rng(seed);
    Matrix z(n, 2), load(2, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 2; ++j) z(i, j) = rng.normal();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < p; ++j) load(i, j) = rng.normal();
    Matrix x = z * load;
    for (int j = 0; j < p; ++j) {
        const double lo = x.col(j).minCoeff(), hi = x.col(j).maxCoeff();
        x.col(j) = (x.col(j).array() - lo) / (hi - lo);
    }
    return x;
}

}  // namespace

TEST_CASE("activation spot identities") {
    CHECK(nn::activate(1.7, nn::Activation::leaky_relu) == 1.7);
    CHECK(nn::activate(0.0, nn::Activation::leaky_relu) == 0.0);
    CHECK(nn::activate(-2.0, nn::Activation::leaky_relu) == doctest::Approx(-0.02));
    CHECK(nn::activate(0.0, nn::Activation::sigmoid) == doctest::Approx(0.5));
    CHECK(nn::activate_grad(0.0, nn::Activation::sigmoid) == doctest::Approx(0.25));
}

TEST_CASE("constant data is memorized quickly") {
    Matrix x = Matrix::Constant(100, 8, 0.6);
    nn::TrainConfig cfg;
    cfg.epochs = 200;
    cfg.seed = 3;
    auto m = ae::ae_train(x, ae::autoencoder_spec(8, {8}, 2), cfg);
    CHECK(m.history.back() <= 1e-3);
    CHECK(m.history.back() <= m.history.front());
    for (double v : m.history) CHECK(std::isfinite(v));
}

TEST_CASE("rank-2 data compresses through a 2-unit code") {
    Matrix x = rank2_data(100, 20, 7);
    nn::TrainConfig cfg;
    cfg.epochs = 1000;
    cfg.seed = 5;
    auto m = ae::ae_train(x, ae::autoencoder_spec(20, {32}, 2), cfg);
    CHECK(m.history.back() <= 0.01);
    CHECK(m.history.back() <= m.history.front());

    // encode/decode consistency with the training history
    Matrix codes = ae::ae_encode(m, x);
    CHECK(codes.cols() == 2);
    CHECK(codes.allFinite());
    Matrix rec = ae::ae_reconstruct(m, x);
    const double mse = (rec - x).squaredNorm() / static_cast<double>(x.size());
    CHECK(mse <= m.history.back() * 10.0 + 1e-12);
}

TEST_CASE("training is deterministic per seed") {
    Matrix x = rank2_data(60, 10, 11);
    nn::TrainConfig cfg;
    cfg.epochs = 50;
    cfg.seed = 9;
    auto a = ae::ae_train(x, ae::autoencoder_spec(10, {8}, 3), cfg);
    auto b = ae::ae_train(x, ae::autoencoder_spec(10, {8}, 3), cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) CHECK(a.history[e] == b.history[e]);
    cfg.seed = 10;
    auto c = ae::ae_train(x, ae::autoencoder_spec(10, {8}, 3), cfg);
    CHECK(a.history.back() != c.history.back());
}

TEST_CASE("duplicate rows encode identically") {
    Matrix x = rank2_data(40, 8, 13);
    x.row(5) = x.row(0);
    nn::TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 1;
    auto m = ae::ae_train(x, ae::autoencoder_spec(8, {6}, 2), cfg);
    Matrix codes = ae::ae_encode(m, x);
    CHECK((codes.row(5) - codes.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("input outside [0,1] is rejected") {
    Matrix x = Matrix::Constant(40, 4, 1.5);
    nn::TrainConfig cfg;
    cfg.epochs = 5;
    CHECK_THROWS_WITH_AS(ae::ae_train(x, ae::autoencoder_spec(4, {4}, 2), cfg),
                         doctest::Contains("[0, 1]"), std::invalid_argument);
}

TEST_CASE("divergence raises an error naming the epoch") {
    // identity output keeps the loss unbounded, a huge step rate overflows it
    nn::NetSpec spec;
    spec.input = 4;
    spec.layers.push_back({8, nn::Activation::leaky_relu});
    spec.layers.push_back({4, nn::Activation::identity});
    auto net = nn::Network::init(spec, 2);
    Rng rng(4);
    Matrix x(64, 4), y(64, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    nn::TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.adam.lr = 1e155;
    cfg.decay = 1.0;
    CHECK_THROWS_WITH_AS(nn::train(net, x, y, nn::Loss::mse, cfg), doctest::Contains("epoch"),
                         std::runtime_error);
}

TEST_CASE("gradients match central finite differences") {
    nn::NetSpec spec;
    spec.input = 6;
    spec.layers.push_back({8, nn::Activation::leaky_relu});
    spec.layers.push_back({4, nn::Activation::leaky_relu});
    spec.layers.push_back({8, nn::Activation::leaky_relu});
    spec.layers.push_back({6, nn::Activation::sigmoid});
    CHECK(nn::grad_check(spec, nn::Loss::mse, 17) <= 1e-4);

    // same spec through the cross-entropy head used by the classifier
    nn::NetSpec clf;
    clf.input = 5;
    clf.layers.push_back({7, nn::Activation::leaky_relu});
    clf.layers.push_back({1, nn::Activation::sigmoid});
    CHECK(nn::grad_check(clf, nn::Loss::bce, 19) <= 1e-4);

    // repeated runs agree exactly regardless of parameter visit order
    CHECK(nn::grad_check(spec, nn::Loss::mse, 17) == nn::grad_check(spec, nn::Loss::mse, 17));
}

TEST_CASE("zero net with zero input has zero hidden-weight gradient") {
    nn::NetSpec spec;
    spec.input = 3;
    spec.layers.push_back({4, nn::Activation::leaky_relu});
    spec.layers.push_back({3, nn::Activation::sigmoid});
    auto net = nn::Network::init(spec, 1);
    for (auto& w : net.W) w.setZero();
    Matrix x = Matrix::Zero(5, 3);
    Matrix y = Matrix::Constant(5, 3, 0.3);
    nn::Gradients g;
    net.loss_and_grad(x, y, nn::Loss::mse, g);
    CHECK(g.dW[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.dW[1].cwiseAbs().maxCoeff() == 0.0);  // hidden activations are zero too
}

TEST_CASE("scaled wrapper reuses training statistics and survives json") {
    const auto dir = testutil::scratch_dir("ae");
    Rng rng(23);
    Matrix x(50, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 3.0 + 2.0 * rng.normal();
    x.col(4).setConstant(7.0);  // constant column
    nn::TrainConfig cfg;
    cfg.epochs = 40;
    cfg.seed = 21;
    auto m = ae::fit_scaled(x, {8}, 2, cfg);
    Matrix codes = ae::encode_scaled(m, x);
    CHECK(codes.allFinite());
    CHECK(codes.cols() == 2);

    auto back = ae::ae_from_json(ae::ae_to_json(m));
    Matrix codes2 = ae::encode_scaled(back, x);
    CHECK((codes - codes2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.history == m.history);
}
