#pragma once

#include <cstdint>
#include <vector>

#include "mtsk/dataset.hpp"

namespace mtsk::nn {

// leaky slope is 0.01 throughout
enum class Activation { leaky_relu, sigmoid, identity };

struct LayerSpec {
    int width = 0;
    Activation act = Activation::leaky_relu;
};

struct NetSpec {
    int input = 0;
    std::vector<LayerSpec> layers;
};

enum class Loss { mse, bce };

struct Gradients {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
};

struct Network {
    NetSpec spec;
    std::vector<Matrix> W;  // fan_in x fan_out per layer
    std::vector<Vector> b;

    // uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases
    static Network init(const NetSpec& spec, std::uint64_t seed);

    Matrix forward(const Matrix& X) const;
    // forward through the first n_layers only (e.g. an encoder half)
    Matrix forward_partial(const Matrix& X, int n_layers) const;
    // loss averaged over all output entries, with gradients
    double loss_and_grad(const Matrix& X, const Matrix& Y, Loss loss, Gradients& g) const;
    double loss_value(const Matrix& X, const Matrix& Y, Loss loss) const;
};

double activate(double z, Activation a);
double activate_grad(double z, Activation a);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(const Network& net, const AdamConfig& cfg);
    void step(Network& net, const Gradients& g, double lr);

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<Matrix> mW_, vW_;
    std::vector<Vector> mb_, vb_;
};

struct TrainConfig {
    int epochs = 1000;
    int batch = 32;
    AdamConfig adam;
    double decay = 0.998;  // learning rate at epoch e is lr * decay^e
    std::uint64_t seed = 0;
};

// Mini-batch training; returns the per-epoch loss history. Throws a divergence
// error naming the epoch if the loss goes non-finite.
std::vector<double> train(Network& net, const Matrix& X, const Matrix& Y, Loss loss,
                          const TrainConfig& cfg);

// Max relative error between analytic and central finite-difference gradients
// (h = 1e-5) on a random batch.
double grad_check(const NetSpec& spec, Loss loss, std::uint64_t seed);

}  // namespace mtsk::nn
