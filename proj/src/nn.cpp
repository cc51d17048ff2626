#include "mtsk/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "mtsk/rng.hpp"

namespace mtsk::nn {

namespace {
constexpr double kLeakySlope = 0.01;
constexpr double kProbClip = 1e-12;
}  // namespace

double activate(double z, Activation a) {
    switch (a) {
        case Activation::leaky_relu: return z >= 0.0 ? z : kLeakySlope * z;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::identity: return z;
    }
    return z;
}

double activate_grad(double z, Activation a) {
    switch (a) {
        case Activation::leaky_relu: return z >= 0.0 ? 1.0 : kLeakySlope;
        case Activation::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

Network Network::init(const NetSpec& spec, std::uint64_t seed) {
    if (spec.input < 1 || spec.layers.empty())
        throw std::invalid_argument("network needs an input width and at least one layer");
    for (const auto& l : spec.layers)
        if (l.width < 1) throw std::invalid_argument("layer widths must be positive");
    Network net;
    net.spec = spec;
    int fan_in = spec.input;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const int fan_out = spec.layers[l].width;
        Rng rng(mix_seed(seed, 0x2e7, l));
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Matrix w(fan_in, fan_out);
        for (int i = 0; i < fan_in; ++i)
            for (int j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-bound, bound);
        net.W.push_back(std::move(w));
        net.b.push_back(Vector::Zero(fan_out));
        fan_in = fan_out;
    }
    return net;
}

Matrix Network::forward_partial(const Matrix& X, int n_layers) const {
    if (X.cols() != spec.input) throw std::invalid_argument("shape error: input width mismatch");
    Matrix a = X;
    for (int l = 0; l < n_layers; ++l) {
        Matrix z = (a * W[static_cast<std::size_t>(l)]).rowwise() +
                   b[static_cast<std::size_t>(l)].transpose();
        const Activation act = spec.layers[static_cast<std::size_t>(l)].act;
        a = z.unaryExpr([act](double v) { return activate(v, act); });
    }
    return a;
}

Matrix Network::forward(const Matrix& X) const {
    return forward_partial(X, static_cast<int>(spec.layers.size()));
}

double Network::loss_and_grad(const Matrix& X, const Matrix& Y, Loss loss, Gradients& g) const {
    const std::size_t n_layers = spec.layers.size();
    std::vector<Matrix> zs(n_layers), as(n_layers);
    Matrix a = X;
    for (std::size_t l = 0; l < n_layers; ++l) {
        zs[l] = (a * W[l]).rowwise() + b[l].transpose();
        const Activation act = spec.layers[l].act;
        as[l] = zs[l].unaryExpr([act](double v) { return activate(v, act); });
        a = as[l];
    }
    const Matrix& out = as[n_layers - 1];
    const double denom = static_cast<double>(out.rows()) * static_cast<double>(out.cols());

    double value = 0.0;
    Matrix dz;
    const Activation final_act = spec.layers[n_layers - 1].act;
    if (loss == Loss::mse) {
        Matrix diff = out - Y;
        value = diff.squaredNorm() / denom;
        Matrix da = 2.0 * diff / denom;
        dz = da.cwiseProduct(zs[n_layers - 1].unaryExpr(
            [final_act](double v) { return activate_grad(v, final_act); }));
    } else {
        // cross-entropy; paired with a sigmoid output the z-gradient is (p - y)
        if (final_act != Activation::sigmoid)
            throw std::invalid_argument("cross-entropy loss requires a sigmoid output layer");
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            for (Eigen::Index j = 0; j < out.cols(); ++j) {
                const double p = std::min(std::max(out(i, j), kProbClip), 1.0 - kProbClip);
                const double y = Y(i, j);
                value += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
            }
        value /= denom;
        dz = (out - Y) / denom;
    }

    g.dW.assign(n_layers, Matrix());
    g.db.assign(n_layers, Vector());
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& input = l == 0 ? X : as[l - 1];
        g.dW[l] = input.transpose() * dz;
        g.db[l] = dz.colwise().sum().transpose();
        if (l > 0) {
            Matrix da = dz * W[l].transpose();
            const Activation act = spec.layers[l - 1].act;
            dz = da.cwiseProduct(
                zs[l - 1].unaryExpr([act](double v) { return activate_grad(v, act); }));
        }
    }
    return value;
}

double Network::loss_value(const Matrix& X, const Matrix& Y, Loss loss) const {
    const Matrix out = forward(X);
    const double denom = static_cast<double>(out.rows()) * static_cast<double>(out.cols());
    if (loss == Loss::mse) return (out - Y).squaredNorm() / denom;
    double value = 0.0;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            const double p = std::min(std::max(out(i, j), kProbClip), 1.0 - kProbClip);
            value += -(Y(i, j) * std::log(p) + (1.0 - Y(i, j)) * std::log(1.0 - p));
        }
    return value / denom;
}

Adam::Adam(const Network& net, const AdamConfig& cfg) : cfg_(cfg) {
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        mW_.push_back(Matrix::Zero(net.W[l].rows(), net.W[l].cols()));
        vW_.push_back(Matrix::Zero(net.W[l].rows(), net.W[l].cols()));
        mb_.push_back(Vector::Zero(net.b[l].size()));
        vb_.push_back(Vector::Zero(net.b[l].size()));
    }
}

void Adam::step(Network& net, const Gradients& g, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        mW_[l] = cfg_.beta1 * mW_[l] + (1.0 - cfg_.beta1) * g.dW[l];
        vW_[l] = cfg_.beta2 * vW_[l].array().matrix() +
                 (1.0 - cfg_.beta2) * g.dW[l].cwiseProduct(g.dW[l]);
        net.W[l].array() -=
            lr * (mW_[l].array() / bc1) / ((vW_[l].array() / bc2).sqrt() + cfg_.eps);
        mb_[l] = cfg_.beta1 * mb_[l] + (1.0 - cfg_.beta1) * g.db[l];
        vb_[l] = cfg_.beta2 * vb_[l] + (1.0 - cfg_.beta2) * g.db[l].cwiseProduct(g.db[l]);
        net.b[l].array() -=
            lr * (mb_[l].array() / bc1) / ((vb_[l].array() / bc2).sqrt() + cfg_.eps);
    }
}

std::vector<double> train(Network& net, const Matrix& X, const Matrix& Y, Loss loss,
                          const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(cfg.decay > 0.0 && cfg.decay <= 1.0))
        throw std::invalid_argument("decay rate must be in (0, 1]");
    const int n = static_cast<int>(X.rows());
    const int batch = std::max(1, cfg.batch);
    if (n < batch) throw std::invalid_argument("need at least one full batch of rows");

    Adam adam(net, cfg.adam);
    Gradients g;
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.adam.lr * std::pow(cfg.decay, static_cast<double>(epoch));
        Rng rng(mix_seed(cfg.seed, 0xadaf, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int start = 0; start < n; start += batch) {
            const int bs = std::min(batch, n - start);
            Matrix bx(bs, X.cols()), by(bs, Y.cols());
            for (int i = 0; i < bs; ++i) {
                bx.row(i) = X.row(order[static_cast<std::size_t>(start + i)]);
                by.row(i) = Y.row(order[static_cast<std::size_t>(start + i)]);
            }
            const double batch_loss = net.loss_and_grad(bx, by, loss, g);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("divergence error at epoch " + std::to_string(epoch) +
                                         ": non-finite loss");
            adam.step(net, g, lr);
            epoch_loss += batch_loss * bs;
        }
        history.push_back(epoch_loss / n);
    }
    return history;
}

double grad_check(const NetSpec& spec, Loss loss, std::uint64_t seed) {
    Network net = Network::init(spec, seed);
    Rng rng(mix_seed(seed, 0x9cad));
    const int n = 8;
    Matrix X(n, spec.input);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < spec.input; ++j) X(i, j) = rng.normal();
    const int out_w = spec.layers.back().width;
    Matrix Y(n, out_w);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_w; ++j)
            Y(i, j) = loss == Loss::bce ? static_cast<double>(rng.index(2)) : rng.uniform();

    Gradients g;
    net.loss_and_grad(X, Y, loss, g);

    const double h = 1e-5;
    double max_rel = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = net.loss_value(X, Y, loss);
        param = saved - h;
        const double down = net.loss_value(X, Y, loss);
        param = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double rel = std::abs(analytic - numeric) /
                           std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
        max_rel = std::max(max_rel, rel);
    };
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        for (Eigen::Index i = 0; i < net.W[l].rows(); ++i)
            for (Eigen::Index j = 0; j < net.W[l].cols(); ++j) probe(net.W[l](i, j), g.dW[l](i, j));
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i) probe(net.b[l](i), g.db[l](i));
    }
    return max_rel;
}

}  // namespace mtsk::nn
