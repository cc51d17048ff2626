#include "mtsk/autoenc.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace mtsk::ae {

nn::NetSpec autoencoder_spec(int input, const std::vector<int>& hidden, int code) {
    if (input < 1 || code < 1) throw std::invalid_argument("widths must be positive");
    nn::NetSpec spec;
    spec.input = input;
    for (int h : hidden) spec.layers.push_back({h, nn::Activation::leaky_relu});
    spec.layers.push_back({code, nn::Activation::leaky_relu});
    for (auto it = hidden.rbegin(); it != hidden.rend(); ++it)
        spec.layers.push_back({*it, nn::Activation::leaky_relu});
    spec.layers.push_back({input, nn::Activation::sigmoid});
    return spec;
}

namespace {

// encoder depth of a mirrored spec; validates the mirror structure
int encoder_depth(const nn::NetSpec& spec) {
    const int n = static_cast<int>(spec.layers.size());
    if (n < 2 || n % 2 != 0)
        throw std::invalid_argument("autoencoder spec must have an even layer count");
    if (spec.layers.back().width != spec.input)
        throw std::invalid_argument("autoencoder output width must equal the input width");
    const int enc = n / 2;
    for (int i = 0; i + 1 < enc; ++i)
        if (spec.layers[static_cast<std::size_t>(i)].width !=
            spec.layers[static_cast<std::size_t>(n - 2 - i)].width)
            throw std::invalid_argument("encoder and decoder widths must mirror");
    return enc;
}

}  // namespace

AeModel ae_train(const Matrix& X01, const nn::NetSpec& spec, const nn::TrainConfig& cfg) {
    if (X01.minCoeff() < -1e-9 || X01.maxCoeff() > 1.0 + 1e-9)
        throw std::invalid_argument("autoencoder input must be scaled to [0, 1]");
    AeModel m;
    m.encoder_layers = encoder_depth(spec);
    m.code_width = spec.layers[static_cast<std::size_t>(m.encoder_layers - 1)].width;
    m.net = nn::Network::init(spec, cfg.seed);
    m.history = nn::train(m.net, X01, X01, nn::Loss::mse, cfg);
    for (const auto& w : m.net.W)
        if (!w.allFinite()) throw std::runtime_error("divergence error: non-finite parameters");
    return m;
}

Matrix ae_encode(const AeModel& m, const Matrix& X01) {
    return m.net.forward_partial(X01, m.encoder_layers);
}

Matrix ae_reconstruct(const AeModel& m, const Matrix& X01) { return m.net.forward(X01); }

namespace {

Matrix apply_scaling(const Matrix& X, const Vector& col_min, const Vector& col_range) {
    Matrix out = X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (col_range(j) > 0.0)
            out.col(j) = ((X.col(j).array() - col_min(j)) / col_range(j))
                             .cwiseMax(0.0)
                             .cwiseMin(1.0);
        else
            out.col(j).setConstant(0.5);  // constant training column
    }
    return out;
}

}  // namespace

AeModel fit_scaled(const Matrix& X, const std::vector<int>& hidden, int code,
                   const nn::TrainConfig& cfg) {
    Vector col_min = X.colwise().minCoeff().transpose();
    Vector col_max = X.colwise().maxCoeff().transpose();
    Vector col_range = col_max - col_min;
    Matrix X01 = apply_scaling(X, col_min, col_range);
    AeModel m = ae_train(X01, autoencoder_spec(static_cast<int>(X.cols()), hidden, code), cfg);
    m.col_min = std::move(col_min);
    m.col_range = std::move(col_range);
    return m;
}

Matrix encode_scaled(const AeModel& m, const Matrix& X) {
    if (!m.scaled()) return ae_encode(m, X);
    if (X.cols() != m.col_min.size()) throw std::invalid_argument("shape error: column count mismatch");
    return ae_encode(m, apply_scaling(X, m.col_min, m.col_range));
}

std::string ae_to_json(const AeModel& m) {
    nlohmann::json j;
    j["type"] = "autoencoder";
    j["input"] = m.net.spec.input;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.net.spec.layers) {
        layers.push_back({{"width", l.width},
                          {"act", l.act == nn::Activation::sigmoid ? "sigmoid"
                                  : l.act == nn::Activation::identity ? "identity"
                                                                      : "leaky_relu"}});
    }
    j["layers"] = layers;
    j["code_width"] = m.code_width;
    j["encoder_layers"] = m.encoder_layers;
    nlohmann::json weights = nlohmann::json::array();
    for (std::size_t l = 0; l < m.net.W.size(); ++l) {
        nlohmann::json w;
        w["rows"] = m.net.W[l].rows();
        w["cols"] = m.net.W[l].cols();
        std::vector<double> flat(m.net.W[l].data(), m.net.W[l].data() + m.net.W[l].size());
        w["w"] = flat;
        std::vector<double> bias(m.net.b[l].data(), m.net.b[l].data() + m.net.b[l].size());
        w["b"] = bias;
        weights.push_back(std::move(w));
    }
    j["weights"] = weights;
    j["history"] = m.history;
    if (m.scaled()) {
        j["col_min"] = std::vector<double>(m.col_min.data(), m.col_min.data() + m.col_min.size());
        j["col_range"] =
            std::vector<double>(m.col_range.data(), m.col_range.data() + m.col_range.size());
    }
    return j.dump();
}

AeModel ae_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    AeModel m;
    m.net.spec.input = j.at("input").get<int>();
    for (const auto& jl : j.at("layers")) {
        nn::LayerSpec l;
        l.width = jl.at("width").get<int>();
        const std::string act = jl.at("act").get<std::string>();
        l.act = act == "sigmoid" ? nn::Activation::sigmoid
                : act == "identity" ? nn::Activation::identity
                                    : nn::Activation::leaky_relu;
        m.net.spec.layers.push_back(l);
    }
    m.code_width = j.at("code_width").get<int>();
    m.encoder_layers = j.at("encoder_layers").get<int>();
    for (const auto& jw : j.at("weights")) {
        const auto rows = jw.at("rows").get<Eigen::Index>();
        const auto cols = jw.at("cols").get<Eigen::Index>();
        Matrix w(rows, cols);
        const auto flat = jw.at("w").get<std::vector<double>>();
        std::copy(flat.begin(), flat.end(), w.data());
        m.net.W.push_back(std::move(w));
        const auto bias = jw.at("b").get<std::vector<double>>();
        Vector b(static_cast<Eigen::Index>(bias.size()));
        std::copy(bias.begin(), bias.end(), b.data());
        m.net.b.push_back(std::move(b));
    }
    m.history = j.at("history").get<std::vector<double>>();
    if (j.contains("col_min")) {
        const auto mins = j.at("col_min").get<std::vector<double>>();
        const auto ranges = j.at("col_range").get<std::vector<double>>();
        m.col_min = Eigen::Map<const Vector>(mins.data(), static_cast<Eigen::Index>(mins.size()));
        m.col_range =
            Eigen::Map<const Vector>(ranges.data(), static_cast<Eigen::Index>(ranges.size()));
    }
    return m;
}

}  // namespace mtsk::ae
