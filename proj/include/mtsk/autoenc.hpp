#pragma once

#include <string>
#include <vector>

#include "mtsk/nn.hpp"

namespace mtsk::ae {

// p -> hidden... -> code -> reversed hidden... -> p, leaky-ReLU everywhere
// except the final sigmoid.
nn::NetSpec autoencoder_spec(int input, const std::vector<int>& hidden, int code);

struct AeModel {
    nn::Network net;
    int code_width = 0;
    int encoder_layers = 0;
    std::vector<double> history;  // per-epoch training loss
    // min-max scaling stats; empty when the model was trained on [0,1] input directly
    Vector col_min, col_range;

    bool scaled() const { return col_min.size() > 0; }
};

// Trains on rows already scaled to [0,1] (the sigmoid output range).
AeModel ae_train(const Matrix& X01, const nn::NetSpec& spec, const nn::TrainConfig& cfg);

Matrix ae_encode(const AeModel& m, const Matrix& X01);
Matrix ae_reconstruct(const AeModel& m, const Matrix& X01);

// Pipeline entry points: per-column min-max scaling is fitted on the training
// rows and reused at encode time.
AeModel fit_scaled(const Matrix& X, const std::vector<int>& hidden, int code,
                   const nn::TrainConfig& cfg);
Matrix encode_scaled(const AeModel& m, const Matrix& X);

std::string ae_to_json(const AeModel& m);
AeModel ae_from_json(const std::string& text);

}  // namespace mtsk::ae
