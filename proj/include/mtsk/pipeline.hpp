#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtsk/embedviz.hpp"
#include "mtsk/nn.hpp"
#include "mtsk/tck.hpp"

namespace mtsk::pipe {

// One master seed governs every stochastic step; reruns with the same config
// produce byte-identical artifacts.
struct PipelineConfig {
    std::string input;
    std::string out_dir = ".";
    int window_len = 7;
    double train_frac = 0.7;
    bool balance = true;
    std::string missing_policy = "observed-zeros";  // or "masked"
    std::uint64_t seed = 42;

    tck::TckOptions tck;

    std::vector<std::string> methods = {"pca", "kpca", "ae"};
    double pca_variance = 0.99;
    int pca_k = 0;  // 0 = variance target
    std::string pca_space = "tck";  // or "raw"
    int kpca_k = 50;
    std::string kpca_mode = "precomputed";  // or "polynomial"
    double kpca_gamma = 0.002083;
    int kpca_degree = 3;
    double kpca_coef0 = 1.0;
    std::vector<int> ae_hidden = {712};
    int ae_code = 250;
    nn::TrainConfig ae_train;  // epochs default 1000

    viz::TsneConfig tsne;
    int folds = 5;
    std::vector<std::string> classifiers;  // empty = all seven

    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load_file(const std::string& path);
    nlohmann::json to_json() const;
};

// synth spec file ("" = default two-cluster fixture) -> data.csv + truth.csv
void cmd_synth(const std::string& spec_path, const std::string& out_dir,
               std::uint64_t seed_override = 0, bool has_seed_override = false);

// input csv -> train.csv / test.csv (stratified split, optional balancing)
void cmd_ingest(const PipelineConfig& cfg);

// train.csv (+ test.csv) -> tck_model.bin, kernel_train.csv, kernel_test.csv
void cmd_tck(const PipelineConfig& cfg);

// kernel -> rep_<m>_{train,test}.csv, model_<m>.json, tsne_<m>.csv per method
void cmd_embed(const PipelineConfig& cfg);

// representations -> report.csv + report.txt
void cmd_classify(const PipelineConfig& cfg);

// consolidated table (stdout + report.txt); with a selection file, also
// summary_<m>.csv per embedded method
std::string cmd_report(const PipelineConfig& cfg, const std::string& selection_path = "");

}  // namespace mtsk::pipe
