#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtsk/dataset.hpp"
#include "mtsk/nn.hpp"

namespace mtsk::cls {

// table order: LR, k-NN, Tree, Random forest, nu-SVM, SVM, MLP
enum class ClassifierKind {
    logistic_regression,
    knn,
    decision_tree,
    random_forest,
    nu_svm,
    svm,
    mlp,
};

std::string kind_name(ClassifierKind kind);
ClassifierKind kind_from_name(const std::string& name);
std::vector<ClassifierKind> all_kinds();

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::logistic_regression;
    nlohmann::json hyper = nlohmann::json::object();
};

struct Prediction {
    std::vector<int> labels;  // 0/1
    Vector scores;            // probability or margin, usable for AUC
};

class Model {
public:
    virtual ~Model() = default;
    virtual Prediction predict(const Matrix& X) const = 0;
};

// Hyperparameters per kind:
//   logistic_regression: lambda (L2)
//   knn:                 k, metric = euclidean | precomputed
//   decision_tree:       max_depth (0 = unlimited), min_leaf
//   random_forest:       trees, max_depth (0 = unlimited)
//   svm:                 C, kernel = linear | rbf | precomputed, gamma
//   nu_svm:              nu, kernel, gamma
//   mlp:                 hidden, epochs
// In precomputed mode X must be the training kernel at fit time and kernel
// rows against the training set at predict time.
std::unique_ptr<Model> fit(const ClassifierSpec& spec, const Matrix& X,
                           const std::vector<int>& y, std::uint64_t seed);

struct Metrics {
    double accuracy = 0.0;
    double specificity = 0.0;
    double sensitivity = 0.0;
    double auc = 0.0;
};

// accuracy/specificity/sensitivity from the labels, AUC as the Mann-Whitney
// statistic of the scores with ties counting one half.
Metrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& labels,
                        const Vector& scores);

// Disjoint, exhaustive, per-class round-robin folds; a pure function of
// (y, folds, seed).
std::vector<std::vector<int>> stratified_folds(const std::vector<int>& y, int folds,
                                               std::uint64_t seed);

struct GridEval {
    ClassifierSpec spec;
    std::vector<Metrics> fold_metrics;
    double mean_auc = 0.0;
    double mean_accuracy = 0.0;
};

struct CvResult {
    ClassifierSpec best;
    std::vector<Metrics> fold_metrics;  // of the chosen spec
    double mean_auc = 0.0;
    double mean_accuracy = 0.0;
    std::vector<GridEval> all;  // in grid order
};

// Selection by mean AUC, ties broken by mean accuracy then first-in-grid.
// The fit for grid point g on fold f is seeded with cv_fit_seed(seed, g, f).
CvResult cross_validate(const std::vector<ClassifierSpec>& grid, const Matrix& X,
                        const std::vector<int>& y, int folds, std::uint64_t seed);

std::uint64_t cv_fit_seed(std::uint64_t seed, std::size_t grid_index, std::size_t fold);

std::vector<ClassifierSpec> default_grid(ClassifierKind kind);

struct EvalRow {
    std::string dr_method;
    ClassifierKind kind = ClassifierKind::logistic_regression;
    Metrics metrics;
    nlohmann::json hyper;
    std::uint64_t seed = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
};

// Rows grouped by DR method, classifiers in table order, percentages to two
// decimals, per-column maxima in bold.
std::string render_table(const EvalReport& report);
EvalReport sorted_report(const EvalReport& report);
void save_report_csv(const EvalReport& report, const std::string& path);
EvalReport load_report_csv(const std::string& path);

// ---- concrete models (exposed for direct inspection in tests) ----

struct LogisticModel : Model {
    Vector w;
    double bias = 0.0;
    Prediction predict(const Matrix& X) const override;
};

struct KnnModel : Model {
    Matrix train;  // features, or unused in precomputed mode
    std::vector<int> y;
    int k = 1;
    bool precomputed = false;
    Prediction predict(const Matrix& X) const override;
};

struct TreeNode {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double pos_frac = 0.0;
};

struct DecisionTreeModel : Model {
    std::vector<TreeNode> nodes;
    double predict_one(const Eigen::Ref<const Vector>& x) const;
    Prediction predict(const Matrix& X) const override;
};

struct RandomForestModel : Model {
    std::vector<DecisionTreeModel> trees;
    Prediction predict(const Matrix& X) const override;  // score = voting fraction
};

struct SvmModel : Model {
    enum class Kernel { linear, rbf, precomputed };
    Kernel kernel = Kernel::linear;
    double gamma = 0.1;
    Matrix train;  // features for linear/rbf; empty in precomputed mode
    Vector coef;   // per training record, alpha_i * y_i (nu form rescaled)
    double rho = 0.0;
    // diagnostics at the solver scale
    int n_support = 0;
    int n_bound = 0;
    int n_train = 0;
    Prediction predict(const Matrix& X) const override;
};

struct MlpModel : Model {
    nn::Network net;
    Prediction predict(const Matrix& X) const override;
};

// shared by svm / nu_svm fit paths; exposed for white-box tests
std::unique_ptr<SvmModel> fit_svm(const Matrix& X, const std::vector<int>& y, double C,
                                  SvmModel::Kernel kernel, double gamma);
std::unique_ptr<SvmModel> fit_nu_svm(const Matrix& X, const std::vector<int>& y, double nu,
                                     SvmModel::Kernel kernel, double gamma);

}  // namespace mtsk::cls
