#include "mtsk/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mtsk/io.hpp"
#include "mtsk/rng.hpp"

namespace mtsk::cls {

// defined in tree.cpp
std::unique_ptr<Model> fit_tree_or_forest(const ClassifierSpec& spec, const Matrix& X,
                                          const std::vector<int>& y, std::uint64_t seed);

namespace {

SvmModel::Kernel svm_kernel_of(const nlohmann::json& h) {
    const std::string k = h.value("kernel", std::string("linear"));
    if (k == "linear") return SvmModel::Kernel::linear;
    if (k == "rbf") return SvmModel::Kernel::rbf;
    if (k == "precomputed") return SvmModel::Kernel::precomputed;
    throw std::invalid_argument("unknown svm kernel: " + k);
}

void check_binary_for_auc(const std::vector<int>& y) {
    bool has[2] = {false, false};
    for (int v : y) {
        if (v != 0 && v != 1) throw std::invalid_argument("labels must be 0 or 1");
        has[v] = true;
    }
    if (!has[0] || !has[1])
        throw std::invalid_argument("AUC undefined error: y_true holds a single class");
}

}  // namespace

std::string kind_name(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::logistic_regression: return "LR";
        case ClassifierKind::knn: return "k-NN";
        case ClassifierKind::decision_tree: return "Tree";
        case ClassifierKind::random_forest: return "Random forest";
        case ClassifierKind::nu_svm: return "nu-SVM";
        case ClassifierKind::svm: return "SVM";
        case ClassifierKind::mlp: return "MLP";
    }
    return "?";
}

ClassifierKind kind_from_name(const std::string& name) {
    for (ClassifierKind k : all_kinds())
        if (kind_name(k) == name) return k;
    throw std::invalid_argument("unknown classifier kind: " + name);
}

std::vector<ClassifierKind> all_kinds() {
    return {ClassifierKind::logistic_regression, ClassifierKind::knn,
            ClassifierKind::decision_tree,       ClassifierKind::random_forest,
            ClassifierKind::nu_svm,              ClassifierKind::svm,
            ClassifierKind::mlp};
}

namespace {

void check_binary(const std::vector<int>& y) {
    bool has[2] = {false, false};
    for (int v : y) {
        if (v != 0 && v != 1) throw std::invalid_argument("labels must be 0 or 1");
        has[v] = true;
    }
    if (!has[0] || !has[1])
        throw std::invalid_argument("degenerate-label error: both classes required");
}

std::vector<int> labels_from_scores(const Vector& scores, double threshold) {
    std::vector<int> labels(static_cast<std::size_t>(scores.size()));
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        labels[static_cast<std::size_t>(i)] = scores(i) >= threshold ? 1 : 0;
    return labels;
}

}  // namespace

// ---- logistic regression -------------------------------------------------

namespace {

// L2-regularized negative log-likelihood and gradient; bias unregularized
double lr_objective(const Matrix& X, const Vector& ypm, double lambda, const Vector& w,
                    double bias, Vector* gw, double* gb) {
    const auto n = X.rows();
    Vector margin = (X * w).array() + bias;
    double f = 0.0;
    Vector dz(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = ypm(i) * margin(i);
        // log(1 + exp(-m)), stable form
        f += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
        dz(i) = -ypm(i) / (1.0 + std::exp(m));
    }
    f = f / static_cast<double>(n) + lambda * w.squaredNorm();
    if (gw) {
        *gw = X.transpose() * dz / static_cast<double>(n) + 2.0 * lambda * w;
        *gb = dz.sum() / static_cast<double>(n);
    }
    return f;
}

LogisticModel fit_lr(const Matrix& X, const std::vector<int>& y, double lambda) {
    const auto n = X.rows();
    Vector ypm(n);
    for (Eigen::Index i = 0; i < n; ++i) ypm(i) = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    LogisticModel m;
    m.w = Vector::Zero(X.cols());
    m.bias = 0.0;

    Vector gw;
    double gb = 0.0;
    double f = lr_objective(X, ypm, lambda, m.w, m.bias, &gw, &gb);
    double step = 1.0;
    for (int iter = 0; iter < 5000; ++iter) {
        const double gnorm2 = gw.squaredNorm() + gb * gb;
        if (gnorm2 < 1e-18) break;
        // backtracking line search (Armijo)
        double f_new = f;
        Vector w_new;
        double b_new = 0.0;
        step *= 2.0;
        while (step > 1e-16) {
            w_new = m.w - step * gw;
            b_new = m.bias - step * gb;
            f_new = lr_objective(X, ypm, lambda, w_new, b_new, nullptr, nullptr);
            if (f_new <= f - 0.5 * step * gnorm2) break;
            step *= 0.5;
        }
        const double rel = (f - f_new) / (std::abs(f) + 1e-12);
        m.w = w_new;
        m.bias = b_new;
        f = f_new;
        lr_objective(X, ypm, lambda, m.w, m.bias, &gw, &gb);
        if (rel >= 0 && rel < 1e-6) break;
    }
    return m;
}

}  // namespace

Prediction LogisticModel::predict(const Matrix& X) const {
    if (X.cols() != w.size()) throw std::invalid_argument("shape error: feature width mismatch");
    Prediction p;
    Vector margin = (X * w).array() + bias;
    p.scores = margin.unaryExpr([](double m) { return 1.0 / (1.0 + std::exp(-m)); });
    p.labels = labels_from_scores(p.scores, 0.5);
    return p;
}

// ---- k-NN ------------------------------------------------------------------

Prediction KnnModel::predict(const Matrix& X) const {
    const auto n_train = static_cast<Eigen::Index>(y.size());
    if (precomputed) {
        if (X.cols() != n_train)
            throw std::invalid_argument("shape error: kernel rows must match training size");
    } else if (X.cols() != train.cols()) {
        throw std::invalid_argument("shape error: feature width mismatch");
    }
    Prediction p;
    p.scores.resize(X.rows());
    std::vector<std::pair<double, int>> order(static_cast<std::size_t>(n_train));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        for (Eigen::Index j = 0; j < n_train; ++j) {
            // kernel-induced distance for normalized kernels: d^2 = 2(1 - k)
            const double d2 = precomputed ? 2.0 * (1.0 - X(r, j))
                                          : (train.row(j) - X.row(r)).squaredNorm();
            order[static_cast<std::size_t>(j)] = {d2, static_cast<int>(j)};
        }
        const int kk = std::min<int>(k, static_cast<int>(n_train));
        std::partial_sort(order.begin(), order.begin() + kk, order.end());
        int pos = 0;
        for (int t = 0; t < kk; ++t) pos += y[static_cast<std::size_t>(order[static_cast<std::size_t>(t)].second)];
        p.scores(r) = static_cast<double>(pos) / kk;
    }
    p.labels = labels_from_scores(p.scores, 0.5);
    return p;
}

// ---- MLP -------------------------------------------------------------------

Prediction MlpModel::predict(const Matrix& X) const {
    Prediction p;
    p.scores = net.forward(X).col(0);
    p.labels = labels_from_scores(p.scores, 0.5);
    return p;
}

namespace {

MlpModel fit_mlp(const Matrix& X, const std::vector<int>& y, int hidden, int epochs,
                 std::uint64_t seed) {
    nn::NetSpec spec;
    spec.input = static_cast<int>(X.cols());
    spec.layers.push_back({hidden, nn::Activation::leaky_relu});
    spec.layers.push_back({1, nn::Activation::sigmoid});
    MlpModel m;
    m.net = nn::Network::init(spec, seed);
    Matrix Y(X.rows(), 1);
    for (Eigen::Index i = 0; i < X.rows(); ++i) Y(i, 0) = y[static_cast<std::size_t>(i)];
    nn::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch = std::min<int>(32, static_cast<int>(X.rows()));
    cfg.seed = seed;
    nn::train(m.net, X, Y, nn::Loss::bce, cfg);
    return m;
}

}  // namespace

// ---- dispatch ----------------------------------------------------------------

std::unique_ptr<Model> fit(const ClassifierSpec& spec, const Matrix& X, const std::vector<int>& y,
                           std::uint64_t seed) {
    if (static_cast<Eigen::Index>(y.size()) != X.rows())
        throw std::invalid_argument("labels and rows must align");
    check_binary(y);
    const auto& h = spec.hyper;
    switch (spec.kind) {
        case ClassifierKind::logistic_regression: {
            auto m = std::make_unique<LogisticModel>();
            *m = fit_lr(X, y, h.value("lambda", 0.1));
            return m;
        }
        case ClassifierKind::knn: {
            auto m = std::make_unique<KnnModel>();
            m->k = h.value("k", 3);
            if (m->k < 1) throw std::invalid_argument("k must be >= 1");
            m->precomputed = h.value("metric", std::string("euclidean")) == "precomputed";
            if (!m->precomputed) m->train = X;
            m->y = y;
            if (m->precomputed) {
                if (X.cols() != X.rows())
                    throw std::invalid_argument("precomputed metric needs a square kernel at fit time");
            }
            return m;
        }
        case ClassifierKind::decision_tree:
        case ClassifierKind::random_forest:
            return fit_tree_or_forest(spec, X, y, seed);
        case ClassifierKind::svm:
            return fit_svm(X, y, h.value("C", 1.0), svm_kernel_of(h), h.value("gamma", 0.1));
        case ClassifierKind::nu_svm:
            return fit_nu_svm(X, y, h.value("nu", 0.5), svm_kernel_of(h), h.value("gamma", 0.1));
        case ClassifierKind::mlp: {
            auto m = std::make_unique<MlpModel>();
            *m = fit_mlp(X, y, h.value("hidden", 32), h.value("epochs", 300), seed);
            return m;
        }
    }
    throw std::invalid_argument("unknown classifier kind");
}

// ---- metrics -----------------------------------------------------------------

Metrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& labels,
                        const Vector& scores) {
    const std::size_t n = y_true.size();
    if (labels.size() != n || static_cast<std::size_t>(scores.size()) != n)
        throw std::invalid_argument("metric inputs must have equal lengths");
    check_binary_for_auc(y_true);

    long tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (y_true[i] == 1)
            labels[i] == 1 ? ++tp : ++fn;
        else
            labels[i] == 0 ? ++tn : ++fp;
    }
    Metrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(n);
    m.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);

    // Mann-Whitney via average ranks; ties contribute one half
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return scores(a) < scores(b); });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores(idx[j + 1]) == scores(idx[i])) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[static_cast<std::size_t>(idx[t])] = avg;
        i = j + 1;
    }
    double rank_pos = 0.0;
    long n_pos = tp + fn, n_neg = tn + fp;
    for (std::size_t t = 0; t < n; ++t)
        if (y_true[t] == 1) rank_pos += rank[t];
    m.auc = (rank_pos - 0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0)) /
            (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return m;
}

// ---- cross-validation ----------------------------------------------------------

std::vector<std::vector<int>> stratified_folds(const std::vector<int>& y, int folds,
                                               std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("folds must be >= 2");
    std::vector<int> by_class[2];
    for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(static_cast<int>(i));
    for (int c = 0; c < 2; ++c)
        if (static_cast<int>(by_class[c].size()) < folds)
            throw std::invalid_argument("stratification error: class " + std::to_string(c) +
                                        " has fewer records than folds");
    std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
    for (int c = 0; c < 2; ++c) {
        Rng rng(mix_seed(seed, 0xf01d, static_cast<std::uint64_t>(c)));
        auto idx = by_class[c];
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            out[i % static_cast<std::size_t>(folds)].push_back(idx[i]);
    }
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

std::uint64_t cv_fit_seed(std::uint64_t seed, std::size_t grid_index, std::size_t fold) {
    return mix_seed(seed, 0xcf17, grid_index, fold);
}

CvResult cross_validate(const std::vector<ClassifierSpec>& grid, const Matrix& X,
                        const std::vector<int>& y, int folds, std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("config error: empty grid");
    check_binary(y);
    const auto fold_sets = stratified_folds(y, folds, seed);

    CvResult res;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        GridEval ev;
        ev.spec = grid[g];
        double sum_auc = 0.0, sum_acc = 0.0;
        for (std::size_t f = 0; f < fold_sets.size(); ++f) {
            std::vector<char> in_val(y.size(), 0);
            for (int i : fold_sets[f]) in_val[static_cast<std::size_t>(i)] = 1;
            std::vector<int> tr_idx, va_idx(fold_sets[f].begin(), fold_sets[f].end());
            for (std::size_t i = 0; i < y.size(); ++i)
                if (!in_val[i]) tr_idx.push_back(static_cast<int>(i));
            Matrix Xtr(static_cast<Eigen::Index>(tr_idx.size()), X.cols());
            Matrix Xva(static_cast<Eigen::Index>(va_idx.size()), X.cols());
            std::vector<int> ytr, yva;
            for (std::size_t i = 0; i < tr_idx.size(); ++i) {
                Xtr.row(static_cast<Eigen::Index>(i)) = X.row(tr_idx[i]);
                ytr.push_back(y[static_cast<std::size_t>(tr_idx[i])]);
            }
            for (std::size_t i = 0; i < va_idx.size(); ++i) {
                Xva.row(static_cast<Eigen::Index>(i)) = X.row(va_idx[i]);
                yva.push_back(y[static_cast<std::size_t>(va_idx[i])]);
            }
            auto model = fit(ev.spec, Xtr, ytr, cv_fit_seed(seed, g, f));
            auto pred = model->predict(Xva);
            Metrics m = compute_metrics(yva, pred.labels, pred.scores);
            sum_auc += m.auc;
            sum_acc += m.accuracy;
            ev.fold_metrics.push_back(m);
        }
        ev.mean_auc = sum_auc / static_cast<double>(folds);
        ev.mean_accuracy = sum_acc / static_cast<double>(folds);
        res.all.push_back(std::move(ev));
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < res.all.size(); ++g) {
        if (res.all[g].mean_auc > res.all[best].mean_auc ||
            (res.all[g].mean_auc == res.all[best].mean_auc &&
             res.all[g].mean_accuracy > res.all[best].mean_accuracy))
            best = g;
    }
    res.best = res.all[best].spec;
    res.fold_metrics = res.all[best].fold_metrics;
    res.mean_auc = res.all[best].mean_auc;
    res.mean_accuracy = res.all[best].mean_accuracy;
    return res;
}

std::vector<ClassifierSpec> default_grid(ClassifierKind kind) {
    std::vector<ClassifierSpec> grid;
    auto add = [&](nlohmann::json h) { grid.push_back({kind, std::move(h)}); };
    switch (kind) {
        case ClassifierKind::logistic_regression:
            for (double lambda : {0.01, 0.1, 1.0}) add({{"lambda", lambda}});
            break;
        case ClassifierKind::knn:
            for (int k : {1, 3, 5, 11}) add({{"k", k}});
            break;
        case ClassifierKind::decision_tree:
            for (int depth : {3, 5, 10, 0}) add({{"max_depth", depth}});
            break;
        case ClassifierKind::random_forest:
            for (int trees : {50, 200})
                for (int depth : {5, 0}) add({{"trees", trees}, {"max_depth", depth}});
            break;
        case ClassifierKind::svm:
            for (double C : {0.1, 1.0, 10.0}) {
                add({{"C", C}, {"kernel", "linear"}});
                for (double gamma : {0.01, 0.1}) add({{"C", C}, {"kernel", "rbf"}, {"gamma", gamma}});
            }
            break;
        case ClassifierKind::nu_svm:
            for (double nu : {0.25, 0.5, 0.75}) {
                add({{"nu", nu}, {"kernel", "linear"}});
                for (double gamma : {0.01, 0.1}) add({{"nu", nu}, {"kernel", "rbf"}, {"gamma", gamma}});
            }
            break;
        case ClassifierKind::mlp:
            for (int hidden : {32, 128}) add({{"hidden", hidden}, {"epochs", 300}});
            break;
    }
    return grid;
}

// ---- report --------------------------------------------------------------------

EvalReport sorted_report(const EvalReport& report) {
    EvalReport out = report;
    std::stable_sort(out.rows.begin(), out.rows.end(), [](const EvalRow& a, const EvalRow& b) {
        if (a.dr_method != b.dr_method) return a.dr_method < b.dr_method;
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    return out;
}

std::string render_table(const EvalReport& report) {
    EvalReport rep = sorted_report(report);
    const char* metric_names[4] = {"Accuracy", "Specificity", "Sensitivity", "AUC"};
    auto metric = [](const Metrics& m, int j) {
        return 100.0 * (j == 0 ? m.accuracy : j == 1 ? m.specificity : j == 2 ? m.sensitivity : m.auc);
    };
    // column maxima on the rounded percentages, matching what is printed
    auto rounded = [&](const EvalRow& r, int j) {
        return std::round(metric(r.metrics, j) * 100.0) / 100.0;
    };
    double maxima[4] = {-1.0, -1.0, -1.0, -1.0};
    for (const auto& r : rep.rows)
        for (int j = 0; j < 4; ++j) maxima[j] = std::max(maxima[j], rounded(r, j));

    std::vector<std::vector<std::string>> cells;
    cells.push_back({"DR Method", "Classifier", metric_names[0], metric_names[1], metric_names[2],
                     metric_names[3]});
    for (const auto& r : rep.rows) {
        std::vector<std::string> row{r.dr_method, kind_name(r.kind)};
        for (int j = 0; j < 4; ++j) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", rounded(r, j));
            std::string s = buf;
            if (!rep.rows.empty() && rounded(r, j) == maxima[j]) s = "**" + s + "**";
            row.push_back(s);
        }
        cells.push_back(std::move(row));
    }
    std::vector<std::size_t> width(6, 0);
    for (const auto& row : cells)
        for (std::size_t j = 0; j < 6; ++j) width[j] = std::max(width[j], row[j].size());
    std::ostringstream out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            out << cells[i][j] << std::string(width[j] - cells[i][j].size(), ' ');
            out << (j + 1 < 6 ? "  " : "");
        }
        out << '\n';
        if (i == 0) {
            for (std::size_t j = 0; j < 6; ++j)
                out << std::string(width[j], '-') << (j + 1 < 6 ? "  " : "");
            out << '\n';
        }
    }
    return out.str();
}

void save_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "dr_method,classifier,accuracy,specificity,sensitivity,auc,hyperparams_json,seed\n";
    for (const auto& r : sorted_report(report).rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%.2f,%.2f", 100.0 * r.metrics.accuracy,
                      100.0 * r.metrics.specificity, 100.0 * r.metrics.sensitivity,
                      100.0 * r.metrics.auc);
        out << csv_quote(r.dr_method) << ',' << kind_name(r.kind) << ',' << buf << ','
            << csv_quote(r.hyper.dump()) << ',' << r.seed << '\n';
    }
}

EvalReport load_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty report: " + path);
    EvalReport rep;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 8) throw std::runtime_error("malformed report row: " + line);
        EvalRow r;
        r.dr_method = cells[0];
        r.kind = kind_from_name(cells[1]);
        r.metrics.accuracy = std::stod(cells[2]) / 100.0;
        r.metrics.specificity = std::stod(cells[3]) / 100.0;
        r.metrics.sensitivity = std::stod(cells[4]) / 100.0;
        r.metrics.auc = std::stod(cells[5]) / 100.0;
        r.hyper = nlohmann::json::parse(cells[6]);
        r.seed = std::stoull(cells[7]);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

}  // namespace mtsk::cls
