#include "mtsk/dimred.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace mtsk::dimred {

namespace {

// eigenpairs of a symmetric matrix, sorted by descending eigenvalue
void sym_eig_desc(const Matrix& A, Vector& values, Matrix& vectors) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(A);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    const auto n = A.rows();
    values.resize(n);
    vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        values(i) = solver.eigenvalues()(n - 1 - i);
        vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
}

PcaModel pca_core(const Matrix& X) {
    if (X.rows() < 2) throw std::invalid_argument("pca needs at least 2 rows");
    PcaModel m;
    m.mean = X.colwise().mean().transpose();
    Matrix centered = X.rowwise() - m.mean.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
    Matrix vectors;
    sym_eig_desc(cov, m.eigenvalues, vectors);
    const double trace = std::max(m.eigenvalues.sum(), 0.0);
    if (trace <= 0.0)
        throw std::runtime_error("degenerate input: all rows are equal");
    // near-zero eigenvalues are treated as zero
    for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i)
        if (m.eigenvalues(i) < 1e-12 * trace) m.eigenvalues(i) = std::max(m.eigenvalues(i), 0.0);
    m.components = vectors;  // trimmed by the callers
    return m;
}

void pca_trim(PcaModel& m, int k) {
    const double total = m.eigenvalues.sum();
    m.components = m.components.leftCols(k).eval();
    m.captured_variance_fraction = total > 0 ? m.eigenvalues.head(k).sum() / total : 1.0;
}

}  // namespace

PcaModel pca_fit(const Matrix& X, double variance_fraction) {
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
        throw std::invalid_argument("variance fraction must be in (0, 1]");
    PcaModel m = pca_core(X);
    const double total = m.eigenvalues.sum();
    double cum = 0.0;
    int k = static_cast<int>(m.eigenvalues.size());
    for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) {
        cum += m.eigenvalues(i);
        if (cum >= variance_fraction * total - 1e-15 * total) {
            k = static_cast<int>(i) + 1;
            break;
        }
    }
    pca_trim(m, k);
    return m;
}

PcaModel pca_fit_k(const Matrix& X, int k) {
    if (k < 1 || k > std::min(X.rows(), X.cols()))
        throw std::invalid_argument("component count out of range");
    PcaModel m = pca_core(X);
    pca_trim(m, k);
    return m;
}

Matrix pca_transform(const PcaModel& m, const Matrix& X) {
    if (X.cols() != m.mean.size())
        throw std::invalid_argument("shape error: expected " + std::to_string(m.mean.size()) +
                                    " columns, got " + std::to_string(X.cols()));
    return (X.rowwise() - m.mean.transpose()) * m.components;
}

namespace {

KpcaModel kpca_core(const Matrix& K, int k) {
    const auto n = K.rows();
    if (K.cols() != n) throw std::invalid_argument("kernel matrix must be square");
    if (k < 1 || k > n - 1) throw std::invalid_argument("kpca component count must be in [1, n-1]");
    const double scale = std::max(K.cwiseAbs().maxCoeff(), 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (std::abs(K(i, j) - K(j, i)) > 1e-8 * scale)
                throw std::invalid_argument("kernel matrix is not symmetric");

    KpcaModel m;
    m.col_mean = K.colwise().mean().transpose();
    m.grand_mean = K.mean();
    // double centering: HKH = K - 1 colmean' - colmean 1' + grand
    Matrix Kc = K;
    Kc.rowwise() -= m.col_mean.transpose();
    Kc.colwise() -= m.col_mean;
    Kc.array() += m.grand_mean;

    Vector values;
    Matrix vectors;
    sym_eig_desc(Kc, values, vectors);
    const double trace = std::max(Kc.trace(), 0.0);
    int avail = 0;
    while (avail < static_cast<int>(values.size()) && values(avail) > 1e-12 * std::max(trace, 1e-300))
        ++avail;
    if (avail < k) {
        std::fprintf(stderr, "[kpca] only %d positive eigenvalues available, reducing k from %d\n",
                     avail, k);
        k = avail;
    }
    if (k < 1) throw std::runtime_error("degenerate kernel: no positive eigenvalues after centering");
    m.k = k;
    m.eigenvalues = values.head(k);
    m.alphas.resize(n, k);
    for (int j = 0; j < k; ++j) m.alphas.col(j) = vectors.col(j) / std::sqrt(values(j));
    return m;
}

Matrix polynomial_kernel(const Matrix& A, const Matrix& B, double gamma, int degree, double coef0) {
    Matrix K = (gamma * (A * B.transpose())).array() + coef0;
    Matrix out = Matrix::Ones(K.rows(), K.cols());
    for (int d = 0; d < degree; ++d) out = out.cwiseProduct(K);
    return out;
}

}  // namespace

KpcaModel kpca_fit_precomputed(const Matrix& K, int k) {
    KpcaModel m = kpca_core(K, k);
    m.kind = KpcaModel::KernelKind::precomputed;
    return m;
}

KpcaModel kpca_fit_polynomial(const Matrix& X, int k, double gamma, int degree, double coef0) {
    if (degree < 1) throw std::invalid_argument("polynomial degree must be >= 1");
    Matrix K = polynomial_kernel(X, X, gamma, degree, coef0);
    KpcaModel m = kpca_core(K, k);
    m.kind = KpcaModel::KernelKind::polynomial;
    m.gamma = gamma;
    m.degree = degree;
    m.coef0 = coef0;
    m.train_features = X;
    return m;
}

Matrix kpca_transform(const KpcaModel& m, const Matrix& rows) {
    Matrix K;
    if (m.kind == KpcaModel::KernelKind::polynomial) {
        if (rows.cols() != m.train_features.cols())
            throw std::invalid_argument("shape error: feature width mismatch");
        K = polynomial_kernel(rows, m.train_features, m.gamma, m.degree, m.coef0);
    } else {
        if (rows.cols() != m.col_mean.size())
            throw std::invalid_argument("shape error: kernel row length must equal training size");
        K = rows;
    }
    // same centering as at fit time
    Vector row_mean = K.rowwise().mean();
    Matrix Kc = K;
    Kc.colwise() -= row_mean;
    Kc.rowwise() -= m.col_mean.transpose();
    Kc.array() += m.grand_mean;
    return Kc * m.alphas;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    if (j.empty()) return {};
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        for (std::size_t c = 0; c < j[i].size(); ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    return m;
}

nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vector vector_from_json(const nlohmann::json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

}  // namespace

std::string pca_to_json(const PcaModel& m) {
    nlohmann::json j;
    j["type"] = "pca";
    j["mean"] = vector_to_json(m.mean);
    j["eigenvalues"] = vector_to_json(m.eigenvalues);
    j["components"] = matrix_to_json(m.components);
    j["captured_variance_fraction"] = m.captured_variance_fraction;
    return j.dump();
}

PcaModel pca_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PcaModel m;
    m.mean = vector_from_json(j.at("mean"));
    m.eigenvalues = vector_from_json(j.at("eigenvalues"));
    m.components = matrix_from_json(j.at("components"));
    m.captured_variance_fraction = j.at("captured_variance_fraction").get<double>();
    return m;
}

std::string kpca_to_json(const KpcaModel& m) {
    nlohmann::json j;
    j["type"] = "kpca";
    j["kind"] = m.kind == KpcaModel::KernelKind::precomputed ? "precomputed" : "polynomial";
    j["gamma"] = m.gamma;
    j["degree"] = m.degree;
    j["coef0"] = m.coef0;
    j["k"] = m.k;
    j["eigenvalues"] = vector_to_json(m.eigenvalues);
    j["alphas"] = matrix_to_json(m.alphas);
    j["col_mean"] = vector_to_json(m.col_mean);
    j["grand_mean"] = m.grand_mean;
    j["train_features"] = matrix_to_json(m.train_features);
    return j.dump();
}

KpcaModel kpca_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    KpcaModel m;
    m.kind = j.at("kind") == "precomputed" ? KpcaModel::KernelKind::precomputed
                                           : KpcaModel::KernelKind::polynomial;
    m.gamma = j.at("gamma").get<double>();
    m.degree = j.at("degree").get<int>();
    m.coef0 = j.at("coef0").get<double>();
    m.k = j.at("k").get<int>();
    m.eigenvalues = vector_from_json(j.at("eigenvalues"));
    m.alphas = matrix_from_json(j.at("alphas"));
    m.col_mean = vector_from_json(j.at("col_mean"));
    m.grand_mean = j.at("grand_mean").get<double>();
    m.train_features = matrix_from_json(j.at("train_features"));
    return m;
}

}  // namespace mtsk::dimred
