#pragma once

#include <string>

#include "mtsk/dataset.hpp"

namespace mtsk::dimred {

struct PcaModel {
    Vector mean;
    Vector eigenvalues;  // all p, non-increasing
    Matrix components;   // p x k, orthonormal columns
    double captured_variance_fraction = 0.0;

    int k() const { return static_cast<int>(components.cols()); }
};

// target: keep the smallest k whose cumulative eigenvalue share reaches
// variance_fraction.
PcaModel pca_fit(const Matrix& X, double variance_fraction);
PcaModel pca_fit_k(const Matrix& X, int k);
Matrix pca_transform(const PcaModel& m, const Matrix& X);

struct KpcaModel {
    enum class KernelKind { precomputed, polynomial };
    KernelKind kind = KernelKind::precomputed;
    double gamma = 0.002083;
    int degree = 3;
    double coef0 = 1.0;
    int k = 0;
    Vector eigenvalues;    // k retained, strictly positive
    Matrix alphas;         // n x k, eigenvectors scaled by 1/sqrt(eigenvalue)
    Vector col_mean;       // centering stats of the training kernel
    double grand_mean = 0.0;
    Matrix train_features; // polynomial mode only
};

// Double-centers the kernel, keeps the top-k positive eigenpairs. k is reduced
// with a warning when fewer positive eigenvalues exist.
KpcaModel kpca_fit_precomputed(const Matrix& K, int k);

// (gamma * <x, x'> + coef0)^degree on feature rows.
KpcaModel kpca_fit_polynomial(const Matrix& X, int k, double gamma, int degree, double coef0);

// rows: kernel rows against the training set (precomputed) or raw feature rows
// (polynomial).
Matrix kpca_transform(const KpcaModel& m, const Matrix& rows);

std::string pca_to_json(const PcaModel& m);
PcaModel pca_from_json(const std::string& text);
std::string kpca_to_json(const KpcaModel& m);
KpcaModel kpca_from_json(const std::string& text);

}  // namespace mtsk::dimred
