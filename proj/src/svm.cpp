#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "mtsk/classify.hpp"

namespace mtsk::cls {

namespace {

constexpr double kTau = 1e-12;
constexpr double kKktTol = 1e-3;

Matrix kernel_matrix(const Matrix& A, const Matrix& B, SvmModel::Kernel kernel, double gamma) {
    if (kernel == SvmModel::Kernel::linear) return A * B.transpose();
    // rbf
    Vector a2 = A.rowwise().squaredNorm();
    Vector b2 = B.rowwise().squaredNorm();
    Matrix d = a2.replicate(1, B.rows()) + b2.transpose().replicate(A.rows(), 1) -
               2.0 * A * B.transpose();
    return (-gamma * d.cwiseMax(0.0)).array().exp();
}

struct SmoProblem {
    const Matrix& K;               // n x n kernel
    const std::vector<double>& y;  // +1/-1
    Vector alpha;
    Vector G;  // gradient of 0.5 a'Qa + p'a, Q_ij = y_i y_j K_ij
    double C = 1.0;

    double q(int i, int j) const { return y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * K(i, j); }

    // exact two-variable step along y_i e_i - y_j e_j, clipped to the box
    void update_pair(int i, int j) {
        const double yi = y[static_cast<std::size_t>(i)], yj = y[static_cast<std::size_t>(j)];
        const double curvature = std::max(K(i, i) + K(j, j) - 2.0 * K(i, j), kTau);
        double s = -(yi * G(i) - yj * G(j)) / curvature;
        // box bounds for alpha_i + s*yi in [0, C] and alpha_j - s*yj in [0, C]
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        if (yi > 0) {
            lo = std::max(lo, -alpha(i));
            hi = std::min(hi, C - alpha(i));
        } else {
            lo = std::max(lo, alpha(i) - C);
            hi = std::min(hi, alpha(i));
        }
        if (yj > 0) {
            lo = std::max(lo, alpha(j) - C);
            hi = std::min(hi, alpha(j));
        } else {
            lo = std::max(lo, -alpha(j));
            hi = std::min(hi, C - alpha(j));
        }
        s = std::min(std::max(s, lo), hi);
        if (s == 0.0) return;
        const double d_ai = s * yi, d_aj = -s * yj;
        alpha(i) += d_ai;
        alpha(j) += d_aj;
        const auto n = static_cast<Eigen::Index>(y.size());
        for (Eigen::Index t = 0; t < n; ++t)
            G(t) += q(static_cast<int>(t), i) * d_ai + q(static_cast<int>(t), j) * d_aj;
    }
};

}  // namespace

Prediction SvmModel::predict(const Matrix& X) const {
    Matrix rows;
    if (kernel == Kernel::precomputed) {
        if (X.cols() != coef.size())
            throw std::invalid_argument("shape error: kernel rows must match training size");
        rows = X;
    } else {
        if (X.cols() != train.cols())
            throw std::invalid_argument("shape error: feature width mismatch");
        rows = kernel_matrix(X, train, kernel, gamma);
    }
    Prediction p;
    p.scores = rows * coef;
    p.scores.array() -= rho;
    p.labels.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        p.labels[static_cast<std::size_t>(i)] = p.scores(i) > 0.0 ? 1 : 0;
    return p;
}

std::unique_ptr<SvmModel> fit_svm(const Matrix& X, const std::vector<int>& y01, double C,
                                  SvmModel::Kernel kernel, double gamma) {
    if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
    const int n = static_cast<int>(X.rows());
    Matrix K = kernel == SvmModel::Kernel::precomputed ? X : kernel_matrix(X, X, kernel, gamma);
    if (K.rows() != K.cols())
        throw std::invalid_argument("precomputed kernel must be square at fit time");
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = y01[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;

    SmoProblem prob{K, y, Vector::Zero(n), Vector::Constant(n, -1.0), C};

    const long max_iter = std::max<long>(10000000, 100l * n);
    long iter = 0;
    for (; iter < max_iter; ++iter) {
        // maximal violating pair over I_up / I_low
        double m_up = -std::numeric_limits<double>::infinity();
        double m_low = std::numeric_limits<double>::infinity();
        int i = -1, j = -1;
        for (int t = 0; t < n; ++t) {
            const double yt = y[static_cast<std::size_t>(t)];
            const double v = -yt * prob.G(t);
            const bool in_up = (yt > 0 && prob.alpha(t) < C) || (yt < 0 && prob.alpha(t) > 0);
            const bool in_low = (yt > 0 && prob.alpha(t) > 0) || (yt < 0 && prob.alpha(t) < C);
            if (in_up && v > m_up) {
                m_up = v;
                i = t;
            }
            if (in_low && v < m_low) {
                m_low = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || m_up - m_low <= kKktTol) break;
        prob.update_pair(i, j);
    }
    if (iter == max_iter) std::fprintf(stderr, "[svm] reached iteration limit before KKT tolerance\n");

    auto m = std::make_unique<SvmModel>();
    m->kernel = kernel;
    m->gamma = gamma;
    if (kernel != SvmModel::Kernel::precomputed) m->train = X;
    m->n_train = n;
    m->coef.resize(n);
    // rho from free points, else the midpoint of the bounds
    double sum_free = 0.0;
    int n_free = 0;
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
        const double yt = y[static_cast<std::size_t>(t)];
        const double yg = yt * prob.G(t);
        m->coef(t) = prob.alpha(t) * yt;
        if (prob.alpha(t) > kTau) ++m->n_support;
        if (prob.alpha(t) > C - kTau) ++m->n_bound;
        if (prob.alpha(t) > kTau && prob.alpha(t) < C - kTau) {
            sum_free += yg;
            ++n_free;
        } else if ((yt > 0 && prob.alpha(t) >= C - kTau) || (yt < 0 && prob.alpha(t) <= kTau)) {
            lb = std::max(lb, yg);
        } else {
            ub = std::min(ub, yg);
        }
    }
    m->rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    return m;
}

std::unique_ptr<SvmModel> fit_nu_svm(const Matrix& X, const std::vector<int>& y01, double nu,
                                     SvmModel::Kernel kernel, double gamma) {
    if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("nu must be in (0, 1]");
    const int n = static_cast<int>(X.rows());
    int n_pos = 0;
    for (int v : y01) n_pos += v;
    const int n_neg = n - n_pos;
    // per-class sums of nu*n/2 must fit under the per-record cap of 1
    if (nu * n / 2.0 > std::min(n_pos, n_neg) + 1e-12)
        throw std::invalid_argument("infeasible-nu error: nu exceeds 2*min(n+,n-)/n");

    Matrix K = kernel == SvmModel::Kernel::precomputed ? X : kernel_matrix(X, X, kernel, gamma);
    if (K.rows() != K.cols())
        throw std::invalid_argument("precomputed kernel must be square at fit time");
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = y01[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;

    SmoProblem prob{K, y, Vector::Zero(n), Vector::Zero(n), 1.0};
    double left_pos = nu * n / 2.0, left_neg = nu * n / 2.0;
    for (int t = 0; t < n; ++t) {
        if (y[static_cast<std::size_t>(t)] > 0) {
            prob.alpha(t) = std::min(1.0, left_pos);
            left_pos -= prob.alpha(t);
        } else {
            prob.alpha(t) = std::min(1.0, left_neg);
            left_neg -= prob.alpha(t);
        }
    }
    // initial gradient of 0.5 a'Qa (p = 0)
    for (int t = 0; t < n; ++t) {
        double g = 0.0;
        for (int s = 0; s < n; ++s)
            if (prob.alpha(s) > 0.0) g += prob.q(t, s) * prob.alpha(s);
        prob.G(t) = g;
    }

    const long max_iter = std::max<long>(10000000, 100l * n);
    long iter = 0;
    for (; iter < max_iter; ++iter) {
        // same-class violating pairs keep both class sums constant
        double best_violation = 0.0;
        int bi = -1, bj = -1;
        for (int cls = 0; cls < 2; ++cls) {
            const double yc = cls == 0 ? 1.0 : -1.0;
            double g_min = std::numeric_limits<double>::infinity();
            double g_max = -std::numeric_limits<double>::infinity();
            int i = -1, j = -1;
            for (int t = 0; t < n; ++t) {
                if (y[static_cast<std::size_t>(t)] != yc) continue;
                if (prob.alpha(t) < 1.0 - kTau && prob.G(t) < g_min) {
                    g_min = prob.G(t);
                    i = t;
                }
                if (prob.alpha(t) > kTau && prob.G(t) > g_max) {
                    g_max = prob.G(t);
                    j = t;
                }
            }
            if (i >= 0 && j >= 0 && g_max - g_min > best_violation) {
                best_violation = g_max - g_min;
                bi = i;
                bj = j;
            }
        }
        if (bi < 0 || best_violation <= kKktTol) break;
        // move mass from j to i (same class): alpha_i += s, alpha_j -= s
        const double curvature = std::max(K(bi, bi) + K(bj, bj) - 2.0 * K(bi, bj), kTau);
        double s = (prob.G(bj) - prob.G(bi)) / curvature;
        s = std::min(s, std::min(1.0 - prob.alpha(bi), prob.alpha(bj)));
        if (s <= 0.0) break;
        prob.alpha(bi) += s;
        prob.alpha(bj) -= s;
        for (int t = 0; t < n; ++t)
            prob.G(t) += (prob.q(t, bi) - prob.q(t, bj)) * s;
    }
    if (iter == max_iter) std::fprintf(stderr, "[svm] reached iteration limit before KKT tolerance\n");

    // per-class offsets from free points
    double sum_free[2] = {0.0, 0.0};
    int n_free[2] = {0, 0};
    double ub[2], lb[2];
    ub[0] = ub[1] = std::numeric_limits<double>::infinity();
    lb[0] = lb[1] = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
        const int cls = y[static_cast<std::size_t>(t)] > 0 ? 0 : 1;
        if (prob.alpha(t) >= 1.0 - kTau)
            lb[cls] = std::max(lb[cls], prob.G(t));
        else if (prob.alpha(t) <= kTau)
            ub[cls] = std::min(ub[cls], prob.G(t));
        else {
            sum_free[cls] += prob.G(t);
            ++n_free[cls];
        }
    }
    // free points of each class sit at G = rho -/+ b; recover both
    const double r1 = n_free[0] > 0 ? sum_free[0] / n_free[0] : 0.5 * (ub[0] + lb[0]);
    const double r2 = n_free[1] > 0 ? sum_free[1] / n_free[1] : 0.5 * (ub[1] + lb[1]);
    const double r = (r1 + r2) / 2.0;  // margin scale
    if (!(r > 0.0) || !std::isfinite(r))
        throw std::runtime_error("nu-svm solve failed: non-positive margin scale");

    auto m = std::make_unique<SvmModel>();
    m->kernel = kernel;
    m->gamma = gamma;
    if (kernel != SvmModel::Kernel::precomputed) m->train = X;
    m->n_train = n;
    m->coef.resize(n);
    for (int t = 0; t < n; ++t) {
        m->coef(t) = prob.alpha(t) * y[static_cast<std::size_t>(t)] / r;
        if (prob.alpha(t) > kTau) ++m->n_support;
        if (prob.alpha(t) >= 1.0 - kTau) ++m->n_bound;
    }
    m->rho = (r1 - r2) / 2.0 / r;
    return m;
}

}  // namespace mtsk::cls
