#include <cmath>
#include <limits>
#include <stdexcept>

#include "mtsk/embedviz.hpp"
#include "mtsk/rng.hpp"

namespace mtsk::viz {

namespace {

Matrix squared_distances(const Matrix& X) {
    const auto n = X.rows();
    Vector sq = X.rowwise().squaredNorm();
    Matrix d = sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * X * X.transpose();
    return d.cwiseMax(0.0);
}

// cancellation-free form for the input space, so affinities are stable under
// constant shifts of the data
Matrix squared_distances_direct(const Matrix& X) {
    const auto n = X.rows();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = (X.row(i) - X.row(j)).squaredNorm();
            d(i, j) = v;
            d(j, i) = v;
        }
    return d;
}

}  // namespace

Affinities gaussian_affinities(const Matrix& X, double perplexity) {
    const auto n = X.rows();
    if (n < 2) throw std::invalid_argument("need at least 2 rows");
    // canonicalize: center the columns and drop sub-visual precision, so the
    // affinities (and thus the whole run) are bit-identical under constant
    // shifts of the input
    Matrix centered = X.rowwise() - X.colwise().mean();
    centered = centered.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
    const Matrix d2 = squared_distances_direct(centered);
    const double target_entropy = std::log(perplexity);

    Matrix cond = Matrix::Zero(n, n);
    Vector achieved(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0;
        double beta_lo = -std::numeric_limits<double>::infinity();
        double beta_hi = std::numeric_limits<double>::infinity();
        double entropy = 0.0;
        for (int step = 0; step < 50; ++step) {
            double sum_p = 0.0, sum_dp = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    cond(i, j) = 0.0;
                    continue;
                }
                const double p = std::exp(-beta * d2(i, j));
                cond(i, j) = p;
                sum_p += p;
                sum_dp += d2(i, j) * p;
            }
            sum_p = std::max(sum_p, std::numeric_limits<double>::min());
            entropy = beta * (sum_dp / sum_p) + std::log(sum_p);
            const double diff = entropy - target_entropy;
            if (std::abs(diff) < 1e-7) break;
            if (diff > 0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = std::isinf(beta_lo) ? beta * 0.5 : 0.5 * (beta + beta_lo);
            }
        }
        double sum_p = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) sum_p += cond(i, j);
        sum_p = std::max(sum_p, std::numeric_limits<double>::min());
        cond.row(i) /= sum_p;
        achieved(i) = std::exp(entropy);
    }

    Affinities a;
    a.P = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
    a.achieved_perplexity = achieved;
    return a;
}

TsneResult tsne(const Matrix& X, const TsneConfig& cfg) {
    const auto n = X.rows();
    if (n < 10) throw std::invalid_argument("t-SNE needs at least 10 rows");
    if (!(cfg.perplexity > 0.0) || cfg.perplexity >= (static_cast<double>(n) - 1.0) / 3.0)
        throw std::invalid_argument("config error: perplexity must be below (n-1)/3");

    const Affinities aff = gaussian_affinities(X, cfg.perplexity);
    const Matrix& P = aff.P;

    Matrix Y(n, 2);
    Rng rng(mix_seed(cfg.seed, 0x75e));
    for (Eigen::Index i = 0; i < n; ++i)
        for (int d = 0; d < 2; ++d) Y(i, d) = 1e-4 * rng.normal();

    Matrix velocity = Matrix::Zero(n, 2);
    Matrix gains = Matrix::Ones(n, 2);
    Matrix grad(n, 2);
    Matrix Q(n, n);

    TsneResult res;
    for (int iter = 0; iter < cfg.iters; ++iter) {
        const double exag = iter < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
        const double momentum = iter < cfg.momentum_switch_iter ? cfg.momentum : cfg.final_momentum;

        // student-t affinities of the current layout
        const Matrix yd2 = squared_distances(Y);
        double sum_q = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) {
                    Q(i, j) = 0.0;
                    continue;
                }
                Q(i, j) = 1.0 / (1.0 + yd2(i, j));
                sum_q += Q(i, j);
            }
        }

        grad.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double mult = (exag * P(i, j) - Q(i, j) / sum_q) * Q(i, j);
                grad(i, 0) += 4.0 * mult * (Y(i, 0) - Y(j, 0));
                grad(i, 1) += 4.0 * mult * (Y(i, 1) - Y(j, 1));
            }
        }

        for (Eigen::Index i = 0; i < n; ++i)
            for (int d = 0; d < 2; ++d) {
                const bool opposed = (grad(i, d) > 0.0) != (velocity(i, d) > 0.0);
                gains(i, d) = std::max(0.01, opposed ? gains(i, d) + 0.2 : gains(i, d) * 0.8);
                velocity(i, d) = momentum * velocity(i, d) - cfg.learning_rate * gains(i, d) * grad(i, d);
                Y(i, d) += velocity(i, d);
            }
        Y.rowwise() -= Y.colwise().mean();

        if ((iter + 1) % 50 == 0 || iter + 1 == cfg.iters) {
            // KL against the true (unexaggerated) P
            double kl = 0.0;
            const Matrix kd2 = squared_distances(Y);
            double z = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    if (i != j) z += 1.0 / (1.0 + kd2(i, j));
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (i == j || P(i, j) <= 0.0) continue;
                    const double q = std::max(1.0 / (1.0 + kd2(i, j)) / z,
                                              std::numeric_limits<double>::min());
                    kl += P(i, j) * std::log(P(i, j) / q);
                }
            res.trace_iters.push_back(iter + 1);
            res.trace_kl.push_back(kl);
        }
    }
    if (!Y.allFinite()) throw std::runtime_error("t-SNE produced non-finite coordinates");
    res.embedding.coords = std::move(Y);
    return res;
}

}  // namespace mtsk::viz
