#include "mtsk/tck.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "mtsk/parallel.hpp"
#include "mtsk/rng.hpp"

namespace mtsk::tck {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct Cell {
    int v;     // attribute slot within the subset
    int l;     // time slot within the segment
    double x;
};

// The partition's view of the data: observed cells per subset record plus the
// empirical statistics the priors are built from.
struct SubsetData {
    int m = 0;  // record count
    int V = 0;
    int L = 0;
    std::vector<std::vector<Cell>> cells;  // per record
    Matrix cell_mean;   // V x L
    Vector attr_var;    // V, floored
    Matrix imputed;     // m x (V*L), mean-imputed vectors for initialization
};

SubsetData extract_subset(const MtsDataset& ds, const PartitionConfig& cfg, double var_floor) {
    SubsetData sd;
    sd.m = static_cast<int>(cfg.record_subset.size());
    sd.V = static_cast<int>(cfg.attribute_subset.size());
    sd.L = cfg.segment_len();
    sd.cells.resize(static_cast<std::size_t>(sd.m));

    Matrix sum = Matrix::Zero(sd.V, sd.L);
    Matrix cnt = Matrix::Zero(sd.V, sd.L);
    for (int i = 0; i < sd.m; ++i) {
        const auto& rec = ds.records[static_cast<std::size_t>(cfg.record_subset[static_cast<std::size_t>(i)])];
        auto& cells = sd.cells[static_cast<std::size_t>(i)];
        for (int v = 0; v < sd.V; ++v) {
            const int attr = cfg.attribute_subset[static_cast<std::size_t>(v)];
            for (int l = 0; l < sd.L; ++l) {
                const int t = cfg.t_begin + l;
                if (rec.mask(attr, t)) {
                    const double x = rec.values(attr, t);
                    cells.push_back(Cell{v, l, x});
                    sum(v, l) += x;
                    cnt(v, l) += 1.0;
                }
            }
        }
    }

    // per-cell empirical means, falling back to the attribute mean, then zero
    Vector attr_sum = sum.rowwise().sum();
    Vector attr_cnt = cnt.rowwise().sum();
    sd.cell_mean.resize(sd.V, sd.L);
    for (int v = 0; v < sd.V; ++v) {
        const double amean = attr_cnt(v) > 0 ? attr_sum(v) / attr_cnt(v) : 0.0;
        for (int l = 0; l < sd.L; ++l)
            sd.cell_mean(v, l) = cnt(v, l) > 0 ? sum(v, l) / cnt(v, l) : amean;
    }

    // per-attribute empirical variance over all observed cells
    sd.attr_var.resize(sd.V);
    Vector ss = Vector::Zero(sd.V);
    for (const auto& cells : sd.cells)
        for (const auto& c : cells) {
            const double amean = attr_cnt(c.v) > 0 ? attr_sum(c.v) / attr_cnt(c.v) : 0.0;
            ss(c.v) += (c.x - amean) * (c.x - amean);
        }
    for (int v = 0; v < sd.V; ++v) {
        const double var = attr_cnt(v) > 0 ? ss(v) / attr_cnt(v) : 1.0;
        sd.attr_var(v) = std::max(var, var_floor);
    }

    sd.imputed = Matrix(sd.m, sd.V * sd.L);
    for (int i = 0; i < sd.m; ++i) {
        for (int v = 0; v < sd.V; ++v)
            for (int l = 0; l < sd.L; ++l) sd.imputed(i, v * sd.L + l) = sd.cell_mean(v, l);
        for (const auto& c : sd.cells[static_cast<std::size_t>(i)])
            sd.imputed(i, c.v * sd.L + c.l) = c.x;
    }
    return sd;
}

std::vector<int> kmeanspp_seeds(const Matrix& points, int c, Rng& rng) {
    const int m = static_cast<int>(points.rows());
    std::vector<int> seeds;
    seeds.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(m))));
    Vector d2 = (points.rowwise() - points.row(seeds[0])).rowwise().squaredNorm();
    while (static_cast<int>(seeds.size()) < c) {
        const double total = d2.sum();
        int pick;
        if (total <= 0.0) {
            pick = static_cast<int>(rng.index(static_cast<std::size_t>(m)));
        } else {
            double u = rng.uniform() * total;
            pick = m - 1;
            for (int i = 0; i < m; ++i) {
                u -= d2(i);
                if (u <= 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        seeds.push_back(pick);
        Vector nd = (points.rowwise() - points.row(pick)).rowwise().squaredNorm();
        d2 = d2.cwiseMin(nd);
    }
    return seeds;
}

// log N(x | mu, var) summed over a record's observed cells
double record_loglik(const std::vector<Cell>& cells, const Matrix& mean, const Matrix& log_var,
                     const Matrix& inv_var, int k) {
    double ll = 0.0;
    for (const auto& c : cells) {
        const double r = c.x - mean(c.v, c.l);
        ll += -0.5 * (kLog2Pi + log_var(k, c.v) + r * r * inv_var(k, c.v));
    }
    return ll;
}

// one imputed row back into V x L shape
Matrix unflatten_row(const Matrix& flat, int i, int V, int L) {
    Matrix mu(V, L);
    for (int v = 0; v < V; ++v)
        for (int l = 0; l < L; ++l) mu(v, l) = flat(i, v * L + l);
    return mu;
}

}  // namespace

std::vector<PartitionConfig> sample_partition_configs(int n, int D, int T, int C, int R,
                                                      std::uint64_t master_seed,
                                                      const SubsetRules& rules) {
    if (C < 2) throw std::invalid_argument("C must be >= 2");
    if (R < 1) throw std::invalid_argument("R must be >= 1");
    if (n < C)
        throw std::invalid_argument("ensemble-size error: need at least C=" + std::to_string(C) +
                                    " records, got " + std::to_string(n));
    if (D < 1 || T < 1) throw std::invalid_argument("empty dataset dimensions");

    const int subset_size = static_cast<int>(std::ceil(rules.record_frac * n));
    const int attr_lo = std::min(D, std::max(rules.attr_min, static_cast<int>(std::ceil(rules.attr_min_frac * D))));
    const int seg_lo = std::min(rules.seg_min, T);

    std::vector<PartitionConfig> configs;
    configs.reserve(static_cast<std::size_t>((C - 1) * R));
    for (int c = 2; c <= C; ++c) {
        for (int r = 1; r <= R; ++r) {
            Rng rng(mix_seed(master_seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r), 0x7c5));
            PartitionConfig cfg;
            cfg.record_subset = rng.sample_indices(static_cast<std::size_t>(n), static_cast<std::size_t>(subset_size));
            const int attr_size = rng.uniform_int(attr_lo, D);
            cfg.attribute_subset = rng.sample_indices(static_cast<std::size_t>(D), static_cast<std::size_t>(attr_size));
            const int seg_len = rng.uniform_int(seg_lo, T);
            cfg.t_begin = rng.uniform_int(0, T - seg_len);
            cfg.t_end = cfg.t_begin + seg_len - 1;
            cfg.init_seed = rng.raw();
            cfg.components = c;
            if (cfg.components > subset_size) {
                std::fprintf(stderr, "[tck] clamping c=%d to record subset size %d\n", c, subset_size);
                cfg.components = subset_size;
            }
            configs.push_back(std::move(cfg));
        }
    }
    return configs;
}

GmmPartition fit_map_em(const MtsDataset& ds, const PartitionConfig& cfg, const EmSettings& em) {
    if (cfg.components < 1) throw std::invalid_argument("component count must be >= 1");
    if (cfg.record_subset.empty() || cfg.attribute_subset.empty())
        throw std::invalid_argument("partition subsets must be non-empty");
    if (cfg.components > static_cast<int>(cfg.record_subset.size()))
        throw std::invalid_argument("component count exceeds record subset size");
    if (cfg.t_begin < 0 || cfg.t_end < cfg.t_begin || cfg.t_end >= ds.window_len)
        throw std::invalid_argument("time segment out of range");
    for (int a : cfg.attribute_subset)
        if (a < 0 || a >= ds.attrs()) throw std::invalid_argument("attribute index out of range");
    for (int i : cfg.record_subset)
        if (i < 0 || i >= ds.n()) throw std::invalid_argument("record index out of range");

    const SubsetData sd = extract_subset(ds, cfg, em.var_floor);
    const int c = cfg.components, m = sd.m, V = sd.V, L = sd.L;
    const double n0 = em.n0 < 0.0 ? 0.01 * m : em.n0;

    // mean smoothing prior over the segment
    Matrix S(L, L);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) S(i, j) = em.b0 * std::exp(-em.a0 * (i - j) * (i - j));
    Eigen::LDLT<Matrix> S_ldlt(S);
    if (S_ldlt.info() != Eigen::Success)
        throw std::runtime_error("mean prior covariance is not factorizable");
    const Matrix S_inv = S_ldlt.solve(Matrix::Identity(L, L));

    GmmPartition part;
    part.config = cfg;
    part.weights = Vector::Constant(c, 1.0 / c);
    part.variances = sd.attr_var.transpose().replicate(c, 1);
    part.means.resize(static_cast<std::size_t>(c));

    Rng rng(mix_seed(cfg.init_seed, 0xe3));
    const auto seeds = kmeanspp_seeds(sd.imputed, c, rng);
    for (int k = 0; k < c; ++k)
        part.means[static_cast<std::size_t>(k)] = unflatten_row(sd.imputed, seeds[static_cast<std::size_t>(k)], V, L);

    Matrix resp(m, c);
    Matrix log_var(c, V), inv_var(c, V);
    double prev_lp = -std::numeric_limits<double>::infinity();

    auto e_step = [&]() -> double {
        for (int k = 0; k < c; ++k)
            for (int v = 0; v < V; ++v) {
                log_var(k, v) = std::log(part.variances(k, v));
                inv_var(k, v) = 1.0 / part.variances(k, v);
            }
        double datalik = 0.0;
        for (int i = 0; i < m; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < c; ++k) {
                const double lw = part.weights(k) > 0.0 ? std::log(part.weights(k))
                                                        : -std::numeric_limits<double>::infinity();
                const double a = lw + record_loglik(sd.cells[static_cast<std::size_t>(i)],
                                                    part.means[static_cast<std::size_t>(k)],
                                                    log_var, inv_var, k);
                resp(i, k) = a;
                best = std::max(best, a);
            }
            double z = 0.0;
            for (int k = 0; k < c; ++k) z += std::exp(resp(i, k) - best);
            const double lse = best + std::log(z);
            for (int k = 0; k < c; ++k) resp(i, k) = std::exp(resp(i, k) - lse);
            datalik += lse;
        }
        return datalik;
    };

    auto log_prior = [&]() -> double {
        double lp = 0.0;
        for (int k = 0; k < c; ++k) {
            for (int v = 0; v < V; ++v) {
                Vector diff = part.means[static_cast<std::size_t>(k)].row(v).transpose() -
                              sd.cell_mean.row(v).transpose();
                lp += -0.5 * diff.dot(S_ldlt.solve(diff));
                const double var = part.variances(k, v);
                lp += -0.5 * n0 * (std::log(var) + sd.attr_var(v) / var);
            }
        }
        return lp;
    };

    auto reseed_component = [&](int k) {
        const int pick = static_cast<int>(rng.index(static_cast<std::size_t>(m)));
        part.means[static_cast<std::size_t>(k)] = unflatten_row(sd.imputed, pick, V, L);
        part.variances.row(k) = sd.attr_var.transpose();
        part.weights(k) = 1.0 / m;
        part.weights /= part.weights.sum();
        ++part.reseed_count;
    };

    int iter = 0;
    for (iter = 1; iter <= em.max_iter; ++iter) {
        double datalik = e_step();
        if (!std::isfinite(datalik)) throw std::runtime_error("numerical error: non-finite likelihood");

        // empty components are re-seeded from a random record, then the
        // E-step is redone so responsibilities stay consistent
        for (int attempt = 0; attempt < 3; ++attempt) {
            Vector nk = resp.colwise().sum().transpose();
            bool reseeded = false;
            for (int k = 0; k < c; ++k) {
                if (nk(k) < 1e-12) {
                    std::fprintf(stderr, "[tck] iteration %d: re-seeding empty component %d\n", iter, k);
                    reseed_component(k);
                    reseeded = true;
                }
            }
            if (!reseeded) break;
            part.reseed_iterations.push_back(iter);
            datalik = e_step();
            if (!std::isfinite(datalik)) throw std::runtime_error("numerical error: non-finite likelihood");
        }

        const double lp = datalik + log_prior();
        part.log_posterior_history.push_back(lp);
        if (iter > 1) {
            const double rel = std::abs(lp - prev_lp) / (std::abs(prev_lp) + 1e-12);
            if (rel < em.tol) {
                part.converged = true;
                break;
            }
        }
        prev_lp = lp;
        if (iter == em.max_iter) break;

        // ---- M-step ----
        Vector nk = resp.colwise().sum().transpose();
        part.weights = nk / nk.sum();

        // means first (with current variances), then variances at the new means
        std::vector<Matrix> ncell(static_cast<std::size_t>(c)), zcell(static_cast<std::size_t>(c));
        for (int k = 0; k < c; ++k) {
            ncell[static_cast<std::size_t>(k)] = Matrix::Zero(V, L);
            zcell[static_cast<std::size_t>(k)] = Matrix::Zero(V, L);
        }
        for (int i = 0; i < m; ++i)
            for (const auto& cell : sd.cells[static_cast<std::size_t>(i)])
                for (int k = 0; k < c; ++k) {
                    ncell[static_cast<std::size_t>(k)](cell.v, cell.l) += resp(i, k);
                    zcell[static_cast<std::size_t>(k)](cell.v, cell.l) += resp(i, k) * cell.x;
                }
        for (int k = 0; k < c; ++k) {
            for (int v = 0; v < V; ++v) {
                Matrix A = S_inv;
                const double iv = 1.0 / part.variances(k, v);
                for (int l = 0; l < L; ++l) A(l, l) += ncell[static_cast<std::size_t>(k)](v, l) * iv;
                Vector rhs = S_inv * sd.cell_mean.row(v).transpose() +
                             iv * zcell[static_cast<std::size_t>(k)].row(v).transpose();
                part.means[static_cast<std::size_t>(k)].row(v) = A.ldlt().solve(rhs).transpose();
            }
        }

        Matrix ssq = Matrix::Zero(c, V);
        Matrix nv = Matrix::Zero(c, V);
        for (int i = 0; i < m; ++i)
            for (const auto& cell : sd.cells[static_cast<std::size_t>(i)])
                for (int k = 0; k < c; ++k) {
                    const double r = cell.x - part.means[static_cast<std::size_t>(k)](cell.v, cell.l);
                    ssq(k, cell.v) += resp(i, k) * r * r;
                    nv(k, cell.v) += resp(i, k);
                }
        for (int k = 0; k < c; ++k)
            for (int v = 0; v < V; ++v) {
                const double var = (n0 * sd.attr_var(v) + ssq(k, v)) / (n0 + nv(k, v));
                part.variances(k, v) = std::max(var, em.var_floor);
            }
    }
    part.n_iter = std::min(iter, em.max_iter);
    return part;
}

Vector posterior(const MtsRecord& rec, const GmmPartition& gmm) {
    const auto& cfg = gmm.config;
    const int c = static_cast<int>(gmm.weights.size());
    const int V = static_cast<int>(cfg.attribute_subset.size());
    std::vector<Cell> cells;
    for (int v = 0; v < V; ++v) {
        const int attr = cfg.attribute_subset[static_cast<std::size_t>(v)];
        if (attr >= rec.attrs()) throw std::invalid_argument("record has too few attributes for partition");
        for (int l = 0; l < cfg.segment_len(); ++l) {
            const int t = cfg.t_begin + l;
            if (t >= rec.steps()) throw std::invalid_argument("record has too few time steps for partition");
            if (rec.mask(attr, t)) cells.push_back(Cell{v, l, rec.values(attr, t)});
        }
    }
    if (cells.empty()) return gmm.weights;  // documented fallback: the prior

    Matrix log_var = gmm.variances.array().log();
    Matrix inv_var = gmm.variances.array().inverse();
    Vector a(c);
    for (int k = 0; k < c; ++k) {
        const double lw = gmm.weights(k) > 0.0 ? std::log(gmm.weights(k))
                                               : -std::numeric_limits<double>::infinity();
        a(k) = lw + record_loglik(cells, gmm.means[static_cast<std::size_t>(k)], log_var, inv_var, k);
    }
    const double best = a.maxCoeff();
    Vector p = (a.array() - best).exp();
    return p / p.sum();
}

TckKernel build_tck(const MtsDataset& train, const TckOptions& opt, std::uint64_t master_seed) {
    if (train.n() < 1) throw std::invalid_argument("training set is empty");
    const int n = train.n();
    auto configs = sample_partition_configs(n, train.attrs(), train.window_len, opt.C, opt.R,
                                            master_seed, opt.rules);
    const std::size_t q_total = configs.size();

    std::vector<GmmPartition> fits(q_total);
    std::vector<std::uint8_t> ok(q_total, 0);
    std::vector<std::string> errors(q_total);
    parallel_for(q_total, opt.threads, [&](std::size_t q) {
        try {
            GmmPartition part = fit_map_em(train, configs[q], opt.em);
            part.train_posteriors.resize(n, part.weights.size());
            for (int i = 0; i < n; ++i)
                part.train_posteriors.row(i) =
                    posterior(train.records[static_cast<std::size_t>(i)], part).transpose();
            fits[q] = std::move(part);
            ok[q] = 1;
        } catch (const std::exception& e) {
            errors[q] = "partition " + std::to_string(q) + " (c=" + std::to_string(configs[q].components) +
                        "): " + e.what();
        }
    });

    TckKernel kernel;
    kernel.normalized = opt.normalize;
    kernel.train_ids = ids_of(train);
    kernel.attrs = train.attrs();
    kernel.window_len = train.window_len;
    kernel.K = Matrix::Zero(n, n);
    for (std::size_t q = 0; q < q_total; ++q) {
        if (!ok[q]) {
            if (opt.drop_failed) {
                std::fprintf(stderr, "[tck] dropping failed %s\n", errors[q].c_str());
                continue;
            }
            throw std::runtime_error(errors[q]);
        }
        kernel.K.noalias() += fits[q].train_posteriors * fits[q].train_posteriors.transpose();
        kernel.ensemble.push_back(std::move(fits[q]));
    }
    if (kernel.ensemble.empty()) throw std::runtime_error("all partitions failed");

    kernel.train_self = kernel.K.diagonal();
    if (opt.normalize) {
        Vector d = kernel.train_self.array().sqrt();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) kernel.K(i, j) /= d(i) * d(j);
    }
    return kernel;
}

Matrix kernel_rows(const TckKernel& kernel, const MtsDataset& test) {
    if (test.attrs() != kernel.attrs || test.window_len != kernel.window_len)
        throw std::invalid_argument("shape error: test set dimensions do not match the kernel");
    const int n = static_cast<int>(kernel.train_ids.size());
    const int m = test.n();
    Matrix rows = Matrix::Zero(m, n);
    Vector self = Vector::Zero(m);
    parallel_for(static_cast<std::size_t>(m), 0, [&](std::size_t r) {
        for (const auto& part : kernel.ensemble) {
            Vector p = posterior(test.records[r], part);
            rows.row(static_cast<int>(r)).noalias() += (part.train_posteriors * p).transpose();
            self(static_cast<int>(r)) += p.squaredNorm();
        }
    });
    if (kernel.normalized) {
        for (int r = 0; r < m; ++r)
            for (int j = 0; j < n; ++j)
                rows(r, j) /= std::sqrt(self(r) * kernel.train_self(j));
    }
    return rows;
}

}  // namespace mtsk::tck
