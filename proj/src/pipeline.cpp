#include "mtsk/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mtsk/autoenc.hpp"
#include "mtsk/classify.hpp"
#include "mtsk/dimred.hpp"
#include "mtsk/io.hpp"
#include "mtsk/rng.hpp"
#include "mtsk/synthgen.hpp"

namespace fs = std::filesystem;

namespace mtsk::pipe {

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.input = j.value("input", c.input);
    c.out_dir = j.value("out", c.out_dir);
    c.window_len = j.value("T", c.window_len);
    c.train_frac = j.value("train_frac", c.train_frac);
    c.balance = j.value("balance", c.balance);
    c.missing_policy = j.value("missing_policy", c.missing_policy);
    if (c.missing_policy != "observed-zeros" && c.missing_policy != "masked")
        throw std::invalid_argument("missing_policy must be observed-zeros or masked");
    c.seed = j.value("seed", c.seed);
    if (j.contains("tck")) {
        const auto& t = j.at("tck");
        c.tck.C = t.value("C", c.tck.C);
        c.tck.R = t.value("R", c.tck.R);
        c.tck.normalize = t.value("normalize", c.tck.normalize);
        c.tck.drop_failed = t.value("drop_failed", c.tck.drop_failed);
        if (t.contains("em")) {
            const auto& e = t.at("em");
            c.tck.em.tol = e.value("tol", c.tck.em.tol);
            c.tck.em.max_iter = e.value("max_iter", c.tck.em.max_iter);
            c.tck.em.var_floor = e.value("var_floor", c.tck.em.var_floor);
            c.tck.em.a0 = e.value("a0", c.tck.em.a0);
            c.tck.em.b0 = e.value("b0", c.tck.em.b0);
            c.tck.em.n0 = e.value("n0", c.tck.em.n0);
        }
        if (t.contains("rules")) {
            const auto& r = t.at("rules");
            c.tck.rules.record_frac = r.value("record_frac", c.tck.rules.record_frac);
            c.tck.rules.attr_min_frac = r.value("attr_min_frac", c.tck.rules.attr_min_frac);
            c.tck.rules.attr_min = r.value("attr_min", c.tck.rules.attr_min);
            c.tck.rules.seg_min = r.value("seg_min", c.tck.rules.seg_min);
        }
    }
    if (j.contains("dimred")) {
        const auto& d = j.at("dimred");
        c.methods = d.value("methods", c.methods);
        c.pca_variance = d.value("pca_variance", c.pca_variance);
        c.pca_k = d.value("pca_k", c.pca_k);
        c.pca_space = d.value("pca_space", c.pca_space);
        c.kpca_k = d.value("kpca_k", c.kpca_k);
        c.kpca_mode = d.value("kpca_mode", c.kpca_mode);
        c.kpca_gamma = d.value("kpca_gamma", c.kpca_gamma);
        c.kpca_degree = d.value("kpca_degree", c.kpca_degree);
        c.kpca_coef0 = d.value("kpca_coef0", c.kpca_coef0);
        c.ae_hidden = d.value("ae_hidden", c.ae_hidden);
        c.ae_code = d.value("ae_code", c.ae_code);
        c.ae_train.epochs = d.value("ae_epochs", 1000);
        c.ae_train.batch = d.value("ae_batch", c.ae_train.batch);
        c.ae_train.adam.lr = d.value("ae_lr", c.ae_train.adam.lr);
        c.ae_train.decay = d.value("ae_decay", c.ae_train.decay);
    } else {
        c.ae_train.epochs = 1000;
    }
    if (j.contains("tsne")) {
        const auto& t = j.at("tsne");
        c.tsne.perplexity = t.value("perplexity", c.tsne.perplexity);
        c.tsne.iters = t.value("iters", c.tsne.iters);
        c.tsne.exaggeration = t.value("exaggeration", c.tsne.exaggeration);
        c.tsne.exaggeration_iters = t.value("exaggeration_iters", c.tsne.exaggeration_iters);
        c.tsne.learning_rate = t.value("learning_rate", c.tsne.learning_rate);
        c.tsne.momentum = t.value("momentum", c.tsne.momentum);
        c.tsne.final_momentum = t.value("final_momentum", c.tsne.final_momentum);
        c.tsne.momentum_switch_iter = t.value("momentum_switch_iter", c.tsne.momentum_switch_iter);
    }
    if (j.contains("classify")) {
        const auto& cl = j.at("classify");
        c.folds = cl.value("folds", c.folds);
        c.classifiers = cl.value("classifiers", c.classifiers);
    }
    return c;
}

PipelineConfig PipelineConfig::load_file(const std::string& path) {
    return from_json(nlohmann::json::parse(read_file(path)));
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json j;
    j["input"] = input;
    j["out"] = out_dir;
    j["T"] = window_len;
    j["train_frac"] = train_frac;
    j["balance"] = balance;
    j["missing_policy"] = missing_policy;
    j["seed"] = seed;
    j["tck"] = {{"C", tck.C},
                {"R", tck.R},
                {"normalize", tck.normalize},
                {"drop_failed", tck.drop_failed},
                {"em",
                 {{"tol", tck.em.tol},
                  {"max_iter", tck.em.max_iter},
                  {"var_floor", tck.em.var_floor},
                  {"a0", tck.em.a0},
                  {"b0", tck.em.b0},
                  {"n0", tck.em.n0}}},
                {"rules",
                 {{"record_frac", tck.rules.record_frac},
                  {"attr_min_frac", tck.rules.attr_min_frac},
                  {"attr_min", tck.rules.attr_min},
                  {"seg_min", tck.rules.seg_min}}}};
    j["dimred"] = {{"methods", methods},       {"pca_variance", pca_variance},
                   {"pca_k", pca_k},           {"pca_space", pca_space},
                   {"kpca_k", kpca_k},         {"kpca_mode", kpca_mode},
                   {"kpca_gamma", kpca_gamma}, {"kpca_degree", kpca_degree},
                   {"kpca_coef0", kpca_coef0}, {"ae_hidden", ae_hidden},
                   {"ae_code", ae_code},       {"ae_epochs", ae_train.epochs},
                   {"ae_batch", ae_train.batch},
                   {"ae_lr", ae_train.adam.lr},
                   {"ae_decay", ae_train.decay}};
    j["tsne"] = {{"perplexity", tsne.perplexity},
                 {"iters", tsne.iters},
                 {"exaggeration", tsne.exaggeration},
                 {"exaggeration_iters", tsne.exaggeration_iters},
                 {"learning_rate", tsne.learning_rate},
                 {"momentum", tsne.momentum},
                 {"final_momentum", tsne.final_momentum},
                 {"momentum_switch_iter", tsne.momentum_switch_iter}};
    j["classify"] = {{"folds", folds}, {"classifiers", classifiers}};
    return j;
}

namespace {

std::string path_in(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

MtsDataset load_split(const PipelineConfig& cfg, const std::string& name) {
    return load_dataset_csv(path_in(cfg, name), cfg.window_len);
}

MtsDataset apply_policy(const PipelineConfig& cfg, const MtsDataset& ds) {
    return cfg.missing_policy == "observed-zeros" ? with_observed_zeros(ds) : ds;
}

void write_scores(const PipelineConfig& cfg, const std::string& name, const Matrix& scores,
                  const std::vector<std::string>& ids) {
    std::vector<std::string> cols;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) cols.push_back("c" + std::to_string(j + 1));
    write_matrix_csv(path_in(cfg, name), scores, cols, ids);
}

std::string upper(std::string s) {
    for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

}  // namespace

void cmd_synth(const std::string& spec_path, const std::string& out_dir,
               std::uint64_t seed_override, bool has_seed_override) {
    synth::SynthSpec spec = spec_path.empty() ? synth::two_cluster_fixture(100, 0.0, 42)
                                              : synth::spec_from_json_file(spec_path);
    if (has_seed_override) spec.seed = seed_override;
    fs::create_directories(out_dir);
    auto [ds, truth] = synth::generate(spec);
    save_dataset_csv(ds, (fs::path(out_dir) / "data.csv").string());
    synth::save_ground_truth_csv(ds, truth, (fs::path(out_dir) / "truth.csv").string());
    std::fprintf(stderr, "[synth] wrote %d records, D=%d, T=%d\n", ds.n(), ds.attrs(),
                 ds.window_len);
}

void cmd_ingest(const PipelineConfig& cfg) {
    if (cfg.input.empty()) throw std::invalid_argument("config error: input path required");
    fs::create_directories(cfg.out_dir);
    MtsDataset ds = load_dataset_csv(cfg.input, cfg.window_len);
    auto [train, test] = split_train_test(ds, cfg.train_frac, cfg.seed);
    if (cfg.balance) {
        auto balanced = balance_train(train, test, cfg.seed);
        train = std::move(balanced.first);
        test = std::move(balanced.second);
    }
    save_dataset_csv(train, path_in(cfg, "train.csv"));
    save_dataset_csv(test, path_in(cfg, "test.csv"));
    std::fprintf(stderr, "[ingest] train=%d test=%d\n", train.n(), test.n());
}

void cmd_tck(const PipelineConfig& cfg) {
    MtsDataset train = apply_policy(cfg, load_split(cfg, "train.csv"));
    tck::TckKernel kernel = tck::build_tck(train, cfg.tck, cfg.seed);
    std::fprintf(stderr, "[tck] %zu partitions fitted (%d requested)\n", kernel.ensemble.size(),
                 (cfg.tck.C - 1) * cfg.tck.R);
    tck::save_tck(kernel, path_in(cfg, "tck_model.bin"));
    write_matrix_csv(path_in(cfg, "kernel_train.csv"), kernel.K, kernel.train_ids,
                     kernel.train_ids);
    if (fs::exists(path_in(cfg, "test.csv"))) {
        MtsDataset test = apply_policy(cfg, load_split(cfg, "test.csv"));
        Matrix rows = tck::kernel_rows(kernel, test);
        write_matrix_csv(path_in(cfg, "kernel_test.csv"), rows, kernel.train_ids, ids_of(test));
    }
}

void cmd_embed(const PipelineConfig& cfg) {
    tck::TckKernel kernel = tck::load_tck(path_in(cfg, "tck_model.bin"));
    MtsDataset train = load_split(cfg, "train.csv");
    const bool have_test = fs::exists(path_in(cfg, "test.csv"));
    MtsDataset test;
    Matrix ktest;
    if (have_test) {
        test = load_split(cfg, "test.csv");
        std::vector<std::string> row_ids;
        ktest = read_matrix_csv(path_in(cfg, "kernel_test.csv"), true, &row_ids);
    }

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const std::string& method = cfg.methods[mi];
        Matrix rep_train, rep_test;
        if (method == "pca") {
            const Matrix X = cfg.pca_space == "raw" ? flatten(train) : kernel.K;
            dimred::PcaModel model = cfg.pca_k > 0 ? dimred::pca_fit_k(X, cfg.pca_k)
                                                   : dimred::pca_fit(X, cfg.pca_variance);
            rep_train = dimred::pca_transform(model, X);
            if (have_test)
                rep_test = dimred::pca_transform(model, cfg.pca_space == "raw" ? flatten(test) : ktest);
            write_file(path_in(cfg, "model_pca.json"), dimred::pca_to_json(model));
            std::fprintf(stderr, "[embed] pca k=%d captured=%.4f\n", model.k(),
                         model.captured_variance_fraction);
        } else if (method == "kpca") {
            dimred::KpcaModel model;
            if (cfg.kpca_mode == "polynomial")
                model = dimred::kpca_fit_polynomial(kernel.K, cfg.kpca_k, cfg.kpca_gamma,
                                                    cfg.kpca_degree, cfg.kpca_coef0);
            else
                model = dimred::kpca_fit_precomputed(kernel.K, cfg.kpca_k);
            rep_train = dimred::kpca_transform(model, kernel.K);
            if (have_test) rep_test = dimred::kpca_transform(model, ktest);
            write_file(path_in(cfg, "model_kpca.json"), dimred::kpca_to_json(model));
        } else if (method == "ae") {
            nn::TrainConfig tc = cfg.ae_train;
            tc.seed = mix_seed(cfg.seed, 0xae);
            tc.batch = std::min<int>(tc.batch, train.n());
            ae::AeModel model = ae::fit_scaled(kernel.K, cfg.ae_hidden, cfg.ae_code, tc);
            rep_train = ae::encode_scaled(model, kernel.K);
            if (have_test) rep_test = ae::encode_scaled(model, ktest);
            write_file(path_in(cfg, "model_ae.json"), ae::ae_to_json(model));
            Matrix hist(static_cast<Eigen::Index>(model.history.size()), 2);
            for (std::size_t e = 0; e < model.history.size(); ++e) {
                hist(static_cast<Eigen::Index>(e), 0) = static_cast<double>(e);
                hist(static_cast<Eigen::Index>(e), 1) = model.history[e];
            }
            write_matrix_csv(path_in(cfg, "ae_loss.csv"), hist, {"epoch", "loss"});
        } else {
            throw std::invalid_argument("config error: unknown dimred method '" + method + "'");
        }

        write_scores(cfg, "rep_" + method + "_train.csv", rep_train, kernel.train_ids);
        if (have_test) write_scores(cfg, "rep_" + method + "_test.csv", rep_test, ids_of(test));

        // stacked 2-D embedding
        Matrix stacked(rep_train.rows() + rep_test.rows(), rep_train.cols());
        stacked.topRows(rep_train.rows()) = rep_train;
        if (have_test) stacked.bottomRows(rep_test.rows()) = rep_test;
        viz::TsneConfig tc = cfg.tsne;
        tc.seed = mix_seed(cfg.seed, 0x75e, mi);
        viz::TsneResult tsne_res = viz::tsne(stacked, tc);
        tsne_res.embedding.method = upper(method);
        tsne_res.embedding.ids = kernel.train_ids;
        tsne_res.embedding.labels = labels_of(train);
        if (have_test) {
            auto test_ids = ids_of(test);
            auto test_labels = labels_of(test);
            tsne_res.embedding.ids.insert(tsne_res.embedding.ids.end(), test_ids.begin(),
                                          test_ids.end());
            tsne_res.embedding.labels.insert(tsne_res.embedding.labels.end(), test_labels.begin(),
                                             test_labels.end());
        }
        viz::save_embedding_csv(tsne_res.embedding, path_in(cfg, "tsne_" + method + ".csv"));
    }
}

void cmd_classify(const PipelineConfig& cfg) {
    MtsDataset train = load_split(cfg, "train.csv");
    MtsDataset test = load_split(cfg, "test.csv");
    const auto ytr = labels_of(train);
    const auto yte = labels_of(test);

    std::vector<cls::ClassifierKind> kinds;
    if (cfg.classifiers.empty())
        kinds = cls::all_kinds();
    else
        for (const auto& name : cfg.classifiers) kinds.push_back(cls::kind_from_name(name));

    cls::EvalReport report;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const std::string& method = cfg.methods[mi];
        std::vector<std::string> tr_ids, te_ids;
        Matrix Xtr = read_matrix_csv(path_in(cfg, "rep_" + method + "_train.csv"), true, &tr_ids);
        Matrix Xte = read_matrix_csv(path_in(cfg, "rep_" + method + "_test.csv"), true, &te_ids);
        for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
            const auto kind = kinds[ki];
            const std::uint64_t cv_seed = mix_seed(cfg.seed, 0xc1a55, mi, ki);
            cls::CvResult cv =
                cls::cross_validate(cls::default_grid(kind), Xtr, ytr, cfg.folds, cv_seed);
            auto model = cls::fit(cv.best, Xtr, ytr, mix_seed(cv_seed, 0xf17));
            auto pred = model->predict(Xte);
            cls::EvalRow row;
            row.dr_method = upper(method);
            row.kind = kind;
            row.metrics = cls::compute_metrics(yte, pred.labels, pred.scores);
            row.hyper = cv.best.hyper;
            row.seed = cfg.seed;
            report.rows.push_back(std::move(row));
            std::fprintf(stderr, "[classify] %s / %s: auc=%.4f\n", method.c_str(),
                         cls::kind_name(kind).c_str(), report.rows.back().metrics.auc);
        }
    }
    cls::save_report_csv(report, path_in(cfg, "report.csv"));
    write_file(path_in(cfg, "report.txt"), cls::render_table(report));
}

std::string cmd_report(const PipelineConfig& cfg, const std::string& selection_path) {
    const std::string report_path = path_in(cfg, "report.csv");
    if (!fs::exists(report_path))
        throw std::runtime_error("missing report.csv in " + cfg.out_dir + " (run classify first)");
    cls::EvalReport report = cls::load_report_csv(report_path);
    const std::string table = cls::render_table(report);
    write_file(path_in(cfg, "report.txt"), table);

    if (!selection_path.empty()) {
        MtsDataset all = load_split(cfg, "train.csv");
        if (fs::exists(path_in(cfg, "test.csv"))) {
            MtsDataset test = load_split(cfg, "test.csv");
            all.records.insert(all.records.end(), test.records.begin(), test.records.end());
        }
        for (const auto& method : cfg.methods) {
            const std::string emb_path = path_in(cfg, "tsne_" + method + ".csv");
            if (!fs::exists(emb_path)) continue;
            viz::Embedding2D emb = viz::load_embedding_csv(emb_path);
            auto sel = viz::load_selection(selection_path, emb);
            auto summary = viz::cluster_summary(emb, all, sel);
            viz::save_summary_csv(summary, path_in(cfg, "summary_" + method + ".csv"));
        }
    }
    return table;
}

}  // namespace mtsk::pipe
