#include "mtsk/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mtsk/io.hpp"
#include "mtsk/rng.hpp"

namespace mtsk::synth {

void SynthSpec::validate() const {
    if (clusters.empty()) throw std::invalid_argument("synth spec: no clusters");
    if (n_per_cluster < 1) throw std::invalid_argument("synth spec: n_per_cluster must be >= 1");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0))
        throw std::invalid_argument("synth spec: missing_rate must be in [0, 1)");
    const int d = attrs(), t = steps();
    if (d < 1 || t < 1) throw std::invalid_argument("synth spec: empty mean curves");
    for (const auto& c : clusters) {
        if (c.mean_curves.rows() != d || c.mean_curves.cols() != t)
            throw std::invalid_argument("synth spec: cluster mean curve shapes differ");
        if (c.label != 0 && c.label != 1)
            throw std::invalid_argument("synth spec: cluster labels must be 0 or 1");
    }
    if (sigma.size() != d) throw std::invalid_argument("synth spec: sigma size must equal D");
    if ((sigma.array() <= 0.0).any()) throw std::invalid_argument("synth spec: sigma must be positive");
    if (!binary_channel.empty() && static_cast<int>(binary_channel.size()) != d)
        throw std::invalid_argument("synth spec: binary_channel size must equal D");
}

std::pair<MtsDataset, std::vector<int>> generate(const SynthSpec& spec) {
    spec.validate();
    const int d = spec.attrs(), t = spec.steps();
    MtsDataset ds;
    ds.window_len = t;
    ds.attribute_names.reserve(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) ds.attribute_names.push_back("a" + std::to_string(a + 1));

    std::vector<int> truth;
    Rng rng(mix_seed(spec.seed, 0x5e9e4a7e));
    int serial = 0;
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
        const auto& cl = spec.clusters[c];
        for (int i = 0; i < spec.n_per_cluster; ++i) {
            MtsRecord rec;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "r%05d", ++serial);
            rec.id = buf;
            rec.label = cl.label;
            rec.values = Matrix::Zero(d, t);
            rec.mask = MaskMatrix::Zero(d, t);
            for (int a = 0; a < d; ++a) {
                const bool binary = !spec.binary_channel.empty() && spec.binary_channel[static_cast<std::size_t>(a)];
                for (int s = 0; s < t; ++s) {
                    double x = cl.mean_curves(a, s) + spec.sigma(a) * rng.normal();
                    if (binary) x = x > 0.5 ? 1.0 : 0.0;
                    const bool observed = !(rng.uniform() < spec.missing_rate);
                    rec.mask(a, s) = observed ? 1 : 0;
                    rec.values(a, s) = observed ? x : 0.0;
                }
            }
            ds.records.push_back(std::move(rec));
            truth.push_back(static_cast<int>(c));
        }
    }
    ds.validate();
    return {std::move(ds), std::move(truth)};
}

SynthSpec two_cluster_fixture(int n_per_cluster, double missing_rate, std::uint64_t seed) {
    const int d = 5, t = 7;
    SynthSpec spec;
    spec.n_per_cluster = n_per_cluster;
    spec.missing_rate = missing_rate;
    spec.seed = seed;
    spec.sigma = Vector::Constant(d, 0.5);
    ClusterSpec a, b;
    a.label = 0;
    b.label = 1;
    a.mean_curves.resize(d, t);
    b.mean_curves.resize(d, t);
    for (int v = 0; v < d; ++v) {
        for (int s = 0; s < t; ++s) {
            const double phase = 2.0 * M_PI * s / t + 0.4 * v;
            a.mean_curves(v, s) = std::sin(phase);                       // sinusoidal
            b.mean_curves(v, s) = -1.0 + 2.0 * s / (t - 1.0) + 0.1 * v;  // linear ramp
        }
    }
    spec.clusters = {a, b};
    return spec;
}

void save_ground_truth_csv(const MtsDataset& ds, const std::vector<int>& clusters,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "id,cluster\n";
    for (std::size_t i = 0; i < clusters.size(); ++i)
        out << ds.records[i].id << ',' << clusters[i] << '\n';
}

SynthSpec spec_from_json_file(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    SynthSpec spec;
    spec.n_per_cluster = j.value("n_per_cluster", 100);
    spec.missing_rate = j.value("missing_rate", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("clusters")) {
        for (const auto& jc : j.at("clusters")) {
            ClusterSpec c;
            c.label = jc.value("label", 0);
            const auto& rows = jc.at("means");
            c.mean_curves.resize(static_cast<Eigen::Index>(rows.size()),
                                 static_cast<Eigen::Index>(rows[0].size()));
            for (std::size_t a = 0; a < rows.size(); ++a)
                for (std::size_t s = 0; s < rows[a].size(); ++s)
                    c.mean_curves(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(s)) =
                        rows[a][s].get<double>();
            spec.clusters.push_back(std::move(c));
        }
        const int d = spec.attrs();
        if (j.contains("sigma")) {
            const auto& js = j.at("sigma");
            if (js.is_number()) {
                spec.sigma = Vector::Constant(d, js.get<double>());
            } else {
                spec.sigma.resize(static_cast<Eigen::Index>(js.size()));
                for (std::size_t a = 0; a < js.size(); ++a)
                    spec.sigma(static_cast<Eigen::Index>(a)) = js[a].get<double>();
            }
        } else {
            spec.sigma = Vector::Constant(d, 0.5);
        }
        if (j.contains("binary_channel"))
            spec.binary_channel = j.at("binary_channel").get<std::vector<bool>>();
    } else {
        // default benchmark fixture, overridable knobs only
        spec = two_cluster_fixture(spec.n_per_cluster, spec.missing_rate, spec.seed);
    }
    return spec;
}

void save_spec_json(const SynthSpec& spec, const std::string& path) {
    nlohmann::json j;
    j["n_per_cluster"] = spec.n_per_cluster;
    j["missing_rate"] = spec.missing_rate;
    j["seed"] = spec.seed;
    nlohmann::json jcs = nlohmann::json::array();
    for (const auto& c : spec.clusters) {
        nlohmann::json jc;
        jc["label"] = c.label;
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index a = 0; a < c.mean_curves.rows(); ++a) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index s = 0; s < c.mean_curves.cols(); ++s) row.push_back(c.mean_curves(a, s));
            rows.push_back(row);
        }
        jc["means"] = rows;
        jcs.push_back(jc);
    }
    j["clusters"] = jcs;
    nlohmann::json js = nlohmann::json::array();
    for (Eigen::Index a = 0; a < spec.sigma.size(); ++a) js.push_back(spec.sigma(a));
    j["sigma"] = js;
    if (!spec.binary_channel.empty()) j["binary_channel"] = spec.binary_channel;
    write_file(path, j.dump(2) + "\n");
}

}  // namespace mtsk::synth
