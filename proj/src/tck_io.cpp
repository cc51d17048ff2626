#include <stdexcept>

#include "mtsk/io.hpp"
#include "mtsk/tck.hpp"

namespace mtsk::tck {

namespace {
constexpr char kMagic[8] = {'M', 'T', 'S', 'K', 'T', 'C', 'K', '1'};
}

void save_tck(const TckKernel& kernel, const std::string& path) {
    BinaryWriter w(path);
    for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
    const auto n = static_cast<std::uint64_t>(kernel.train_ids.size());
    w.u64(n);
    w.u64(kernel.ensemble.size());
    w.u8(kernel.normalized ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(kernel.attrs));
    w.u32(static_cast<std::uint32_t>(kernel.window_len));
    for (const auto& id : kernel.train_ids) w.str(id);
    w.doubles(kernel.train_self.data(), static_cast<std::size_t>(kernel.train_self.size()));
    w.doubles(kernel.K.data(), static_cast<std::size_t>(kernel.K.size()));
    for (const auto& p : kernel.ensemble) {
        const auto& cfg = p.config;
        w.u32(static_cast<std::uint32_t>(cfg.components));
        w.u32(static_cast<std::uint32_t>(cfg.t_begin));
        w.u32(static_cast<std::uint32_t>(cfg.t_end));
        w.u64(cfg.init_seed);
        w.u64(cfg.record_subset.size());
        for (int i : cfg.record_subset) w.u32(static_cast<std::uint32_t>(i));
        w.u64(cfg.attribute_subset.size());
        for (int a : cfg.attribute_subset) w.u32(static_cast<std::uint32_t>(a));
        w.doubles(p.weights.data(), static_cast<std::size_t>(p.weights.size()));
        for (const auto& mu : p.means) w.doubles(mu.data(), static_cast<std::size_t>(mu.size()));
        w.doubles(p.variances.data(), static_cast<std::size_t>(p.variances.size()));
        w.u8(p.converged ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(p.n_iter));
        w.u32(static_cast<std::uint32_t>(p.reseed_count));
        w.doubles(p.train_posteriors.data(), static_cast<std::size_t>(p.train_posteriors.size()));
    }
    w.close();
}

TckKernel load_tck(const std::string& path) {
    BinaryReader r(path);
    for (char ch : kMagic)
        if (r.u8() != static_cast<std::uint8_t>(ch))
            throw std::runtime_error("not a tck model file: " + path);
    TckKernel kernel;
    const auto n = static_cast<Eigen::Index>(r.u64());
    const auto q = r.u64();
    kernel.normalized = r.u8() != 0;
    kernel.attrs = static_cast<int>(r.u32());
    kernel.window_len = static_cast<int>(r.u32());
    kernel.train_ids.resize(static_cast<std::size_t>(n));
    for (auto& id : kernel.train_ids) id = r.str();
    kernel.train_self.resize(n);
    r.doubles(kernel.train_self.data(), static_cast<std::size_t>(n));
    kernel.K.resize(n, n);
    r.doubles(kernel.K.data(), static_cast<std::size_t>(kernel.K.size()));
    kernel.ensemble.resize(q);
    for (auto& p : kernel.ensemble) {
        auto& cfg = p.config;
        cfg.components = static_cast<int>(r.u32());
        cfg.t_begin = static_cast<int>(r.u32());
        cfg.t_end = static_cast<int>(r.u32());
        cfg.init_seed = r.u64();
        cfg.record_subset.resize(r.u64());
        for (auto& i : cfg.record_subset) i = static_cast<int>(r.u32());
        cfg.attribute_subset.resize(r.u64());
        for (auto& a : cfg.attribute_subset) a = static_cast<int>(r.u32());
        const int c = cfg.components;
        const int V = static_cast<int>(cfg.attribute_subset.size());
        const int L = cfg.segment_len();
        p.weights.resize(c);
        r.doubles(p.weights.data(), static_cast<std::size_t>(c));
        p.means.resize(static_cast<std::size_t>(c));
        for (auto& mu : p.means) {
            mu.resize(V, L);
            r.doubles(mu.data(), static_cast<std::size_t>(mu.size()));
        }
        p.variances.resize(c, V);
        r.doubles(p.variances.data(), static_cast<std::size_t>(p.variances.size()));
        p.converged = r.u8() != 0;
        p.n_iter = static_cast<int>(r.u32());
        p.reseed_count = static_cast<int>(r.u32());
        p.train_posteriors.resize(n, c);
        r.doubles(p.train_posteriors.data(), static_cast<std::size_t>(p.train_posteriors.size()));
    }
    return kernel;
}

}  // namespace mtsk::tck
