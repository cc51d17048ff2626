#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "mtsk/embedviz.hpp"
#include "mtsk/io.hpp"

namespace mtsk::viz {

ClusterSummary cluster_summary(const Embedding2D& emb, const MtsDataset& ds,
                               const std::set<std::string>& selection) {
    if (selection.empty()) throw std::invalid_argument("empty-selection error");
    std::set<std::string> emb_ids(emb.ids.begin(), emb.ids.end());
    for (const auto& id : selection)
        if (!emb_ids.count(id))
            throw std::invalid_argument("selection id not in embedding: " + id);

    std::unordered_map<std::string, const MtsRecord*> by_id;
    for (const auto& rec : ds.records) by_id.emplace(rec.id, &rec);

    const int d = ds.attrs();
    ClusterSummary out;
    out.attributes = ds.attribute_names;
    out.groups.resize(4);
    const char* names[4] = {"pos_in", "pos_out", "neg_in", "neg_out"};
    std::vector<std::vector<int>> fired(4, std::vector<int>(static_cast<std::size_t>(d), 0));
    for (int g = 0; g < 4; ++g) out.groups[static_cast<std::size_t>(g)].group = names[g];

    for (std::size_t i = 0; i < emb.ids.size(); ++i) {
        auto it = by_id.find(emb.ids[i]);
        if (it == by_id.end())
            throw std::invalid_argument("embedding id not in dataset: " + emb.ids[i]);
        const MtsRecord& rec = *it->second;
        const bool in_sel = selection.count(rec.id) > 0;
        const int g = (rec.label == 1 ? 0 : 2) + (in_sel ? 0 : 1);
        ++out.groups[static_cast<std::size_t>(g)].count;
        for (int a = 0; a < d; ++a) {
            bool any = false;
            for (int t = 0; t < rec.steps() && !any; ++t)
                any = rec.mask(a, t) && rec.values(a, t) != 0.0;
            if (any) ++fired[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)];
        }
    }

    for (int g = 0; g < 4; ++g) {
        auto& grp = out.groups[static_cast<std::size_t>(g)];
        grp.percent.resize(static_cast<std::size_t>(d));
        for (int a = 0; a < d; ++a)
            grp.percent[static_cast<std::size_t>(a)] =
                grp.count > 0
                    ? 100.0 * fired[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)] / grp.count
                    : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

void save_embedding_csv(const Embedding2D& emb, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "id,x,y,label,method\n";
    for (Eigen::Index i = 0; i < emb.coords.rows(); ++i) {
        out << emb.ids[static_cast<std::size_t>(i)] << ',' << format_double(emb.coords(i, 0)) << ','
            << format_double(emb.coords(i, 1)) << ',' << emb.labels[static_cast<std::size_t>(i)]
            << ',' << emb.method << '\n';
    }
}

Embedding2D load_embedding_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty embedding file: " + path);
    Embedding2D emb;
    std::vector<std::array<double, 2>> pts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 5) throw std::runtime_error("malformed embedding row: " + line);
        emb.ids.push_back(cells[0]);
        pts.push_back({std::stod(cells[1]), std::stod(cells[2])});
        emb.labels.push_back(std::stoi(cells[3]));
        emb.method = cells[4];
    }
    emb.coords.resize(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        emb.coords(static_cast<Eigen::Index>(i), 0) = pts[i][0];
        emb.coords(static_cast<Eigen::Index>(i), 1) = pts[i][1];
    }
    return emb;
}

void save_summary_csv(const ClusterSummary& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "group,attribute,percent,count\n";
    for (const auto& grp : s.groups) {
        for (std::size_t a = 0; a < s.attributes.size(); ++a) {
            out << grp.group << ',' << s.attributes[a] << ',';
            if (!std::isnan(grp.percent[a])) out << format_double(grp.percent[a]);
            out << ',' << grp.count << '\n';
        }
    }
}

namespace {

bool point_in_polygon(double x, double y, const std::vector<std::pair<double, double>>& poly) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto [xi, yi] = poly[i];
        const auto [xj, yj] = poly[j];
        if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

}  // namespace

std::set<std::string> load_selection(const std::string& path, const Embedding2D& emb) {
    const std::string text = read_file(path);
    std::set<std::string> sel;
    // JSON polygon form
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j = nlohmann::json::parse(text);
        std::vector<std::pair<double, double>> poly;
        for (const auto& pt : j.at("polygon"))
            poly.emplace_back(pt[0].get<double>(), pt[1].get<double>());
        if (poly.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
        for (Eigen::Index i = 0; i < emb.coords.rows(); ++i)
            if (point_in_polygon(emb.coords(i, 0), emb.coords(i, 1), poly))
                sel.insert(emb.ids[static_cast<std::size_t>(i)]);
        return sel;
    }
    // one id per line
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) sel.insert(line);
    }
    return sel;
}

}  // namespace mtsk::viz
