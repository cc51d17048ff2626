#include "mtsk/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "mtsk/io.hpp"
#include "mtsk/rng.hpp"

namespace mtsk {

void MtsDataset::validate() const {
    std::unordered_set<std::string> seen;
    const int d = attrs();
    for (const auto& r : records) {
        if (r.values.rows() != r.mask.rows() || r.values.cols() != r.mask.cols())
            throw std::runtime_error("record " + r.id + ": values/mask shape mismatch");
        if (r.attrs() != d)
            throw std::runtime_error("record " + r.id + ": attribute count mismatch");
        if (r.steps() != window_len)
            throw std::runtime_error("record " + r.id + ": window length mismatch");
        if (r.label != 0 && r.label != 1)
            throw std::runtime_error("record " + r.id + ": label must be 0 or 1");
        if (!seen.insert(r.id).second)
            throw std::runtime_error("duplicate record id: " + r.id);
        for (int v = 0; v < r.attrs(); ++v)
            for (int t = 0; t < r.steps(); ++t)
                if (r.mask(v, t) == 0 && r.values(v, t) != 0.0)
                    throw std::runtime_error("record " + r.id + ": mask-0 cell with nonzero value");
    }
}

namespace {

struct Header {
    int id = -1, day = -1, anchor = -1, label = -1;
    std::vector<int> attr_cols;  // parallel to schema
};

Header parse_header(const std::vector<std::string>& cells,
                    const std::vector<std::string>& schema) {
    Header h;
    std::unordered_map<std::string, int> pos;
    for (std::size_t j = 0; j < cells.size(); ++j) pos.emplace(cells[j], static_cast<int>(j));
    auto need = [&](const char* name) {
        auto it = pos.find(name);
        if (it == pos.end())
            throw std::runtime_error(std::string("schema error: missing column '") + name + "'");
        return it->second;
    };
    h.id = need("id");
    h.day = need("day");
    h.anchor = need("anchor");
    h.label = need("label");
    h.attr_cols.reserve(schema.size());
    for (const auto& a : schema) h.attr_cols.push_back(need(a.c_str()));
    return h;
}

double parse_number(const std::string& cell, std::size_t row_no, const std::string& col) {
    double v;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw std::runtime_error("parse error at row " + std::to_string(row_no) + ", column '" +
                                 col + "': not a number: '" + cell + "'");
    return v;
}

int parse_int(const std::string& cell, std::size_t row_no, const std::string& col) {
    double v = parse_number(cell, row_no, col);
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw std::runtime_error("parse error at row " + std::to_string(row_no) + ", column '" +
                                 col + "': expected integer, got '" + cell + "'");
    return i;
}

}  // namespace

std::vector<std::string> infer_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    std::vector<std::string> schema;
    for (const auto& c : split_csv_line(line))
        if (c != "id" && c != "day" && c != "anchor" && c != "label") schema.push_back(c);
    return schema;
}

std::vector<RawStay> load_raw_csv(const std::string& path,
                                  const std::vector<std::string>& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    Header h = parse_header(split_csv_line(line), schema);

    // insertion-ordered stays
    std::vector<RawStay> stays;
    std::unordered_map<std::string, std::size_t> by_id;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        auto cell = [&](int idx) -> const std::string& {
            static const std::string empty;
            return idx < static_cast<int>(cells.size()) ? cells[static_cast<std::size_t>(idx)] : empty;
        };
        const std::string& id = cell(h.id);
        if (id.empty())
            throw std::runtime_error("parse error at row " + std::to_string(row_no) + ": empty id");
        int day = parse_int(cell(h.day), row_no, "day");
        int label = parse_int(cell(h.label), row_no, "label");
        if (label != 0 && label != 1)
            throw std::runtime_error("parse error at row " + std::to_string(row_no) +
                                     ": label must be 0 or 1");
        std::optional<int> anchor;
        if (!cell(h.anchor).empty()) anchor = parse_int(cell(h.anchor), row_no, "anchor");

        auto it = by_id.find(id);
        if (it == by_id.end()) {
            by_id.emplace(id, stays.size());
            stays.push_back(RawStay{id, {}, {}, anchor, label});
            it = by_id.find(id);
        }
        RawStay& stay = stays[it->second];
        if (std::find(stay.days.begin(), stay.days.end(), day) != stay.days.end())
            throw std::runtime_error("duplicate row for (id, day) = (" + id + ", " +
                                     std::to_string(day) + ") at row " + std::to_string(row_no));
        if (stay.label != label)
            throw std::runtime_error("inconsistent label for id " + id + " at row " +
                                     std::to_string(row_no));
        if (anchor && stay.anchor_day && *anchor != *stay.anchor_day)
            throw std::runtime_error("inconsistent anchor for id " + id + " at row " +
                                     std::to_string(row_no));
        if (anchor && !stay.anchor_day) stay.anchor_day = anchor;

        std::vector<std::optional<double>> row(schema.size());
        for (std::size_t a = 0; a < schema.size(); ++a) {
            const std::string& c = cell(h.attr_cols[a]);
            if (!c.empty()) row[a] = parse_number(c, row_no, schema[a]);
        }
        stay.days.push_back(day);
        stay.rows.push_back(std::move(row));
    }

    // sort each stay's rows by day
    for (auto& stay : stays) {
        std::vector<std::size_t> order(stay.days.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return stay.days[a] < stay.days[b]; });
        std::vector<int> days(order.size());
        std::vector<std::vector<std::optional<double>>> rows(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            days[i] = stay.days[order[i]];
            rows[i] = std::move(stay.rows[order[i]]);
        }
        stay.days = std::move(days);
        stay.rows = std::move(rows);
    }
    return stays;
}

MtsDataset window_align(const std::vector<RawStay>& stays, int window_len,
                        const std::vector<std::string>& attribute_names) {
    if (window_len < 1) throw std::invalid_argument("window_len must be >= 1");
    const int d = static_cast<int>(attribute_names.size());
    MtsDataset ds;
    ds.attribute_names = attribute_names;
    ds.window_len = window_len;
    ds.records.reserve(stays.size());
    for (const auto& stay : stays) {
        if (!stay.anchor_day)
            throw std::runtime_error("alignment error: id " + stay.id + " has no anchor day");
        if (stay.days.empty())
            throw std::runtime_error("alignment error: id " + stay.id + " has no observed days");
        const int anchor = *stay.anchor_day;
        // label 1: the T days ending at the anchor; label 0: the T days from it
        const int first_day = stay.label == 1 ? anchor - window_len + 1 : anchor;
        MtsRecord rec;
        rec.id = stay.id;
        rec.label = stay.label;
        rec.values = Matrix::Zero(d, window_len);
        rec.mask = MaskMatrix::Zero(d, window_len);
        for (std::size_t i = 0; i < stay.days.size(); ++i) {
            const int t = stay.days[i] - first_day;
            if (t < 0 || t >= window_len) continue;
            for (int a = 0; a < d; ++a) {
                const auto& cell = stay.rows[i][static_cast<std::size_t>(a)];
                if (cell) {
                    rec.values(a, t) = *cell;
                    rec.mask(a, t) = 1;
                }
            }
        }
        ds.records.push_back(std::move(rec));
    }
    ds.validate();
    return ds;
}

namespace {

MtsDataset subset_of(const MtsDataset& ds, const std::vector<int>& idx) {
    MtsDataset out;
    out.attribute_names = ds.attribute_names;
    out.window_len = ds.window_len;
    out.records.reserve(idx.size());
    for (int i : idx) out.records.push_back(ds.records[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace

std::pair<MtsDataset, MtsDataset> split_train_test(const MtsDataset& ds, double train_frac,
                                                   std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw std::invalid_argument("train_frac must be in (0, 1)");
    std::vector<int> by_class[2];
    for (int i = 0; i < ds.n(); ++i)
        by_class[ds.records[static_cast<std::size_t>(i)].label].push_back(i);
    for (int c = 0; c < 2; ++c)
        if (by_class[c].size() < 2)
            throw std::runtime_error("stratification error: class " + std::to_string(c) +
                                     " has fewer than 2 records");
    std::vector<int> train_idx, test_idx;
    for (int c = 0; c < 2; ++c) {
        auto idx = by_class[c];
        Rng rng(mix_seed(seed, 0x5917, static_cast<std::uint64_t>(c)));
        rng.shuffle(idx);
        auto n_c = static_cast<long>(idx.size());
        long k = std::lround(train_frac * static_cast<double>(n_c));
        k = std::clamp(k, 1l, n_c - 1);
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + k);
        test_idx.insert(test_idx.end(), idx.begin() + k, idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {subset_of(ds, train_idx), subset_of(ds, test_idx)};
}

std::pair<MtsDataset, MtsDataset> balance_train(const MtsDataset& train, const MtsDataset& test,
                                                std::uint64_t seed) {
    std::vector<int> by_class[2];
    for (int i = 0; i < train.n(); ++i)
        by_class[train.records[static_cast<std::size_t>(i)].label].push_back(i);
    if (by_class[0].empty() || by_class[1].empty())
        throw std::runtime_error("balance_train requires both classes in the train set");
    const int majority = by_class[0].size() >= by_class[1].size() ? 0 : 1;
    const std::size_t excess = by_class[majority].size() - by_class[1 - majority].size();
    if (excess == 0) return {train, test};

    Rng rng(mix_seed(seed, 0xba1a4ce));
    auto pool = by_class[majority];
    rng.shuffle(pool);
    std::set<int> moved(pool.begin(), pool.begin() + static_cast<long>(excess));

    MtsDataset new_train;
    new_train.attribute_names = train.attribute_names;
    new_train.window_len = train.window_len;
    MtsDataset new_test = test;
    for (int i = 0; i < train.n(); ++i) {
        const auto& rec = train.records[static_cast<std::size_t>(i)];
        if (moved.count(i))
            new_test.records.push_back(rec);
        else
            new_train.records.push_back(rec);
    }
    return {new_train, new_test};
}

MtsDataset with_observed_zeros(const MtsDataset& ds) {
    MtsDataset out = ds;
    for (auto& r : out.records) r.mask.setConstant(1);
    return out;
}

void save_dataset_csv(const MtsDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "id,day,anchor,label";
    for (const auto& a : ds.attribute_names) out << ',' << a;
    out << '\n';
    for (const auto& rec : ds.records) {
        // windowed records re-align to themselves: anchor = T for label 1,
        // anchor = 1 for label 0, days numbered 1..T
        const int anchor = rec.label == 1 ? ds.window_len : 1;
        for (int t = 0; t < ds.window_len; ++t) {
            if (rec.mask.col(t).maxCoeff() == 0) continue;  // fully absent day
            out << rec.id << ',' << (t + 1) << ',' << anchor << ',' << rec.label;
            for (int a = 0; a < ds.attrs(); ++a) {
                out << ',';
                if (rec.mask(a, t)) out << format_double(rec.values(a, t));
            }
            out << '\n';
        }
    }
}

MtsDataset load_dataset_csv(const std::string& path, int window_len) {
    auto schema = infer_schema(path);
    auto stays = load_raw_csv(path, schema);
    if (window_len == 0) {
        for (const auto& s : stays) {
            if (!s.anchor_day || s.days.empty()) continue;
            int span = s.label == 1 ? *s.anchor_day - s.days.front() + 1
                                    : s.days.back() - *s.anchor_day + 1;
            window_len = std::max(window_len, span);
        }
        if (window_len == 0) throw std::runtime_error("cannot infer window length: " + path);
    }
    return window_align(stays, window_len, schema);
}

Matrix flatten(const MtsDataset& ds) {
    const int d = ds.attrs(), t = ds.window_len;
    Matrix x(ds.n(), d * t);
    for (int i = 0; i < ds.n(); ++i) {
        const auto& rec = ds.records[static_cast<std::size_t>(i)];
        for (int a = 0; a < d; ++a)
            for (int s = 0; s < t; ++s) x(i, a * t + s) = rec.values(a, s);
    }
    return x;
}

std::vector<int> labels_of(const MtsDataset& ds) {
    std::vector<int> y(static_cast<std::size_t>(ds.n()));
    for (int i = 0; i < ds.n(); ++i) y[static_cast<std::size_t>(i)] = ds.records[static_cast<std::size_t>(i)].label;
    return y;
}

std::vector<std::string> ids_of(const MtsDataset& ds) {
    std::vector<std::string> ids(static_cast<std::size_t>(ds.n()));
    for (int i = 0; i < ds.n(); ++i) ids[static_cast<std::size_t>(i)] = ds.records[static_cast<std::size_t>(i)].id;
    return ids;
}

}  // namespace mtsk
