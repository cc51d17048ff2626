#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mtsk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// One subject: D attributes over T aligned time steps. Cells with mask = 0
// hold the placeholder 0.0 and are only ever read through the mask.
struct MtsRecord {
    std::string id;
    Matrix values;    // D x T
    MaskMatrix mask;  // D x T, 1 = observed
    int label = 0;    // binary class

    int attrs() const { return static_cast<int>(values.rows()); }
    int steps() const { return static_cast<int>(values.cols()); }
};

struct MtsDataset {
    std::vector<MtsRecord> records;
    std::vector<std::string> attribute_names;
    int window_len = 0;

    int n() const { return static_cast<int>(records.size()); }
    int attrs() const { return static_cast<int>(attribute_names.size()); }

    // Checks shared dimensions, unique ids, binary labels, and that every
    // mask-0 cell carries exactly 0.0. Throws on violation.
    void validate() const;
};

// Pre-windowing form: day-indexed observation rows for one subject.
struct RawStay {
    std::string id;
    std::vector<int> days;  // strictly increasing
    std::vector<std::vector<std::optional<double>>> rows;  // per day, per attribute
    std::optional<int> anchor_day;
    int label = 0;
};

// Attribute columns of a raw CSV header: everything except id/day/anchor/label,
// in header order.
std::vector<std::string> infer_schema(const std::string& path);

// CSV schema: header `id,day,anchor,label,<attr...>`, one row per (id, day),
// '.' decimal separator, empty cell = unobserved. Rows are grouped per id and
// sorted by day. Unknown columns are ignored.
std::vector<RawStay> load_raw_csv(const std::string& path,
                                  const std::vector<std::string>& schema);

// Aligns each stay to a T-step window. Label-1 stays take the T days ending at
// the anchor; label-0 stays take the T days starting at the anchor. Days with
// no row, and empty cells, become mask-0 zeros.
MtsDataset window_align(const std::vector<RawStay>& stays, int window_len,
                        const std::vector<std::string>& attribute_names);

// Stratified-by-label split, deterministic per seed.
std::pair<MtsDataset, MtsDataset> split_train_test(const MtsDataset& ds,
                                                   double train_frac,
                                                   std::uint64_t seed);

// Equalises train class counts by moving random majority-class records to the
// test set; no record is lost or duplicated.
std::pair<MtsDataset, MtsDataset> balance_train(const MtsDataset& train,
                                                const MtsDataset& test,
                                                std::uint64_t seed);

// missing_policy = observed-zeros: treat every zero-filled cell as an observed
// zero (mask all ones). missing_policy = masked: leave masks as they are.
MtsDataset with_observed_zeros(const MtsDataset& ds);

void save_dataset_csv(const MtsDataset& ds, const std::string& path);

// load_raw_csv + window_align in one step. window_len = 0 infers T from the
// maximum day span present.
MtsDataset load_dataset_csv(const std::string& path, int window_len = 0);

// Flattened n x (D*T) view with mask-0 cells as zeros (raw-feature mode).
Matrix flatten(const MtsDataset& ds);

std::vector<int> labels_of(const MtsDataset& ds);
std::vector<std::string> ids_of(const MtsDataset& ds);

}  // namespace mtsk
