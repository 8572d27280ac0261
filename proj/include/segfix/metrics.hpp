#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "segfix/volume.hpp"

namespace segfix {

/// Sparse overlap counts r_ij between ground-truth segment i and proposal
/// segment j, with row sums p_i, column sums q_j and total R.
class ContingencyTable {
 public:
  struct Entry {
    Label gt;
    Label prop;
    std::uint64_t count;
  };

  ContingencyTable() = default;
  /// Duplicate (gt, prop) entries are summed; zero counts dropped.
  explicit ContingencyTable(std::vector<Entry> entries);

  const std::vector<Entry>& entries() const { return entries_; }
  const std::map<Label, std::uint64_t>& row_sums() const { return rows_; }
  const std::map<Label, std::uint64_t>& col_sums() const { return cols_; }
  std::uint64_t total() const { return total_; }
  bool empty() const { return total_ == 0; }

 private:
  std::vector<Entry> entries_;
  std::map<Label, std::uint64_t> rows_;
  std::map<Label, std::uint64_t> cols_;
  std::uint64_t total_ = 0;
};

/// By default only voxels that are foreground in both volumes are counted.
ContingencyTable contingency(const LabelVolume& gt, const LabelVolume& prop,
                             bool include_background = false);

/// Variation of information halves, in nats.
struct ViScores {
  double vi_split = 0.0;
  double vi_merge = 0.0;
};

struct ObjectVi {
  Label gt;
  double vi_split;
  double vi_merge;
  double weight;  // p_i / R
};

struct RandScores {
  double rand_recall = 0.0;
  double rand_precision = 0.0;
};

ViScores vi_scores(const ContingencyTable& t);
std::vector<ObjectVi> per_object_vi(const ContingencyTable& t);
RandScores rand_scores(const ContingencyTable& t);

struct PointErrorCounts {
  std::size_t errors_before = 0;
  std::size_t errors_after = 0;
  std::size_t fixed = 0;
  std::size_t introduced = 0;
};

PointErrorCounts count_point_errors(std::span<const std::uint8_t> before,
                                    std::span<const std::uint8_t> after);

struct PrPoint {
  double threshold;
  double precision;
  double recall;
};

/// Precision and recall of `score >= threshold` at each distinct score,
/// highest threshold first.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Full comparison report: VI, Rand, per-object VI and table statistics.
nlohmann::json evaluation_report(const ContingencyTable& t, bool include_background);

}  // namespace segfix
