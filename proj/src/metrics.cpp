#include "segfix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace segfix {

ContingencyTable::ContingencyTable(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.gt != b.gt ? a.gt < b.gt : a.prop < b.prop;
  });
  for (const Entry& e : entries) {
    if (e.count == 0) continue;
    if (!entries_.empty() && entries_.back().gt == e.gt && entries_.back().prop == e.prop) {
      entries_.back().count += e.count;
    } else {
      entries_.push_back(e);
    }
    rows_[e.gt] += e.count;
    cols_[e.prop] += e.count;
    total_ += e.count;
  }
}

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<Label, Label>& p) const noexcept {
    return std::hash<Label>{}(p.first * 0x9e3779b97f4a7c15ULL ^ p.second);
  }
};

void require_nonempty(const ContingencyTable& t, const char* what) {
  if (t.empty()) throw std::invalid_argument(std::string(what) + ": empty contingency table");
}

// r log(r / s), with 0 log 0 = 0
double xlogx_ratio(double r, double s) { return r > 0.0 ? r * std::log(r / s) : 0.0; }

}  // namespace

ContingencyTable contingency(const LabelVolume& gt, const LabelVolume& prop,
                             bool include_background) {
  if (!(gt.shape() == prop.shape())) {
    throw std::invalid_argument("contingency: volume shapes differ");
  }
  std::unordered_map<std::pair<Label, Label>, std::uint64_t, PairHash> counts;
  std::pair<Label, Label> last{0, 0};
  std::uint64_t* slot = nullptr;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Label g = gt[i], p = prop[i];
    if (!include_background && (g == 0 || p == 0)) continue;
    const std::pair<Label, Label> key{g, p};
    if (slot == nullptr || key != last) {
      last = key;
      slot = &counts[key];
    }
    ++*slot;
  }
  std::vector<ContingencyTable::Entry> entries;
  entries.reserve(counts.size());
  for (const auto& [key, n] : counts) entries.push_back({key.first, key.second, n});
  return ContingencyTable(std::move(entries));
}

ViScores vi_scores(const ContingencyTable& t) {
  require_nonempty(t, "vi_scores");
  const auto& rows = t.row_sums();
  const auto& cols = t.col_sums();
  double split = 0.0, merge = 0.0;
  for (const auto& e : t.entries()) {
    const double r = static_cast<double>(e.count);
    split += xlogx_ratio(r, static_cast<double>(rows.at(e.gt)));
    merge += xlogx_ratio(r, static_cast<double>(cols.at(e.prop)));
  }
  const double R = static_cast<double>(t.total());
  // -0.0 would print oddly in reports
  return ViScores{split == 0.0 ? 0.0 : -split / R, merge == 0.0 ? 0.0 : -merge / R};
}

std::vector<ObjectVi> per_object_vi(const ContingencyTable& t) {
  require_nonempty(t, "per_object_vi");
  const auto& rows = t.row_sums();
  const auto& cols = t.col_sums();
  const double R = static_cast<double>(t.total());
  std::vector<ObjectVi> out;
  for (const auto& e : t.entries()) {
    const double p = static_cast<double>(rows.at(e.gt));
    if (out.empty() || out.back().gt != e.gt) out.push_back({e.gt, 0.0, 0.0, p / R});
    const double frac = static_cast<double>(e.count) / p;
    out.back().vi_split -= frac * std::log(frac);
    out.back().vi_merge -= frac * std::log(static_cast<double>(e.count) /
                                           static_cast<double>(cols.at(e.prop)));
  }
  for (auto& o : out) {
    o.vi_split = std::max(0.0, o.vi_split);
    o.vi_merge = std::max(0.0, o.vi_merge);
  }
  return out;
}

RandScores rand_scores(const ContingencyTable& t) {
  require_nonempty(t, "rand_scores");
  auto square = [](std::uint64_t n) {
    return static_cast<long double>(n) * static_cast<long double>(n);
  };
  long double rr = 0, pp = 0, qq = 0;
  for (const auto& e : t.entries()) rr += square(e.count);
  for (const auto& [g, n] : t.row_sums()) pp += square(n);
  for (const auto& [p, n] : t.col_sums()) qq += square(n);
  return RandScores{static_cast<double>(rr / pp), static_cast<double>(rr / qq)};
}

PointErrorCounts count_point_errors(std::span<const std::uint8_t> before,
                                    std::span<const std::uint8_t> after) {
  if (before.size() != after.size()) {
    throw std::invalid_argument("count_point_errors: decision lists differ in length");
  }
  PointErrorCounts c;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const bool b = before[i] != 0, a = after[i] != 0;
    c.errors_before += b;
    c.errors_after += a;
    c.fixed += b && !a;
    c.introduced += !b && a;
  }
  return c;
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("pr_curve: scores and labels differ in length");
  }
  std::size_t positives = 0;
  for (std::uint8_t l : labels) {
    if (l > 1) throw std::invalid_argument("pr_curve: labels must be binary");
    positives += l;
  }
  if (positives == 0) {
    throw std::invalid_argument("pr_curve: no positive labels, recall is undefined");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<PrPoint> curve;
  std::size_t tp = 0, predicted = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    tp += labels[order[k]];
    ++predicted;
    const bool last_of_score = k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (!last_of_score) continue;
    curve.push_back({scores[order[k]], static_cast<double>(tp) / static_cast<double>(predicted),
                     static_cast<double>(tp) / static_cast<double>(positives)});
  }
  return curve;
}

nlohmann::json evaluation_report(const ContingencyTable& t, bool include_background) {
  const ViScores vi = vi_scores(t);
  const RandScores rand = rand_scores(t);
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : per_object_vi(t)) {
    objects.push_back({{"gt", o.gt},
                       {"vi_split", o.vi_split},
                       {"vi_merge", o.vi_merge},
                       {"vi", o.vi_split + o.vi_merge},
                       {"weight", o.weight}});
  }
  return nlohmann::json{
      {"vi_split", vi.vi_split},
      {"vi_merge", vi.vi_merge},
      {"vi", vi.vi_split + vi.vi_merge},
      {"rand", {{"recall", rand.rand_recall}, {"precision", rand.rand_precision}}},
      {"per_object", std::move(objects)},
      {"table_stats",
       {{"total", t.total()},
        {"gt_segments", t.row_sums().size()},
        {"proposal_segments", t.col_sums().size()},
        {"nonzero_entries", t.entries().size()},
        {"include_background", include_background}}}};
}

}  // namespace segfix
