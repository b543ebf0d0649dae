#include "fuzzyseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fuzzyseg/error.hpp"

namespace fuzzyseg {

ConfusionAccumulator::ConfusionAccumulator(int classes) {
  if (classes < 1) throw InputError("accumulator needs at least one class");
  const auto n = static_cast<std::size_t>(classes);
  intersection_.assign(n, 0);
  pred_area_.assign(n, 0);
  gt_area_.assign(n, 0);
}

void ConfusionAccumulator::add(const LabelGrid& pred, const LabelGrid& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw InputError("prediction is " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                     " but ground truth is " + std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  const int c = classes();
  const auto p = pred.labels();
  const auto g = gt.labels();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < 0 || p[k] >= c || g[k] < 0 || g[k] >= c) {
      throw InputError("label out of range [0, " + std::to_string(c) + ") at pixel " + std::to_string(k));
    }
    ++pred_area_[static_cast<std::size_t>(p[k])];
    ++gt_area_[static_cast<std::size_t>(g[k])];
    if (p[k] == g[k]) ++intersection_[static_cast<std::size_t>(p[k])];
  }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
  if (other.classes() != classes()) throw InputError("cannot merge accumulators with different class counts");
  for (std::size_t c = 0; c < intersection_.size(); ++c) {
    intersection_[c] += other.intersection_[c];
    pred_area_[c] += other.pred_area_[c];
    gt_area_[c] += other.gt_area_[c];
  }
}

std::optional<double> ConfusionAccumulator::iou(int c) const {
  const auto u = union_area(c);
  if (u == 0) return std::nullopt;
  return static_cast<double>(intersection(c)) / static_cast<double>(u);
}

std::optional<double> ConfusionAccumulator::dice(int c) const {
  const auto denom = pred_area(c) + gt_area(c);
  if (denom == 0) return std::nullopt;
  return 2.0 * static_cast<double>(intersection(c)) / static_cast<double>(denom);
}

namespace {

ConfusionAccumulator single(const LabelGrid& pred, const LabelGrid& gt, int c) {
  if (c < 0) throw InputError("class index must be non-negative");
  const int classes = std::max({c + 1, pred.max_label_plus_one(), gt.max_label_plus_one()});
  ConfusionAccumulator acc(classes);
  acc.add(pred, gt);
  return acc;
}

double mean_defined(const std::vector<std::optional<double>>& xs) {
  double sum = 0.0;
  int n = 0;
  for (const auto& x : xs) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

std::string class_name(const std::vector<std::string>& names, std::size_t c) {
  return c < names.size() ? names[c] : std::to_string(c);
}

}  // namespace

std::optional<double> iou(const LabelGrid& pred, const LabelGrid& gt, int c) { return single(pred, gt, c).iou(c); }

std::optional<double> dice(const LabelGrid& pred, const LabelGrid& gt, int c) { return single(pred, gt, c).dice(c); }

Scores scores_of(const ConfusionAccumulator& acc) {
  Scores s;
  for (int c = 0; c < acc.classes(); ++c) {
    s.iou.push_back(acc.iou(c));
    s.dice.push_back(acc.dice(c));
  }
  s.mean_iou = mean_defined(s.iou);
  s.mean_dice = mean_defined(s.dice);
  return s;
}

Scores mean_over_dataset(std::span<const ConfusionAccumulator> accumulators) {
  if (accumulators.empty()) throw InputError("need at least one image to score");
  ConfusionAccumulator total(accumulators.front().classes());
  for (const auto& acc : accumulators) total.merge(acc);
  return scores_of(total);
}

std::string scores_csv(const Scores& scores, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os.precision(17);
  os << "class,iou,dice\n";
  for (std::size_t c = 0; c < scores.iou.size(); ++c) {
    os << class_name(class_names, c) << ',';
    if (scores.iou[c]) os << *scores.iou[c];
    os << ',';
    if (scores.dice[c]) os << *scores.dice[c];
    os << '\n';
  }
  os << "mean," << scores.mean_iou << ',' << scores.mean_dice << '\n';
  return os.str();
}

std::string scores_json(const Scores& scores, const std::vector<std::string>& class_names) {
  nlohmann::ordered_json j;
  auto per_class = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < scores.iou.size(); ++c) {
    nlohmann::ordered_json row;
    row["class"] = class_name(class_names, c);
    row["iou"] = scores.iou[c] ? nlohmann::ordered_json(*scores.iou[c]) : nlohmann::ordered_json(nullptr);
    row["dice"] = scores.dice[c] ? nlohmann::ordered_json(*scores.dice[c]) : nlohmann::ordered_json(nullptr);
    per_class.push_back(std::move(row));
  }
  j["classes"] = std::move(per_class);
  j["mIoU"] = std::isnan(scores.mean_iou) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(scores.mean_iou);
  j["mDice"] = std::isnan(scores.mean_dice) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(scores.mean_dice);
  return j.dump(2) + "\n";
}

}  // namespace fuzzyseg
