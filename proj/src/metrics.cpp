#include "nidsdl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <numeric>

#include "nidsdl/error.hpp"

namespace nidsdl {

ConfusionMatrix confusion(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          double threshold) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  if (scores.empty()) throw DataError("cannot build a confusion matrix from zero samples");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++m.tp;
    else if (!predicted && !actual) ++m.tn;
    else if (predicted) ++m.fp;
    else ++m.fn;
  }
  return m;
}

double accuracy(const ConfusionMatrix& m) {
  if (m.total() == 0) throw DataError("accuracy of an empty confusion matrix");
  return static_cast<double>(m.tp + m.tn) / static_cast<double>(m.tp + m.tn + m.fp + m.fn);
}

double precision(const ConfusionMatrix& m) {
  if (m.tp + m.fp == 0) return 0.0;
  return static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
}

double recall(const ConfusionMatrix& m) {
  if (m.tp + m.fn == 0) return 0.0;
  return static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
}

double f1(const ConfusionMatrix& m) {
  // 2PR / (P+R) reduced to counts: one rounding instead of five.
  if (m.tp == 0) return 0.0;
  return static_cast<double>(2 * m.tp) / static_cast<double>(2 * m.tp + m.fp + m.fn);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  const auto pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                                          [](std::uint8_t l) { return l != 0; }));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("ROC curve needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> roc{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]]) ++tp;
      else ++fp;
      ++i;
    }
    roc.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return roc;
}

double auc(std::span<const RocPoint> roc) {
  if (roc.size() < 2) throw DataError("ROC curve needs at least two points");
  if (roc.front() != RocPoint{0.0, 0.0} || roc.back() != RocPoint{1.0, 1.0}) {
    throw DataError("ROC curve must run from (0,0) to (1,1)");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const double dx = roc[i].fpr - roc[i - 1].fpr;
    if (dx < 0.0 || roc[i].tpr < roc[i - 1].tpr) throw DataError("ROC curve is not monotone");
    area += dx * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

EvalReport evaluate_scores(std::string classifier, std::span<const double> scores,
                           std::span<const std::uint8_t> labels, double threshold) {
  EvalReport r;
  r.classifier = std::move(classifier);
  r.matrix = confusion(scores, labels, threshold);
  r.accuracy = accuracy(r.matrix);
  r.precision = precision(r.matrix);
  r.recall = recall(r.matrix);
  r.f1 = f1(r.matrix);
  r.precision_undefined = r.matrix.tp + r.matrix.fp == 0;
  r.recall_undefined = r.matrix.tp + r.matrix.fn == 0;
  r.roc = roc_curve(scores, labels);
  r.auc = auc(r.roc);
  return r;
}

std::string metrics_csv(const std::vector<EvalReport>& reports) {
  std::string out = "classifier,accuracy,precision,recall,f1\n";
  for (const auto& r : reports) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.classifier, r.accuracy, r.precision,
                       r.recall, r.f1);
  }
  return out;
}

std::string confusion_csv(const std::vector<EvalReport>& reports) {
  std::string out = "classifier,tp,tn,fp,fn\n";
  for (const auto& r : reports) {
    out += fmt::format("{},{},{},{},{}\n", r.classifier, r.matrix.tp, r.matrix.tn, r.matrix.fp, r.matrix.fn);
  }
  return out;
}

std::string auc_csv(const std::vector<EvalReport>& reports) {
  std::string out = "classifier,auc\n";
  for (const auto& r : reports) out += fmt::format("{},{:.6f}\n", r.classifier, r.auc);
  return out;
}

std::string roc_points_csv(const EvalReport& report) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : report.roc) out += fmt::format("{:.9g},{:.9g}\n", p.fpr, p.tpr);
  return out;
}

std::string reports_json(const std::vector<EvalReport>& reports) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : reports) {
    doc.push_back({
        {"classifier", r.classifier},
        {"accuracy", r.accuracy},
        {"precision", r.precision},
        {"recall", r.recall},
        {"f1", r.f1},
        {"precision_undefined", r.precision_undefined},
        {"recall_undefined", r.recall_undefined},
        {"auc", r.auc},
        {"confusion", {{"tp", r.matrix.tp}, {"tn", r.matrix.tn}, {"fp", r.matrix.fp}, {"fn", r.matrix.fn}}},
        {"roc_points", r.roc.size()},
    });
  }
  return doc.dump(2) + "\n";
}

}  // namespace nidsdl
