#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nidsdl/ingest.hpp"

namespace nidsdl {

// Attack is the positive class throughout.
struct ConfusionMatrix {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Predicted attack iff score >= threshold.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          double threshold);

// (TP+TN) / (TP+TN+FP+FN); throws DataError on an empty matrix.
double accuracy(const ConfusionMatrix& m);
// TP / (TP+FP), 0 when undefined.
double precision(const ConfusionMatrix& m);
// TP / (TP+FN), 0 when undefined.
double recall(const ConfusionMatrix& m);
// 2PR / (P+R), 0 when P+R = 0.
double f1(const ConfusionMatrix& m);

struct RocPoint {
  double fpr;
  double tpr;
  bool operator==(const RocPoint&) const = default;
};

// Thresholds swept over distinct scores, highest first; starts at (0,0), ends at (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Trapezoidal area under a curve from roc_curve.
double auc(std::span<const RocPoint> roc);

struct EvalReport {
  std::string classifier;
  ConfusionMatrix matrix;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  std::vector<RocPoint> roc;
  double auc = 0.0;
};

EvalReport evaluate_scores(std::string classifier, std::span<const double> scores,
                           std::span<const std::uint8_t> labels, double threshold);

// CSV renderings.
std::string metrics_csv(const std::vector<EvalReport>& reports);    // classifier,accuracy,precision,recall,f1
std::string confusion_csv(const std::vector<EvalReport>& reports);  // classifier,tp,tn,fp,fn
std::string auc_csv(const std::vector<EvalReport>& reports);        // classifier,auc
std::string roc_points_csv(const EvalReport& report);               // fpr,tpr
std::string reports_json(const std::vector<EvalReport>& reports);

}  // namespace nidsdl
