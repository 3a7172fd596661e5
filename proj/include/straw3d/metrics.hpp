#pragma once

#include "straw3d/camera.hpp"
#include "straw3d/image.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace straw3d::eval {

// Fruit is the positive class.
struct ConfusionMatrix {
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp; fp += o.fp; fn += o.fn; tn += o.tn;
    return *this;
  }
};

struct MetricsReport {
  double acc = 0;
  std::optional<double> kappa;  // empty when expected accuracy is 1 (degenerate)
  double iou_background = 0;
  double iou_fruit = 0;
  double mean_iou = 0;
  std::optional<double> auc;  // filled by callers that have score maps
};

// Counts over pixels valid (!= 255) in both images.
ConfusionMatrix confusion(const LabelImage& pred, const LabelImage& gt);

// Accuracy, Cohen's kappa (chance agreement from row/column marginals),
// per-class IoU and their mean. Throws on an empty matrix.
MetricsReport metrics(const ConfusionMatrix& cm);

// Mean IoU averaged per sample instead of pooled.
double mean_iou_per_sample(const std::vector<ConfusionMatrix>& per_frame);

// Area under the precision-recall curve for flat score/label arrays.
// Thresholds are `num_thresholds` evenly spaced values in [0,1]; prediction
// is positive when score >= threshold; undefined-precision points are
// dropped and the recall=0 endpoint carries the lowest-recall precision.
// Throws if scores leave [0,1] or no positive label exists.
double pr_auc_samples(const std::vector<float>& scores, const std::vector<uint8_t>& labels,
                      int num_thresholds = 256);

// Same curve but swept over every distinct score (order-exact, test mode).
double pr_auc_samples_exhaustive(const std::vector<float>& scores,
                                 const std::vector<uint8_t>& labels);

// Pools valid pixels of all frames, then sweeps thresholds.
double pr_auc(const std::vector<const geom::ScalarField*>& prob_maps,
              const std::vector<const LabelImage*>& gts, int num_thresholds = 256);

}  // namespace straw3d::eval
