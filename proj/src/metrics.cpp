#include "straw3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace straw3d::eval {

ConfusionMatrix confusion(const LabelImage& pred, const LabelImage& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("confusion: image sizes differ");
  ConfusionMatrix cm;
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    const uint8_t p = pred.labels[i], g = gt.labels[i];
    if (p == LabelImage::kInvalid || g == LabelImage::kInvalid) continue;
    if (g == 1) {
      (p == 1 ? cm.tp : cm.fn)++;
    } else {
      (p == 1 ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  const double total = static_cast<double>(cm.total());
  if (total <= 0) throw std::invalid_argument("metrics: empty confusion matrix");
  const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
  const double fn = static_cast<double>(cm.fn), tn = static_cast<double>(cm.tn);

  MetricsReport r;
  r.acc = (tp + tn) / total;
  const double acc_exp =
      ((tp + fn) * (tp + fp) + (tn + fp) * (tn + fn)) / (total * total);
  if (acc_exp < 1.0) r.kappa = (r.acc - acc_exp) / (1.0 - acc_exp);

  // IoU denominators are zero only when a class is absent from both images;
  // agreement on the empty set counts as perfect.
  const double fruit_den = tp + fp + fn;
  const double bg_den = tn + fn + fp;
  r.iou_fruit = fruit_den > 0 ? tp / fruit_den : 1.0;
  r.iou_background = bg_den > 0 ? tn / bg_den : 1.0;
  r.mean_iou = 0.5 * (r.iou_fruit + r.iou_background);
  return r;
}

double mean_iou_per_sample(const std::vector<ConfusionMatrix>& per_frame) {
  if (per_frame.empty()) throw std::invalid_argument("mean_iou_per_sample: no frames");
  double sum = 0;
  for (const auto& cm : per_frame) sum += metrics(cm).mean_iou;
  return sum / static_cast<double>(per_frame.size());
}

namespace {

// Integrates the PR polyline along descending thresholds (ascending recall),
// starting from the carried (recall=0, first precision) endpoint.
double auc_over_thresholds(const std::vector<float>& scores, const std::vector<uint8_t>& labels,
                           const std::vector<double>& thresholds_descending) {
  for (const float s : scores)
    if (s < 0.f || s > 1.f) throw std::invalid_argument("pr_auc: score outside [0,1]");

  // Sort scores descending once; prefix sums give tp/fp per threshold.
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::vector<float> sorted(scores.size());
  std::vector<uint64_t> tp_prefix(scores.size() + 1, 0);
  for (size_t i = 0; i < order.size(); ++i) {
    sorted[i] = scores[order[i]];
    tp_prefix[i + 1] = tp_prefix[i] + (labels[order[i]] == 1);
  }
  const uint64_t positives = tp_prefix.back();
  if (positives == 0) throw std::invalid_argument("pr_auc: no positive labels");

  double auc = 0;
  double prev_recall = 0, prev_precision = -1;
  for (const double t : thresholds_descending) {
    // count of samples with score >= t
    const size_t n = std::lower_bound(sorted.begin(), sorted.end(), t,
                                      [](float s, double th) { return s >= th; }) -
                     sorted.begin();
    if (n == 0) continue;  // precision undefined
    const uint64_t tp = tp_prefix[n];
    const double precision = static_cast<double>(tp) / static_cast<double>(n);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    if (prev_precision < 0) prev_precision = precision;  // carry to recall = 0
    auc += (recall - prev_recall) * 0.5 * (precision + prev_precision);
    prev_recall = recall;
    prev_precision = precision;
  }
  return auc;
}

}  // namespace

double pr_auc_samples(const std::vector<float>& scores, const std::vector<uint8_t>& labels,
                      int num_thresholds) {
  if (scores.size() != labels.size()) throw std::invalid_argument("pr_auc: size mismatch");
  if (num_thresholds < 2) throw std::invalid_argument("pr_auc: need at least 2 thresholds");
  std::vector<double> thresholds(num_thresholds);
  for (int k = 0; k < num_thresholds; ++k)
    thresholds[k] = static_cast<double>(num_thresholds - 1 - k) / (num_thresholds - 1);
  return auc_over_thresholds(scores, labels, thresholds);
}

double pr_auc_samples_exhaustive(const std::vector<float>& scores,
                                 const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("pr_auc: size mismatch");
  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  return auc_over_thresholds(scores, labels, thresholds);
}

double pr_auc(const std::vector<const geom::ScalarField*>& prob_maps,
              const std::vector<const LabelImage*>& gts, int num_thresholds) {
  if (prob_maps.size() != gts.size() || prob_maps.empty())
    throw std::invalid_argument("pr_auc: frame lists mismatch");
  std::vector<float> scores;
  std::vector<uint8_t> labels;
  for (size_t f = 0; f < prob_maps.size(); ++f) {
    const auto& pm = *prob_maps[f];
    const auto& gt = *gts[f];
    if (pm.width != gt.width || pm.height != gt.height)
      throw std::invalid_argument("pr_auc: frame sizes differ");
    for (size_t i = 0; i < pm.values.size(); ++i) {
      if (!pm.valid[i] || gt.labels[i] == LabelImage::kInvalid) continue;
      scores.push_back(pm.values[i]);
      labels.push_back(gt.labels[i]);
    }
  }
  return pr_auc_samples(scores, labels, num_thresholds);
}

}  // namespace straw3d::eval
