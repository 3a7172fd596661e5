#include "straw3d/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace straw3d;
using namespace straw3d::eval;

TEST_SUITE("metrics") {

TEST_CASE("confusion matches a per-pixel loop, invalid pixels excluded") {
  std::mt19937 rng(42);
  LabelImage pred(37, 23), gt(37, 23);
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    pred.labels[i] = (rng() % 5 == 0) ? LabelImage::kInvalid : uint8_t(rng() % 2);
    gt.labels[i] = (rng() % 7 == 0) ? LabelImage::kInvalid : uint8_t(rng() % 2);
  }
  const auto cm = confusion(pred, gt);

  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    if (pred.labels[i] == LabelImage::kInvalid || gt.labels[i] == LabelImage::kInvalid) continue;
    tp += pred.labels[i] == 1 && gt.labels[i] == 1;
    fp += pred.labels[i] == 1 && gt.labels[i] == 0;
    fn += pred.labels[i] == 0 && gt.labels[i] == 1;
    tn += pred.labels[i] == 0 && gt.labels[i] == 0;
  }
  CHECK(cm.tp == tp);
  CHECK(cm.fp == fp);
  CHECK(cm.fn == fn);
  CHECK(cm.tn == tn);

  LabelImage small(3, 3);
  CHECK_THROWS_AS(confusion(pred, small), std::invalid_argument);
}

TEST_CASE("perfect and all-background predictions") {
  LabelImage gt(10, 10);
  for (int i = 0; i < 10; ++i) gt.labels[i] = 1;
  const auto perfect = confusion(gt, gt);
  CHECK(perfect.tp == 10);
  CHECK(perfect.tn == 90);
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);
  const auto r = metrics(perfect);
  CHECK(r.acc == 1.0);
  CHECK(r.kappa.value() == doctest::Approx(1.0));
  CHECK(r.mean_iou == 1.0);

  LabelImage none(10, 10);
  const auto miss = confusion(none, gt);
  CHECK(miss.tp == 0);
  CHECK(miss.fn == 10);
}

TEST_CASE("worked example: kappa is exactly 0.4") {
  const auto r = metrics(ConfusionMatrix{40, 20, 10, 30});
  CHECK(r.acc == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(r.kappa.value() == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("metrics match direct formula evaluation on random matrices") {
  std::mt19937 rng(9);
  for (int it = 0; it < 1000; ++it) {
    ConfusionMatrix cm{rng() % 1000, rng() % 1000, rng() % 1000, rng() % 1000};
    if (cm.total() == 0) cm.tn = 1;
    const auto r = metrics(cm);
    const double tp = double(cm.tp), fp = double(cm.fp), fn = double(cm.fn), tn = double(cm.tn);
    const double n = tp + fp + fn + tn;
    const double acc = (tp + tn) / n;
    const double exp_acc = ((tp + fn) / n) * ((tp + fp) / n) + ((tn + fp) / n) * ((tn + fn) / n);
    CHECK(std::abs(r.acc - acc) < 1e-9);
    if (exp_acc < 1.0) {
      REQUIRE(r.kappa.has_value());
      CHECK(std::abs(*r.kappa - (acc - exp_acc) / (1.0 - exp_acc)) < 1e-9);
    }
    if (tp + fp + fn > 0) CHECK(std::abs(r.iou_fruit - tp / (tp + fp + fn)) < 1e-9);
    if (tn + fn + fp > 0) CHECK(std::abs(r.iou_background - tn / (tn + fn + fp)) < 1e-9);
    CHECK(std::abs(r.mean_iou - 0.5 * (r.iou_fruit + r.iou_background)) < 1e-12);
  }
}

TEST_CASE("kappa is undefined on single-class degenerate data, ~0 under independence") {
  const auto degenerate = metrics(ConfusionMatrix{0, 0, 0, 500});
  CHECK(!degenerate.kappa.has_value());
  CHECK(degenerate.acc == 1.0);

  std::mt19937 rng(123);
  ConfusionMatrix cm;
  for (int i = 0; i < 1000000; ++i) {
    const bool p = (rng() % 100) < 30;
    const bool g = (rng() % 100) < 20;
    if (g) (p ? cm.tp : cm.fn)++;
    else (p ? cm.fp : cm.tn)++;
  }
  CHECK(std::abs(metrics(cm).kappa.value()) < 0.02);
}

TEST_CASE("count scaling and class swapping") {
  const ConfusionMatrix cm{40, 20, 10, 30};
  const auto base = metrics(cm);
  for (uint64_t s : {2ull, 7ull, 100ull}) {
    const auto scaled = metrics(ConfusionMatrix{cm.tp * s, cm.fp * s, cm.fn * s, cm.tn * s});
    CHECK(scaled.acc == doctest::Approx(base.acc).epsilon(1e-12));
    CHECK(scaled.kappa.value() == doctest::Approx(base.kappa.value()).epsilon(1e-12));
    CHECK(scaled.mean_iou == doctest::Approx(base.mean_iou).epsilon(1e-12));
  }
  // swapping the positive class maps (tp,fp,fn,tn) -> (tn,fn,fp,tp)
  const auto swapped = metrics(ConfusionMatrix{cm.tn, cm.fn, cm.fp, cm.tp});
  CHECK(swapped.kappa.value() == doctest::Approx(base.kappa.value()).epsilon(1e-12));
  CHECK(swapped.iou_fruit == doctest::Approx(base.iou_background).epsilon(1e-12));
  CHECK(swapped.iou_background == doctest::Approx(base.iou_fruit).epsilon(1e-12));
  CHECK(swapped.mean_iou == doctest::Approx(base.mean_iou).epsilon(1e-12));
}

TEST_CASE("6-sample curve: grid sweep equals exhaustive enumeration and hand value") {
  // scores sit exactly on the 256-level grid so both sweeps see the same cuts
  const std::vector<float> scores{255.f / 255, 204.f / 255, 153.f / 255,
                                  102.f / 255, 51.f / 255, 0.f};
  const std::vector<uint8_t> labels{1, 1, 0, 1, 0, 0};
  const double grid = pr_auc_samples(scores, labels, 256);
  const double exact = pr_auc_samples_exhaustive(scores, labels);
  CHECK(std::abs(grid - exact) < 1e-9);
  CHECK(exact == doctest::Approx(65.0 / 72.0).epsilon(1e-12));
}

TEST_CASE("separable scores give AUC 1; random scores give the base rate") {
  std::vector<float> scores;
  std::vector<uint8_t> labels;
  std::mt19937 rng(5);
  for (int i = 0; i < 4000; ++i) {
    const bool pos = i % 4 == 0;
    scores.push_back(pos ? 0.9f : 0.1f);
    labels.push_back(pos);
  }
  CHECK(pr_auc_samples(scores, labels) == doctest::Approx(1.0).epsilon(1e-3));

  std::uniform_real_distribution<float> u(0.f, 1.f);
  scores.clear();
  labels.clear();
  const double rho = 0.3;
  for (int i = 0; i < 20000; ++i) {
    scores.push_back(u(rng));
    labels.push_back(u(rng) < rho);
  }
  CHECK(pr_auc_samples(scores, labels) == doctest::Approx(rho).epsilon(0.1));
}

TEST_CASE("exhaustive AUC is invariant under strictly monotone score transforms") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  std::vector<float> scores;
  std::vector<uint8_t> labels;
  for (int i = 0; i < 500; ++i) {
    const float s = u(rng);
    scores.push_back(s);
    labels.push_back(u(rng) < 0.3f + 0.4f * s);  // informative scores
  }
  const double base = pr_auc_samples_exhaustive(scores, labels);
  auto cubed = scores;
  for (auto& s : cubed) s = s * s * s;
  CHECK(pr_auc_samples_exhaustive(cubed, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS_AS(metrics(ConfusionMatrix{}), std::invalid_argument);
  CHECK_THROWS_AS(pr_auc_samples({0.5f}, {0}), std::invalid_argument);      // no positives
  CHECK_THROWS_AS(pr_auc_samples({1.5f}, {1}), std::invalid_argument);     // out of range
  CHECK_THROWS_AS(pr_auc_samples({0.5f}, {1, 1}), std::invalid_argument);  // size mismatch
}

TEST_CASE("per-sample mean IoU averages frame scores") {
  const ConfusionMatrix a{10, 0, 0, 90};  // mean IoU 1
  const ConfusionMatrix b{0, 10, 10, 80};  // fruit IoU 0, bg IoU 0.8
  const double expect = 0.5 * (1.0 + 0.5 * (0.0 + 0.8));
  CHECK(mean_iou_per_sample({a, b}) == doctest::Approx(expect).epsilon(1e-12));
}

}  // TEST_SUITE
