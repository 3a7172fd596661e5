#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace straw3d::nn {

// One differentiable parameter block: `data` is perturbed in place, `grad`
// is where the graph's backward pass leaves the analytic gradient.
template <typename S>
struct ParamBlock {
  std::string name;
  S* data;
  const S* grad;
  std::size_t size;
};

struct BlockReport {
  std::string name;
  double max_rel_error = 0.0;
  int probes = 0;
  int skipped = 0;  // probes rejected by the smoothness guard
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  int probes = 0;
  int skipped = 0;
  std::vector<BlockReport> blocks;
};

// Central-difference verification of reverse-mode gradients. `backward`
// recomputes the graph and fills every block's gradient; `loss` evaluates
// the objective from current parameter values without touching gradients.
// Per block it probes the largest-magnitude gradient entry plus seeded
// random picks. The relative-error denominator is floored at a small
// multiple of the block's gradient scale so difference-quotient roundoff
// on near-zero entries does not register as failure. Entries where both
// sides sit under `abs_tol` count as matching zeros: a difference quotient
// cannot resolve a truly vanishing gradient (e.g. a conv bias that a
// following batch norm cancels exactly).
//
// A difference quotient is only evidence at points where the objective is
// locally smooth: if the probe window straddles a ReLU kink or a pool
// argmax flip, the quotient measures the kink, not the derivative. Each
// probe is therefore repeated at half the step; when the two quotients
// disagree the probe is discarded as uninformative and counted in
// `skipped`. A genuinely wrong analytic gradient stays self-consistent
// across step sizes, so it cannot hide behind this guard; the check fails
// outright if every probe is discarded.
template <typename S>
GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                        const std::function<void()>& backward,
                                        const std::vector<ParamBlock<S>>& blocks,
                                        double tol = 1e-3, int samples_per_block = 8,
                                        unsigned seed = 0, double step = 1e-4,
                                        double abs_tol = 1e-8) {
  backward();
  std::vector<std::vector<double>> analytic(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b)
    analytic[b].assign(blocks[b].grad, blocks[b].grad + blocks[b].size);

  std::mt19937 rng(seed);
  GradCheckReport report;
  report.max_rel_error = 0.0;

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    const auto& g = analytic[b];
    double gmax = 0.0;
    std::size_t argmax = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(g[i]) > gmax) {
        gmax = std::abs(g[i]);
        argmax = i;
      }
    const double floor = std::max(1e-3 * gmax, 1e-12);

    std::vector<std::size_t> picks{argmax};
    std::uniform_int_distribution<std::size_t> uni(0, blk.size - 1);
    while (picks.size() < std::min<std::size_t>(samples_per_block, blk.size)) {
      const std::size_t i = uni(rng);
      if (std::find(picks.begin(), picks.end(), i) == picks.end()) picks.push_back(i);
    }

    BlockReport br{blk.name, 0.0};
    auto quotient = [&](std::size_t i, double h) {
      const S orig = blk.data[i];
      blk.data[i] = orig + static_cast<S>(h);
      const double lp = loss();
      blk.data[i] = orig - static_cast<S>(h);
      const double lm = loss();
      blk.data[i] = orig;
      return (lp - lm) / (2.0 * h);
    };
    for (std::size_t i : picks) {
      ++br.probes;
      const double fd = quotient(i, step);
      if (std::abs(g[i]) < abs_tol && std::abs(fd) < abs_tol) continue;
      const double fd_half = quotient(i, step / 2);
      if (std::abs(fd - fd_half) >
          0.25 * tol * std::max({std::abs(fd), std::abs(fd_half), floor})) {
        ++br.skipped;
        continue;
      }
      const double rel = std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), floor});
      br.max_rel_error = std::max(br.max_rel_error, rel);
    }
    report.max_rel_error = std::max(report.max_rel_error, br.max_rel_error);
    report.probes += br.probes;
    report.skipped += br.skipped;
    report.blocks.push_back(std::move(br));
  }
  report.pass = report.max_rel_error < tol && report.skipped < report.probes;
  return report;
}

}  // namespace straw3d::nn
