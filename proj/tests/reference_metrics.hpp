#pragma once

// Naive reference implementations used as oracles for evalmetrics.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace attdmm::test {

inline double pair_credit(double pos, double neg) { return pos > neg ? 1.0 : (pos == neg ? 0.5 : 0.0); }

// Exhaustive positive-negative pair counting.
inline double brute_auroc(std::span<const double> s, std::span<const int> y) {
  double acc = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      acc += pair_credit(s[i], s[j]);
      ++pairs;
    }
  }
  return acc / static_cast<double>(pairs);
}

// Average precision: for every distinct threshold from the top, recall
// increment times precision of everything scored >= threshold.
inline double naive_ap(std::span<const double> s, std::span<const int> y) {
  std::vector<double> th(s.begin(), s.end());
  std::sort(th.begin(), th.end(), std::greater<>());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  double total_pos = 0;
  for (int v : y) total_pos += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : th) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] == 1 ? tp : fp) += 1;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * tp / (tp + fp);
    prev_recall = recall;
  }
  return ap;
}

// DeLong with the structural components computed pair by pair.
inline double naive_delong_p(std::span<const double> a, std::span<const double> b, std::span<const int> y) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  const double m = static_cast<double>(pos.size()), n = static_cast<double>(neg.size());
  auto components = [&](std::span<const double> s, std::vector<double>& v10, std::vector<double>& v01) {
    v10.assign(pos.size(), 0.0);
    v01.assign(neg.size(), 0.0);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      for (std::size_t j = 0; j < neg.size(); ++j) {
        const double c = pair_credit(s[pos[i]], s[neg[j]]);
        v10[i] += c / n;
        v01[j] += c / m;
      }
    }
  };
  std::vector<double> a10, a01, b10, b01;
  components(a, a10, a01);
  components(b, b10, b01);
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto cov = [&](const std::vector<double>& u, const std::vector<double>& v) {
    const double mu = mean(u), mv = mean(v);
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - mu) * (v[i] - mv);
    return s / static_cast<double>(u.size() - 1);
  };
  const double auc_a = mean(a10), auc_b = mean(b10);
  const double var = (cov(a10, a10) + cov(b10, b10) - 2 * cov(a10, b10)) / m +
                     (cov(a01, a01) + cov(b01, b01) - 2 * cov(a01, b01)) / n;
  if (var <= 0.0) return auc_a == auc_b ? 1.0 : 0.0;
  return std::erfc(std::abs(auc_a - auc_b) / std::sqrt(var) / std::sqrt(2.0));
}

}  // namespace attdmm::test
