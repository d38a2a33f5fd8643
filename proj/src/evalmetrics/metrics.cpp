#include "attdmm/evalmetrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "attdmm/numcore/errors.hpp"

namespace attdmm {
namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts count_classes(std::span<const double> scores, std::span<const int> labels,
                          const char* who) {
  require(scores.size() == labels.size(), std::string(who) + ": scores and labels differ in length");
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, std::string(who) + ": labels must be 0 or 1");
    require(std::isfinite(scores[i]), std::string(who) + ": scores must be finite");
    (labels[i] == 1 ? c.pos : c.neg) += 1;
  }
  return c;
}

// 1-based midranks (ties share the average rank).
std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
    i = j + 1;
  }
  return r;
}

struct Components {
  double auc = 0.0;
  std::vector<double> v10;  // per positive
  std::vector<double> v01;  // per negative
};

Components structural_components(std::span<const double> scores, std::span<const int> labels,
                                 std::size_t m, std::size_t n) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  const std::vector<double> r_all = midranks(scores);
  const std::vector<double> r_pos = midranks(pos);
  const std::vector<double> r_neg = midranks(neg);
  Components c;
  c.v10.reserve(m);
  c.v01.reserve(n);
  std::size_t ip = 0, in = 0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      c.v10.push_back((r_all[i] - r_pos[ip++]) / static_cast<double>(n));
      rank_sum += r_all[i];
    } else {
      c.v01.push_back(1.0 - (r_all[i] - r_neg[in++]) / static_cast<double>(m));
    }
  }
  const double md = static_cast<double>(m);
  c.auc = (rank_sum - md * (md + 1.0) / 2.0) / (md * static_cast<double>(n));
  return c;
}

double covariance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2) return 0.0;
  const double k = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / k;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / k;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - ma) * (b[i] - mb);
  return acc / (k - 1.0);
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = count_classes(scores, labels, "auroc");
  if (c.pos == 0 || c.neg == 0) throw ContractViolation("auroc: both classes must be present");
  const std::vector<double> r = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (labels[i] == 1) rank_sum += r[i];
  }
  const double m = static_cast<double>(c.pos);
  return (rank_sum - m * (m + 1.0) / 2.0) / (m * static_cast<double>(c.neg));
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = count_classes(scores, labels, "auprc");
  if (c.pos == 0) throw ContractViolation("auprc: at least one positive is required");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double total_pos = static_cast<double>(c.pos);
  double ap = 0.0;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const std::size_t tp_before = tp;
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    if (tp > tp_before) {
      const double dr = static_cast<double>(tp - tp_before) / total_pos;
      ap += dr * (static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    i = j;
  }
  return ap;
}

DelongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const int> labels) {
  require(scores_a.size() == scores_b.size(), "delong_test: score vectors must be paired");
  const ClassCounts c = count_classes(scores_a, labels, "delong_test");
  count_classes(scores_b, labels, "delong_test");
  if (c.pos == 0 || c.neg == 0) throw ContractViolation("delong_test: both classes must be present");
  const Components a = structural_components(scores_a, labels, c.pos, c.neg);
  const Components b = structural_components(scores_b, labels, c.pos, c.neg);
  const double m = static_cast<double>(c.pos);
  const double n = static_cast<double>(c.neg);
  const double var = (covariance(a.v10, a.v10) + covariance(b.v10, b.v10) - 2.0 * covariance(a.v10, b.v10)) / m +
                     (covariance(a.v01, a.v01) + covariance(b.v01, b.v01) - 2.0 * covariance(a.v01, b.v01)) / n;
  DelongResult r;
  r.auroc_a = a.auc;
  r.auroc_b = b.auc;
  const double diff = a.auc - b.auc;
  if (!(var > 0.0)) {
    r.z = 0.0;
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.z = diff / std::sqrt(var);
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

}  // namespace attdmm
