#include "attdmm/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "attdmm/numcore/errors.hpp"

namespace attdmm {

ImputedSeries impute_and_mask(const Vector& raw, double fill) {
  require(raw.size() >= 1, "impute_and_mask: empty series");
  const Eigen::Index T = raw.size();
  ImputedSeries out{Vector::Constant(T, fill), Vector::Zero(T)};
  Eigen::Index prev = -1;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (std::isnan(raw(t))) continue;
    out.values(t) = raw(t);
    out.mask(t) = 1.0;
    if (prev < 0) {
      for (Eigen::Index k = 0; k < t; ++k) out.values(k) = raw(t);
    } else {
      const double span = static_cast<double>(t - prev);
      for (Eigen::Index k = prev + 1; k < t; ++k) {
        const double w = static_cast<double>(k - prev) / span;
        out.values(k) = (1.0 - w) * raw(prev) + w * raw(t);
      }
    }
    prev = t;
  }
  if (prev >= 0) {
    for (Eigen::Index k = prev + 1; k < T; ++k) out.values(k) = raw(prev);
  }
  return out;
}

void impute_and_mask(const Matrix& raw, const Vector& fill, Matrix& values, Matrix& mask) {
  require(fill.size() == raw.cols(), "impute_and_mask: fill size must match feature count");
  values.resize(raw.rows(), raw.cols());
  mask.resize(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.cols(); ++i) {
    ImputedSeries col = impute_and_mask(Vector(raw.col(i)), fill(i));
    values.col(i) = col.values;
    mask.col(i) = col.mask;
  }
}

void Normalizer::fit(std::span<const RawStay> train) {
  require(!train.empty(), "Normalizer::fit: no training stays");
  const Eigen::Index M = train.front().values.cols();
  Vector sum = Vector::Zero(M);
  Vector count = Vector::Zero(M);
  double age_sum = 0.0;
  std::set<std::string> types;
  for (const RawStay& s : train) {
    if (s.values.cols() != M) throw DataError("Normalizer::fit: inconsistent feature count");
    for (Eigen::Index t = 0; t < s.values.rows(); ++t) {
      for (Eigen::Index i = 0; i < M; ++i) {
        if (!std::isnan(s.values(t, i))) {
          sum(i) += s.values(t, i);
          count(i) += 1.0;
        }
      }
    }
    age_sum += s.statics.age;
    types.insert(s.statics.admission_type);
  }
  feature_mean = Vector::Zero(M);
  for (Eigen::Index i = 0; i < M; ++i) {
    if (count(i) > 0) feature_mean(i) = sum(i) / count(i);
  }
  age_mean = age_sum / static_cast<double>(train.size());

  // second pass for the spread, centred to avoid cancellation
  Vector sq = Vector::Zero(M);
  double age_sq = 0.0;
  for (const RawStay& s : train) {
    for (Eigen::Index t = 0; t < s.values.rows(); ++t) {
      for (Eigen::Index i = 0; i < M; ++i) {
        if (!std::isnan(s.values(t, i))) {
          const double d = s.values(t, i) - feature_mean(i);
          sq(i) += d * d;
        }
      }
    }
    age_sq += (s.statics.age - age_mean) * (s.statics.age - age_mean);
  }
  feature_std = Vector::Constant(M, 1.0);
  for (Eigen::Index i = 0; i < M; ++i) {
    if (count(i) > 0) feature_std(i) = std::max(std::sqrt(sq(i) / count(i)), kMinStddev);
  }
  age_std = std::max(std::sqrt(age_sq / static_cast<double>(train.size())), kMinStddev);
  admission_types.assign(types.begin(), types.end());
  fitted_ = true;
}

void Normalizer::require_fitted() const {
  if (!fitted_) throw ContractViolation("Normalizer: apply called before fit");
}

Vector Normalizer::encode_statics(const StaticFeatures& s) const {
  require_fitted();
  Vector out = Vector::Zero(static_dim());
  out(0) = (s.age - age_mean) / age_std;
  out(1) = s.aids;
  out(2) = s.hematologic_malignancy;
  out(3) = s.metastatic_cancer;
  auto it = std::lower_bound(admission_types.begin(), admission_types.end(), s.admission_type);
  if (it != admission_types.end() && *it == s.admission_type) {
    out(4 + (it - admission_types.begin())) = 1.0;
  }
  return out;
}

PatientRecord Normalizer::apply(const RawStay& stay) const {
  require_fitted();
  if (stay.values.cols() != feature_mean.size()) {
    throw DataError("stay " + stay.stay_id + ": feature count differs from the fitted normalizer");
  }
  Matrix scaled = stay.values;
  for (Eigen::Index i = 0; i < scaled.cols(); ++i) {
    scaled.col(i) = (scaled.col(i).array() - feature_mean(i)) / feature_std(i);
  }
  PatientRecord r;
  r.stay_id = stay.stay_id;
  r.s = encode_statics(stay.statics);
  impute_and_mask(scaled, Vector::Zero(scaled.cols()), r.x, r.m);
  r.y = stay.label;
  return r;
}

std::vector<PatientRecord> Normalizer::apply(std::span<const RawStay> stays) const {
  std::vector<PatientRecord> out;
  out.reserve(stays.size());
  for (const RawStay& s : stays) out.push_back(apply(s));
  return out;
}

Matrix Normalizer::inverse_features(const Matrix& normalized) const {
  require_fitted();
  require(normalized.cols() == feature_mean.size(), "inverse_features: feature count mismatch");
  Matrix out = normalized;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    out.col(i) = out.col(i).array() * feature_std(i) + feature_mean(i);
  }
  return out;
}

double Normalizer::inverse_age(double normalized) const {
  require_fitted();
  return normalized * age_std + age_mean;
}

}  // namespace attdmm
