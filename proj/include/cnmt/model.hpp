#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cnmt/error.hpp"

namespace cnmt {

/// Linear execution-time plane of one device running one model:
///   t = alpha_n * n + alpha_m * m + beta   [ms]
/// All coefficients are non-negative.
struct DeviceProfile {
  double alpha_n = 0.0;  ///< ms per input token
  double alpha_m = 0.0;  ///< ms per output token
  double beta = 0.0;     ///< ms
  std::string device_id;

  DeviceProfile() = default;
  DeviceProfile(double alpha_n, double alpha_m, double beta, std::string device_id = {});

  bool operator==(const DeviceProfile&) const = default;
};

/// Output length as a linear function of input length for one language pair.
struct LengthModel {
  double gamma = 1.0;  ///< dimensionless slope, > 0
  double delta = 0.0;  ///< tokens
  std::string language_pair;

  LengthModel() = default;
  LengthModel(double gamma, double delta, std::string language_pair = {});

  bool operator==(const LengthModel&) const = default;
};

struct LatencySample {
  int n = 1;
  int m = 1;
  double t = 0.0;  ///< ms
};

struct LengthPair {
  int n = 1;
  int m_real = 1;

  bool operator==(const LengthPair&) const = default;
};

struct FitReport {
  double r2 = 0.0;
  double mse = 0.0;
  std::size_t sample_count = 0;
};

struct FilterRules {
  int min_len = 1;
  int max_len = 100;
  double max_ratio = 2.0;

  /// Throws std::invalid_argument unless min_len >= 1, max_len > min_len
  /// and max_ratio > 1.
  void validate() const;
};

struct LatencyFit {
  DeviceProfile profile;
  FitReport report;
};

struct LengthFit {
  LengthModel model;
  FitReport report;
};

inline double exec_time(const DeviceProfile& p, double n, double m) {
  return p.alpha_n * n + p.alpha_m * m + p.beta;
}

/// Vectorised form; evaluates coefficient-wise over equally sized arrays.
template <typename DerivedN, typename DerivedM>
auto exec_time(const DeviceProfile& p, const Eigen::ArrayBase<DerivedN>& n,
               const Eigen::ArrayBase<DerivedM>& m) {
  using Scalar = typename DerivedN::Scalar;
  return (Scalar(p.alpha_n) * n + Scalar(p.alpha_m) * m.template cast<Scalar>()) + Scalar(p.beta);
}

/// gamma * n + delta, never below one token. Not rounded.
inline double predict_len(const LengthModel& lm, double n) {
  const double m = lm.gamma * n + lm.delta;
  return m < 1.0 ? 1.0 : m;
}

/// R^2 and MSE of a prediction. Throws DegenerateDesign on empty or
/// mismatched input, or when `actual` has zero variance.
template <typename DerivedP, typename DerivedA>
FitReport fit_scores(const Eigen::DenseBase<DerivedP>& predicted,
                     const Eigen::DenseBase<DerivedA>& actual) {
  if (predicted.size() != actual.size() || actual.size() == 0) {
    throw DegenerateDesign("fit_scores: inputs must have equal nonzero length");
  }
  const auto a = actual.derived().array().template cast<double>();
  const auto p = predicted.derived().array().template cast<double>();
  const double ss_res = (a - p).square().sum();
  const double ss_tot = (a - a.mean()).square().sum();
  if (ss_tot == 0.0) {
    throw DegenerateDesign("fit_scores: actual values have zero variance");
  }
  const auto count = static_cast<std::size_t>(actual.size());
  return FitReport{1.0 - ss_res / ss_tot, ss_res / static_cast<double>(count), count};
}

FitReport fit_scores(std::span<const double> predicted, std::span<const double> actual);

/// Least-squares fit of t ~ alpha_n*n + alpha_m*m + beta. Negative
/// coefficients are pinned to zero and the rest refit. Scores are in-sample.
LatencyFit fit_latency(std::span<const LatencySample> samples, std::string device_id = {});

/// Drops pairs outside [min_len, max_len] on either side, or whose length
/// ratio exceeds max_ratio. Order is preserved.
std::vector<LengthPair> prefilter(std::span<const LengthPair> pairs, const FilterRules& rules);

/// prefilter, then least-squares fit of m_real ~ gamma*n + delta.
LengthFit fit_length(std::span<const LengthPair> pairs, const FilterRules& rules,
                     std::string language_pair = {});

}  // namespace cnmt
