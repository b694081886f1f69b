#include "cnmt/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "cnmt/least_squares.hpp"

namespace cnmt {

DeviceProfile::DeviceProfile(double alpha_n, double alpha_m, double beta, std::string device_id)
    : alpha_n(alpha_n), alpha_m(alpha_m), beta(beta), device_id(std::move(device_id)) {
  if (!(alpha_n >= 0.0 && alpha_m >= 0.0 && beta >= 0.0)) {
    throw std::invalid_argument("DeviceProfile: coefficients must be non-negative");
  }
}

LengthModel::LengthModel(double gamma, double delta, std::string language_pair)
    : gamma(gamma), delta(delta), language_pair(std::move(language_pair)) {
  if (!(gamma > 0.0)) throw std::invalid_argument("LengthModel: gamma must be positive");
}

void FilterRules::validate() const {
  if (min_len < 1) throw std::invalid_argument("FilterRules: min_len must be >= 1");
  if (max_len <= min_len) throw std::invalid_argument("FilterRules: max_len must exceed min_len");
  if (!(max_ratio > 1.0)) throw std::invalid_argument("FilterRules: max_ratio must exceed 1");
}

FitReport fit_scores(std::span<const double> predicted, std::span<const double> actual) {
  using Map = Eigen::Map<const Eigen::ArrayXd>;
  return fit_scores(Map(predicted.data(), static_cast<Eigen::Index>(predicted.size())),
                    Map(actual.data(), static_cast<Eigen::Index>(actual.size())));
}

namespace {

// In-sample scores for a fit. A constant target fitted exactly is a perfect
// fit rather than a degenerate one.
template <typename DerivedP, typename DerivedA>
FitReport training_scores(const Eigen::DenseBase<DerivedP>& predicted,
                          const Eigen::DenseBase<DerivedA>& actual) {
  const auto a = actual.derived().array();
  if ((a == a(0)).all()) {
    const double mse = (a - predicted.derived().array()).square().mean();
    return FitReport{mse == 0.0 ? 1.0 : 0.0, mse, static_cast<std::size_t>(a.size())};
  }
  return fit_scores(predicted, actual);
}

}  // namespace

LatencyFit fit_latency(std::span<const LatencySample> samples, std::string device_id) {
  if (samples.size() < 3) {
    throw DegenerateDesign("fit_latency: at least 3 samples are required");
  }
  const auto rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd X(rows, 3);
  Eigen::VectorXd t(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    X(i, 0) = s.n;
    X(i, 1) = s.m;
    X(i, 2) = 1.0;
    t(i) = s.t;
  }

  const Eigen::VectorXd coef = clamped_least_squares(X, t);
  const Eigen::VectorXd fitted = X * coef;
  return LatencyFit{DeviceProfile(coef(0), coef(1), coef(2), std::move(device_id)),
                    training_scores(fitted, t)};
}

std::vector<LengthPair> prefilter(std::span<const LengthPair> pairs, const FilterRules& rules) {
  std::vector<LengthPair> kept;
  kept.reserve(pairs.size());
  const auto in_bounds = [&](int len) { return len >= rules.min_len && len <= rules.max_len; };
  for (const auto& p : pairs) {
    if (!in_bounds(p.n) || !in_bounds(p.m_real)) continue;
    const double hi = std::max(p.n, p.m_real);
    const double lo = std::min(p.n, p.m_real);
    if (hi / lo > rules.max_ratio) continue;
    kept.push_back(p);
  }
  return kept;
}

LengthFit fit_length(std::span<const LengthPair> pairs, const FilterRules& rules,
                     std::string language_pair) {
  rules.validate();
  const auto kept = prefilter(pairs, rules);
  if (kept.empty()) throw AllFiltered("fit_length: pre-filtering removed every pair");
  if (kept.size() < 2) throw DegenerateDesign("fit_length: fewer than 2 pairs after filtering");

  const auto rows = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd X(rows, 2);
  Eigen::VectorXd m(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    X(i, 0) = kept[static_cast<std::size_t>(i)].n;
    X(i, 1) = 1.0;
    m(i) = kept[static_cast<std::size_t>(i)].m_real;
  }
  if ((X.col(0).array() == X(0, 0)).all()) {
    throw DegenerateDesign("fit_length: all input lengths are identical");
  }

  const Eigen::VectorXd coef = least_squares(X, m);
  if (!(coef(0) > 0.0)) {
    throw DegenerateDesign("fit_length: fitted slope is not positive");
  }
  const Eigen::VectorXd fitted = X * coef;
  return LengthFit{LengthModel(coef(0), coef(1), std::move(language_pair)),
                   training_scores(fitted, m)};
}

}  // namespace cnmt
