#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crowdlab {

// Worker probabilities and class priors are clamped strictly inside (0,1)
// so that log-odds weights stay finite.
inline constexpr double kProbClamp = 1e-6;

inline double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

// ln(p / (1 - p)) of the clamped probability.
inline double log_odds(double p) {
  p = clamp_prob(p);
  return std::log(p / (1.0 - p));
}

/// Per-entry observation probabilities q_ij = P(entry (i,j) is observed).
/// Three variants: one constant q, one probability per worker, or a full
/// M x N matrix. Every probability must lie in (0, 1].
class SamplingDesign {
 public:
  enum class Kind { Constant, PerWorker, Full };

  SamplingDesign() = default;  // constant q = 1

  static SamplingDesign constant(double q) {
    check(q);
    SamplingDesign d;
    d.kind_ = Kind::Constant;
    d.q_const_ = q;
    return d;
  }

  static SamplingDesign per_worker(std::vector<double> q) {
    if (q.empty()) throw std::invalid_argument("per-worker sampling vector is empty");
    for (double v : q) check(v);
    SamplingDesign d;
    d.kind_ = Kind::PerWorker;
    d.num_workers_ = static_cast<int>(q.size());
    d.q_ = std::move(q);
    return d;
  }

  // Row-major M x N matrix.
  static SamplingDesign full(int num_workers, int num_items, std::vector<double> q) {
    if (num_workers < 1 || num_items < 1)
      throw std::invalid_argument("full sampling design needs positive dimensions");
    if (q.size() != static_cast<std::size_t>(num_workers) * static_cast<std::size_t>(num_items))
      throw std::invalid_argument("full sampling design size mismatch");
    for (double v : q) check(v);
    SamplingDesign d;
    d.kind_ = Kind::Full;
    d.num_workers_ = num_workers;
    d.num_items_ = num_items;
    d.q_ = std::move(q);
    return d;
  }

  Kind kind() const { return kind_; }

  double prob(int worker, int item) const {
    switch (kind_) {
      case Kind::Constant: return q_const_;
      case Kind::PerWorker: return q_[static_cast<std::size_t>(worker)];
      case Kind::Full:
        return q_[static_cast<std::size_t>(worker) * num_items_ + item];
    }
    return q_const_;
  }

  // True when all item columns carry identical probabilities, in which case
  // per-column statistics collapse to a single representative column.
  bool columns_uniform() const { return kind_ != Kind::Full; }

  int num_columns() const { return kind_ == Kind::Full ? num_items_ : 1; }

  // Known for per-worker and full designs.
  std::optional<int> num_workers() const {
    if (kind_ == Kind::Constant) return std::nullopt;
    return num_workers_;
  }

 private:
  static void check(double q) {
    if (!(q > 0.0) || q > 1.0)
      throw std::invalid_argument("sampling probability must lie in (0, 1], got " +
                                  std::to_string(q));
  }

  Kind kind_ = Kind::Constant;
  double q_const_ = 1.0;
  std::vector<double> q_;
  int num_workers_ = 0;
  int num_items_ = 0;
};

namespace detail {
inline void check_sampling_workers(const SamplingDesign& s, std::size_t m, const char* what) {
  if (auto sm = s.num_workers(); sm && static_cast<std::size_t>(*sm) != m)
    throw std::invalid_argument(std::string(what) + ": sampling design worker count mismatch");
}
}  // namespace detail

/// Dawid-Skene worker model: per-worker sensitivity p_i+ (accuracy on
/// positive items) and specificity p_i- (accuracy on negative items),
/// class prior pi = P(y = +1), and a sampling design.
/// All probabilities are clamped into (0,1) at construction.
struct DawidSkeneParams {
  std::vector<double> sensitivity;
  std::vector<double> specificity;
  double prior = 0.5;
  SamplingDesign sampling;

  DawidSkeneParams() = default;

  DawidSkeneParams(std::vector<double> sens, std::vector<double> spec, double pri,
                   SamplingDesign smp)
      : sensitivity(std::move(sens)),
        specificity(std::move(spec)),
        prior(clamp_prob(pri)),
        sampling(std::move(smp)) {
    if (sensitivity.size() != specificity.size())
      throw std::invalid_argument("sensitivity/specificity length mismatch");
    if (sensitivity.empty()) throw std::invalid_argument("need at least one worker");
    detail::check_sampling_workers(sampling, sensitivity.size(), "DawidSkeneParams");
    for (double& p : sensitivity) p = clamp_prob(p);
    for (double& p : specificity) p = clamp_prob(p);
  }

  int num_workers() const { return static_cast<int>(sensitivity.size()); }
};

/// One-coin worker model: a single accuracy w_i per worker, identical on
/// both classes (p_i+ = p_i- = w_i).
struct OneCoinParams {
  std::vector<double> accuracy;
  double prior = 0.5;
  SamplingDesign sampling;

  OneCoinParams() = default;

  OneCoinParams(std::vector<double> acc, double pri, SamplingDesign smp)
      : accuracy(std::move(acc)), prior(clamp_prob(pri)), sampling(std::move(smp)) {
    if (accuracy.empty()) throw std::invalid_argument("need at least one worker");
    detail::check_sampling_workers(sampling, accuracy.size(), "OneCoinParams");
    for (double& p : accuracy) p = clamp_prob(p);
  }

  int num_workers() const { return static_cast<int>(accuracy.size()); }
};

inline DawidSkeneParams to_dawid_skene(const OneCoinParams& p) {
  return DawidSkeneParams(p.accuracy, p.accuracy, p.prior, p.sampling);
}

// Inverse of to_dawid_skene; only defined when both accuracy vectors agree.
inline std::optional<OneCoinParams> to_one_coin(const DawidSkeneParams& p) {
  if (p.sensitivity != p.specificity) return std::nullopt;
  return OneCoinParams(p.sensitivity, p.prior, p.sampling);
}

enum class ModelKind { OneCoin, DawidSkene };

}  // namespace crowdlab
