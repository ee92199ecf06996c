#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "crowdlab/label_matrix.hpp"
#include "crowdlab/params.hpp"
#include "crowdlab/rules.hpp"

namespace crowdlab {

/// Gaussian-tail-shaped factor exp(-x^2/2).
inline double phi(double x) { return std::exp(-0.5 * x * x); }

/// Bernoulli KL divergence D(x||y) = x ln(x/y) + (1-x) ln((1-x)/(1-y)).
/// Both arguments must lie strictly inside (0,1); callers clamp.
inline double kl_bernoulli(double x, double y) {
  if (!(x > 0.0 && x < 1.0) || !(y > 0.0 && y < 1.0))
    throw std::domain_error("kl_bernoulli: arguments must lie strictly inside (0,1)");
  return x * (std::log(x) - std::log(y)) +
         (1.0 - x) * (std::log1p(-x) - std::log1p(-y));
}

namespace detail {

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double linf_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

inline double checked_norm(const HyperplaneRule& rule, const char* what) {
  double norm = l2_norm(rule.weights);
  if (!(norm > 0.0)) throw std::invalid_argument(std::string(what) + ": rule weights are all zero");
  return norm;
}

inline void check_workers(const HyperplaneRule& rule, std::size_t m, const char* what) {
  if (rule.weights.size() != m)
    throw std::invalid_argument(std::string(what) + ": rule/parameter worker count mismatch");
}

}  // namespace detail

struct TStats {
  double t1;
  double t2;
};

/// Normalized worst/best expected rectified scores over all item columns:
///   eps_j+ = sum_i q_ij v_i (2 p_i+ - 1) + a,
///   eps_j- = sum_i q_ij v_i (2 p_i- - 1) - a,
///   t1 = min_j min(eps_j+, eps_j-) / ||v||_2,
///   t2 = max_j max(eps_j+, eps_j-) / ||v||_2.
inline TStats t_stats(const HyperplaneRule& rule, const DawidSkeneParams& p) {
  detail::check_workers(rule, p.sensitivity.size(), "t_stats");
  const double norm = detail::checked_norm(rule, "t_stats");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int j = 0; j < p.sampling.num_columns(); ++j) {
    double splus = 0.0, sminus = 0.0;
    for (int i = 0; i < p.num_workers(); ++i) {
      const double qv = p.sampling.prob(i, j) * rule.weights[i];
      splus += qv * (2.0 * p.sensitivity[i] - 1.0);
      sminus += qv * (2.0 * p.specificity[i] - 1.0);
    }
    const double eplus = splus + rule.shift;
    const double eminus = sminus - rule.shift;
    lo = std::min(lo, std::min(eplus, eminus));
    hi = std::max(hi, std::max(eplus, eminus));
  }
  return {lo / norm, hi / norm};
}

/// One-coin specialization:
///   t1' = min_j (sum_i q_ij v_i (2 w_i - 1) - |a|) / ||v||_2,
///   t2' = max_j (sum_i q_ij v_i (2 w_i - 1) + |a|) / ||v||_2.
inline TStats t_stats_onecoin(const HyperplaneRule& rule, const OneCoinParams& p) {
  detail::check_workers(rule, p.accuracy.size(), "t_stats_onecoin");
  const double norm = detail::checked_norm(rule, "t_stats_onecoin");
  const double abs_a = std::abs(rule.shift);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int j = 0; j < p.sampling.num_columns(); ++j) {
    double s = 0.0;
    for (int i = 0; i < p.num_workers(); ++i)
      s += p.sampling.prob(i, j) * rule.weights[i] * (2.0 * p.accuracy[i] - 1.0);
    lo = std::min(lo, s - abs_a);
    hi = std::max(hi, s + abs_a);
  }
  return {lo / norm, hi / norm};
}

struct DispersionStats {
  double c_h;     // ||v||_inf / ||v||_2
  double sigma2;  // normalized worst-column score variance bound
};

inline DispersionStats dispersion_stats(const HyperplaneRule& rule, const DawidSkeneParams& p) {
  detail::check_workers(rule, p.sensitivity.size(), "dispersion_stats");
  const double norm = detail::checked_norm(rule, "dispersion_stats");
  double sigma2 = 0.0;
  for (int j = 0; j < p.sampling.num_columns(); ++j) {
    double vplus = 0.0, vminus = 0.0;
    for (int i = 0; i < p.num_workers(); ++i) {
      const double q = p.sampling.prob(i, j);
      const double v2q = rule.weights[i] * rule.weights[i] * q;
      const double dplus = 2.0 * p.sensitivity[i] - 1.0;
      const double dminus = 2.0 * p.specificity[i] - 1.0;
      vplus += v2q * (1.0 - q * dplus * dplus);
      vminus += v2q * (1.0 - q * dminus * dminus);
    }
    sigma2 = std::max(sigma2, std::max(vplus, vminus));
  }
  return {detail::linf_norm(rule.weights) / norm, sigma2 / (norm * norm)};
}

/// Enlarged one-coin variance proxy: max_j sum_i v_i^2 q_ij / ||v||_2^2.
inline double sigma2_onecoin(const HyperplaneRule& rule, const SamplingDesign& sampling) {
  const double norm = detail::checked_norm(rule, "sigma2_onecoin");
  double best = 0.0;
  for (int j = 0; j < sampling.num_columns(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rule.weights.size(); ++i)
      s += rule.weights[i] * rule.weights[i] * sampling.prob(static_cast<int>(i), j);
    best = std::max(best, s);
  }
  return best / (norm * norm);
}

/// Mean-error-rate bound statistics and values for one rule under one
/// parameter set. Upper bounds exist iff t1 >= 0, the lower bound iff
/// t2 <= 0; combined_upper is the smaller of the two upper branches.
struct BoundReport {
  double t1 = 0.0;
  double t2 = 0.0;
  double c_h = 0.0;
  double sigma2 = 0.0;
  std::optional<double> hoeffding_upper;
  std::optional<double> bernstein_upper;
  std::optional<double> combined_upper;
  std::optional<double> combined_lower;
  bool t1_nonneg = false;
  bool t2_nonpos = false;
  bool estimated = false;  // true when built from estimated, not true, parameters
};

/// Mean error rate bounds for a hyperplane rule under the Dawid-Skene model:
/// upper  min{exp(-t1^2/2), exp(-t1^2 / (2(sigma2 + c_h t1/3)))}    if t1 >= 0,
/// lower  1 - min{exp(-t2^2/2), exp(-t2^2 / (2(sigma2 - c_h t2/3)))} if t2 <= 0.
/// The Bernstein branch is skipped where its denominator degenerates
/// (t = 0), leaving the vacuous Hoeffding value.
inline BoundReport mean_error_bounds(const HyperplaneRule& rule, const DawidSkeneParams& p) {
  const TStats t = t_stats(rule, p);
  const DispersionStats d = dispersion_stats(rule, p);
  BoundReport report;
  report.t1 = t.t1;
  report.t2 = t.t2;
  report.c_h = d.c_h;
  report.sigma2 = d.sigma2;
  report.t1_nonneg = t.t1 >= 0.0;
  report.t2_nonpos = t.t2 <= 0.0;
  if (report.t1_nonneg) {
    const double hoeffding = std::exp(-0.5 * t.t1 * t.t1);
    double bernstein = 1.0;
    if (t.t1 > 0.0)
      bernstein = std::exp(-t.t1 * t.t1 / (2.0 * (d.sigma2 + d.c_h * t.t1 / 3.0)));
    report.hoeffding_upper = hoeffding;
    report.bernstein_upper = bernstein;
    report.combined_upper = std::min(hoeffding, bernstein);
  }
  if (report.t2_nonpos) {
    double factor = std::exp(-0.5 * t.t2 * t.t2);
    if (t.t2 < 0.0)
      factor = std::min(factor,
                        std::exp(-t.t2 * t.t2 / (2.0 * (d.sigma2 - d.c_h * t.t2 / 3.0))));
    report.combined_lower = 1.0 - factor;
  }
  return report;
}

inline BoundReport mean_error_bounds(const HyperplaneRule& rule, const OneCoinParams& p) {
  return mean_error_bounds(rule, to_dawid_skene(p));
}

struct MvMeanBound {
  double value;
  bool is_upper;  // false: value is a lower bound (average accuracy below 1/2)
};

/// Closed-form majority-voting bound under the one-coin model with constant
/// sampling probability: exp(-2 M q^2 (wbar - 1/2)^2), an upper bound on the
/// mean error when wbar > 1/2 and one minus it a lower bound when wbar < 1/2.
/// At wbar = 1/2 the vacuous upper bound 1 is returned.
inline MvMeanBound mv_mean_bound(int num_workers, double q, double wbar) {
  if (num_workers < 1) throw std::invalid_argument("mv_mean_bound: need at least one worker");
  if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("mv_mean_bound: q must be in (0,1]");
  const double gap = wbar - 0.5;
  const double value = std::exp(-2.0 * num_workers * q * q * gap * gap);
  if (wbar > 0.5) return {value, true};
  if (wbar < 0.5) return {1.0 - value, false};
  return {1.0, true};
}

/// High-probability guarantee: a lower bound on P(error rate <= eps),
/// 1 - exp(-N D(eps || phi(t1))). Valid only when eps exceeds phi(t1).
inline double high_prob_bound(double eps, double t1, int num_items) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("high_prob_bound: eps must be in (0,1)");
  if (!(t1 >= 0.0)) throw std::domain_error("high_prob_bound: t1 must be nonnegative");
  if (num_items < 1) throw std::invalid_argument("high_prob_bound: need at least one item");
  const double ph = phi(t1);
  if (!(eps > ph)) throw std::domain_error("high_prob_bound: not applicable, eps <= phi(t1)");
  if (ph < std::numeric_limits<double>::min()) return 1.0;  // phi underflowed, divergence is infinite
  return 1.0 - std::exp(-static_cast<double>(num_items) * kl_bernoulli(eps, ph));
}

/// Smallest t1 >= 0 whose high-probability bound reaches 1 - delta, found by
/// bisection (the bound is monotone in t1 on its validity region).
inline double min_t1_for(double eps, double delta, int num_items) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("min_t1_for: eps must be in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("min_t1_for: delta must be in (0,1)");
  if (num_items < 1) throw std::invalid_argument("min_t1_for: need at least one item");
  const auto satisfied = [&](double t) {
    const double ph = phi(t);
    if (!(ph < eps)) return false;
    if (ph < std::numeric_limits<double>::min()) return true;
    return std::exp(-static_cast<double>(num_items) * kl_bernoulli(eps, ph)) <= delta;
  };
  double lo = std::sqrt(std::max(0.0, -2.0 * std::log(eps)));  // phi(lo) == eps, not yet valid
  double hi = std::max(lo, 1.0);
  while (!satisfied(hi)) {
    hi *= 2.0;
    if (hi > 1e3) throw std::runtime_error("min_t1_for: no feasible t1 (eps, delta, N)");
  }
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (satisfied(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

/// Average-accuracy threshold for the one-step WMV guarantee:
/// wbar >= 1/2 + 1/M + sqrt((M-1) ln 2 / (2 M^2)).
inline double oswmv_wbar_threshold(int num_workers) {
  if (num_workers < 2) throw std::invalid_argument("oswmv threshold: need at least two workers");
  const double m = static_cast<double>(num_workers);
  return 0.5 + 1.0 / m + std::sqrt((m - 1.0) * std::numbers::ln2 / (2.0 * m * m));
}

inline bool oswmv_condition(int num_workers, double wbar) {
  return wbar >= oswmv_wbar_threshold(num_workers);
}

/// Root-mean-square deviation of worker accuracies from random guessing:
/// sqrt((1/M) sum_i (w_i - 1/2)^2). Always <= 1/2.
inline double rho_bar(const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw std::invalid_argument("rho_bar: empty accuracy vector");
  double s = 0.0;
  for (double w : accuracies) s += (w - 0.5) * (w - 0.5);
  return std::sqrt(s / static_cast<double>(accuracies.size()));
}

// ---------------------------------------------------------------------------
// Parameter estimation against a reference labeling (plugin bounds).

namespace detail {

// Iterates reference-covered observations: f(entry, reference_label).
template <typename F>
inline void for_each_ref_entry(const LabelMatrix& labels, const Prediction& ref, int worker, F f) {
  for (const auto& e : labels.worker_entries(worker)) f(e, static_cast<int>(ref.labels[e.item]));
}

template <typename F>
inline void for_each_ref_entry(const LabelMatrix& labels, const GoldLabels& ref, int worker, F f) {
  for (const auto& e : labels.worker_entries(worker)) {
    if (auto y = ref.label(e.item)) f(e, *y);
  }
}

inline double positive_fraction(const Prediction& ref) {
  std::size_t pos = 0;
  for (auto l : ref.labels)
    if (l > 0) ++pos;
  return ref.labels.empty() ? 0.5 : static_cast<double>(pos) / static_cast<double>(ref.labels.size());
}

inline double positive_fraction(const GoldLabels& ref) {
  std::size_t pos = 0;
  for (auto [item, l] : ref.entries())
    if (l > 0) ++pos;
  return ref.empty() ? 0.5 : static_cast<double>(pos) / static_cast<double>(ref.size());
}

inline SamplingDesign empirical_sampling(const LabelMatrix& labels) {
  std::vector<double> q(static_cast<std::size_t>(labels.num_workers()));
  for (int i = 0; i < labels.num_workers(); ++i) {
    double rate = static_cast<double>(labels.worker_entries(i).size()) /
                  static_cast<double>(labels.num_items());
    q[i] = std::max(rate, 1e-9);
  }
  return SamplingDesign::per_worker(std::move(q));
}

}  // namespace detail

/// One-coin parameters estimated against a reference labeling: accuracy from
/// agreement fractions (1/2 when a worker has no reference-covered labels),
/// q_i from per-worker labeling rates, prior from the reference's positive
/// fraction.
template <typename Reference>
inline OneCoinParams estimate_one_coin_params(const LabelMatrix& labels, const Reference& ref) {
  std::vector<double> acc(static_cast<std::size_t>(labels.num_workers()), 0.5);
  for (int i = 0; i < labels.num_workers(); ++i) {
    std::size_t seen = 0, agree = 0;
    detail::for_each_ref_entry(labels, ref, i, [&](const LabelMatrix::Entry& e, int y) {
      ++seen;
      if (e.label == y) ++agree;
    });
    if (seen > 0) acc[i] = static_cast<double>(agree) / static_cast<double>(seen);
  }
  return OneCoinParams(std::move(acc), detail::positive_fraction(ref),
                       detail::empirical_sampling(labels));
}

/// Dawid-Skene parameters estimated against a reference labeling, with
/// per-class agreement fractions (1/2 where a class has no coverage).
template <typename Reference>
inline DawidSkeneParams estimate_dawid_skene_params(const LabelMatrix& labels,
                                                    const Reference& ref) {
  const auto m = static_cast<std::size_t>(labels.num_workers());
  std::vector<double> sens(m, 0.5), spec(m, 0.5);
  for (int i = 0; i < labels.num_workers(); ++i) {
    std::size_t pos_seen = 0, pos_agree = 0, neg_seen = 0, neg_agree = 0;
    detail::for_each_ref_entry(labels, ref, i, [&](const LabelMatrix::Entry& e, int y) {
      if (y > 0) {
        ++pos_seen;
        if (e.label > 0) ++pos_agree;
      } else {
        ++neg_seen;
        if (e.label < 0) ++neg_agree;
      }
    });
    if (pos_seen > 0) sens[i] = static_cast<double>(pos_agree) / static_cast<double>(pos_seen);
    if (neg_seen > 0) spec[i] = static_cast<double>(neg_agree) / static_cast<double>(neg_seen);
  }
  return DawidSkeneParams(std::move(sens), std::move(spec), detail::positive_fraction(ref),
                          detail::empirical_sampling(labels));
}

/// MAP-style hyperplane rule from Dawid-Skene parameters: the symmetric
/// log-odds slope 0.5 ln[(p+ p-) / ((1-p+)(1-p-))], which reduces to the
/// one-coin MAP weight exactly when p+ = p-.
inline HyperplaneRule map_rule_ds(const DawidSkeneParams& p) {
  HyperplaneRule rule;
  rule.weights.reserve(p.sensitivity.size());
  for (std::size_t i = 0; i < p.sensitivity.size(); ++i)
    rule.weights.push_back(0.5 * (log_odds(p.sensitivity[i]) + log_odds(p.specificity[i])));
  rule.shift = log_odds(p.prior);
  return rule;
}

/// Mean-error bound report of the oracle MAP rule at its own (true)
/// parameters.
inline BoundReport oracle_map_report(const OneCoinParams& p) {
  return mean_error_bounds(oracle_map_rule(p), to_dawid_skene(p));
}

/// Plugin bound: estimate worker parameters against the reference, build the
/// MAP rule from the estimates, and evaluate the mean-error bounds at those
/// same estimates. Not a guarantee, an estimate; flagged accordingly.
template <typename Reference>
inline BoundReport plugin_report(const LabelMatrix& labels, const Reference& ref,
                                 ModelKind model) {
  BoundReport report;
  if (model == ModelKind::OneCoin) {
    const OneCoinParams est = estimate_one_coin_params(labels, ref);
    report = mean_error_bounds(oracle_map_rule(est), to_dawid_skene(est));
  } else {
    const DawidSkeneParams est = estimate_dawid_skene_params(labels, ref);
    report = mean_error_bounds(map_rule_ds(est), est);
  }
  report.estimated = true;
  return report;
}

}  // namespace crowdlab
