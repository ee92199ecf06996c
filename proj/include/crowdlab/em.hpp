#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "crowdlab/label_matrix.hpp"
#include "crowdlab/params.hpp"
#include "crowdlab/rules.hpp"

namespace crowdlab {

/// Per-item posterior probability rho_j = P(y_j = +1 | Z, T, params).
struct Posterior {
  std::vector<double> rho;
};

struct EmOptions {
  int max_iter = 500;
  double tol = 1e-8;           // absolute change of the fit objective
  bool estimate_prior = true;
  double fixed_prior = 0.5;    // used when estimate_prior is false
  double smoothing = 0.5;      // pseudo-count added to both sides of each M-step ratio
  bool soft_init = false;      // initialize rho from vote fractions instead of hard MV labels
};

namespace detail {

// la_j = ln A_j and lb_j = ln B_j where A_j and B_j are the two class-joint
// terms of the per-item likelihood. rho_j = A_j / (A_j + B_j).
struct ItemLogTerms {
  double la;
  double lb;
};

inline ItemLogTerms item_log_terms(const LabelMatrix& labels, int item,
                                   const std::vector<double>& log_sens,
                                   const std::vector<double>& log_sens_c,
                                   const std::vector<double>& log_spec,
                                   const std::vector<double>& log_spec_c, double prior) {
  double la = std::log(prior);
  double lb = std::log1p(-prior);
  for (const auto& e : labels.item_entries(item)) {
    if (e.label > 0) {
      la += log_sens[e.worker];
      lb += log_spec_c[e.worker];
    } else {
      la += log_sens_c[e.worker];
      lb += log_spec[e.worker];
    }
  }
  return {la, lb};
}

inline double log_sum_exp(double a, double b) {
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct LogProbTables {
  std::vector<double> sens, sens_c, spec, spec_c;

  explicit LogProbTables(const DawidSkeneParams& p) {
    const std::size_t m = p.sensitivity.size();
    sens.resize(m);
    sens_c.resize(m);
    spec.resize(m);
    spec_c.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      sens[i] = std::log(p.sensitivity[i]);
      sens_c[i] = std::log1p(-p.sensitivity[i]);
      spec[i] = std::log(p.specificity[i]);
      spec_c[i] = std::log1p(-p.specificity[i]);
    }
  }
};

}  // namespace detail

/// Exact posterior under known Dawid-Skene parameters, computed in log space.
/// Items with no observations fall back to the prior.
inline Posterior posterior_ds(const LabelMatrix& labels, const DawidSkeneParams& p) {
  if (p.num_workers() != labels.num_workers())
    throw std::invalid_argument("posterior_ds: worker count mismatch");
  detail::LogProbTables t(p);
  Posterior post;
  post.rho.resize(labels.num_items());
  for (int j = 0; j < labels.num_items(); ++j) {
    auto [la, lb] = detail::item_log_terms(labels, j, t.sens, t.sens_c, t.spec, t.spec_c, p.prior);
    post.rho[j] = 1.0 / (1.0 + std::exp(lb - la));
  }
  return post;
}

/// Marginal log-likelihood sum_j ln(A_j + B_j) of the observed labels, with
/// the true labels summed out.
inline double log_likelihood(const LabelMatrix& labels, const DawidSkeneParams& p) {
  if (p.num_workers() != labels.num_workers())
    throw std::invalid_argument("log_likelihood: worker count mismatch");
  detail::LogProbTables t(p);
  double ll = 0.0;
  for (int j = 0; j < labels.num_items(); ++j) {
    auto [la, lb] = detail::item_log_terms(labels, j, t.sens, t.sens_c, t.spec, t.spec_c, p.prior);
    ll += detail::log_sum_exp(la, lb);
  }
  return ll;
}

struct EmResult {
  DawidSkeneParams params;
  std::optional<OneCoinParams> one_coin;  // set when fitted with ModelKind::OneCoin
  Posterior posterior;
  int iterations = 0;
  bool converged = false;
  double log_likelihood = 0.0;          // data log-likelihood at the final parameters
  std::vector<double> objective_trace;  // fit objective per iteration (non-decreasing)
};

/// EM fit of the Dawid-Skene or one-coin model, initialized from majority
/// voting. With smoothing s > 0 the fit objective is the log-likelihood plus
/// the pseudo-count penalty s * sum_i ln p(1-p) over the worker parameters;
/// that penalized objective is the quantity EM keeps non-decreasing, and the
/// stopping rule watches its change. At s = 0 it equals the plain
/// log-likelihood. Non-convergence within max_iter is reported via the flag.
inline EmResult em_fit(const LabelMatrix& labels, ModelKind model, const EmOptions& opts = {}) {
  if (opts.max_iter < 1) throw std::invalid_argument("em_fit: max_iter must be positive");
  if (!(opts.tol > 0)) throw std::invalid_argument("em_fit: tol must be positive");
  if (opts.smoothing < 0) throw std::invalid_argument("em_fit: smoothing must be nonnegative");

  const int m = labels.num_workers();
  const int n = labels.num_items();
  const double s = opts.smoothing;

  std::vector<double> rho(static_cast<std::size_t>(n), 0.5);
  if (opts.soft_init) {
    for (int j = 0; j < n; ++j) {
      auto column = labels.item_entries(j);
      if (column.empty()) continue;
      std::size_t pos = 0;
      for (const auto& e : column)
        if (e.label > 0) ++pos;
      rho[j] = static_cast<double>(pos) / static_cast<double>(column.size());
    }
  } else {
    Prediction mv = predict(majority_rule(m), labels);
    for (int j = 0; j < n; ++j) rho[j] = mv.labels[j] > 0 ? 1.0 : 0.0;
  }

  std::vector<double> sens(static_cast<std::size_t>(m)), spec(static_cast<std::size_t>(m));
  std::vector<double> onecoin_acc;
  if (model == ModelKind::OneCoin) onecoin_acc.resize(static_cast<std::size_t>(m));
  double prior = clamp_prob(opts.fixed_prior);

  EmResult result;
  double prev_objective = -std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    // M-step from the current responsibilities.
    for (int i = 0; i < m; ++i) {
      auto row = labels.worker_entries(i);
      double rho_obs = 0.0, pos_rho = 0.0, neg_rho_c = 0.0;
      for (const auto& e : row) {
        rho_obs += rho[e.item];
        if (e.label > 0)
          pos_rho += rho[e.item];
        else
          neg_rho_c += 1.0 - rho[e.item];
      }
      const double n_i = static_cast<double>(row.size());
      // Empty denominators (no smoothing, no mass) carry no information.
      auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.5; };
      if (model == ModelKind::OneCoin) {
        double w = clamp_prob(ratio(s + pos_rho + neg_rho_c, 2.0 * s + n_i));
        onecoin_acc[i] = w;
        sens[i] = w;
        spec[i] = w;
      } else {
        sens[i] = clamp_prob(ratio(s + pos_rho, 2.0 * s + rho_obs));
        spec[i] = clamp_prob(ratio(s + neg_rho_c, 2.0 * s + (n_i - rho_obs)));
      }
    }
    if (opts.estimate_prior) {
      double mass = 0.0;
      for (double r : rho) mass += r;
      prior = clamp_prob(mass / static_cast<double>(n));
    }

    // E-step with the fresh parameters, accumulating the log-likelihood.
    std::vector<double> log_sens(static_cast<std::size_t>(m)), log_sens_c(static_cast<std::size_t>(m)),
        log_spec(static_cast<std::size_t>(m)), log_spec_c(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      log_sens[i] = std::log(sens[i]);
      log_sens_c[i] = std::log1p(-sens[i]);
      log_spec[i] = std::log(spec[i]);
      log_spec_c[i] = std::log1p(-spec[i]);
    }
    double ll = 0.0;
    for (int j = 0; j < n; ++j) {
      auto [la, lb] =
          detail::item_log_terms(labels, j, log_sens, log_sens_c, log_spec, log_spec_c, prior);
      rho[j] = 1.0 / (1.0 + std::exp(lb - la));
      ll += detail::log_sum_exp(la, lb);
    }

    double penalty = 0.0;
    if (s > 0) {
      for (int i = 0; i < m; ++i) {
        if (model == ModelKind::OneCoin)
          penalty += log_sens[i] + log_sens_c[i];
        else
          penalty += log_sens[i] + log_sens_c[i] + log_spec[i] + log_spec_c[i];
      }
    }
    const double objective = ll + s * penalty;
    result.objective_trace.push_back(objective);
    result.iterations = iter;
    result.log_likelihood = ll;
    if (iter > 1 && std::abs(objective - prev_objective) < opts.tol) {
      result.converged = true;
      break;
    }
    prev_objective = objective;
  }

  // Package the fitted parameters with the empirical per-worker labeling rate.
  std::vector<double> q_hat(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double q = static_cast<double>(labels.worker_entries(i).size()) / static_cast<double>(n);
    q_hat[i] = std::max(q, 1e-9);  // a worker with no labels still needs q in (0,1]
  }
  SamplingDesign sampling = SamplingDesign::per_worker(std::move(q_hat));
  result.params = DawidSkeneParams(std::move(sens), std::move(spec), prior, sampling);
  if (model == ModelKind::OneCoin)
    result.one_coin = OneCoinParams(std::move(onecoin_acc), prior, std::move(sampling));
  result.posterior.rho = std::move(rho);
  return result;
}

struct EmMapResult {
  Prediction prediction;
  EmResult fit;
};

/// EM-MAP rule: fit, then threshold the posterior at 1/2 (rho = 1/2 -> +1,
/// matching the hyperplane tie convention).
inline EmMapResult em_map_predict(const LabelMatrix& labels, ModelKind model,
                                  const EmOptions& opts = {}) {
  EmMapResult out;
  out.fit = em_fit(labels, model, opts);
  out.prediction.labels.resize(labels.num_items());
  for (int j = 0; j < labels.num_items(); ++j) {
    out.prediction.labels[j] = out.fit.posterior.rho[j] >= 0.5 ? 1 : -1;
    if (labels.item_entries(j).empty()) out.prediction.undetermined.push_back(j);
  }
  return out;
}

}  // namespace crowdlab
