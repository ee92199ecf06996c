#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crowdlab/em.hpp"
#include "crowdlab/label_matrix.hpp"
#include "crowdlab/params.hpp"
#include "crowdlab/rng.hpp"
#include "crowdlab/rules.hpp"

namespace crowdlab {

struct BetaSpec {
  double alpha;
  double beta;
};

// Beta shape alpha that hits a target mean for a fixed beta: mean = a/(a+b).
inline double beta_alpha_for_mean(double mean, double beta) {
  if (!(mean > 0.0 && mean < 1.0))
    throw std::invalid_argument("beta_alpha_for_mean: mean must be in (0,1)");
  if (!(beta > 0.0)) throw std::invalid_argument("beta_alpha_for_mean: beta must be positive");
  return beta * mean / (1.0 - mean);
}

/// Synthetic crowd specification. Accuracies come either from explicit
/// vectors or fresh Beta draws; gold labels are i.i.d. Bernoulli(prior) or
/// exactly balanced (ceil(N/2) positive, order shuffled). Output is fully
/// determined by `seed`.
struct CrowdGenerator {
  ModelKind model = ModelKind::OneCoin;
  int num_workers = 0;
  int num_items = 0;
  double prior = 0.5;
  bool balanced_classes = false;
  std::optional<std::vector<double>> accuracies;        // one-coin, explicit
  std::optional<BetaSpec> accuracy_beta;                // drawn per generation
  std::optional<std::vector<double>> sensitivity;       // Dawid-Skene, explicit
  std::optional<std::vector<double>> specificity;
  SamplingDesign sampling = SamplingDesign::constant(1.0);
  std::uint64_t seed = 0;
};

struct GeneratedCrowd {
  LabelMatrix labels;
  GoldLabels gold;
  std::vector<double> correct_prob_pos;  // raw per-worker correctness prob on +1 items
  std::vector<double> correct_prob_neg;  // ... on -1 items (== pos for one-coin)
  DawidSkeneParams params;               // clamped true parameters
  std::optional<OneCoinParams> one_coin;
};

inline GeneratedCrowd generate(const CrowdGenerator& gen) {
  if (gen.num_workers < 1 || gen.num_items < 1)
    throw std::invalid_argument("generate: dimensions must be positive");
  const auto m = static_cast<std::size_t>(gen.num_workers);
  rng::Engine eng(gen.seed);

  // Worker correctness probabilities, raw (simulation uses them unclamped).
  std::vector<double> wpos, wneg;
  if (gen.model == ModelKind::OneCoin) {
    if (gen.accuracies) {
      if (gen.accuracies->size() != m)
        throw std::invalid_argument("generate: accuracy vector length mismatch");
      wpos = *gen.accuracies;
    } else if (gen.accuracy_beta) {
      wpos.reserve(m);
      for (std::size_t i = 0; i < m; ++i)
        wpos.push_back(eng.beta(gen.accuracy_beta->alpha, gen.accuracy_beta->beta));
    } else {
      throw std::invalid_argument("generate: one-coin generator needs accuracies or a beta spec");
    }
    wneg = wpos;
  } else {
    if (gen.sensitivity && gen.specificity) {
      if (gen.sensitivity->size() != m || gen.specificity->size() != m)
        throw std::invalid_argument("generate: sensitivity/specificity length mismatch");
      wpos = *gen.sensitivity;
      wneg = *gen.specificity;
    } else if (gen.accuracy_beta) {
      wpos.reserve(m);
      wneg.reserve(m);
      for (std::size_t i = 0; i < m; ++i)
        wpos.push_back(eng.beta(gen.accuracy_beta->alpha, gen.accuracy_beta->beta));
      for (std::size_t i = 0; i < m; ++i)
        wneg.push_back(eng.beta(gen.accuracy_beta->alpha, gen.accuracy_beta->beta));
    } else {
      throw std::invalid_argument(
          "generate: Dawid-Skene generator needs explicit vectors or a beta spec");
    }
  }

  // Gold labels.
  std::vector<std::int8_t> gold(static_cast<std::size_t>(gen.num_items));
  if (gen.balanced_classes) {
    const std::size_t positives = (gold.size() + 1) / 2;
    for (std::size_t j = 0; j < gold.size(); ++j)
      gold[j] = j < positives ? std::int8_t{1} : std::int8_t{-1};
    eng.shuffle(gold);
  } else {
    for (auto& y : gold) y = eng.bernoulli(gen.prior) ? 1 : -1;
  }

  // Observation mask and label flips, worker-major order.
  std::vector<LabelMatrix::Entry> entries;
  for (int i = 0; i < gen.num_workers; ++i) {
    for (int j = 0; j < gen.num_items; ++j) {
      if (!eng.bernoulli(gen.sampling.prob(i, j))) continue;
      const double w = gold[j] > 0 ? wpos[i] : wneg[i];
      const std::int8_t label = eng.bernoulli(w) ? gold[j] : static_cast<std::int8_t>(-gold[j]);
      entries.push_back({i, j, label});
    }
  }

  GeneratedCrowd out{LabelMatrix(gen.num_workers, gen.num_items, std::move(entries)),
                     GoldLabels::full(gold),
                     wpos,
                     wneg,
                     DawidSkeneParams(wpos, wneg, gen.prior, gen.sampling),
                     std::nullopt};
  if (gen.model == ModelKind::OneCoin)
    out.one_coin = OneCoinParams(wpos, gen.prior, gen.sampling);
  return out;
}

/// Aggregation procedure identifier for the Monte-Carlo harness.
struct Method {
  enum class Kind { Mv, Wmv, OsWmv, IterWmv, EmMap, OracleMap, BoundOptimal };
  Kind kind = Kind::Mv;
  std::vector<double> weights;  // Wmv: explicit weights, shift 0
  EmOptions em;                 // EmMap
  ModelKind em_model = ModelKind::OneCoin;
  int iwmv_max_iter = 50;

  static Method mv() { return {}; }
  static Method wmv(std::vector<double> w) {
    Method m;
    m.kind = Kind::Wmv;
    m.weights = std::move(w);
    return m;
  }
  static Method oswmv() {
    Method m;
    m.kind = Kind::OsWmv;
    return m;
  }
  static Method iwmv(int max_iter = 50) {
    Method m;
    m.kind = Kind::IterWmv;
    m.iwmv_max_iter = max_iter;
    return m;
  }
  static Method em_map(EmOptions opts = {}, ModelKind model = ModelKind::OneCoin) {
    Method m;
    m.kind = Kind::EmMap;
    m.em = opts;
    m.em_model = model;
    return m;
  }
  static Method oracle_map() {
    Method m;
    m.kind = Kind::OracleMap;
    return m;
  }
  static Method bound_optimal() {
    Method m;
    m.kind = Kind::BoundOptimal;
    return m;
  }
};

/// Runs one aggregation method. Oracle methods need the generating truth.
inline Prediction run_method(const Method& method, const LabelMatrix& labels,
                             const GeneratedCrowd* truth = nullptr) {
  switch (method.kind) {
    case Method::Kind::Mv:
      return predict(majority_rule(labels.num_workers()), labels);
    case Method::Kind::Wmv:
      return predict(HyperplaneRule{method.weights, 0.0}, labels);
    case Method::Kind::OsWmv:
      return one_step_wmv(labels).prediction;
    case Method::Kind::IterWmv:
      return iterative_wmv(labels, method.iwmv_max_iter).prediction;
    case Method::Kind::EmMap:
      return em_map_predict(labels, method.em_model, method.em).prediction;
    case Method::Kind::OracleMap: {
      if (!truth) throw std::invalid_argument("oracle MAP needs true parameters");
      if (truth->one_coin) return predict(oracle_map_rule(*truth->one_coin), labels);
      // General Dawid-Skene truth: threshold the exact posterior.
      Posterior post = posterior_ds(labels, truth->params);
      Prediction pred;
      pred.labels.resize(labels.num_items());
      for (int j = 0; j < labels.num_items(); ++j) {
        pred.labels[j] = post.rho[j] >= 0.5 ? 1 : -1;
        if (labels.item_entries(j).empty()) pred.undetermined.push_back(j);
      }
      return pred;
    }
    case Method::Kind::BoundOptimal:
      if (!truth || !truth->one_coin)
        throw std::invalid_argument("bound-optimal rule needs one-coin true accuracies");
      return predict(bound_optimal_rule(truth->correct_prob_pos), labels);
  }
  throw std::logic_error("run_method: unknown method");
}

struct McEstimate {
  double mean = 0.0;
  double stderr_mean = 0.0;  // sample standard deviation / sqrt(reps)
  int reps = 0;
};

inline McEstimate summarize(const std::vector<double>& values) {
  McEstimate est;
  est.reps = static_cast<int>(values.size());
  if (values.size() < 2) throw std::invalid_argument("summarize: need at least two values");
  double sum = 0.0;
  for (double v : values) sum += v;
  est.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - est.mean) * (v - est.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  est.stderr_mean = sd / std::sqrt(static_cast<double>(values.size()));
  return est;
}

/// Mean and standard error of the method's error rate over `reps`
/// independent generations. Replication r uses the seed derived from
/// (master_seed, r), so results do not depend on evaluation order.
inline McEstimate mc_error_rate(const Method& method, const CrowdGenerator& gen, int reps,
                                std::uint64_t master_seed) {
  if (reps < 2) throw std::invalid_argument("mc_error_rate: need at least two replications");
  std::vector<double> errors(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    CrowdGenerator g = gen;
    g.seed = rng::derive_seed(master_seed, static_cast<std::uint64_t>(r));
    const GeneratedCrowd data = generate(g);
    const Prediction pred = run_method(method, data.labels, &data);
    errors[r] = error_rate(pred, data.gold);
  }
  return summarize(errors);
}

namespace detail {

// Enumerates worker outcomes {missing, z=+1, z=-1} for one item column,
// carrying the branch probability under each true class.
inline void enumerate_column(const HyperplaneRule& rule, const DawidSkeneParams& p, int item,
                             std::size_t worker, double score, double prob_pos, double prob_neg,
                             double& err_pos, double& err_neg) {
  if (prob_pos == 0.0 && prob_neg == 0.0) return;
  if (worker == rule.weights.size()) {
    const double s = score + rule.shift;
    if (s < 0.0)
      err_pos += prob_pos;  // predicted -1, wrong on the positive class
    else
      err_neg += prob_neg;  // predicted +1 (ties included), wrong on the negative class
    return;
  }
  const double q = p.sampling.prob(static_cast<int>(worker), item);
  const double v = rule.weights[worker];
  if (q < 1.0)
    enumerate_column(rule, p, item, worker + 1, score, prob_pos * (1.0 - q),
                     prob_neg * (1.0 - q), err_pos, err_neg);
  // z = +1: correct on the positive class, incorrect on the negative class.
  enumerate_column(rule, p, item, worker + 1, score + v, prob_pos * q * p.sensitivity[worker],
                   prob_neg * q * (1.0 - p.specificity[worker]), err_pos, err_neg);
  // z = -1.
  enumerate_column(rule, p, item, worker + 1, score - v,
                   prob_pos * q * (1.0 - p.sensitivity[worker]),
                   prob_neg * q * p.specificity[worker], err_pos, err_neg);
}

}  // namespace detail

inline constexpr int kMaxEnumerationWorkers = 12;

/// Exact per-item error probability P(y_hat_j != y_j) by enumerating all
/// worker outcomes of column `item`. Feasible for M <= 12.
inline double exact_column_error(const HyperplaneRule& rule, const DawidSkeneParams& p,
                                 int item) {
  if (rule.weights.size() != p.sensitivity.size())
    throw std::invalid_argument("exact_column_error: rule/parameter worker count mismatch");
  if (p.num_workers() > kMaxEnumerationWorkers)
    throw std::invalid_argument("exact_column_error: enumeration limited to M <= 12");
  double err_pos = 0.0, err_neg = 0.0;
  detail::enumerate_column(rule, p, item, 0, 0.0, 1.0, 1.0, err_pos, err_neg);
  return p.prior * err_pos + (1.0 - p.prior) * err_neg;
}

/// Exact mean error rate (1/N) sum_j P(y_hat_j != y_j). Collapses to a single
/// column when the sampling design is column-uniform.
inline double exact_mean_error(const HyperplaneRule& rule, const DawidSkeneParams& p) {
  if (p.sampling.columns_uniform()) return exact_column_error(rule, p, 0);
  double total = 0.0;
  const int n = p.sampling.num_columns();
  for (int j = 0; j < n; ++j) total += exact_column_error(rule, p, j);
  return total / static_cast<double>(n);
}

}  // namespace crowdlab
