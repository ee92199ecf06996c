#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "crowdlab/label_matrix.hpp"
#include "crowdlab/params.hpp"

namespace crowdlab {

/// A hyperplane labeling rule: y_hat_j = sign(sum_i v_i z_ij + a).
/// Score exactly 0 resolves to +1.
struct HyperplaneRule {
  std::vector<double> weights;  // v
  double shift = 0.0;           // a
};

inline Prediction predict(const HyperplaneRule& rule, const LabelMatrix& labels) {
  if (static_cast<int>(rule.weights.size()) != labels.num_workers())
    throw std::invalid_argument("predict: rule has " + std::to_string(rule.weights.size()) +
                                " weights but matrix has " +
                                std::to_string(labels.num_workers()) + " workers");
  Prediction out;
  out.labels.resize(labels.num_items());
  for (int j = 0; j < labels.num_items(); ++j) {
    auto column = labels.item_entries(j);
    double score = rule.shift;
    for (const auto& e : column) score += rule.weights[e.worker] * e.label;
    out.labels[j] = score < 0 ? -1 : 1;
    if (column.empty()) out.undetermined.push_back(j);
  }
  return out;
}

/// Majority voting: unit weights, zero shift.
inline HyperplaneRule majority_rule(int num_workers) {
  if (num_workers < 1) throw std::invalid_argument("majority_rule: need at least one worker");
  return {std::vector<double>(static_cast<std::size_t>(num_workers), 1.0), 0.0};
}

/// Bayes-optimal rule under the one-coin model with known parameters:
/// v_i = ln(w_i/(1-w_i)), a = ln(pi/(1-pi)).
inline HyperplaneRule oracle_map_rule(const OneCoinParams& p) {
  HyperplaneRule rule;
  rule.weights.reserve(p.accuracy.size());
  for (double w : p.accuracy) rule.weights.push_back(log_odds(w));
  rule.shift = log_odds(p.prior);
  return rule;
}

/// Maximizer of the mean-error upper bound's exponent over hyperplane rules:
/// v_i = 2 w_i - 1, a = 0. Spammers (w = 1/2) get zero weight, adversarial
/// workers negative weight.
inline HyperplaneRule bound_optimal_rule(const std::vector<double>& accuracies) {
  HyperplaneRule rule;
  rule.weights.reserve(accuracies.size());
  for (double w : accuracies) rule.weights.push_back(2.0 * w - 1.0);
  rule.shift = 0.0;
  return rule;
}

/// Per-worker agreement fraction with a reference labeling. Workers with no
/// observations default to 1/2.
inline std::vector<double> estimate_accuracies(const LabelMatrix& labels,
                                               const Prediction& reference) {
  if (reference.labels.size() != static_cast<std::size_t>(labels.num_items()))
    throw std::invalid_argument("estimate_accuracies: reference length mismatch");
  std::vector<double> acc(static_cast<std::size_t>(labels.num_workers()), 0.5);
  for (int i = 0; i < labels.num_workers(); ++i) {
    auto row = labels.worker_entries(i);
    if (row.empty()) continue;
    std::size_t agree = 0;
    for (const auto& e : row)
      if (e.label == reference.labels[e.item]) ++agree;
    acc[i] = static_cast<double>(agree) / static_cast<double>(row.size());
  }
  return acc;
}

struct OneStepWmvResult {
  Prediction prediction;
  HyperplaneRule rule;
};

/// One-step weighted majority voting: majority vote, estimate worker
/// accuracies against it, then one weighted vote with v_i = 2 w_hat_i - 1.
inline OneStepWmvResult one_step_wmv(const LabelMatrix& labels) {
  Prediction mv = predict(majority_rule(labels.num_workers()), labels);
  HyperplaneRule rule = bound_optimal_rule(estimate_accuracies(labels, mv));
  Prediction pred = predict(rule, labels);
  return {std::move(pred), std::move(rule)};
}

struct IterativeWmvResult {
  Prediction prediction;
  HyperplaneRule rule;
  int iterations = 0;
  bool converged = false;
};

/// Repeats the reweight-and-vote step until the predicted label vector is an
/// exact fixed point or max_iter passes are done. Cycling sequences stop at
/// max_iter with converged = false.
inline IterativeWmvResult iterative_wmv(const LabelMatrix& labels, int max_iter) {
  if (max_iter < 1) throw std::invalid_argument("iterative_wmv: max_iter must be positive");
  IterativeWmvResult result;
  Prediction current = predict(majority_rule(labels.num_workers()), labels);
  while (result.iterations < max_iter) {
    ++result.iterations;
    result.rule = bound_optimal_rule(estimate_accuracies(labels, current));
    Prediction next = predict(result.rule, labels);
    bool fixed = next.labels == current.labels;
    current = std::move(next);
    if (fixed) {
      result.converged = true;
      break;
    }
  }
  result.prediction = std::move(current);
  return result;
}

}  // namespace crowdlab
