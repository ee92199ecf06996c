#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "crowdlab/bounds.hpp"
#include "crowdlab/em.hpp"
#include "crowdlab/format.hpp"
#include "crowdlab/montecarlo.hpp"

namespace crowdlab {

inline std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0)) throw std::invalid_argument("make_grid: step must be positive");
  std::vector<double> grid;
  for (double x = lo; x <= hi + 1e-12; x += step) grid.push_back(x);
  return grid;
}

// One worker pool drawn from Beta(alpha(mean), b), redrawn until its sample
// mean lands within `tol` of the design point. The accuracy-sweep protocols
// fix the pool per sweep point and regenerate only the data, so the sweep
// axis reflects the realized crowd rather than a random draw around it.
inline std::vector<double> draw_beta_pool(int num_workers, double mean, double b,
                                          std::uint64_t seed, double tol = 0.02) {
  rng::Engine eng(seed);
  const double alpha = beta_alpha_for_mean(mean, b);
  std::vector<double> pool(static_cast<std::size_t>(num_workers));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double sum = 0.0;
    for (auto& w : pool) {
      w = eng.beta(alpha, b);
      sum += w;
    }
    if (std::abs(sum / num_workers - mean) <= tol) break;
  }
  return pool;
}

namespace detail {

inline void put_csv_cell(std::ostream& os, std::optional<double> v) {
  if (v) os << format_double(*v);
}

// Mean of the defined entries; empty when none are.
inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Accuracy-sweep simulation: MV vs EM-MAP vs oracle MAP with the MAP plugin
// bound, Beta-distributed worker accuracies.

struct AccuracySweepConfig {
  int workers = 11;
  int items = 300;
  double q = 0.8;
  double prior = 0.5;
  double beta_b = 2.0;
  bool balanced = true;
  std::vector<double> wbar_grid = make_grid(0.06, 0.94, 0.02);
  int reps = 100;
  std::uint64_t seed = 1;
  EmOptions em;
};

struct AccuracySweepRow {
  double wbar;
  McEstimate mv, em_map, oracle_map;
  // Plugin bound from EM estimates: the upper bound when wbar > 1/2, one
  // minus the upper factor (the flipped-mode lower bound) when wbar < 1/2.
  std::optional<double> plugin_bound;
};

inline std::vector<AccuracySweepRow> experiment_fig_a(const AccuracySweepConfig& cfg) {
  std::vector<AccuracySweepRow> table;
  table.reserve(cfg.wbar_grid.size());
  for (std::size_t pt = 0; pt < cfg.wbar_grid.size(); ++pt) {
    const double wbar = cfg.wbar_grid[pt];
    const std::uint64_t point_seed = rng::derive_seed(cfg.seed, pt);
    CrowdGenerator gen;
    gen.model = ModelKind::OneCoin;
    gen.num_workers = cfg.workers;
    gen.num_items = cfg.items;
    gen.prior = cfg.prior;
    gen.balanced_classes = cfg.balanced;
    gen.accuracies =
        draw_beta_pool(cfg.workers, wbar, cfg.beta_b, rng::derive_seed(point_seed, ~0ull));
    gen.sampling = SamplingDesign::constant(cfg.q);

    std::vector<double> err_mv(cfg.reps), err_em(cfg.reps), err_oracle(cfg.reps);
    std::vector<std::optional<double>> plugins(cfg.reps);
    for (int r = 0; r < cfg.reps; ++r) {
      gen.seed = rng::derive_seed(point_seed, static_cast<std::uint64_t>(r));
      const GeneratedCrowd data = generate(gen);
      err_mv[r] = error_rate(predict(majority_rule(cfg.workers), data.labels), data.gold);
      const EmMapResult em = em_map_predict(data.labels, ModelKind::OneCoin, cfg.em);
      err_em[r] = error_rate(em.prediction, data.gold);
      err_oracle[r] =
          error_rate(predict(oracle_map_rule(*data.one_coin), data.labels), data.gold);

      BoundReport report = oracle_map_report(*em.fit.one_coin);
      report.estimated = true;
      if (report.combined_upper)
        plugins[r] = wbar > 0.5 ? *report.combined_upper : 1.0 - *report.combined_upper;
    }
    AccuracySweepRow row{wbar, summarize(err_mv), summarize(err_em), summarize(err_oracle),
                         detail::mean_defined(plugins)};
    table.push_back(row);
  }
  return table;
}

inline void write_fig_a_csv(std::ostream& os, const std::vector<AccuracySweepRow>& table) {
  os << "wbar,err_mv,stderr_mv,err_em_map,stderr_em_map,err_oracle_map,stderr_oracle_map,"
        "plugin_bound\n";
  for (const auto& row : table) {
    os << format_double(row.wbar) << ',' << format_double(row.mv.mean) << ','
       << format_double(row.mv.stderr_mean) << ',' << format_double(row.em_map.mean) << ','
       << format_double(row.em_map.stderr_mean) << ',' << format_double(row.oracle_map.mean)
       << ',' << format_double(row.oracle_map.stderr_mean) << ',';
    detail::put_csv_cell(os, row.plugin_bound);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// One-step WMV vs MV cross: sweep starts exactly at the osWMV threshold.

struct OsWmvSweepConfig {
  int workers = 15;
  int items = 3000;
  double q = 1.0;
  double prior = 0.5;
  double beta_b = 2.0;
  bool balanced = true;
  double wbar_max = 0.95;
  double wbar_step = 0.02;
  int reps = 50;
  std::uint64_t seed = 1;
};

struct OsWmvSweepRow {
  double wbar;
  McEstimate mv, oswmv;
  double bound_mv;              // closed-form MV upper bound at the target wbar
  double bound_oswmv_mc;        // Monte-Carlo proxy: mean + 2 stderr
};

inline std::vector<OsWmvSweepRow> experiment_fig_c(const OsWmvSweepConfig& cfg) {
  const double start = oswmv_wbar_threshold(cfg.workers);
  std::vector<double> grid;
  for (double w = start; w <= cfg.wbar_max + 1e-12; w += cfg.wbar_step) grid.push_back(w);

  std::vector<OsWmvSweepRow> table;
  table.reserve(grid.size());
  for (std::size_t pt = 0; pt < grid.size(); ++pt) {
    const double wbar = grid[pt];
    const std::uint64_t point_seed = rng::derive_seed(cfg.seed, pt);
    CrowdGenerator gen;
    gen.model = ModelKind::OneCoin;
    gen.num_workers = cfg.workers;
    gen.num_items = cfg.items;
    gen.prior = cfg.prior;
    gen.balanced_classes = cfg.balanced;
    gen.accuracies =
        draw_beta_pool(cfg.workers, wbar, cfg.beta_b, rng::derive_seed(point_seed, ~0ull));
    gen.sampling = SamplingDesign::constant(cfg.q);
    std::vector<double> err_mv(cfg.reps), err_oswmv(cfg.reps);
    for (int r = 0; r < cfg.reps; ++r) {
      gen.seed = rng::derive_seed(point_seed, static_cast<std::uint64_t>(r));
      const GeneratedCrowd data = generate(gen);
      err_mv[r] = error_rate(predict(majority_rule(cfg.workers), data.labels), data.gold);
      err_oswmv[r] = error_rate(one_step_wmv(data.labels).prediction, data.gold);
    }
    OsWmvSweepRow row{wbar, summarize(err_mv), summarize(err_oswmv),
                      mv_mean_bound(cfg.workers, cfg.q, wbar).value, 0.0};
    row.bound_oswmv_mc = row.oswmv.mean + 2.0 * row.oswmv.stderr_mean;
    table.push_back(row);
  }
  return table;
}

inline void write_fig_c_csv(std::ostream& os, const std::vector<OsWmvSweepRow>& table) {
  os << "wbar,err_mv,stderr_mv,err_oswmv,stderr_oswmv,bound_mv,bound_oswmv_mc\n";
  for (const auto& row : table) {
    os << format_double(row.wbar) << ',' << format_double(row.mv.mean) << ','
       << format_double(row.mv.stderr_mean) << ',' << format_double(row.oswmv.mean) << ','
       << format_double(row.oswmv.stderr_mean) << ',' << format_double(row.bound_mv) << ','
       << format_double(row.bound_oswmv_mc) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Subsampling sweep over a real (or real-shaped) dataset: thin the observed
// labels with Bernoulli(x), run MV and EM-MAP, and compute plugin bounds from
// accuracies estimated against the ground truth.

struct SubsampleConfig {
  std::vector<double> x_grid = make_grid(0.05, 1.0, 0.05);
  int reps = 40;
  std::uint64_t seed = 1;
  EmOptions em;
};

struct SubsampleRow {
  double x;
  McEstimate mv, em_map;
  std::optional<double> bound_mv;   // plugin MV upper bound, averaged
  std::optional<double> bound_map;  // plugin MAP upper bound, averaged
};

inline LabelMatrix thin_labels(const LabelMatrix& labels, double keep_prob, rng::Engine& eng) {
  std::vector<LabelMatrix::Entry> kept;
  for (const auto& e : labels.entries())
    if (eng.bernoulli(keep_prob)) kept.push_back(e);
  return LabelMatrix(labels.num_workers(), labels.num_items(), std::move(kept));
}

inline std::vector<SubsampleRow> experiment_subsample(const LabelMatrix& labels,
                                                      const GoldLabels& gold,
                                                      const SubsampleConfig& cfg) {
  for (double x : cfg.x_grid)
    if (!(x > 0.0) || x > 1.0)
      throw std::invalid_argument("experiment_subsample: x values must lie in (0,1]");
  if (gold.empty()) throw std::invalid_argument("experiment_subsample: empty gold set");

  std::vector<SubsampleRow> table;
  table.reserve(cfg.x_grid.size());
  for (std::size_t xi = 0; xi < cfg.x_grid.size(); ++xi) {
    const double x = cfg.x_grid[xi];
    const std::uint64_t x_seed = rng::derive_seed(cfg.seed, xi);
    std::vector<double> err_mv(cfg.reps), err_em(cfg.reps);
    std::vector<std::optional<double>> bound_mv(cfg.reps), bound_map(cfg.reps);
    for (int r = 0; r < cfg.reps; ++r) {
      rng::Engine eng(rng::derive_seed(x_seed, static_cast<std::uint64_t>(r)));
      const LabelMatrix thinned = thin_labels(labels, x, eng);
      err_mv[r] = error_rate(predict(majority_rule(labels.num_workers()), thinned), gold);
      err_em[r] = error_rate(em_map_predict(thinned, ModelKind::OneCoin, cfg.em).prediction, gold);

      const OneCoinParams est = estimate_one_coin_params(thinned, gold);
      BoundReport map_report = mean_error_bounds(oracle_map_rule(est), to_dawid_skene(est));
      if (map_report.combined_upper) bound_map[r] = *map_report.combined_upper;
      BoundReport mv_report =
          mean_error_bounds(majority_rule(labels.num_workers()), to_dawid_skene(est));
      if (mv_report.combined_upper) bound_mv[r] = *mv_report.combined_upper;
    }
    table.push_back(SubsampleRow{x, summarize(err_mv), summarize(err_em),
                                 detail::mean_defined(bound_mv), detail::mean_defined(bound_map)});
  }
  return table;
}

inline void write_subsample_csv(std::ostream& os, const std::vector<SubsampleRow>& table) {
  os << "x,err_mv,stderr_mv,err_em_map,stderr_em_map,bound_mv,bound_map\n";
  for (const auto& row : table) {
    os << format_double(row.x) << ',' << format_double(row.mv.mean) << ','
       << format_double(row.mv.stderr_mean) << ',' << format_double(row.em_map.mean) << ','
       << format_double(row.em_map.stderr_mean) << ',';
    detail::put_csv_cell(os, row.bound_mv);
    os << ',';
    detail::put_csv_cell(os, row.bound_map);
    os << '\n';
  }
}

}  // namespace crowdlab
