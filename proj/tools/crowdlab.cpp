// crowdlab: aggregate crowd labels, compute error-rate bounds, and run the
// simulation experiments from the command line.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crowdlab/crowdlab.hpp"

namespace {

using namespace crowdlab;

std::vector<double> split_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

SamplingDesign sampling_from_flag(const std::string& q, int num_workers) {
  std::vector<double> values = split_doubles(q);
  if (values.empty()) throw std::runtime_error("--q: no values given");
  if (values.size() == 1) return SamplingDesign::constant(values[0]);
  if (static_cast<int>(values.size()) != num_workers)
    throw std::runtime_error("--q: need one value or one per worker");
  return SamplingDesign::per_worker(std::move(values));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

struct EmFlags {
  int max_iter = 500;
  double tol = 1e-8;
  double smoothing = 0.5;
  std::optional<double> fix_prior;
  bool soft_init = false;

  EmOptions options() const {
    EmOptions opts;
    opts.max_iter = max_iter;
    opts.tol = tol;
    opts.smoothing = smoothing;
    opts.soft_init = soft_init;
    if (fix_prior) {
      opts.estimate_prior = false;
      opts.fixed_prior = *fix_prior;
    }
    return opts;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--em-max-iter", max_iter, "EM iteration cap");
    cmd->add_option("--em-tol", tol, "EM objective-change stopping tolerance");
    cmd->add_option("--em-smoothing", smoothing, "EM M-step pseudo-count");
    cmd->add_option("--fix-prior", fix_prior, "freeze the class prior at this value");
    cmd->add_flag("--em-soft-init", soft_init, "initialize EM from vote fractions");
  }
};

int cmd_aggregate(const std::string& method, const std::string& labels_path,
                  const std::string& gold_path, const std::string& params_path,
                  const std::string& out_path, bool zero_one, const EmFlags& em,
                  int iwmv_max_iter) {
  Dataset data = parse_labels_file(labels_path, zero_one);
  const int m = data.labels.num_workers();

  Prediction pred;
  if (method == "mv") {
    pred = predict(majority_rule(m), data.labels);
  } else if (method == "wmv") {
    if (params_path.empty()) throw std::runtime_error("--method wmv needs --params");
    ParamsFile p = parse_params_file(params_path).aligned_to(data.worker_ids, data.item_ids);
    pred = predict(bound_optimal_rule(p.w), data.labels);
  } else if (method == "oswmv") {
    pred = one_step_wmv(data.labels).prediction;
  } else if (method == "iwmv") {
    auto result = iterative_wmv(data.labels, iwmv_max_iter);
    if (!result.converged)
      std::cerr << "crowdlab: iterative WMV did not converge within " << result.iterations
                << " iterations\n";
    pred = std::move(result.prediction);
  } else if (method == "em-map") {
    pred = em_map_predict(data.labels, ModelKind::OneCoin, em.options()).prediction;
  } else if (method == "oracle-map") {
    if (params_path.empty()) throw std::runtime_error("--method oracle-map needs --params");
    ParamsFile p = parse_params_file(params_path).aligned_to(data.worker_ids, data.item_ids);
    if (p.model == ModelKind::OneCoin)
      pred = predict(oracle_map_rule(p.one_coin()), data.labels);
    else
      pred = predict(map_rule_ds(p.dawid_skene()), data.labels);
  } else {
    throw std::runtime_error("unknown aggregation method '" + method + "'");
  }

  auto out = open_out(out_path);
  write_predictions_csv(out, pred, data.item_ids);

  if (!gold_path.empty()) {
    GoldLabels gold = parse_gold_file(gold_path, data, zero_one);
    nlohmann::json j;
    j["error_rate"] = error_rate(pred, gold);
    j["items_scored"] = gold.size();
    j["undetermined"] = pred.undetermined.size();
    std::cout << j.dump() << "\n";
  }
  return 0;
}

int cmd_bound(const std::string& method, const std::string& params_path,
              const std::string& labels_path, const std::string& gold_path,
              const std::string& out_path, bool zero_one, const std::string& model_flag) {
  BoundReport report;
  if (method == "map-plugin") {
    if (labels_path.empty() || gold_path.empty())
      throw std::runtime_error("--method map-plugin needs --labels and --gold");
    Dataset data = parse_labels_file(labels_path, zero_one);
    GoldLabels gold = parse_gold_file(gold_path, data, zero_one);
    const ModelKind model =
        model_flag == "dawid-skene" ? ModelKind::DawidSkene : ModelKind::OneCoin;
    report = plugin_report(data.labels, gold, model);
  } else {
    if (params_path.empty()) throw std::runtime_error("bound needs --params");
    ParamsFile p = parse_params_file(params_path);
    if (method == "mv") {
      report = mean_error_bounds(majority_rule(p.num_workers()), p.dawid_skene());
    } else if (method == "oracle-map") {
      if (p.model == ModelKind::OneCoin)
        report = oracle_map_report(p.one_coin());
      else
        report = mean_error_bounds(map_rule_ds(p.dawid_skene()), p.dawid_skene());
    } else if (method == "bound-optimal") {
      if (p.model != ModelKind::OneCoin)
        throw std::runtime_error("--method bound-optimal needs one-coin parameters");
      report = mean_error_bounds(bound_optimal_rule(p.w), p.dawid_skene());
    } else {
      throw std::runtime_error("unknown bound method '" + method + "'");
    }
  }
  const std::string text = bound_report_json(report).dump(2);
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    auto out = open_out(out_path);
    out << text << "\n";
  }
  return 0;
}

struct SimulateFlags {
  std::string model = "one-coin";
  int workers = 11;
  int items = 300;
  std::string q = "0.8";
  double pi = 0.5;
  bool balanced = false;
  std::string accuracies;
  std::optional<double> beta_mean;
  double beta_b = 2.0;
  std::string p_plus, p_minus;
  std::uint64_t seed = 1;
  std::string out_prefix = "sim";
};

int cmd_simulate(const SimulateFlags& f) {
  CrowdGenerator gen;
  gen.model = f.model == "dawid-skene" ? ModelKind::DawidSkene : ModelKind::OneCoin;
  gen.num_workers = f.workers;
  gen.num_items = f.items;
  gen.prior = f.pi;
  gen.balanced_classes = f.balanced;
  gen.sampling = sampling_from_flag(f.q, f.workers);
  gen.seed = f.seed;
  if (!f.accuracies.empty()) {
    gen.accuracies = split_doubles(f.accuracies);
  } else if (!f.p_plus.empty() && !f.p_minus.empty()) {
    gen.sensitivity = split_doubles(f.p_plus);
    gen.specificity = split_doubles(f.p_minus);
  } else if (f.beta_mean) {
    gen.accuracy_beta = BetaSpec{beta_alpha_for_mean(*f.beta_mean, f.beta_b), f.beta_b};
  } else {
    throw std::runtime_error("simulate needs --accuracies, --p-plus/--p-minus, or --beta-mean");
  }

  GeneratedCrowd data = generate(gen);
  auto worker_ids = default_ids(f.workers, "w");
  auto item_ids = default_ids(f.items, "i");

  auto labels_out = open_out(f.out_prefix + "_labels.csv");
  write_labels_csv(labels_out, data.labels, worker_ids, item_ids);

  // Gold only for items that actually appear in the label file, so the two
  // files share one item universe.
  std::vector<std::pair<std::int32_t, std::int8_t>> covered;
  for (auto [item, label] : data.gold.entries())
    if (!data.labels.item_entries(item).empty()) covered.emplace_back(item, label);
  auto gold_out = open_out(f.out_prefix + "_gold.csv");
  write_gold_csv(gold_out, GoldLabels::from_entries(std::move(covered)), item_ids);

  ParamsFile params;
  params.pi = f.pi;
  params.sampling = gen.sampling;
  params.worker_ids = worker_ids;
  if (gen.model == ModelKind::OneCoin) {
    params.model = ModelKind::OneCoin;
    params.w = data.correct_prob_pos;
  } else {
    params.model = ModelKind::DawidSkene;
    params.p_plus = data.correct_prob_pos;
    params.p_minus = data.correct_prob_neg;
  }
  auto params_out = open_out(f.out_prefix + "_params.json");
  params_out << params_to_json(params, f.items).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd label aggregation rules and finite-sample error-rate bounds"};
  app.require_subcommand(1);

  // aggregate
  std::string agg_method = "mv", agg_labels, agg_gold, agg_params, agg_out;
  bool agg_zero_one = false;
  int agg_iwmv_max_iter = 50;
  EmFlags agg_em;
  auto* agg = app.add_subcommand("aggregate", "aggregate a label CSV into predictions");
  agg->add_option("--method", agg_method, "mv|wmv|oswmv|iwmv|em-map|oracle-map")->required();
  agg->add_option("--labels", agg_labels, "label CSV (worker_id,item_id,label)")->required();
  agg->add_option("--gold", agg_gold, "gold CSV (item_id,label); reports the error rate");
  agg->add_option("--params", agg_params, "parameters JSON (wmv, oracle-map)");
  agg->add_option("--out", agg_out, "output predictions CSV")->required();
  agg->add_flag("--zero-one", agg_zero_one, "input labels use {0,1} instead of {-1,1}");
  agg->add_option("--iwmv-max-iter", agg_iwmv_max_iter, "iteration cap for --method iwmv");
  agg_em.attach(agg);

  // bound
  std::string bnd_method = "oracle-map", bnd_params, bnd_labels, bnd_gold, bnd_out, bnd_model =
                                                                                        "one-coin";
  bool bnd_zero_one = false;
  auto* bnd = app.add_subcommand("bound", "compute a mean-error bound report");
  bnd->add_option("--method", bnd_method, "mv|oracle-map|bound-optimal|map-plugin")->required();
  bnd->add_option("--params", bnd_params, "parameters JSON (true or assumed parameters)");
  bnd->add_option("--labels", bnd_labels, "label CSV (map-plugin)");
  bnd->add_option("--gold", bnd_gold, "gold CSV (map-plugin reference)");
  bnd->add_option("--model", bnd_model, "map-plugin estimation model: one-coin|dawid-skene");
  bnd->add_option("--out", bnd_out, "output JSON path (stdout when omitted)");
  bnd->add_flag("--zero-one", bnd_zero_one, "input labels use {0,1}");

  // simulate
  SimulateFlags sim;
  auto* simc = app.add_subcommand("simulate", "generate a synthetic crowd dataset");
  simc->add_option("--model", sim.model, "one-coin|dawid-skene");
  simc->add_option("--workers", sim.workers, "number of workers")->required();
  simc->add_option("--items", sim.items, "number of items")->required();
  simc->add_option("--q", sim.q, "sampling probability (scalar or per-worker list)");
  simc->add_option("--pi", sim.pi, "positive-class prior");
  simc->add_flag("--balanced", sim.balanced, "exactly half the items positive");
  simc->add_option("--accuracies", sim.accuracies, "explicit one-coin accuracies, comma separated");
  simc->add_option("--beta-mean", sim.beta_mean, "draw accuracies from Beta with this mean");
  simc->add_option("--beta-b", sim.beta_b, "Beta second shape parameter");
  simc->add_option("--p-plus", sim.p_plus, "explicit sensitivities (dawid-skene)");
  simc->add_option("--p-minus", sim.p_minus, "explicit specificities (dawid-skene)");
  simc->add_option("--seed", sim.seed, "generator seed");
  simc->add_option("--out-prefix", sim.out_prefix, "writes <prefix>_{labels,gold,params}");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a sweep protocol, emitting CSV");
  exp->require_subcommand(1);

  AccuracySweepConfig fa;
  double fa_min = 0.06, fa_max = 0.94, fa_step = 0.02;
  bool fa_iid = false;
  std::string fa_out;
  EmFlags fa_em;
  auto* fig_a = exp->add_subcommand("fig-a", "MV vs EM-MAP vs oracle MAP accuracy sweep");
  fig_a->add_option("--workers", fa.workers, "crowd size");
  fig_a->add_option("--items", fa.items, "items per generation");
  fig_a->add_option("--q", fa.q, "constant sampling probability");
  fig_a->add_option("--pi", fa.prior, "positive-class prior");
  fig_a->add_option("--beta-b", fa.beta_b, "Beta second shape parameter");
  fig_a->add_option("--wbar-min", fa_min, "sweep start");
  fig_a->add_option("--wbar-max", fa_max, "sweep end");
  fig_a->add_option("--wbar-step", fa_step, "sweep step");
  fig_a->add_option("--reps", fa.reps, "replications per point");
  fig_a->add_option("--seed", fa.seed, "master seed");
  fig_a->add_flag("--iid", fa_iid, "draw gold labels i.i.d. instead of balanced");
  fig_a->add_option("--out", fa_out, "output CSV")->required();
  fa_em.attach(fig_a);

  std::string fb_labels, fb_gold, fb_out;
  bool fb_zero_one = false;
  SubsampleConfig fb;
  double fb_xmin = 0.05, fb_xmax = 1.0, fb_xstep = 0.05;
  EmFlags fb_em;
  auto* fig_b = exp->add_subcommand("fig-b", "subsampling sweep over an existing dataset");
  fig_b->add_option("--labels", fb_labels, "label CSV")->required();
  fig_b->add_option("--gold", fb_gold, "gold CSV")->required();
  fig_b->add_flag("--zero-one", fb_zero_one, "input labels use {0,1}");
  fig_b->add_option("--x-min", fb_xmin, "smallest sampling proportion");
  fig_b->add_option("--x-max", fb_xmax, "largest sampling proportion");
  fig_b->add_option("--x-step", fb_xstep, "sampling proportion step");
  fig_b->add_option("--reps", fb.reps, "replications per point");
  fig_b->add_option("--seed", fb.seed, "master seed");
  fig_b->add_option("--out", fb_out, "output CSV")->required();
  fb_em.attach(fig_b);

  OsWmvSweepConfig fc;
  std::string fc_out;
  bool fc_iid = false;
  auto* fig_c = exp->add_subcommand("fig-c", "one-step WMV vs MV sweep from the threshold");
  fig_c->add_option("--workers", fc.workers, "crowd size");
  fig_c->add_option("--items", fc.items, "items per generation");
  fig_c->add_option("--q", fc.q, "constant sampling probability");
  fig_c->add_option("--beta-b", fc.beta_b, "Beta second shape parameter");
  fig_c->add_option("--wbar-max", fc.wbar_max, "sweep end");
  fig_c->add_option("--wbar-step", fc.wbar_step, "sweep step");
  fig_c->add_option("--reps", fc.reps, "replications per point");
  fig_c->add_option("--seed", fc.seed, "master seed");
  fig_c->add_flag("--iid", fc_iid, "draw gold labels i.i.d. instead of balanced");
  fig_c->add_option("--out", fc_out, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (agg->parsed())
      return cmd_aggregate(agg_method, agg_labels, agg_gold, agg_params, agg_out, agg_zero_one,
                           agg_em, agg_iwmv_max_iter);
    if (bnd->parsed())
      return cmd_bound(bnd_method, bnd_params, bnd_labels, bnd_gold, bnd_out, bnd_zero_one,
                       bnd_model);
    if (simc->parsed()) return cmd_simulate(sim);
    if (exp->parsed()) {
      if (fig_a->parsed()) {
        fa.balanced = !fa_iid;
        fa.wbar_grid = make_grid(fa_min, fa_max, fa_step);
        fa.em = fa_em.options();
        auto out = open_out(fa_out);
        write_fig_a_csv(out, experiment_fig_a(fa));
        return 0;
      }
      if (fig_b->parsed()) {
        Dataset data = parse_labels_file(fb_labels, fb_zero_one);
        GoldLabels gold = parse_gold_file(fb_gold, data, fb_zero_one);
        fb.x_grid = make_grid(fb_xmin, fb_xmax, fb_xstep);
        fb.em = fb_em.options();
        auto out = open_out(fb_out);
        write_subsample_csv(out, experiment_subsample(data.labels, gold, fb));
        return 0;
      }
      if (fig_c->parsed()) {
        fc.balanced = !fc_iid;
        auto out = open_out(fc_out);
        write_fig_c_csv(out, experiment_fig_c(fc));
        return 0;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "crowdlab: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "crowdlab: no subcommand\n";
  return 1;
}
