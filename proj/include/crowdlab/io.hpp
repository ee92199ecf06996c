#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crowdlab/bounds.hpp"
#include "crowdlab/format.hpp"
#include "crowdlab/label_matrix.hpp"
#include "crowdlab/params.hpp"

namespace crowdlab {

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A label matrix together with the external string identifiers, assigned
/// dense indices in first-appearance order.
struct Dataset {
  LabelMatrix labels;
  std::vector<std::string> worker_ids;
  std::vector<std::string> item_ids;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline std::int8_t parse_label(const std::string& token, bool zero_one, const std::string& where) {
  if (zero_one) {
    if (token == "0") return -1;
    if (token == "1") return 1;
    throw CsvError(where + ": label must be 0 or 1 (have --zero-one), got '" + token + "'");
  }
  if (token == "-1") return -1;
  if (token == "1" || token == "+1") return 1;
  throw CsvError(where + ": label must be -1 or 1, got '" + token + "'");
}

inline void expect_header(std::istream& in, const std::string& expected,
                          const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(source + ":1: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw CsvError(source + ":1: expected header '" + expected + "', got '" + line + "'");
}

}  // namespace detail

/// Parses the label CSV interchange format: header `worker_id,item_id,label`,
/// one observation per row. Duplicate (worker, item) pairs are rejected with
/// the offending line number.
inline Dataset parse_labels_csv(std::istream& in, bool zero_one = false,
                                const std::string& source = "<labels>") {
  detail::expect_header(in, "worker_id,item_id,label", source);
  std::vector<std::string> worker_ids, item_ids;
  std::unordered_map<std::string, std::int32_t> worker_index, item_index;
  std::unordered_map<std::int64_t, int> seen;  // (worker, item) -> line
  std::vector<LabelMatrix::Entry> entries;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = source + ":" + std::to_string(lineno);
    auto fields = detail::split_csv_line(std::move(line));
    if (fields.size() != 3)
      throw CsvError(where + ": expected 3 fields, got " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) throw CsvError(where + ": empty identifier");
    auto intern = [](auto& index, auto& ids, const std::string& id) {
      auto [it, inserted] = index.try_emplace(id, static_cast<std::int32_t>(ids.size()));
      if (inserted) ids.push_back(id);
      return it->second;
    };
    const std::int32_t w = intern(worker_index, worker_ids, fields[0]);
    const std::int32_t t = intern(item_index, item_ids, fields[1]);
    const std::int8_t label = detail::parse_label(fields[2], zero_one, where);
    const std::int64_t key = (static_cast<std::int64_t>(w) << 32) | static_cast<std::int64_t>(t);
    if (auto [it, inserted] = seen.try_emplace(key, lineno); !inserted)
      throw CsvError(where + ": duplicate observation for (" + fields[0] + ", " + fields[1] +
                     "), first seen on line " + std::to_string(it->second));
    entries.push_back({w, t, label});
  }
  if (entries.empty()) throw CsvError(source + ": no observations after the header row");
  LabelMatrix matrix(static_cast<int>(worker_ids.size()), static_cast<int>(item_ids.size()),
                     std::move(entries));
  return Dataset{std::move(matrix), std::move(worker_ids), std::move(item_ids)};
}

inline Dataset parse_labels_file(const std::string& path, bool zero_one = false) {
  std::ifstream in(path);
  if (!in) throw CsvError(path + ": cannot open file");
  return parse_labels_csv(in, zero_one, path);
}

/// Parses the gold CSV (`item_id,label`) against an existing dataset's item
/// identifiers. Unknown items and duplicates are rejected.
inline GoldLabels parse_gold_csv(std::istream& in, const Dataset& data, bool zero_one = false,
                                 const std::string& source = "<gold>") {
  detail::expect_header(in, "item_id,label", source);
  std::unordered_map<std::string, std::int32_t> item_index;
  for (std::size_t j = 0; j < data.item_ids.size(); ++j)
    item_index.emplace(data.item_ids[j], static_cast<std::int32_t>(j));
  std::vector<std::pair<std::int32_t, std::int8_t>> pairs;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = source + ":" + std::to_string(lineno);
    auto fields = detail::split_csv_line(std::move(line));
    if (fields.size() != 2)
      throw CsvError(where + ": expected 2 fields, got " + std::to_string(fields.size()));
    auto it = item_index.find(fields[0]);
    if (it == item_index.end())
      throw CsvError(where + ": item '" + fields[0] + "' does not appear in the label file");
    pairs.emplace_back(it->second, detail::parse_label(fields[1], zero_one, where));
  }
  if (pairs.empty()) throw CsvError(source + ": no gold labels after the header row");
  try {
    return GoldLabels::from_entries(std::move(pairs));
  } catch (const std::invalid_argument& e) {
    throw CsvError(source + ": " + e.what());
  }
}

inline GoldLabels parse_gold_file(const std::string& path, const Dataset& data,
                                  bool zero_one = false) {
  std::ifstream in(path);
  if (!in) throw CsvError(path + ": cannot open file");
  return parse_gold_csv(in, data, zero_one, path);
}

inline std::vector<std::string> default_ids(int n, const std::string& prefix) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) ids.push_back(prefix + std::to_string(k));
  return ids;
}

inline void write_labels_csv(std::ostream& os, const LabelMatrix& labels,
                             const std::vector<std::string>& worker_ids,
                             const std::vector<std::string>& item_ids) {
  os << "worker_id,item_id,label\n";
  for (const auto& e : labels.entries())
    os << worker_ids[e.worker] << ',' << item_ids[e.item] << ',' << int(e.label) << '\n';
}

inline void write_gold_csv(std::ostream& os, const GoldLabels& gold,
                           const std::vector<std::string>& item_ids) {
  os << "item_id,label\n";
  for (auto [item, label] : gold.entries())
    os << item_ids[item] << ',' << int(label) << '\n';
}

inline void write_predictions_csv(std::ostream& os, const Prediction& pred,
                                  const std::vector<std::string>& item_ids) {
  os << "item_id,label\n";
  for (std::size_t j = 0; j < pred.labels.size(); ++j)
    os << item_ids[j] << ',' << int(pred.labels[j]) << '\n';
}

// ---------------------------------------------------------------------------
// Parameter files: JSON with `w` (one-coin) or `p_plus`/`p_minus`
// (Dawid-Skene), `pi`, and `q` as a scalar, vector, or matrix. Optional
// `workers` (and `items`, for matrix q) arrays bind the positional vectors to
// external identifiers so they can be realigned to a parsed dataset.

struct ParamsFile {
  ModelKind model = ModelKind::OneCoin;
  std::vector<double> w;
  std::vector<double> p_plus, p_minus;
  double pi = 0.5;
  SamplingDesign sampling = SamplingDesign::constant(1.0);
  std::vector<std::string> worker_ids;  // empty: positional
  std::vector<std::string> item_ids;    // empty: positional (matrix q only)

  OneCoinParams one_coin() const {
    if (model != ModelKind::OneCoin)
      throw std::invalid_argument("params file holds Dawid-Skene parameters, expected one-coin");
    return OneCoinParams(w, pi, sampling);
  }
  DawidSkeneParams dawid_skene() const {
    if (model == ModelKind::OneCoin) return to_dawid_skene(OneCoinParams(w, pi, sampling));
    return DawidSkeneParams(p_plus, p_minus, pi, sampling);
  }
  int num_workers() const {
    return static_cast<int>(model == ModelKind::OneCoin ? w.size() : p_plus.size());
  }

  // Reorders all per-worker (and, for matrix q, per-item) vectors to match a
  // dataset's identifier order. A no-op for files without a `workers` array.
  ParamsFile aligned_to(const std::vector<std::string>& dataset_workers,
                        const std::vector<std::string>& dataset_items) const {
    if (worker_ids.empty()) {
      if (num_workers() != static_cast<int>(dataset_workers.size()))
        throw std::runtime_error("params/labels worker count mismatch");
      return *this;
    }
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t k = 0; k < worker_ids.size(); ++k) position.emplace(worker_ids[k], k);
    std::vector<std::size_t> order;
    order.reserve(dataset_workers.size());
    for (const auto& id : dataset_workers) {
      auto it = position.find(id);
      if (it == position.end())
        throw std::runtime_error("params file has no entry for worker '" + id + "'");
      order.push_back(it->second);
    }
    auto pick = [&](const std::vector<double>& src) {
      std::vector<double> out;
      out.reserve(order.size());
      for (std::size_t k : order) out.push_back(src.at(k));
      return out;
    };
    ParamsFile out = *this;
    out.worker_ids = dataset_workers;
    if (model == ModelKind::OneCoin) {
      out.w = pick(w);
    } else {
      out.p_plus = pick(p_plus);
      out.p_minus = pick(p_minus);
    }
    switch (sampling.kind()) {
      case SamplingDesign::Kind::Constant:
        break;
      case SamplingDesign::Kind::PerWorker: {
        std::vector<double> q;
        for (std::size_t k : order) q.push_back(sampling.prob(static_cast<int>(k), 0));
        out.sampling = SamplingDesign::per_worker(std::move(q));
        break;
      }
      case SamplingDesign::Kind::Full: {
        std::vector<std::size_t> columns(static_cast<std::size_t>(sampling.num_columns()));
        for (std::size_t k = 0; k < columns.size(); ++k) columns[k] = k;
        if (!item_ids.empty()) {
          std::unordered_map<std::string, std::size_t> item_pos;
          for (std::size_t k = 0; k < item_ids.size(); ++k) item_pos.emplace(item_ids[k], k);
          columns.clear();
          for (const auto& id : dataset_items) {
            auto it = item_pos.find(id);
            if (it == item_pos.end())
              throw std::runtime_error("params file has no q column for item '" + id + "'");
            columns.push_back(it->second);
          }
          out.item_ids = dataset_items;
        } else if (columns.size() != dataset_items.size()) {
          throw std::runtime_error("params/labels item count mismatch for matrix q");
        }
        std::vector<double> q;
        q.reserve(order.size() * columns.size());
        for (std::size_t i : order)
          for (std::size_t j : columns)
            q.push_back(sampling.prob(static_cast<int>(i), static_cast<int>(j)));
        out.sampling = SamplingDesign::full(static_cast<int>(order.size()),
                                            static_cast<int>(columns.size()), std::move(q));
        break;
      }
    }
    return out;
  }
};

inline SamplingDesign sampling_from_json(const nlohmann::json& q, int num_workers) {
  if (q.is_number()) return SamplingDesign::constant(q.get<double>());
  if (q.is_array() && !q.empty() && q.front().is_array()) {
    std::vector<double> flat;
    const int n = static_cast<int>(q.front().size());
    for (const auto& row : q) {
      if (static_cast<int>(row.size()) != n)
        throw std::invalid_argument("params: ragged q matrix");
      for (const auto& v : row) flat.push_back(v.get<double>());
    }
    return SamplingDesign::full(static_cast<int>(q.size()), n, std::move(flat));
  }
  if (q.is_array()) {
    auto vec = q.get<std::vector<double>>();
    if (num_workers > 0 && static_cast<int>(vec.size()) != num_workers)
      throw std::invalid_argument("params: q vector length does not match worker count");
    return SamplingDesign::per_worker(std::move(vec));
  }
  throw std::invalid_argument("params: q must be a number, vector, or matrix");
}

inline ParamsFile parse_params_json(std::istream& in, const std::string& source = "<params>") {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(source + ": " + e.what());
  }
  ParamsFile p;
  if (j.contains("w")) {
    p.model = ModelKind::OneCoin;
    p.w = j.at("w").get<std::vector<double>>();
  } else if (j.contains("p_plus") && j.contains("p_minus")) {
    p.model = ModelKind::DawidSkene;
    p.p_plus = j.at("p_plus").get<std::vector<double>>();
    p.p_minus = j.at("p_minus").get<std::vector<double>>();
    if (p.p_plus.size() != p.p_minus.size())
      throw std::runtime_error(source + ": p_plus/p_minus length mismatch");
  } else {
    throw std::runtime_error(source + ": need either 'w' or 'p_plus'+'p_minus'");
  }
  p.pi = j.value("pi", 0.5);
  if (j.contains("q")) p.sampling = sampling_from_json(j.at("q"), p.num_workers());
  if (j.contains("workers")) {
    p.worker_ids = j.at("workers").get<std::vector<std::string>>();
    if (static_cast<int>(p.worker_ids.size()) != p.num_workers())
      throw std::runtime_error(source + ": 'workers' length does not match the parameter vectors");
  }
  if (j.contains("items")) p.item_ids = j.at("items").get<std::vector<std::string>>();
  return p;
}

inline ParamsFile parse_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  return parse_params_json(in, path);
}

inline nlohmann::json sampling_to_json(const SamplingDesign& s, int num_workers, int num_items) {
  switch (s.kind()) {
    case SamplingDesign::Kind::Constant:
      return s.prob(0, 0);
    case SamplingDesign::Kind::PerWorker: {
      std::vector<double> q;
      for (int i = 0; i < num_workers; ++i) q.push_back(s.prob(i, 0));
      return q;
    }
    case SamplingDesign::Kind::Full: {
      std::vector<std::vector<double>> q(static_cast<std::size_t>(num_workers));
      for (int i = 0; i < num_workers; ++i)
        for (int j = 0; j < num_items; ++j) q[i].push_back(s.prob(i, j));
      return q;
    }
  }
  return nullptr;
}

inline nlohmann::json params_to_json(const ParamsFile& p, int num_items) {
  nlohmann::json j;
  if (p.model == ModelKind::OneCoin) {
    j["w"] = p.w;
  } else {
    j["p_plus"] = p.p_plus;
    j["p_minus"] = p.p_minus;
  }
  j["pi"] = p.pi;
  j["q"] = sampling_to_json(p.sampling, p.num_workers(), num_items);
  if (!p.worker_ids.empty()) j["workers"] = p.worker_ids;
  if (!p.item_ids.empty()) j["items"] = p.item_ids;
  return j;
}

inline nlohmann::json bound_report_json(const BoundReport& r) {
  nlohmann::json j;
  j["t1"] = r.t1;
  j["t2"] = r.t2;
  j["c_H"] = r.c_h;
  j["sigma2"] = r.sigma2;
  j["t1_nonneg"] = r.t1_nonneg;
  j["t2_nonpos"] = r.t2_nonpos;
  j["estimated"] = r.estimated;
  if (r.hoeffding_upper) j["hoeffding_upper"] = *r.hoeffding_upper;
  if (r.bernstein_upper) j["bernstein_upper"] = *r.bernstein_upper;
  if (r.combined_upper) j["combined_upper"] = *r.combined_upper;
  if (r.combined_lower) j["combined_lower"] = *r.combined_lower;
  return j;
}

}  // namespace crowdlab
