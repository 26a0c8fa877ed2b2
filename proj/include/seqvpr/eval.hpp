#pragma once

// Precision at recall 1: every query window retrieves its nearest reference
// window, which counts as correct when the two windows share a place.

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqvpr/composer.hpp"
#include "seqvpr/core.hpp"
#include "seqvpr/retrieval.hpp"
#include "seqvpr/synth.hpp"

namespace seqvpr {

struct QueryMatch {
  std::size_t query_start = 0;
  std::uint32_t query_start_frame_id = 0;
  std::size_t entry = 0;
  std::uint32_t matched_start_frame_id = 0;
  float sq_distance = 0.0f;
  bool correct = false;
};

/// Retrieves a match for every window (stride 1) of `query`.
inline std::vector<QueryMatch> match_queries(const PlaceIndex& index, const Traversal& query,
                                             const ComposerModel& model,
                                             const PlaceConvention& conv) {
  const auto n = index.window;
  const auto windows = query.num_windows(n);
  if (windows == 0) throw ConfigError("evaluate: query traversal yields no windows");
  if (descriptor_dim(model, n) != index.dim)
    throw ShapeError("evaluate: composer produces dimension " +
                     std::to_string(descriptor_dim(model, n)) + ", index holds " +
                     std::to_string(index.dim));
  std::vector<QueryMatch> out;
  out.reserve(windows);
  for (std::size_t s = 0; s < windows; ++s) {
    const QuerySequence q(query, s, n);
    const auto nn = query_nn(index, describe_window(model, q));
    const auto& e = index.entries[nn.entry];
    out.push_back({s, q.frame_ids().front(), nn.entry, e.start_frame_id, nn.sq_distance,
                   same_place(q.frame_ids(), e.frame_ids, conv)});
  }
  return out;
}

struct Precision {
  std::size_t correct = 0;
  std::size_t total = 0;
  double value() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

inline Precision evaluate(const PlaceIndex& index, const Traversal& query,
                          const ComposerModel& model, const PlaceConvention& conv) {
  Precision p;
  for (const auto& m : match_queries(index, query, model, conv)) {
    ++p.total;
    p.correct += m.correct ? 1 : 0;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Experiment suite

enum class Experiment { kNormal, kReverseGear, kRandomSpeed };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::kNormal: return "NT";
    case Experiment::kReverseGear: return "RG";
    case Experiment::kRandomSpeed: return "RS";
  }
  return "?";
}

inline constexpr std::array<Experiment, 3> kExperiments = {
    Experiment::kNormal, Experiment::kReverseGear, Experiment::kRandomSpeed};

struct NamedModel {
  std::string name;
  ComposerModel model;
  std::size_t n = 3;
};

struct SuiteConfig {
  std::vector<std::size_t> speed_multipliers = {1, 2, 3};
  std::uint64_t perturb_seed = 0;
};

struct PairPrecision {
  std::string composer;
  Experiment experiment = Experiment::kNormal;
  std::uint32_t query_condition = 0;
  std::uint32_t reference_condition = 0;
  Precision precision;
};

struct ComposerSummary {
  std::string composer;
  std::size_t descriptor_dim = 0;
  std::size_t n = 0;
  std::array<double, 3> precision{};  // NT, RG, RS
  double mean = 0.0;
  double stddev = 0.0;                // population stddev over the three experiments

  double at(Experiment e) const { return precision[static_cast<std::size_t>(e)]; }
};

struct EvalReport {
  std::vector<ComposerSummary> composers;
  std::vector<PairPrecision> pairs;

  const ComposerSummary& summary(const std::string& name) const {
    for (const auto& s : composers)
      if (s.composer == name) return s;
    throw ConfigError("no composer named '" + name + "' in report");
  }
};

inline std::pair<double, double> mean_and_stddev(std::span<const double> values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

namespace detail {

inline Traversal speed_perturbed(const FeatureStore& world, std::uint32_t condition,
                                 const SuiteConfig& cfg) {
  std::seed_seq seq{cfg.perturb_seed, std::uint64_t{0x5eed}, std::uint64_t{condition}};
  std::mt19937_64 rng(seq);
  FeatureStore single;
  single.dim = world.dim;
  single.traversals.push_back(world.condition(condition));
  return perturb_speed(std::move(single), condition, cfg.speed_multipliers, rng).traversals.front();
}

}  // namespace detail

/// NT (unperturbed), RG (query condition reversed) and RS (query and reference
/// independently speed-perturbed) over every ordered condition pair. An
/// experiment's precision is the mean over pairs.
inline EvalReport run_experiment_suite(const FeatureStore& world,
                                       const std::vector<NamedModel>& models,
                                       const SuiteConfig& cfg = {}) {
  if (world.traversals.size() < 2) throw ConfigError("experiment suite needs two conditions");
  if (models.empty()) throw ConfigError("experiment suite: no trained composers supplied");
  const auto conds = world.condition_ids();

  std::vector<Traversal> reversed, sped;
  for (auto c : conds) {
    Traversal r = world.condition(c);
    std::reverse(r.frames.begin(), r.frames.end());
    reversed.push_back(std::move(r));
    sped.push_back(detail::speed_perturbed(world, c, cfg));
  }

  EvalReport report;
  for (const auto& m : models) {
    if (input_dim(m.model) != world.dim)
      throw ShapeError("composer '" + m.name + "' expects input dimension " +
                       std::to_string(input_dim(m.model)));
    ComposerSummary summary;
    summary.composer = m.name;
    summary.n = m.n;
    summary.descriptor_dim = descriptor_dim(m.model, m.n);
    for (auto e : kExperiments) {
      double sum = 0.0;
      std::size_t pairs = 0;
      for (std::size_t ri = 0; ri < conds.size(); ++ri) {
        const Traversal& ref = e == Experiment::kRandomSpeed ? sped[ri] : world.traversals[ri];
        const auto index = build_index(ref, m.model, m.n);
        for (std::size_t qi = 0; qi < conds.size(); ++qi) {
          if (qi == ri) continue;
          const Traversal& query = e == Experiment::kNormal        ? world.traversals[qi]
                                   : e == Experiment::kReverseGear ? reversed[qi]
                                                                   : sped[qi];
          const auto p = evaluate(index, query, m.model, world.convention);
          report.pairs.push_back({m.name, e, conds[qi], conds[ri], p});
          sum += p.value();
          ++pairs;
        }
      }
      summary.precision[static_cast<std::size_t>(e)] = sum / static_cast<double>(pairs);
    }
    std::tie(summary.mean, summary.stddev) = mean_and_stddev(summary.precision);
    report.composers.push_back(summary);
  }
  return report;
}

/// table[q][r] = precision of queries from condition q against references from
/// condition r; the diagonal is left empty.
using ConditionMatrix = std::vector<std::vector<std::optional<double>>>;

inline ConditionMatrix condition_matrix(const FeatureStore& world, const ComposerModel& model,
                                        std::size_t n) {
  if (world.traversals.size() < 2) throw ConfigError("condition matrix needs two conditions");
  const auto C = world.traversals.size();
  ConditionMatrix table(C, std::vector<std::optional<double>>(C));
  for (std::size_t r = 0; r < C; ++r) {
    const auto index = build_index(world.traversals[r], model, n);
    for (std::size_t q = 0; q < C; ++q)
      if (q != r) table[q][r] = evaluate(index, world.traversals[q], model, world.convention).value();
  }
  return table;
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json out;
  out["composers"] = nlohmann::json::array();
  for (const auto& s : report.composers) {
    out["composers"].push_back({{"composer", s.composer},
                                {"descriptor_dim", s.descriptor_dim},
                                {"n", s.n},
                                {"NT", s.at(Experiment::kNormal)},
                                {"RG", s.at(Experiment::kReverseGear)},
                                {"RS", s.at(Experiment::kRandomSpeed)},
                                {"mean", s.mean},
                                {"stddev", s.stddev}});
  }
  out["pairs"] = nlohmann::json::array();
  for (const auto& p : report.pairs) {
    out["pairs"].push_back({{"composer", p.composer},
                            {"experiment", to_string(p.experiment)},
                            {"query_condition", p.query_condition},
                            {"reference_condition", p.reference_condition},
                            {"correct", p.precision.correct},
                            {"total", p.precision.total},
                            {"precision", p.precision.value()}});
  }
  return out;
}

/// Flat CSV: composer,experiment,query_cond,ref_cond,precision.
inline std::string report_csv(const EvalReport& report) {
  std::string out = "composer,experiment,query_cond,ref_cond,precision\n";
  char line[256];
  for (const auto& p : report.pairs) {
    std::snprintf(line, sizeof line, "%s,%s,%u,%u,%.6f\n", p.composer.c_str(),
                  to_string(p.experiment), p.query_condition, p.reference_condition,
                  p.precision.value());
    out += line;
  }
  return out;
}

inline nlohmann::json condition_matrix_json(const ConditionMatrix& table) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : table) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& v : row) r.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    out.push_back(r);
  }
  return out;
}

/// Matrix CSV for plotting: header `query\reference,<cond ids...>`, empty
/// diagonal cells.
inline std::string condition_matrix_csv(const ConditionMatrix& table,
                                        const std::vector<std::uint32_t>& condition_ids) {
  std::string out = "query\\reference";
  for (auto c : condition_ids) out += "," + std::to_string(c);
  out += "\n";
  char cell[32];
  for (std::size_t q = 0; q < table.size(); ++q) {
    out += std::to_string(condition_ids[q]);
    for (const auto& v : table[q]) {
      out += ",";
      if (v) {
        std::snprintf(cell, sizeof cell, "%.6f", *v);
        out += cell;
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace seqvpr
