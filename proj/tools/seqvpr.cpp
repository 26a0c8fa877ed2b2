// seqvpr: command-line front end for the sequence place-recognition engine.
//
//   seqvpr [--seed N] [--config run.json] [--out-dir DIR] <subcommand> [options]
//
// Exit codes: 0 success, 2 bad usage, 3 unreadable or malformed input,
// 4 invalid configuration, 5 training/matching failure, 1 anything else.
// Failures print one line `error: code=<name> message="<text>"` to stderr.

#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "seqvpr/seqvpr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seqvpr;

namespace {

// ---------------------------------------------------------------------------
// JSON config files. Top-level keys set global options; a nested object named
// after a subcommand sets that subcommand's options. Underscores in keys are
// accepted in place of dashes.

json scalar_from_string(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  if (!s.empty()) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const long long i = std::strtoll(begin, &end, 10);
    if (*end == '\0') return i;
    const double d = std::strtod(begin, &end);
    if (*end == '\0') return d;
  }
  return s;
}

std::string scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) {
    std::ostringstream out;
    out.precision(17);
    out << v.get<double>();
    return out.str();
  }
  throw ConfigError("config value " + v.dump() + " is not a scalar");
}

class JsonConfig : public CLI::Config {
public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json root;
    try {
      root = json::parse(input);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(root, {}, items);
    return items;
  }

  std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
    return dump(*app).dump(2) + "\n";
  }

private:
  static void collect(const json& node, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [raw_key, value] : node.items()) {
      std::string key = raw_key;
      std::replace(key.begin(), key.end(), '_', '-');
      if (value.is_object()) {
        auto sub = parents;
        sub.push_back(key);
        collect(value, sub, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar_to_string(v));
      } else {
        item.inputs.push_back(scalar_to_string(value));
      }
      items.push_back(std::move(item));
    }
  }

  static json dump(const CLI::App& app) {
    json out = json::object();
    for (const auto* opt : app.get_options()) {
      const auto& name = opt->get_single_name();
      if (opt->get_lnames().empty() || name == "help" || name == "config") continue;
      const std::string key = opt->get_lnames().front();
      if (opt->get_expected_min() == 0) {
        out[key] = opt->as<bool>();
        continue;
      }
      std::vector<std::string> values = opt->count() > 0 ? opt->results()
                                                         : std::vector<std::string>{};
      if (values.empty() && !opt->get_default_str().empty()) {
        std::string d = opt->get_default_str();
        if (d.size() >= 2 && d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
        std::stringstream ss(d);
        for (std::string part; std::getline(ss, part, ',');) values.push_back(part);
      }
      if (opt->get_items_expected_max() > 1) {
        json arr = json::array();
        for (const auto& v : values) arr.push_back(scalar_from_string(v));
        out[key] = arr;
      } else if (!values.empty()) {
        out[key] = scalar_from_string(values.back());
      } else {
        out[key] = nullptr;
      }
    }
    for (const auto* sub : app.get_subcommands()) out[sub->get_name()] = dump(*sub);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Output helpers

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

void write_text(const fs::path& path, const std::string& text) { io::write_file_atomic(path, text); }

void write_json(const fs::path& path, const json& value) { write_text(path, value.dump(2) + "\n"); }

void require_inputs(std::initializer_list<std::string> paths) {
  for (const auto& p : paths)
    if (!fs::is_regular_file(p)) throw LoadError(LoadErrorKind::kIo, "cannot read input file " + p);
}

std::uint32_t pick_condition(const FeatureStore& store, long long requested, std::size_t fallback) {
  if (requested >= 0) {
    const auto id = static_cast<std::uint32_t>(requested);
    store.condition(id);
    return id;
  }
  const auto ids = store.condition_ids();
  if (ids.size() <= fallback)
    throw ConfigError("store has " + std::to_string(ids.size()) + " condition(s); cannot pick a default");
  return ids[fallback];
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenOptions {
  WorldConfig world;
  std::size_t places = 200;
  std::size_t train_places = 0;
  std::uint32_t tolerance = 0;
};

void cmd_gen(const Globals& g, GenOptions o) {
  o.world.rng_seed = g.seed;
  o.world.num_places = o.places + o.train_places;
  FeatureStore world = generate_world(o.world);
  world.convention.tolerance = o.tolerance;
  const fs::path out = g.out_dir;
  if (o.train_places > 0) {
    auto [train, test] = split_places(world, o.train_places);
    write_feature_store(out / "train", train);
    write_json(out / "train" / "ground_truth.json", ground_truth_json(train));
    write_feature_store(out / "test", test);
    write_json(out / "test" / "ground_truth.json", ground_truth_json(test));
    std::printf("wrote %zu training and %zu test places x %zu conditions to %s\n", o.train_places,
                o.places, o.world.conditions, out.string().c_str());
  } else {
    write_feature_store(out, world);
    write_json(out / "ground_truth.json", ground_truth_json(world));
    std::printf("wrote %zu places x %zu conditions to %s\n", o.places, o.world.conditions,
                out.string().c_str());
  }
}

struct TrainOptions {
  std::string features;
  std::string composer = "fusion";
  std::string activation = "none";
  TrainConfig config;
};

void cmd_train(const Globals& g, TrainOptions o) {
  o.config.rng_seed = g.seed;
  if (o.activation == "tanh") {
    o.config.fusion.activation = Activation::kTanh;
  } else if (o.activation != "none") {
    throw ConfigError("unknown fusion activation '" + o.activation + "'");
  }
  require_inputs({o.features});
  const auto kind = parse_composer_kind(o.composer);
  const FeatureStore store = load_feature_store(o.features);
  const auto result = train_composer(kind, store, o.config);
  const fs::path out = g.out_dir;
  save_checkpoint(out / (o.composer + ".spw"), result.model);
  write_text(out / (o.composer + "_loss.csv"), loss_trace_csv(result.loss_trace));
  double tail = 0.0;
  const std::size_t k = std::max<std::size_t>(1, result.loss_trace.size() / 10);
  for (std::size_t i = result.loss_trace.size() - std::min(k, result.loss_trace.size());
       i < result.loss_trace.size(); ++i)
    tail += result.loss_trace[i];
  std::printf("trained %s for %zu steps; mean loss over the last %zu steps %.6f\n",
              o.composer.c_str(), result.loss_trace.size(), k,
              result.loss_trace.empty() ? 0.0 : tail / static_cast<double>(k));
}

struct IndexOptions {
  std::string reference;
  std::string checkpoint;
  long long condition = -1;
  std::size_t n = 3;
  std::size_t stride = 1;
};

void cmd_index(const Globals& g, const IndexOptions& o) {
  require_inputs({o.reference, o.checkpoint});
  const FeatureStore store = load_feature_store(o.reference);
  const ComposerModel model = load_checkpoint(o.checkpoint);
  const auto cond = pick_condition(store, o.condition, 0);
  const auto index = build_index(store.condition(cond), model, o.n, o.stride);
  save_index(fs::path(g.out_dir) / "index.spx", index);
  std::printf("indexed %zu windows of condition %u (dimension %zu)\n", index.size(), cond, index.dim);
}

struct QueryOptions {
  std::string index;
  std::string checkpoint;
  std::string queries;
  long long condition = -1;
};

void cmd_query(const Globals& g, const QueryOptions& o) {
  require_inputs({o.index, o.checkpoint, o.queries});
  const PlaceIndex index = load_index(o.index);
  const ComposerModel model = load_checkpoint(o.checkpoint);
  const FeatureStore store = load_feature_store(o.queries);
  const auto cond = pick_condition(store, o.condition, 0);
  const auto matches = match_queries(index, store.condition(cond), model, store.convention);
  std::string csv = "query_start,matched_start,sq_distance,correct\n";
  char line[128];
  std::size_t correct = 0;
  for (const auto& m : matches) {
    std::snprintf(line, sizeof line, "%u,%u,%.9g,%d\n", m.query_start_frame_id,
                  m.matched_start_frame_id, static_cast<double>(m.sq_distance), m.correct ? 1 : 0);
    csv += line;
    correct += m.correct ? 1 : 0;
  }
  write_text(fs::path(g.out_dir) / "matches.csv", csv);
  std::printf("%zu queries, precision %.6f\n", matches.size(),
              static_cast<double>(correct) / static_cast<double>(matches.size()));
}

struct EvalOptions {
  std::string features;
  std::vector<std::string> checkpoints;
  std::size_t n = 3;
  std::vector<std::size_t> multipliers = {1, 2, 3};
  bool no_single_view = false;
};

void cmd_eval(const Globals& g, const EvalOptions& o) {
  require_inputs({o.features});
  for (const auto& path : o.checkpoints) require_inputs({path});
  const FeatureStore world = load_feature_store(o.features);
  std::vector<NamedModel> models;
  std::map<std::string, int> seen;
  for (const auto& path : o.checkpoints) {
    ComposerModel model = load_checkpoint(path);
    std::string name = to_string(kind_of(model));
    if (seen[name]++ > 0) name += "_" + std::to_string(seen[name] - 1);
    if (kind_of(model) == ComposerKind::kGrouping && !o.no_single_view)
      models.push_back({name == "grouping" ? "single_view" : "single_view_" + name, model, 1});
    models.push_back({name, std::move(model), o.n});
  }
  SuiteConfig cfg;
  cfg.speed_multipliers = o.multipliers;
  cfg.perturb_seed = g.seed;
  const auto report = run_experiment_suite(world, models, cfg);
  const fs::path out = g.out_dir;
  write_json(out / "report.json", report_json(report));
  write_text(out / "report.csv", report_csv(report));
  const auto ids = world.condition_ids();
  for (const auto& m : models) {
    const auto table = condition_matrix(world, m.model, m.n);
    write_json(out / ("condition_matrix_" + m.name + ".json"), condition_matrix_json(table));
    write_text(out / ("condition_matrix_" + m.name + ".csv"), condition_matrix_csv(table, ids));
  }
  std::printf("%-14s %6s %6s %6s %6s %6s\n", "composer", "NT", "RG", "RS", "mean", "std");
  for (const auto& s : report.composers)
    std::printf("%-14s %6.3f %6.3f %6.3f %6.3f %6.3f\n", s.composer.c_str(),
                s.at(Experiment::kNormal), s.at(Experiment::kReverseGear),
                s.at(Experiment::kRandomSpeed), s.mean, s.stddev);
}

struct BenchOptions {
  std::vector<std::size_t> k = {128, 384};
  std::vector<std::size_t> n = {100000, 200000};
  std::size_t trials = 20;
};

void cmd_bench(const Globals& g, const BenchOptions& o) {
  std::vector<BenchResult> rows;
  for (auto k : o.k)
    for (auto n : o.n) {
      rows.push_back(bench_search(k, n, o.trials, g.seed));
      std::printf("k=%zu N=%zu mean %.4f ms (sd %.4f)\n", k, n, rows.back().mean_ms,
                  rows.back().stddev_ms);
    }
  write_text(fs::path(g.out_dir) / "bench.csv", bench_csv(rows));
}

struct SeqSlamOptions {
  std::string features;
  long long query_condition = -1;
  long long reference_condition = -1;
  bool reverse_query = false;
  SeqSlamParams params;
};

void cmd_seqslam(const Globals& g, const SeqSlamOptions& o) {
  require_inputs({o.features});
  FeatureStore store = load_feature_store(o.features);
  const auto qc = pick_condition(store, o.query_condition, 1);
  const auto rc = pick_condition(store, o.reference_condition, 0);
  if (o.reverse_query) store = perturb_reverse(std::move(store), qc);
  const auto& query = store.condition(qc);
  const auto& reference = store.condition(rc);
  const auto result = run_seqslam(query, reference, o.params, store.convention);
  const double single = single_frame_precision(query, reference, store.convention);

  std::string csv = "query_start,query_frame,reference_start,reference_frame,velocity,score,correct\n";
  char line[192];
  for (const auto& m : result.matches) {
    std::snprintf(line, sizeof line, "%zu,%u,%zu,%u,%.6f,%.9g,%d\n", m.query_start, m.query_frame_id,
                  m.reference_start, m.reference_frame_id, m.velocity, m.score, m.correct ? 1 : 0);
    csv += line;
  }
  const fs::path out = g.out_dir;
  write_text(out / "seqslam_matches.csv", csv);
  write_json(out / "seqslam.json", {{"query_condition", qc},
                                    {"reference_condition", rc},
                                    {"reversed_query", o.reverse_query},
                                    {"queries", result.matches.size()},
                                    {"precision", result.precision},
                                    {"single_frame_precision", single}});
  std::printf("seqslam precision %.6f over %zu queries (single-frame NN %.6f)\n", result.precision,
              result.matches.size(), single);
}

// ---------------------------------------------------------------------------
// Error reporting

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

int fail(int code, const char* name, const std::string& message) {
  std::fprintf(stderr, "error: code=%s message=%s\n", name, quoted(message).c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence place recognition: composers, triplet training, retrieval and evaluation"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values (flags override it)");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every stochastic component");
  app.add_option("--out-dir", g.out_dir, "Directory receiving all outputs");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic multi-condition world");
  gen_cmd->add_option("--places", gen.places, "Number of evaluation places")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--train-places", gen.train_places,
                      "Extra places written to a separate train/ store (0 = no split)");
  gen_cmd->add_option("--dim", gen.world.dim, "Feature dimension");
  gen_cmd->add_option("--conditions", gen.world.conditions, "Number of conditions");
  gen_cmd->add_option("--transform-scale", gen.world.transform_scale, "Condition transform scale");
  gen_cmd->add_option("--noise", gen.world.noise, "Additive noise standard deviation");
  gen_cmd->add_option("--offset-scale", gen.world.offset_scale,
                      "Condition offset scale (negative: same as --transform-scale)");
  gen_cmd->add_option("--temporal-correlation", gen.world.temporal_correlation,
                      "Correlation between consecutive places");
  gen_cmd->add_option("--window", gen.world.window, "Window length the world must support");
  gen_cmd->add_option("--tolerance", gen.tolerance, "Same-place frame tolerance");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a composer with the triplet loss");
  train_cmd->add_option("--features", train.features, "Feature manifest or SPF1 file")
      ->required();
  train_cmd->add_option("--composer", train.composer, "grouping, fusion or recurrent")
      ->check(CLI::IsMember({"grouping", "fusion", "recurrent"}));
  train_cmd->add_option("--margin", train.config.margin, "Loss margin m");
  train_cmd->add_option("--learning-rate", train.config.learning_rate, "SGD step size");
  train_cmd->add_option("--epochs", train.config.epochs, "Number of epochs");
  train_cmd->add_option("--triplets-per-epoch", train.config.triplets_per_epoch, "Triplets per epoch");
  train_cmd->add_option("--substitution-prob", train.config.frame_substitution_prob,
                        "Recurrent frame substitution probability");
  train_cmd->add_option("--dropout", train.config.dropout_rate, "Recurrent output dropout rate");
  train_cmd->add_option("-n,--frames", train.config.n, "Frames per query sequence");
  train_cmd->add_option("--descriptor-dim", train.config.descriptor_dim, "Base descriptor size d");
  train_cmd->add_option("--fusion-activation", train.activation, "none or tanh");
  train_cmd->add_flag("--l2-normalize", train.config.fusion.l2_normalize,
                      "L2-normalise fusion and single-view outputs");

  IndexOptions index;
  auto* index_cmd = app.add_subcommand("index", "Build a reference place index");
  index_cmd->add_option("--reference", index.reference, "Feature manifest or SPF1 file")
      ->required();
  index_cmd->add_option("--checkpoint", index.checkpoint, "Composer checkpoint")
      ->required();
  index_cmd->add_option("--condition", index.condition, "Reference condition id (default: first)");
  index_cmd->add_option("-n,--frames", index.n, "Frames per window");
  index_cmd->add_option("--stride", index.stride, "Window stride");

  QueryOptions query;
  auto* query_cmd = app.add_subcommand("query", "Match query windows against an index");
  query_cmd->add_option("--index", query.index, "Index built by `index`")->required();
  query_cmd->add_option("--checkpoint", query.checkpoint, "Composer checkpoint")
      ->required();
  query_cmd->add_option("--queries", query.queries, "Feature manifest or SPF1 file")
      ->required();
  query_cmd->add_option("--condition", query.condition, "Query condition id (default: first)");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Run the NT/RG/RS suite and condition matrices");
  eval_cmd->add_option("--features", eval.features, "Feature manifest")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoints, "Composer checkpoints")
      ->required();
  eval_cmd->add_option("-n,--frames", eval.n, "Frames per query sequence");
  eval_cmd->add_option("--multipliers", eval.multipliers, "Random-speed step multipliers")->delimiter(',');
  eval_cmd->add_flag("--no-single-view", eval.no_single_view,
                     "Do not report the grouping head as a single-view baseline");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time exhaustive search over a (k, N) grid");
  bench_cmd->add_option("--k", bench.k, "Descriptor sizes")->delimiter(',');
  bench_cmd->add_option("--N", bench.n, "Database sizes")->delimiter(',');
  bench_cmd->add_option("--trials", bench.trials, "Timed queries per cell")->check(CLI::PositiveNumber);

  SeqSlamOptions seqslam;
  auto* seqslam_cmd = app.add_subcommand("seqslam", "Run the sequence-matching baseline");
  seqslam_cmd->add_option("--features", seqslam.features, "Feature manifest")
      ->required();
  seqslam_cmd->add_option("--query-condition", seqslam.query_condition,
                          "Query condition id (default: second)");
  seqslam_cmd->add_option("--reference-condition", seqslam.reference_condition,
                          "Reference condition id (default: first)");
  seqslam_cmd->add_flag("--reverse-query", seqslam.reverse_query, "Play the query condition backwards");
  seqslam_cmd->add_option("--seq-len", seqslam.params.seq_len, "Frames per matched line");
  seqslam_cmd->add_option("--vmin", seqslam.params.sweep.v_min, "Lowest velocity");
  seqslam_cmd->add_option("--vmax", seqslam.params.sweep.v_max, "Highest velocity");
  seqslam_cmd->add_option("--vsteps", seqslam.params.sweep.v_steps, "Velocity steps");
  seqslam_cmd->add_option("--enhance-window", seqslam.params.enhance_window,
                          "Contrast enhancement window");

  try {
    app.parse(argc, argv);
  } catch (const ConfigError& e) {
    return fail(4, "config", e.what());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    if (dynamic_cast<const CLI::FileError*>(&e) != nullptr) return fail(3, "input", e.what());
    return fail(2, "usage", e.what());
  }

  try {
    if (*gen_cmd) cmd_gen(g, gen);
    if (*train_cmd) cmd_train(g, train);
    if (*index_cmd) cmd_index(g, index);
    if (*query_cmd) cmd_query(g, query);
    if (*eval_cmd) cmd_eval(g, eval);
    if (*bench_cmd) cmd_bench(g, bench);
    if (*seqslam_cmd) cmd_seqslam(g, seqslam);
    std::string echo = app.get_subcommands().front()->get_name();
    if (*train_cmd) echo += "_" + train.composer;
    write_text(fs::path(g.out_dir) / (echo + "_config.json"), app.config_to_str(true, false));
  } catch (const LoadError& e) {
    return fail(3, "load", e.what());
  } catch (const ConfigError& e) {
    return fail(4, "config", e.what());
  } catch (const ShapeError& e) {
    return fail(4, "shape", e.what());
  } catch (const DivergenceError& e) {
    return fail(5, "divergence", e.what());
  } catch (const SamplingExhausted& e) {
    return fail(5, "sampling", e.what());
  } catch (const NoMatchError& e) {
    return fail(5, "no_match", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(3, "io", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
  return 0;
}
