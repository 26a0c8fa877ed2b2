// Acceptance harness: one PASS/FAIL line per primary criterion on stdout,
// per-seed and per-measurement detail in the report file (first argument).
// Exits non-zero only when the harness itself cannot run.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "oracles.hpp"
#include "seqvpr/seqvpr.hpp"

using namespace seqvpr;
namespace fs = std::filesystem;

namespace {

std::ofstream report;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

void criterion(const std::string& name, double budget_s, const std::function<Verdict()>& body) {
  const auto start = Clock::now();
  Verdict v = body();
  const double elapsed = seconds_since(start);
  if (budget_s > 0.0 && elapsed > budget_s) {
    v.pass = false;
    v.detail += fmt("; over the %.0f s budget", budget_s);
  }
  const std::string line =
      fmt("%s %s: %s (%.2f s)", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(), elapsed);
  std::printf("%s\n", line.c_str());
  std::fflush(stdout);
  report << line << "\n\n";
}

std::vector<Vec> random_frames(std::size_t n, Eigen::Index dim, std::mt19937_64& rng) {
  std::vector<Vec> frames;
  for (std::size_t i = 0; i < n; ++i) frames.push_back(oracle::random_vec(dim, rng));
  return frames;
}

Verdict loss_correctness() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> margin(0.01, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index dim = 1 + trial % 16;
    const Vec a = oracle::random_vec(dim, rng), p = oracle::random_vec(dim, rng),
              n = oracle::random_vec(dim, rng);
    const double m = margin(rng);
    worst = std::max(worst, std::abs(wl_loss(a, p, n, m) - oracle::wl_loss(a, p, n, m)));
  }
  const Vec a = oracle::random_vec(8, rng), p = oracle::random_vec(8, rng);
  const bool coincident = wl_loss(a, p, a, 0.7) == 1.0;
  const Vec z = Vec::Zero(2), e = (Vec(2) << 1.0, 0.0).finished();
  const bool boundary = wl_loss(z, z, e, 1.0) == 0.0;
  return {worst <= 1e-12 && coincident && boundary,
          fmt("1000 triples, max |diff| %.2e; d_a=d_n gives 1: %s; hinge boundary gives 0: %s", worst,
              coincident ? "yes" : "no", boundary ? "yes" : "no")};
}

Verdict gradient_checks() {
  std::mt19937_64 rng(202);
  constexpr int kInstances = 60;
  double loss_worst = 0.0, fusion_worst = 0.0, lstm_worst = 0.0;
  int loss_done = 0;
  while (loss_done < kInstances) {
    const Eigen::Index dim = 2 + loss_done % 6;
    const Vec a = oracle::random_vec(dim, rng), p = oracle::random_vec(dim, rng, 0.3),
              n = oracle::random_vec(dim, rng);
    if (wl_loss(a, p, n, 1.0) < 0.05) continue;
    loss_worst = std::max(loss_worst, oracle::loss_gradient_error(a, p, n, 1.0));
    ++loss_done;
  }
  const std::array<FusionOptions, 4> options = {FusionOptions{Activation::kNone, false},
                                                FusionOptions{Activation::kTanh, false},
                                                FusionOptions{Activation::kNone, true},
                                                FusionOptions{Activation::kTanh, true}};
  for (int i = 0; i < kInstances; ++i) {
    auto p = FusionParams::random(2, 3, 2, rng, options[static_cast<std::size_t>(i % 4)]);
    p.b = oracle::random_vec(2, rng, 0.3);
    fusion_worst = std::max(fusion_worst, oracle::fusion_gradient_error(p, random_frames(2, 3, rng),
                                                                        oracle::random_vec(2, rng)));
  }
  for (int i = 0; i < kInstances; ++i) {
    const auto p = LstmParams::random(3, 2, rng);
    lstm_worst = std::max(lstm_worst, oracle::lstm_gradient_error(p, random_frames(2 + i % 3, 3, rng),
                                                                  oracle::random_vec(2, rng)));
  }
  const bool ok = loss_worst <= 1e-5 && fusion_worst <= 1e-5 && lstm_worst <= 1e-5;
  return {ok, fmt("%d instances each, worst relative error: wl_loss_grad %.2e, grad_fusion %.2e, "
                  "grad_recurrent %.2e",
                  kInstances, loss_worst, fusion_worst, lstm_worst)};
}

Verdict nn_oracle() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> small(-2, 2), dims(1, 40), sizes(1, 200), ids(0, 60);
  std::normal_distribution<float> normal;
  int agree = 0, ties = 0;
  constexpr int kCases = 1000;
  for (int trial = 0; trial < kCases; ++trial) {
    const bool integer = trial % 2 == 0;
    auto value = [&] { return integer ? float(small(rng)) : normal(rng); };
    PlaceIndex index;
    index.dim = static_cast<std::size_t>(dims(rng));
    index.window = 1;
    std::vector<std::uint32_t> starts;
    const int count = sizes(rng);
    for (int e = 0; e < count; ++e) {
      std::vector<float> row(index.dim);
      for (auto& x : row) x = value();
      const auto id = static_cast<std::uint32_t>(ids(rng));
      index.add(row, IndexEntry{id, id, {id}});
      starts.push_back(id);
    }
    std::vector<float> q(index.dim);
    for (auto& x : q) x = value();
    const auto got = query_nn(index, q);
    const auto want = oracle::nearest(index.data, index.dim, starts, q);
    agree += got.entry == want ? 1 : 0;
    int at_min = 0;
    for (std::size_t i = 0; i < index.size(); ++i)
      at_min += squared_distance(q, index.descriptor(i)) == got.sq_distance ? 1 : 0;
    ties += at_min > 1 ? 1 : 0;
  }
  return {agree == kCases,
          fmt("%d/%d cases agree with the brute-force argmin (%d cases had tied minima)", agree, kCases, ties)};
}

Verdict lstm_streaming() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> len(1, 12), dim(1, 16), hid(1, 16);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = LstmParams::random(static_cast<std::size_t>(dim(rng)), static_cast<std::size_t>(hid(rng)), rng);
    const auto frames = random_frames(static_cast<std::size_t>(len(rng)), static_cast<Eigen::Index>(p.input_dim), rng);
    auto state = LstmState::zero(p.hidden);
    for (const auto& f : frames) state = step_recurrent(p, state, f);
    worst = std::max(worst, (state.h - compose_recurrent(p, frames).descriptor).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, fmt("100 draws, max |h_step - h_whole| %.2e", worst)};
}

/// The standard benchmark protocol used for the composer robustness comparison.
struct BenchmarkProtocol {
  std::size_t test_places = 200;
  std::size_t train_places = 1000;
  double temporal_correlation = 0.9;
  TrainConfig train;

  BenchmarkProtocol() {
    train.margin = 0.5;
    train.learning_rate = 1e-2;
    train.epochs = 5;
    train.triplets_per_epoch = 2000;
    train.dropout_rate = 0.5;
    train.frame_substitution_prob = 0.5;
    train.descriptor_dim = 128;
    train.n = 3;
  }
};

Verdict robustness_ordering() {
  const BenchmarkProtocol protocol;
  int count_a = 0, count_b = 0, count_c = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    WorldConfig wc;
    wc.num_places = protocol.test_places + protocol.train_places;
    wc.dim = 64;
    wc.conditions = 2;
    wc.transform_scale = 0.5;
    wc.noise = 0.1;
    wc.temporal_correlation = protocol.temporal_correlation;
    wc.rng_seed = seed;
    const auto [train, test] = split_places(generate_world(wc), protocol.train_places);
    TrainConfig tc = protocol.train;
    tc.rng_seed = seed;
    const auto grouping = train_composer(ComposerKind::kGrouping, train, tc).model;
    const auto fusion = train_composer(ComposerKind::kFusion, train, tc).model;
    const auto recurrent = train_composer(ComposerKind::kRecurrent, train, tc).model;
    SuiteConfig sc;
    sc.perturb_seed = seed;
    const auto rep = run_experiment_suite(test,
                                          {{"single_view", grouping, 1},
                                           {"grouping", grouping, 3},
                                           {"fusion", fusion, 3},
                                           {"recurrent", recurrent, 3}},
                                          sc);
    const auto& sv = rep.summary("single_view");
    const auto& g = rep.summary("grouping");
    const auto& f = rep.summary("fusion");
    const auto& r = rep.summary("recurrent");
    auto nt = [](const ComposerSummary& s) { return s.at(Experiment::kNormal); };
    auto drop = [&](const ComposerSummary& s) { return nt(s) - s.at(Experiment::kRandomSpeed); };
    const bool a = nt(g) > nt(sv) && nt(f) > nt(sv) && nt(r) > nt(sv);
    const bool b = drop(g) > drop(f) && drop(g) > drop(r);
    const bool c = r.stddev < g.stddev && r.stddev < f.stddev;
    count_a += a;
    count_b += b;
    count_c += c;
    report << "seed " << seed << "\n";
    for (const auto& s : rep.composers)
      report << fmt("  %-12s NT %.3f  RG %.3f  RS %.3f  mean %.3f  stddev %.3f\n", s.composer.c_str(),
                    s.at(Experiment::kNormal), s.at(Experiment::kReverseGear),
                    s.at(Experiment::kRandomSpeed), s.mean, s.stddev);
    report << fmt("  (a) %s  (b) %s  (c) %s\n", a ? "yes" : "no", b ? "yes" : "no", c ? "yes" : "no");
    report.flush();
  }
  const bool ok = count_a >= 4 && count_b >= 4 && count_c >= 4;
  return {ok, fmt("seeds 0-4: (a) multi-view NT above single view %d/5, (b) grouping has the largest "
                  "NT-to-RS drop %d/5, (c) recurrent has the smallest stddev %d/5; need 4/5 each",
                  count_a, count_b, count_c)};
}

Verdict seqslam_sanity() {
  WorldConfig clean;
  clean.num_places = 200;
  clean.dim = 64;
  clean.transform_scale = 0.0;
  clean.noise = 0.0;
  clean.offset_scale = 0.0;
  const auto aligned = generate_world(clean);
  const SeqSlamParams params;
  const auto forward = run_seqslam(aligned.traversals[1], aligned.traversals[0], params, {});
  std::size_t exact = 0;
  for (const auto& m : forward.matches) exact += m.reference_start == m.query_start ? 1 : 0;

  WorldConfig wc;
  wc.num_places = 200;
  wc.dim = 64;
  wc.temporal_correlation = BenchmarkProtocol{}.temporal_correlation;
  const auto world = generate_world(wc);
  const double single = single_frame_precision(world.traversals[1], world.traversals[0], {});
  const auto reversed = perturb_reverse(world, 1);
  const double rev = run_seqslam(reversed.traversals[1], reversed.traversals[0], params, {}).precision;
  const bool ok = exact == forward.matches.size() && rev < single - 0.10;
  return {ok, fmt("noiseless aligned: %zu/%zu starts recovered; reversed query precision %.3f vs "
                  "single-frame NN %.3f",
                  exact, forward.matches.size(), rev, single)};
}

Verdict search_scaling() {
  constexpr std::size_t kTrials = 20;
  auto mean_ms = [&](std::size_t k, std::size_t n) {
    const auto r = bench_search(k, n, kTrials, 7);
    report << fmt("  k=%zu N=%zu mean %.3f ms stddev %.3f ms\n", k, n, r.mean_ms, r.stddev_ms);
    report.flush();
    return r.mean_ms;
  };
  const double k128_100 = mean_ms(128, 100000), k128_200 = mean_ms(128, 200000);
  const double k384_100 = mean_ms(384, 100000), k384_200 = mean_ms(384, 200000);
  const double k256_100 = mean_ms(256, 100000), k768_100 = mean_ms(768, 100000);
  const double rn128 = k128_200 / k128_100, rn384 = k384_200 / k384_100;
  const double rk128 = k256_100 / k128_100, rk384 = k768_100 / k384_100;
  auto in_band = [](double r) { return r >= 1.5 && r <= 3.0; };
  const bool ok = in_band(rn128) && in_band(rn384) && in_band(rk128) && in_band(rk384) &&
                  k128_100 < k384_100 && k128_200 < k384_200;
  return {ok, fmt("N doubling ratio %.2f (k=128), %.2f (k=384); k doubling ratio %.2f (128->256), "
                  "%.2f (384->768); k=128 %.2f/%.2f ms vs k=384 %.2f/%.2f ms at N=100K/200K",
                  rn128, rn384, rk128, rk384, k128_100, k128_200, k384_100, k384_200)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEQVPR_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const std::vector<std::string> outputs = {"train/manifest.json", "train/condition_0.spf", "fusion.spw",
                                            "recurrent.spw", "index.spx", "report.json", "report.csv",
                                            "condition_matrix_fusion.csv"};
  std::vector<std::vector<std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    const auto dir = fs::temp_directory_path() / ("seqvpr_acceptance_run" + std::to_string(run));
    fs::remove_all(dir);
    const std::string out = "--seed 11 --out-dir " + dir.string();
    const std::string train = dir.string() + "/train/manifest.json";
    const std::string test = dir.string() + "/test/manifest.json";
    const std::string common = " --epochs 1 --triplets-per-epoch 300 --descriptor-dim 32 --learning-rate 0.01";
    int rc = run_cli(out + " gen --places 100 --train-places 200 --dim 32 --temporal-correlation 0.9");
    rc |= run_cli(out + " train --features " + train + " --composer fusion" + common);
    rc |= run_cli(out + " train --features " + train + " --composer recurrent" + common);
    rc |= run_cli(out + " index --reference " + test + " --checkpoint " + dir.string() + "/fusion.spw");
    rc |= run_cli(out + " eval --features " + test + " --checkpoint " + dir.string() + "/fusion.spw " +
                  dir.string() + "/recurrent.spw");
    if (rc != 0) return {false, fmt("pipeline run %d exited with a non-zero status", run + 1)};
    std::vector<std::string> contents;
    for (const auto& name : outputs) contents.push_back(slurp(dir / name));
    runs.push_back(std::move(contents));
  }
  std::size_t identical = 0;
  std::string differing;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const bool same = !runs[0][i].empty() && runs[0][i] == runs[1][i];
    identical += same ? 1 : 0;
    if (!same) differing += " " + outputs[i];
  }
  return {identical == outputs.size(),
          fmt("gen -> train -> index -> eval twice with seed 11: %zu/%zu artefacts byte-identical%s%s",
              identical, outputs.size(), differing.empty() ? "" : "; differing:", differing.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path report_path = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_report.txt");
  report.open(report_path);
  if (!report) {
    std::fprintf(stderr, "cannot write %s\n", report_path.string().c_str());
    return 1;
  }
  try {
    criterion("loss_correctness", 1, loss_correctness);
    criterion("gradient_checks", 30, gradient_checks);
    criterion("nn_oracle_equivalence", 30, nn_oracle);
    criterion("lstm_streaming_consistency", 0, lstm_streaming);
    criterion("composer_robustness_ordering", 600, robustness_ordering);
    criterion("seqslam_sanity", 60, seqslam_sanity);
    criterion("search_scaling", 300, search_scaling);
    criterion("determinism", 0, determinism);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance harness error: %s\n", e.what());
    return 1;
  }
  std::printf("report written to %s\n", report_path.string().c_str());
  return 0;
}
