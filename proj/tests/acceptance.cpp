// Copyright 2026 The edgetrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the eleven acceptance criteria and prints one PASS/FAIL line each.
// Usage: edgetrack_acceptance [path/to/edgetrack-cli] [--only N,...]
// The CLI path is needed for the log-based criteria (10 and 11).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edgetrack/edgetrack.hpp"
#include "edgetrack/harness/config.hpp"
#include "edgetrack/harness/experiments.hpp"
#include "oracles.hpp"

namespace edgetrack::harness {
namespace {

namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

std::string join(const std::vector<double>& v, const char* f = "%.4f") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
  return s;
}

// --- 1 ---------------------------------------------------------------------

Verdict metric_oracle() {
  struct Case {
    std::string name;
    double got;
    double want;
  };
  std::vector<Case> cases;
  const BoundingBox unit{0, 0, 10, 10};
  cases.push_back({"iou identical", iou(unit, unit), 1.0});
  cases.push_back({"iou disjoint", iou(unit, {20, 20, 5, 5}), 0.0});
  cases.push_back({"iou touching edge", iou(unit, {10, 0, 10, 10}), 0.0});
  cases.push_back({"iou half shift x", iou(unit, {5, 0, 10, 10}), 50.0 / 150.0});
  cases.push_back({"iou half shift xy", iou(unit, {5, 5, 10, 10}), 25.0 / 175.0});
  cases.push_back({"iou contained", iou(unit, {2, 2, 5, 5}), 25.0 / 100.0});
  cases.push_back({"iou thin strip", iou({0, 0, 4, 2}, {1, 0, 4, 2}), 6.0 / 10.0});
  cases.push_back({"iou scaled", iou({0, 0, 1000, 1000}, {500, 0, 1000, 1000}), 1.0 / 3.0});
  cases.push_back({"iou fractional", iou({0.5, 0.5, 2, 2}, {1.5, 1.5, 2, 2}), 1.0 / 7.0});

  auto obj = [](int id, int label, BoundingBox b) { return ObjectDescriptor{id, label, b}; };
  const std::vector<ObjectDescriptor> truth{obj(1, 0, unit), obj(2, 0, {20, 0, 10, 10}), obj(3, 1, {40, 0, 10, 10}),
                                            obj(4, 1, {60, 0, 10, 10})};
  cases.push_back({"recall exact", frame_recall(truth, truth), 1.0});
  cases.push_back({"recall none", frame_recall(truth, std::vector<ObjectDescriptor>{}), 0.0});
  cases.push_back({"recall one of four", frame_recall(truth, std::vector<ObjectDescriptor>{truth[2]}), 0.25});
  {
    auto pred = truth;
    pred[0].box.x = 5;  // IoU 1/3
    pred[1].box.x = 22;  // IoU 8/12
    cases.push_back({"recall shifted", frame_recall(truth, pred), 0.75});
  }
  {
    auto pred = truth;
    pred[0].label = 7;
    pred[3].object_id = 99;
    cases.push_back({"recall identity and label", frame_recall(truth, pred), 0.5});
  }
  {
    // IoU exactly 1/2 is not a hit; slightly above is.
    const std::vector<ObjectDescriptor> t{obj(1, 0, {0, 0, 12, 10})};
    const std::vector<ObjectDescriptor> at{obj(1, 0, {0, 0, 6, 10})};
    const std::vector<ObjectDescriptor> above{obj(1, 0, {0, 0, 6.5, 10})};
    cases.push_back({"recall threshold strict", frame_recall(t, at), 0.0});
    cases.push_back({"recall threshold above", frame_recall(t, above), 1.0});
    cases.push_back({"recall custom threshold", frame_recall(t, at, 0.4), 1.0});
  }
  {
    const std::vector<ObjectDescriptor> t{obj(1, 0, unit), obj(2, 0, {20, 0, 10, 10}), obj(3, 0, {40, 0, 10, 10})};
    const std::vector<ObjectDescriptor> p{obj(2, 0, {20, 0, 10, 10})};
    cases.push_back({"recall one of three", frame_recall(t, p), 1.0 / 3.0});
  }
  cases.push_back({"mar single", mar(std::vector<double>{0.75}), 0.75});
  cases.push_back({"mar pair", mar(std::vector<double>{1.0, 0.5}), 0.75});
  cases.push_back({"mar thirds", mar(std::vector<double>{1.0, 1.0 / 3.0, 2.0 / 3.0}), 2.0 / 3.0});
  cases.push_back({"mar zeros", mar(std::vector<double>{0.0, 0.0, 0.0, 0.0}), 0.0});
  cases.push_back({"mar quarters", mar(std::vector<double>{0.25, 0.5, 0.75, 1.0}), 0.625});

  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    const double err = std::abs(c.got - c.want);
    if (err >= worst) {
      worst = err;
      worst_name = c.name;
    }
  }
  return {cases.size() >= 20 && worst < 1e-9,
          std::to_string(cases.size()) + " cases, max err " + fmt("%.3g", worst) + " (" + worst_name + ")"};
}

// --- 2 ---------------------------------------------------------------------

// Straight-line motion inside a large frame so the replay never loses boxes.
GroundTruthTrace timeline_trace(int frames, double fps) {
  GroundTruthTrace t;
  t.meta = {fps, 100000, 100000, frames};
  for (int i = 0; i < frames; ++i) t.frames.push_back({{1, 0, {1000.0 + 2.0 * i, 1000.0, 500.0, 500.0}}});
  return t;
}

Verdict katchup_timeline() {
  int points = 0, mismatches = 0;
  std::string first;
  for (double fps : {10.0, 15.0, 30.0}) {
    const auto trace = timeline_trace(400, fps);
    for (int d = 1; d <= 12; ++d) {
      const double delta = 0.125 * d;
      for (int s : {2, 3, 5, 8}) {
        const int n = static_cast<int>(std::ceil(delta * fps - 1e-9));
        const int closed = (n + s - 2) / (s - 1);
        TrackerParams p;
        p.ku_speed = s;
        Rng rng(static_cast<std::uint64_t>(points + 1));
        const int od = 3;
        const int arrival = od + n;
        auto app = apply_od_reference(trace.frame(od), od, arrival, true, p, trace, rng);
        auto job = std::get<KatchUpJob>(std::move(app));
        int calls = 0, done_at = -1;
        for (int live = arrival + 1; live < trace.frame_count(); ++live) {
          ++calls;
          auto r = katchup_advance(std::move(job), live, p, trace, rng);
          if (auto* c = std::get_if<CompletedKatchUp>(&r)) {
            done_at = c->completion_frame;
            break;
          }
          job = std::get<KatchUpJob>(std::move(r));
        }
        ++points;
        if (calls != closed || done_at != arrival + closed) {
          if (mismatches++ == 0) {
            first = "delta " + fmt("%.3f", delta) + " fps " + fmt("%.0f", fps) + " s " + std::to_string(s) +
                    ": stepped " + std::to_string(calls) + " closed " + std::to_string(closed);
          }
        }
      }
    }
  }
  return {points >= 100 && mismatches == 0,
          std::to_string(points) + " grid points, " + std::to_string(mismatches) + " mismatches" +
              (first.empty() ? "" : " (first: " + first + ")")};
}

// --- 3 ---------------------------------------------------------------------

Verdict gradient_check() {
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const int width = std::array<int, 3>{3, 8, 64}[static_cast<std::size_t>(i % 3)];
    const auto sizes = drl::Mlp::q_layout(64, 5, width, kActionCount);
    worst = std::max(worst, oracle::gradient_check(sizes, 1000 + static_cast<std::uint64_t>(i)));
  }
  return {worst < 1e-4, "10 networks (64-in, 5 hidden of width 3/8/64, 18-out), max rel err " + fmt("%.3g", worst)};
}

// --- 4 ---------------------------------------------------------------------

Verdict toy_mdp() {
  const auto r = oracle::train_toy_mdp(1);
  return {r.policy_matches && r.max_error < 0.05,
          std::string("greedy policy ") + (r.policy_matches ? "matches" : "differs") + ", max |Q-Q*| " +
              fmt("%.4f", r.max_error)};
}

// --- 5, 6 ------------------------------------------------------------------

struct LatencySweep {
  std::vector<double> latencies;
  std::vector<double> off;
  std::vector<double> on;
};

LatencySweep latency_sweep(const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  cfg.sweep.periods_s = {0.5};
  cfg.sweep.models = {2};
  cfg.sweep.ground_truth = true;
  const auto cells = run_sweep(cfg, SweepAxis::kLatency, {false, true}, cfg.seed);
  LatencySweep s;
  s.latencies = cfg.sweep.latencies;
  for (const auto& c : cells) (c.katchup ? s.on : s.off).push_back(c.result.mean_mar);
  return s;
}

double range_of(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
}

Verdict latency_trend(const LatencySweep& s, int seeds) {
  bool monotone = true;
  for (std::size_t i = 1; i < s.off.size(); ++i) monotone = monotone && s.off[i] < s.off[i - 1];
  const double drop = (s.off.front() - s.off.back()) / s.off.front();
  return {monotone && drop >= 0.15 && drop <= 0.35 && seeds >= 20,
          "KU off mAR [" + join(s.off) + "], " + (monotone ? "monotone" : "not monotone") + ", drop " +
              fmt("%.1f%%", 100.0 * drop) + ", " + std::to_string(seeds) + " seeds"};
}

Verdict katchup_resilience(const LatencySweep& s) {
  const double ratio = range_of(s.on) / range_of(s.off);
  bool dominates = true;
  for (std::size_t i = 0; i < s.latencies.size(); ++i) {
    if (s.latencies[i] >= 0.5 - 1e-12) dominates = dominates && s.on[i] >= s.off[i];
  }
  return {ratio <= 0.5 && dominates, "KU on mAR [" + join(s.on) + "], range ratio " + fmt("%.3f", ratio) +
                                         (dominates ? ", on >= off at every latency >= 0.5 s"
                                                    : ", on < off at some latency >= 0.5 s")};
}

// --- 7 ---------------------------------------------------------------------

Verdict motion_ordering(const ExperimentConfig& cfg) {
  std::vector<double> mars;
  for (double speed : cfg.sweep.motion_speeds) {
    Scenario sc;
    sc.speed = speed;
    sc.pattern = parse_pattern(cfg.sweep.pattern);
    sc.action = Action{false, period_index_for(1.5, cfg.suite.fps), 1};
    sc.latency_s = 0.5;
    sc.ground_truth = false;
    mars.push_back(run_scenario(cfg, sc, cfg.sweep.seeds, cfg.seed).mean_mar);
  }
  bool ok = mars.size() == 3;
  for (std::size_t i = 1; ok && i < mars.size(); ++i) ok = mars[i - 1] - mars[i] >= 0.05;
  return {ok, "speeds [" + join(cfg.sweep.motion_speeds, "%.3g") + "] mAR [" + join(mars) + "]"};
}

// --- 8, 9 ------------------------------------------------------------------

struct PolicyRun {
  EpisodeMetrics all;
  EpisodeMetrics q_low;
  EpisodeMetrics q_high;
};

PolicyRun pool(const std::vector<EvalRow>& rows, const std::string& policy, double q_low, double q_high) {
  PolicyRun r;
  for (const auto& row : rows) {
    if (row.policy != policy) continue;
    r.all.merge(row.metrics);
    if (row.quality == q_low) r.q_low.merge(row.metrics);
    if (row.quality == q_high) r.q_high.merge(row.metrics);
  }
  return r;
}

double class_ku(const EpisodeMetrics& m, MotionClass c) {
  const auto& u = m.by_class[static_cast<std::size_t>(c)];
  return u.frames > 0 ? u.ku_frames / u.frames : 0.0;
}

double class_util(const EpisodeMetrics& m, MotionClass c) {
  const auto& u = m.by_class[static_cast<std::size_t>(c)];
  return u.frames > 0 ? u.util_frames / u.frames : 0.0;
}

std::pair<Verdict, Verdict> policy_criteria(const ExperimentConfig& cfg, int training_seeds) {
  const auto suite = build_suite(cfg);
  const auto split = split_videos(static_cast<int>(suite.size()), cfg.train_fraction, cfg.seed);
  const double q_low = *std::min_element(cfg.channel_qualities.begin(), cfg.channel_qualities.end());
  const double q_high = *std::max_element(cfg.channel_qualities.begin(), cfg.channel_qualities.end());
  const std::uint64_t eval_seed = derive_seed(cfg.seed, 9000);

  const auto fixed_rows = evaluate(cfg, suite, split.eval, {policy_1(), policy_2()}, {nullptr, nullptr},
                                   make_normalizer(cfg), eval_seed);
  const auto p1 = pool(fixed_rows, "policy1", q_low, q_high);
  const auto p2 = pool(fixed_rows, "policy2", q_low, q_high);

  int passing = 0;
  std::string per_seed;
  double d_quality = 0.0, d_class_ku = 0.0, d_class_util = 0.0;
  for (int s = 1; s <= training_seeds; ++s) {
    auto result = train(cfg, suite, split, static_cast<std::uint64_t>(s));
    const auto rows = evaluate(cfg, suite, split.eval, {learned_policy("learned", "")}, {&result.network},
                               result.normalizer, eval_seed);
    const auto l = pool(rows, "learned", q_low, q_high);
    const bool ok = l.all.mar() >= p2.all.mar() + 0.10 && l.all.mar() >= p1.all.mar() - 0.02 &&
                    l.all.ku_usage() <= 0.5 && l.all.utilization() <= 0.7;
    passing += ok ? 1 : 0;
    per_seed += " s" + std::to_string(s) + "(mar " + fmt("%.3f", l.all.mar()) + " ku " +
                fmt("%.2f", l.all.ku_usage()) + " util " + fmt("%.2f", l.all.utilization()) + ")";
    d_quality += l.q_low.ku_usage() - l.q_high.ku_usage();
    d_class_ku += class_ku(l.all, MotionClass::kFastest) - class_ku(l.all, MotionClass::kSlow);
    d_class_util += class_util(l.all, MotionClass::kFastest) - class_util(l.all, MotionClass::kSlow);
    std::fprintf(stderr, "  training seed %d done: mar %.4f\n", s, l.all.mar());
  }
  d_quality /= training_seeds;
  d_class_ku /= training_seeds;
  d_class_util /= training_seeds;

  Verdict v8{training_seeds >= 5 && 2 * passing > training_seeds,
             std::to_string(passing) + "/" + std::to_string(training_seeds) + " seeds pass; policy1 mar " +
                 fmt("%.3f", p1.all.mar()) + ", policy2 mar " + fmt("%.3f", p2.all.mar()) + ";" + per_seed};
  Verdict v9{training_seeds >= 5 && d_quality > 0.0 && d_class_ku > 0.0 && d_class_util > 0.0,
             "mean over seeds: ku(q" + fmt("%.0f", q_low) + ")-ku(q" + fmt("%.0f", q_high) + ") " +
                 fmt("%.4f", d_quality) + ", ku(fastest)-ku(slow) " + fmt("%.4f", d_class_ku) +
                 ", util(fastest)-util(slow) " + fmt("%.4f", d_class_util)};
  return {v8, v9};
}

// --- 10, 11 ----------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

const char* kSmallOverrides =
    " --override suite.videos=6 --override suite.frames=150 --override eval_seeds=2"
    " --override trainer.episodes=4 --override trainer.warmup=32 --override trainer.batch_size=16"
    " --override sweep.seeds=3 --override sweep.latencies=[0.25,1.0]";

Verdict energy_accounting(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "CLI path not given"};
  const fs::path out = work / "energy";
  fs::remove_all(out);
  const int rc = run_cli(cli, "eval --all-videos --fixed 1,1,0 --fixed 1,2,2 --out \"" + out.string() + "\"" +
                                  kSmallOverrides);
  if (rc != 0) return {false, "eval exited with " + std::to_string(rc)};
  const auto rows = read_csv(out / "eval.csv");
  if (rows.size() < 2) return {false, "eval.csv has no data rows"};
  const auto& header = rows[0];
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  const auto ku = col("ku_fraction"), power = col("power_mw"), energy = col("energy_power_mw");
  if (ku >= header.size() || power >= header.size() || energy >= header.size()) return {false, "missing columns"};
  int exact = 0, checked = 0, with_ku = 0;
  double worst_energy = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double f = std::stod(rows[i][ku]);
    const double p = std::stod(rows[i][power]);
    const double e = std::stod(rows[i][energy]);
    const double want = 3512.0 + (3939.0 - 3512.0) * f;
    ++checked;
    exact += p == want ? 1 : 0;
    with_ku += f > 0.0 ? 1 : 0;
    worst_energy = std::max(worst_energy, std::abs(e - want) / want);
  }
  return {exact == checked && with_ku > 0 && worst_energy < 1e-9,
          std::to_string(exact) + "/" + std::to_string(checked) + " rows exact (" + std::to_string(with_ku) +
              " with re-tracking), integrated energy max rel dev " + fmt("%.3g", worst_energy)};
}

Verdict determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "CLI path not given"};
  struct Command {
    std::string name;
    std::string args;
    std::vector<std::string> files;
  };
  const std::vector<Command> commands{
      {"synth", "synth", {"synth_index.csv"}},
      {"train", "train --checkpoint-every 0", {"train_log.csv", "checkpoint.qnet"}},
      {"eval", "eval --segment-log", {"eval.csv", "eval_summary.csv", "segments.csv"}},
      {"sweep", "sweep --axis latency --ku both", {"sweep_latency.csv"}},
  };
  int compared = 0;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = work / ("determinism_" + std::to_string(run));
    fs::remove_all(dir);
    for (const auto& c : commands) {
      std::string args = c.args + " --seed 7 --out \"" + (dir / c.name).string() + "\"" + kSmallOverrides;
      if (c.name == "eval") args += " --checkpoint \"" + (dir / "train" / "checkpoint.qnet").string() + "\"";
      const int rc = run_cli(cli, args);
      if (rc != 0) return {false, c.name + " exited with " + std::to_string(rc)};
    }
  }
  for (const auto& c : commands) {
    for (const auto& f : c.files) {
      const auto a = read_lines(work / "determinism_0" / c.name / f);
      const auto b = read_lines(work / "determinism_1" / c.name / f);
      if (a.size() < 2) return {false, c.name + "/" + f + " is empty"};
      if (a != b) return {false, c.name + "/" + f + " differs between runs"};
      ++compared;
    }
  }
  return {true, std::to_string(compared) + " files byte-identical across two runs (synth, train, eval, sweep)"};
}

}  // namespace
}  // namespace edgetrack::harness

int main(int argc, char** argv) {
  using namespace edgetrack;
  using namespace edgetrack::harness;
  std::string cli;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string n;
      while (std::getline(ss, n, ',')) only.insert(std::stoi(n));
    } else {
      cli = a;
    }
  }
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  const ExperimentConfig cfg;
  const fs::path work = fs::temp_directory_path() / "edgetrack_acceptance";
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int n, const std::string& name, const Verdict& v, double seconds) {
    std::printf("[%s] %2d %-22s %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", n, name.c_str(), v.detail.c_str(),
                seconds);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  };
  auto timed = [&](int n, const std::string& name, const std::function<Verdict()>& fn) {
    if (!wanted(n)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    report(n, name, v, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };

  timed(1, "metric-oracle", metric_oracle);
  timed(2, "katchup-timeline", katchup_timeline);
  timed(3, "gradient-check", gradient_check);
  timed(4, "toy-mdp", toy_mdp);

  if (wanted(5) || wanted(6)) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sweep = latency_sweep(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (wanted(5)) report(5, "latency-trend", latency_trend(sweep, cfg.sweep.seeds), secs);
    if (wanted(6)) report(6, "katchup-resilience", katchup_resilience(sweep), 0.0);
  }
  timed(7, "motion-ordering", [&] { return motion_ordering(cfg); });

  if (wanted(8) || wanted(9)) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v8, v9;
    try {
      std::tie(v8, v9) = policy_criteria(cfg, 5);
    } catch (const std::exception& e) {
      v8 = v9 = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (wanted(8)) report(8, "policy-comparison", v8, secs);
    if (wanted(9)) report(9, "context-adaptivity", v9, 0.0);
  }
  timed(10, "energy-accounting", [&] { return energy_accounting(cli, work); });
  timed(11, "determinism", [&] { return determinism(cli, work); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
