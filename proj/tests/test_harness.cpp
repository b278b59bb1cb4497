#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "urbantrack/harness.hpp"

using namespace urbantrack;

namespace {

const std::string kScenario = std::string(URBANTRACK_SCENARIO_DIR) + "/intersection.json";

ExperimentConfig small_config(LoopMode mode, int runs, int scans) {
  ExperimentConfig cfg;
  cfg.scenario = load_scenario(kScenario);
  cfg.mode = mode;
  cfg.runs = runs;
  cfg.scans = scans;
  cfg.seed = 11;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("urbantrack_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("truth assignment") {
  const auto one = assign_tracks_to_truth({{10.0, 10.0}}, {{10.0, 10.0}}, 20.0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].distance == 0.0);

  const auto shared = assign_tracks_to_truth({{0.0, 3.0}, {0.0, 1.0}}, {{0.0, 0.0}}, 20.0);
  REQUIRE(shared.size() == 1);
  CHECK(shared[0].track == 1);

  CHECK(assign_tracks_to_truth({{100.0, 0.0}}, {{0.0, 0.0}}, 20.0).empty());

  // Well-separated 3x3 case: the greedy pairing is within 1% of the best
  // permutation's total distance.
  const std::vector<Point2> truth{{0.0, 0.0}, {30.0, 0.0}, {0.0, 30.0}};
  const std::vector<Point2> tracks{{1.0, 29.0}, {0.5, -0.5}, {28.0, 2.0}};
  const auto greedy = assign_tracks_to_truth(tracks, truth, 20.0);
  REQUIRE(greedy.size() == 3);
  double greedy_total = 0.0;
  for (const auto& a : greedy) greedy_total += a.distance;
  std::vector<int> perm{0, 1, 2};
  double best = 1e9;
  do {
    double total = 0.0;
    for (int i = 0; i < 3; ++i) total += (truth[static_cast<std::size_t>(i)] - tracks[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]).norm();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(greedy_total <= 1.01 * best);
}

TEST_CASE("comparison percentages") {
  const Comparison c = compare_results(7.0, 10.0, 1.1, 1.0);
  CHECK(c.rmse_reduction_pct == doctest::Approx(30.0));
  CHECK(c.confirmed_increase_pct == doctest::Approx(10.0));
  CHECK(std::isnan(compare_results(1.0, 0.0, 1.0, 0.0).rmse_reduction_pct));
}

TEST_CASE("shipped scenario loads") {
  const Scenario sc = load_scenario(kScenario);
  CHECK(sc.map.sensors.receivers.size() == 2);
  CHECK(sc.library.size() == 4);
  CHECK(sc.truth.offsets.size() == 2);
  CHECK(sc.truth_at(0).size() == 1);
  CHECK(sc.truth_at(40).size() == 2);
  const auto traj = sc.trajectory();
  CHECK((position_of(traj[140]) - Point2(2068.8, 1667.8)).norm() < 2.0);
  CHECK_THROWS(load_scenario(kScenario + ".missing"));
  CHECK_THROWS(parse_scenario(nlohmann::json::parse(R"({"name": "x"})")));
}

TEST_CASE("outputs and determinism") {
  const ExperimentConfig closed = small_config(LoopMode::kClosed, 2, 12);
  const ExperimentConfig open = small_config(LoopMode::kOpen, 2, 12);
  const ExperimentResult rc = run_experiment(closed);
  const ExperimentResult ro = run_experiment(open);
  CHECK(rc.per_scan.size() == 12);

  const auto dir = scratch("outputs");
  emit_outputs({rc, ro}, closed, dir.string());
  const std::string csv = slurp(dir / "metrics.csv");
  CHECK(csv.rfind("scan,mode,mean_confirmed,mean_rmse,model_prob_1,model_prob_2,model_prob_3,model_prob_4\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 25);
  CHECK(std::filesystem::exists(dir / "decisions.csv"));

  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary.contains("rmse_reduction_pct"));
  CHECK(summary.contains("confirmed_increase_pct"));
  CHECK(summary["modes"].contains("closed"));
  CHECK(summary["modes"].contains("open"));

  // Emitting again leaves the files byte-identical.
  const std::string first = slurp(dir / "summary.json");
  emit_outputs({rc, ro}, closed, dir.string());
  CHECK(slurp(dir / "summary.json") == first);
  CHECK(slurp(dir / "metrics.csv") == csv);

  // Same seed, same bytes; threading does not change results.
  ExperimentConfig threaded = closed;
  threaded.threads = 2;
  CHECK(metrics_csv({run_experiment(closed)}) == metrics_csv({rc}));
  CHECK(metrics_csv({run_experiment(threaded)}) == metrics_csv({rc}));
  ExperimentConfig reseeded = closed;
  reseeded.seed = 12;
  CHECK(metrics_csv({run_experiment(reseeded)}) != metrics_csv({rc}));

  const auto other = scratch("outputs_open");
  emit_outputs({ro}, open, other.string());
  const auto only_open = nlohmann::json::parse(slurp(other / "summary.json"));
  CHECK(only_open["rmse_reduction_pct"].is_null());
  const auto cmp = nlohmann::json::parse(compare_directories(dir.string(), other.string()));
  CHECK(cmp.contains("rmse_reduction_pct"));

  const auto plots = scratch("plots");
  export_plot_data({dir.string()}, plots.string());
  CHECK(std::filesystem::exists(plots / "rmse.csv"));
  CHECK(std::filesystem::exists(plots / "confirmed_tracks.csv"));
  CHECK(std::filesystem::exists(plots / "model_probabilities.csv"));

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(other);
  std::filesystem::remove_all(plots);
}

TEST_CASE("degenerate experiments") {
  ExperimentConfig one = small_config(LoopMode::kClosed, 1, 1);
  const ExperimentResult r = run_experiment(one);
  REQUIRE(r.per_scan.size() == 1);
  CHECK(r.per_scan[0].mean_confirmed == 0.0);
  CHECK(std::isnan(r.per_scan[0].rmse));

  ExperimentConfig empty = small_config(LoopMode::kOpen, 2, 6);
  empty.scenario.truth.offsets.clear();
  const ExperimentResult e = run_experiment(empty);
  for (const auto& a : e.per_scan) {
    CHECK(a.coverage == 0.0);
    CHECK(std::isnan(a.rmse));
  }
  CHECK(std::isnan(e.rmse));

  ExperimentConfig bad = one;
  bad.runs = 0;
  CHECK_THROWS(run_experiment(bad));
}

TEST_CASE("signal-level run completes") {
  ExperimentConfig cfg = small_config(LoopMode::kClosed, 1, 3);
  cfg.signal_level = true;
  const ExperimentResult r = run_experiment(cfg);
  CHECK(r.per_scan.size() == 3);
  CHECK(r.excluded_runs.empty());
}
