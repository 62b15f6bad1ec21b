#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lisreduce/experiment.hpp"
#include "lisreduce/matrix_market.hpp"
#include "lisreduce/serialize.hpp"

using namespace lisreduce;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_bar_config() {
  ExperimentConfig cfg;
  cfg.model = "bar";
  cfg.observation_count = 6;
  cfg.noise_variance = 1e-5;
  cfg.replications = 8;
  cfg.ranks = {2, 6};
  cfg.methods = {"lis", "pod", "olr"};
  cfg.pod_snapshots = 6;
  cfg.seeds = SeedRoles{11, 22, 33};
  return cfg;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("lisreduce_test_" + name);
}

}  // namespace

TEST_CASE("mean_error_metric: trivial and handcrafted values") {
  std::vector<Vector> exact{Vector::Constant(3, 1.0), Vector::Constant(3, 2.0)};
  REQUIRE(mean_error_metric(exact, exact) == 0.0);

  std::vector<Vector> twice{2.0 * exact[0]};
  std::vector<Vector> base{exact[0]};
  REQUIRE(mean_error_metric(twice, base) == Catch::Approx(1.0).epsilon(1e-15));

  // three handcrafted replications, summed by hand
  Vector e1(2), e2(2), e3(2), a1(2), a2(2), a3(2);
  e1 << 3.0, 4.0;   // norm 5
  a1 << 3.0, 4.3;   // diff norm 0.3 -> 0.06
  e2 << 1.0, 0.0;   // norm 1
  a2 << 1.1, 0.0;   // 0.1
  e3 << 0.0, 2.0;   // norm 2
  a3 << 0.0, 1.5;   // 0.25
  const double expected = (0.3 / 5.0 + 0.1 + 0.5 / 2.0) / 3.0;
  REQUIRE(mean_error_metric({a1, a2, a3}, {e1, e2, e3}) ==
          Catch::Approx(expected).epsilon(1e-15));

  REQUIRE_THROWS_AS(mean_error_metric({a1}, {Vector::Zero(2)}), config_error);
  REQUIRE_THROWS_AS(mean_error_metric({a1, a2}, {e1}), config_error);
}

TEST_CASE("matrix market round trip and format") {
  SeededStream s(61);
  Matrix m(3, 2);
  for (Index j = 0; j < 2; ++j)
    for (Index i = 0; i < 3; ++i) m(i, j) = s.normal();
  const auto path = temp_file("mm.mtx");
  save_matrix_market(m, path.string(), "test matrix");
  const std::string text = slurp(path.string());
  REQUIRE(text.rfind("%%MatrixMarket matrix array real general", 0) == 0);
  const Matrix back = load_matrix_market(path.string());
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 2);
  REQUIRE((back - m).cwiseAbs().maxCoeff() == 0.0);  // 17 significant digits survive
  fs::remove(path);
}

TEST_CASE("model container round trip") {
  ModelBundle bar = build_bar(20);
  const json j = model_to_json(bar);
  const ModelBundle back = model_from_json(j);
  REQUIRE(back.name == "bar");
  REQUIRE((back.system.stiffness() - bar.system.stiffness()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.prior->sqrt_factor - bar.prior->sqrt_factor).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.load_map.map - bar.load_map.map).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.system.dof_labels()[3].kind == DofKind::translation);
  REQUIRE(back.constants.at("rigidity") == 4e8);

  json corrupted = j;
  corrupted["version"] = 999;
  REQUIRE_THROWS_AS(model_from_json(corrupted), config_error);
}

TEST_CASE("reduced container round trip preserves the online solve") {
  ModelBundle bundle = build_bar(30);
  SeededStream loc(5);
  ObservationOperator obs = draw_observation_indices(bundle.system, 4, loc);
  LinearForwardProblem prob(std::move(bundle.system), obs, bundle.prior,
                            GaussianBelief::isotropic(4, 1e-5));
  const ReducedInverseProblem red = reduce_petrov_galerkin(prob, lis_basis(prob, 3));

  const json j = reduced_to_json(red, obs);
  const StoredReducedProblem back = reduced_from_json(j);
  REQUIRE(back.obs.indices == obs.indices);

  SeededStream data_stream(77);
  const SyntheticData data = generate_data(prob, data_stream);
  const PosteriorApproximation before = lis_mr_posterior(red, data.y);
  const PosteriorApproximation after = lis_mr_posterior(back.problem, data.y);
  REQUIRE((before.mean - after.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_experiment: report covers the method/rank grid deterministically") {
  const ExperimentConfig cfg = small_bar_config();
  const ErrorReport report = run_experiment(cfg);
  REQUIRE(report.rows.size() == 6);
  for (const ErrorRow& row : report.rows) {
    REQUIRE(row.mean_rel_error >= 0.0);
    REQUIRE(row.foerstner >= 0.0);
  }
  // replay: identical metric values bit for bit
  const ErrorReport replay = run_experiment(cfg);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    REQUIRE(report.rows[i].mean_rel_error == replay.rows[i].mean_rel_error);
    REQUIRE(report.rows[i].foerstner == replay.rows[i].foerstner);
  }
  // LIS at full rank beats POD on the bar by a wide margin
  const auto find = [&](const std::string& method, Index r) {
    for (const ErrorRow& row : report.rows)
      if (row.method == method && row.r == r) return row;
    FAIL("row missing");
    return ErrorRow{};
  };
  REQUIRE(find("lis", 6).mean_rel_error < find("pod", 6).mean_rel_error);
  REQUIRE(find("lis", 6).mean_rel_error <= 1e-8);
}

TEST_CASE("run_experiment: foerstner is data independent across replications") {
  ExperimentConfig cfg = small_bar_config();
  cfg.methods = {"lis"};
  cfg.ranks = {3};
  const ErrorReport a = run_experiment(cfg);
  cfg.seeds.data = 4444;  // different data, same locations/snapshots
  const ErrorReport b = run_experiment(cfg);
  REQUIRE(a.rows[0].foerstner == b.rows[0].foerstner);
  REQUIRE(a.rows[0].mean_rel_error != b.rows[0].mean_rel_error);
}

TEST_CASE("emit_report: header-only CSV for an empty report and json round trip") {
  ErrorReport report;
  report.config = small_bar_config();
  report.digest = config_digest(report.config);
  const auto csv_path = temp_file("empty.csv");
  emit_report(report, csv_path.string(), "csv");
  REQUIRE(slurp(csv_path.string()) == "method,r,mean_rel_error,foerstner,offline_s,online_s\n");
  fs::remove(csv_path);

  report.rows.push_back(ErrorRow{"lis", 3, 1.25e-9, 3.5e-7, 0.75, 0.001});
  const auto json_path = temp_file("report.json");
  emit_report(report, json_path.string(), "json");
  const ErrorReport back = report_from_json(read_json_file(json_path.string()));
  REQUIRE(back.digest == report.digest);
  REQUIRE(back.rows.size() == 1);
  REQUIRE(back.rows[0].mean_rel_error == report.rows[0].mean_rel_error);
  REQUIRE(back.rows[0].method == "lis");
  REQUIRE(back.config.seeds.data == report.config.seeds.data);
  fs::remove(json_path);
}

TEST_CASE("emit_report: seeded runs are byte identical with timings zeroed") {
  ExperimentConfig cfg = small_bar_config();
  cfg.methods = {"lis", "olr"};
  const ErrorReport a = run_experiment(cfg);
  const ErrorReport b = run_experiment(cfg);
  const auto pa = temp_file("golden_a.csv");
  const auto pb = temp_file("golden_b.csv");
  emit_report(a, pa.string(), "csv", false);
  emit_report(b, pb.string(), "csv", false);
  REQUIRE(slurp(pa.string()) == slurp(pb.string()));
  fs::remove(pa);
  fs::remove(pb);
}

TEST_CASE("golden CSV for a seeded two-rank bar run") {
  ExperimentConfig cfg;
  cfg.model = "bar";
  cfg.observation_count = 5;
  cfg.noise_variance = 1e-5;
  cfg.replications = 4;
  cfg.ranks = {1, 2};
  cfg.methods = {"lis"};
  cfg.pod_snapshots = 5;
  cfg.seeds = SeedRoles{101, 202, 303};
  const ErrorReport report = run_experiment(cfg);
  const auto path = temp_file("golden.csv");
  emit_report(report, path.string(), "csv", false);
  const std::string produced = slurp(path.string());
  fs::remove(path);

  const fs::path golden = fs::path(GOLDEN_DIR) / "bar_two_rank.csv";
  if (!fs::exists(golden)) {
    // frozen on first generation; committed alongside the tests
    std::ofstream out(golden);
    out << produced;
    WARN("golden file regenerated at " << golden.string());
  }
  REQUIRE(produced == slurp(golden.string()));
}

TEST_CASE("pod_snapshot_sweep: caps the rank and improves with more snapshots") {
  ExperimentConfig cfg = small_bar_config();
  cfg.ranks = {4};
  cfg.methods = {"pod"};
  const PodSweepReport sweep = pod_snapshot_sweep(cfg, {1, 4, 16});
  REQUIRE(sweep.rows.size() == 3);
  REQUIRE(sweep.rows[0].r == 1);  // N=1 caps the rank
  REQUIRE(sweep.rows[1].r == 4);
  REQUIRE(sweep.rows[2].r == 4);
  for (const PodSweepRow& row : sweep.rows) {
    REQUIRE(row.projection_error >= 0.0);
    REQUIRE(static_cast<Index>(row.singular_values.size()) >= row.r);
  }
  // projection error non-increasing in N (5% slack)
  REQUIRE(sweep.rows[1].projection_error <= sweep.rows[0].projection_error * 1.05);
  REQUIRE(sweep.rows[2].projection_error <= sweep.rows[1].projection_error * 1.05);
}

TEST_CASE("config json: parse, defaults, validation, digest stability") {
  const json j = json::parse(R"({
    "model": "bar",
    "m": 7,
    "replications": 5,
    "ranks": [1, 3],
    "methods": ["lis"],
    "seeds": {"locations": 1, "data": 2, "snapshots": 3}
  })");
  const ExperimentConfig cfg = j.get<ExperimentConfig>();
  REQUIRE(cfg.observation_count == 7);
  REQUIRE(cfg.noise_variance == 1e-5);
  REQUIRE(cfg.pod_snapshots == 10);
  cfg.validate();
  REQUIRE(config_digest(cfg) == config_digest(cfg));

  ExperimentConfig bad = cfg;
  bad.ranks = {9};  // > m
  REQUIRE_THROWS_AS(bad.validate(), config_error);
  ExperimentConfig bad2 = cfg;
  bad2.methods = {"mcmc"};
  REQUIRE_THROWS_AS(bad2.validate(), config_error);
}

TEST_CASE("base64 matrix blobs survive the round trip") {
  SeededStream s(62);
  for (int trial = 0; trial < 10; ++trial) {
    const Index rows = 1 + static_cast<Index>(s.uniform_index(7));
    const Index cols = 1 + static_cast<Index>(s.uniform_index(7));
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = s.normal() * std::pow(10.0, s.uniform_index(17));
    const Matrix back = matrix_from_json(matrix_to_json(m));
    REQUIRE((back - m).cwiseAbs().maxCoeff() == 0.0);
  }
}
