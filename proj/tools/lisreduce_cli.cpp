// lisreduce command line: build the shipped models, compute reduction bases,
// solve posteriors online, and run the replication experiments.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lisreduce/experiment.hpp"
#include "lisreduce/matrix_market.hpp"
#include "lisreduce/serialize.hpp"

namespace fs = std::filesystem;
using namespace lisreduce;

namespace {

Vector vector_from_plain_json(const json& j) {
  std::vector<double> vals = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

json vector_to_plain_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

LinearForwardProblem problem_from_containers(const ModelBundle& bundle,
                                             const StoredReducedProblem& stored) {
  ModelBundle copy = bundle;  // system is moved into the problem
  return LinearForwardProblem(std::move(copy.system), stored.obs, bundle.prior,
                              stored.problem.noise);
}

int cmd_build_model(const std::string& model, Index n, const std::string& out,
                    const std::string& export_dir) {
  ModelBundle bundle = n > 0 ? build_model(model, n) : build_model(model);
  write_json_file(model_to_json(bundle), out);
  std::cout << "wrote model container: " << out << " (d=" << bundle.system.dim() << ")\n";
  if (!export_dir.empty()) {
    fs::create_directories(export_dir);
    save_matrix_market(bundle.system.stiffness(), (fs::path(export_dir) / "K.mtx").string(),
                       model + " stiffness");
    save_matrix_market(bundle.prior->sqrt_factor, (fs::path(export_dir) / "prior_sqrt.mtx").string(),
                       model + " prior square root");
    save_matrix_market(bundle.load_map.map, (fs::path(export_dir) / "load_map.mtx").string(),
                       model + " load map");
    const std::vector<Index> cand = bundle.system.translational_dofs();
    Matrix cand_col(static_cast<Index>(cand.size()), 1);
    for (std::size_t i = 0; i < cand.size(); ++i) cand_col(static_cast<Index>(i), 0) = static_cast<double>(cand[i]);
    save_matrix_market(cand_col, (fs::path(export_dir) / "observation_candidates.mtx").string(),
                       model + " translational dof indices");
    std::cout << "exported Matrix Market files to " << export_dir << "\n";
  }
  return 0;
}

int cmd_basis(const std::string& kind, const std::string& model_path, Index r, Index m,
              double noise_var, Index snapshots, std::uint64_t loc_seed, std::uint64_t snap_seed,
              const std::string& out, const std::string& export_dir) {
  ModelBundle bundle = model_from_json(read_json_file(model_path));
  SeededStream loc_stream(loc_seed);
  ObservationOperator obs = draw_observation_indices(bundle.system, m, loc_stream);
  GaussianBelief noise = GaussianBelief::isotropic(m, noise_var);
  LinearForwardProblem prob(std::move(bundle.system), obs, bundle.prior, std::move(noise));

  ReductionBasis basis;
  if (kind == "lis") {
    basis = lis_basis(prob, r);
  } else {
    SeededStream snap_stream(snap_seed);
    basis = pod_basis(collect_snapshots(prob, snapshots, snap_stream), r);
  }
  ReducedInverseProblem red = reduce_petrov_galerkin(prob, basis);
  write_json_file(reduced_to_json(red, obs), out);
  std::cout << "wrote reduced problem: " << out << " (kind=" << kind << ", r=" << r
            << ", observed dofs:";
  for (Index i : obs.indices) std::cout << ' ' << i;
  std::cout << ")\n";

  if (!export_dir.empty()) {
    fs::create_directories(export_dir);
    const fs::path dir(export_dir);
    save_matrix_market(prob.dense_G(), (dir / "G.mtx").string(), "forward operator C K^-1");
    save_matrix_market(obs.dense(prob.state_dim()), (dir / "C.mtx").string(), "observation selector");
    save_matrix_market(prob.system().stiffness(), (dir / "K.mtx").string(), "stiffness");
    save_matrix_market(basis.V, (dir / "V.mtx").string(), "trial basis");
    save_matrix_market(basis.W, (dir / "W.mtx").string(), "test basis");
    save_matrix_market(Matrix(basis.delta), (dir / "delta.mtx").string(), "generalized singular values");
    save_matrix_market(red.G_hat, (dir / "G_hat.mtx").string(), "reduced forward operator");
    std::cout << "exported Matrix Market files to " << export_dir << "\n";
  }
  return 0;
}

int cmd_gen_data(const std::string& model_path, const std::string& problem_path, Index count,
                 std::uint64_t data_seed, const std::string& out) {
  ModelBundle bundle = model_from_json(read_json_file(model_path));
  StoredReducedProblem stored = reduced_from_json(read_json_file(problem_path));
  LinearForwardProblem prob = problem_from_containers(bundle, stored);
  SeededStream root(data_seed);
  json realizations = json::array();
  for (Index i = 0; i < count; ++i) {
    SeededStream rep = root.substream(static_cast<std::uint64_t>(i));
    SyntheticData data = generate_data(prob, rep);
    realizations.push_back({{"f_true", vector_to_plain_json(data.f_true)},
                            {"y", vector_to_plain_json(data.y)}});
  }
  write_json_file(json{{"format", "lisreduce-data"},
                       {"version", kContainerVersion},
                       {"data_seed", data_seed},
                       {"realizations", realizations}},
                  out);
  std::cout << "wrote " << count << " data realizations: " << out << "\n";
  return 0;
}

int cmd_solve(const std::string& method, const std::string& problem_path,
              const std::string& model_path, const std::string& data_path, Index r,
              const std::string& out) {
  StoredReducedProblem stored = reduced_from_json(read_json_file(problem_path));
  if (r > 0 && r != stored.problem.rank())
    throw config_error("solve: container holds rank " + std::to_string(stored.problem.rank()) +
                       "; rebuild the basis for r=" + std::to_string(r));

  const json data_json = read_json_file(data_path);
  std::vector<Vector> ys;
  if (data_json.contains("realizations")) {
    for (const auto& item : data_json.at("realizations"))
      ys.push_back(vector_from_plain_json(item.at("y")));
  } else if (data_json.contains("y")) {
    ys.push_back(vector_from_plain_json(data_json.at("y")));
  } else {
    throw config_error("solve: data file must hold 'y' or 'realizations'");
  }

  json posteriors = json::array();
  if (method == "lis" || method == "pod") {
    for (const Vector& y : ys) {
      const PosteriorApproximation post = method == "lis"
                                              ? lis_mr_posterior(stored.problem, y)
                                              : pod_posterior(stored.problem, y);
      posteriors.push_back({{"mean", vector_to_plain_json(post.mean)},
                            {"downdate_factor", matrix_to_json(post.downdate.factor)}});
    }
  } else if (method == "olr" || method == "exact") {
    if (model_path.empty()) throw config_error("solve: --model required for method " + method);
    ModelBundle bundle = model_from_json(read_json_file(model_path));
    LinearForwardProblem prob = problem_from_containers(bundle, stored);
    if (method == "olr") {
      OlrOperator olr(prob, stored.problem.basis);
      for (const Vector& y : ys) {
        const PosteriorApproximation post = olr.posterior(y);
        posteriors.push_back({{"mean", vector_to_plain_json(post.mean)},
                              {"downdate_factor", matrix_to_json(post.downdate.factor)}});
      }
    } else {
      for (const Vector& y : ys) {
        const PosteriorApproximation post =
            exact_posterior(prob.prior_ptr(), prob.dense_G(), prob.noise(), y);
        posteriors.push_back({{"mean", vector_to_plain_json(post.mean)},
                              {"downdate_factor", matrix_to_json(post.downdate.factor)}});
      }
    }
  } else {
    throw config_error("solve: method must be lis, pod, olr or exact");
  }

  write_json_file(json{{"format", "lisreduce-posterior"},
                       {"version", kContainerVersion},
                       {"method", method},
                       {"posteriors", posteriors}},
                  out);
  std::cout << "wrote " << posteriors.size() << " posterior(s): " << out << "\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir,
                   const std::string& format) {
  ExperimentConfig cfg = read_json_file(config_path).get<ExperimentConfig>();
  fs::create_directories(out_dir);
  if (!cfg.sweep_snapshot_counts.empty()) {
    const PodSweepReport report = pod_snapshot_sweep(cfg, cfg.sweep_snapshot_counts);
    const fs::path base = fs::path(out_dir) / ("pod_sweep_" + cfg.model);
    if (format == "csv") {
      emit_sweep_csv(report, base.string() + ".csv");
    } else {
      write_json_file(sweep_to_json(report), base.string() + ".json");
    }
    for (const PodSweepRow& row : report.rows)
      std::cout << "N=" << row.snapshot_count << " r=" << row.r
                << " mean_rel_error=" << row.mean_rel_error << " foerstner=" << row.foerstner
                << " projection_error=" << row.projection_error << "\n";
    std::cout << "wrote " << base.string() << "." << format << "\n";
    return 0;
  }
  const ErrorReport report = run_experiment(cfg);
  const fs::path base = fs::path(out_dir) / ("report_" + cfg.model + "_" + report.digest);
  emit_report(report, base.string() + "." + format, format);
  for (const ErrorRow& row : report.rows)
    std::cout << row.method << " r=" << row.r << " mean_rel_error=" << row.mean_rel_error
              << " foerstner=" << row.foerstner << " offline_s=" << row.offline_s
              << " online_s=" << row.online_s << "\n";
  std::cout << "wrote " << base.string() << "." << format << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-informed model reduction for Bayesian load inference"};
  app.require_subcommand(1);

  const SeedRoles defaults = default_seed_roles();

  auto* build = app.add_subcommand("build-model", "Assemble a shipped model and serialize it");
  std::string build_model_name;
  Index build_n = 0;
  std::string build_out = "model.json";
  std::string build_export;
  build->add_option("model", build_model_name, "bar or tunnel")->required();
  build->add_option("--n", build_n, "element count (default: model standard)");
  build->add_option("--out", build_out, "output container path");
  build->add_option("--export-mm", build_export, "directory for Matrix Market export");

  auto* basis = app.add_subcommand("basis", "Compute a reduction basis and reduced problem");
  std::string basis_kind;
  std::string basis_model = "model.json";
  Index basis_r = 10, basis_m = 10, basis_snapshots = 10;
  double basis_noise = 1e-5;
  std::uint64_t basis_loc_seed = defaults.locations, basis_snap_seed = defaults.snapshots;
  std::string basis_out = "reduced.json";
  std::string basis_export;
  basis->add_option("kind", basis_kind, "lis or pod")->required()
      ->check(CLI::IsMember({"lis", "pod"}));
  basis->add_option("--model", basis_model, "model container path");
  basis->add_option("--r", basis_r, "reduced rank");
  basis->add_option("--m", basis_m, "number of observations");
  basis->add_option("--noise-var", basis_noise, "observation noise variance");
  basis->add_option("--snapshots", basis_snapshots, "POD snapshot count");
  basis->add_option("--loc-seed", basis_loc_seed, "observation location seed");
  basis->add_option("--snap-seed", basis_snap_seed, "snapshot seed");
  basis->add_option("--out", basis_out, "output container path");
  basis->add_option("--export-mm", basis_export, "directory for Matrix Market export");

  auto* gen = app.add_subcommand("gen-data", "Draw synthetic data realizations");
  std::string gen_model = "model.json", gen_problem = "reduced.json", gen_out = "data.json";
  Index gen_count = 1;
  std::uint64_t gen_seed = defaults.data;
  gen->add_option("--model", gen_model, "model container path");
  gen->add_option("--problem", gen_problem, "reduced problem container (observation locations)");
  gen->add_option("--count", gen_count, "number of realizations");
  gen->add_option("--data-seed", gen_seed, "data seed");
  gen->add_option("--out", gen_out, "output path");

  auto* solve = app.add_subcommand("solve", "Compute posterior approximations for given data");
  std::string solve_method, solve_problem = "reduced.json", solve_model, solve_data,
              solve_out = "posterior.json";
  Index solve_r = 0;
  solve->add_option("--method", solve_method, "lis, pod, olr or exact")->required()
      ->check(CLI::IsMember({"lis", "pod", "olr", "exact"}));
  solve->add_option("--r", solve_r, "expected reduced rank (consistency check)");
  solve->add_option("--problem", solve_problem, "reduced problem container");
  solve->add_option("--model", solve_model, "model container (olr/exact)");
  solve->add_option("--data", solve_data, "data file")->required();
  solve->add_option("--out", solve_out, "output path");

  auto* exp = app.add_subcommand("experiment", "Run a replication experiment from a config file");
  std::string exp_config, exp_out = ".", exp_format = "csv";
  exp->add_option("--config", exp_config, "experiment config JSON")->required();
  exp->add_option("--out", exp_out, "output directory");
  exp->add_option("--format", exp_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
    if (build->parsed())
      return cmd_build_model(build_model_name, build_n, build_out, build_export);
    if (basis->parsed())
      return cmd_basis(basis_kind, basis_model, basis_r, basis_m, basis_noise, basis_snapshots,
                       basis_loc_seed, basis_snap_seed, basis_out, basis_export);
    if (gen->parsed()) return cmd_gen_data(gen_model, gen_problem, gen_count, gen_seed, gen_out);
    if (solve->parsed())
      return cmd_solve(solve_method, solve_problem, solve_model, solve_data, solve_r, solve_out);
    if (exp->parsed()) return cmd_experiment(exp_config, exp_out, exp_format);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
