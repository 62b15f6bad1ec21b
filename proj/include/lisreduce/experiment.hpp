#ifndef LISREDUCE_EXPERIMENT_HPP
#define LISREDUCE_EXPERIMENT_HPP

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lisreduce/fem.hpp"
#include "lisreduce/reduction.hpp"
#include "lisreduce/serialize.hpp"

namespace lisreduce {

struct SeedRoles {
  std::uint64_t locations = 0;
  std::uint64_t data = 0;
  std::uint64_t snapshots = 0;
};

// Fallback used when a config carries no explicit seeds: LISREDUCE_SEED from
// the environment, else a fixed default, split once per role.
inline SeedRoles default_seed_roles() {
  std::uint64_t base = 42;
  if (const char* env = std::getenv("LISREDUCE_SEED")) {
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw config_error("LISREDUCE_SEED must be an unsigned integer");
    base = parsed;
  }
  SeededStream root(base);
  return SeedRoles{root.substream(1).seed(), root.substream(2).seed(), root.substream(3).seed()};
}

struct ExperimentConfig {
  std::string model = "bar";
  Index elements = 0;  // 0 = model default
  Index observation_count = 10;
  double noise_variance = 1e-5;
  Index replications = 200;
  std::vector<Index> ranks;
  std::vector<std::string> methods;  // subset of {lis, pod, olr}
  Index pod_snapshots = 10;
  SeedRoles seeds = default_seed_roles();
  std::vector<Index> sweep_snapshot_counts;  // non-empty: POD N-sweep protocol

  void validate() const {
    if (model != "bar" && model != "tunnel")
      throw config_error("config: model must be bar or tunnel");
    if (observation_count < 1) throw config_error("config: m must be positive");
    if (replications < 1) throw config_error("config: replications must be positive");
    if (ranks.empty() && sweep_snapshot_counts.empty())
      throw config_error("config: ranks must not be empty");
    for (Index r : ranks)
      if (r < 1 || r > observation_count)
        throw config_error("config: ranks must lie in [1, m]");
    for (const std::string& mth : methods)
      if (mth != "lis" && mth != "pod" && mth != "olr")
        throw config_error("config: unknown method '" + mth + "'");
    if (pod_snapshots < 1) throw config_error("config: pod_snapshots must be positive");
  }
};

inline void to_json(json& j, const ExperimentConfig& cfg) {
  j = json{{"model", cfg.model},
           {"elements", cfg.elements},
           {"m", cfg.observation_count},
           {"noise_var", cfg.noise_variance},
           {"replications", cfg.replications},
           {"ranks", cfg.ranks},
           {"methods", cfg.methods},
           {"pod_snapshots", cfg.pod_snapshots},
           {"seeds", {{"locations", cfg.seeds.locations},
                      {"data", cfg.seeds.data},
                      {"snapshots", cfg.seeds.snapshots}}}};
  if (!cfg.sweep_snapshot_counts.empty()) j["sweep_snapshot_counts"] = cfg.sweep_snapshot_counts;
}

inline void from_json(const json& j, ExperimentConfig& cfg) {
  cfg.model = j.value("model", cfg.model);
  cfg.elements = j.value("elements", cfg.elements);
  cfg.observation_count = j.value("m", cfg.observation_count);
  cfg.noise_variance = j.value("noise_var", cfg.noise_variance);
  cfg.replications = j.value("replications", cfg.replications);
  cfg.ranks = j.value("ranks", cfg.ranks);
  cfg.methods = j.value("methods", cfg.methods);
  cfg.pod_snapshots = j.value("pod_snapshots", cfg.pod_snapshots);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    cfg.seeds.locations = s.value("locations", cfg.seeds.locations);
    cfg.seeds.data = s.value("data", cfg.seeds.data);
    cfg.seeds.snapshots = s.value("snapshots", cfg.seeds.snapshots);
  }
  cfg.sweep_snapshot_counts =
      j.value("sweep_snapshot_counts", std::vector<Index>{});
}

inline std::string config_digest(const ExperimentConfig& cfg) {
  const std::string text = json(cfg).dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

struct ErrorRow {
  std::string method;
  Index r = 0;
  double mean_rel_error = 0.0;
  double foerstner = 0.0;
  double offline_s = 0.0;
  double online_s = 0.0;
};

struct ErrorReport {
  ExperimentConfig config;
  std::string digest;
  std::vector<ErrorRow> rows;
};

// (1/N) sum_i ||approx_i - exact_i|| / ||exact_i||, fixed order with
// Neumaier-compensated accumulation.
inline double mean_error_metric(const std::vector<Vector>& approx_means,
                                const std::vector<Vector>& exact_means) {
  if (approx_means.size() != exact_means.size())
    throw config_error("mean_error_metric: replication counts differ");
  if (approx_means.empty()) throw config_error("mean_error_metric: empty input");
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < approx_means.size(); ++i) {
    if (approx_means[i].size() != exact_means[i].size())
      throw config_error("mean_error_metric: dimension mismatch at replication " +
                         std::to_string(i));
    const double denom = exact_means[i].norm();
    if (denom == 0.0)
      throw config_error("mean_error_metric: zero exact mean at replication " +
                         std::to_string(i));
    const double term = (approx_means[i] - exact_means[i]).norm() / denom;
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(approx_means.size());
}

namespace detail {

inline double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace detail

// Shared offline state of one experiment: model, frozen observation
// locations, dense G, data realizations, and the exact posterior per
// realization.
struct ExperimentContext {
  LinearForwardProblem problem;
  std::vector<Vector> data;         // y per replication
  std::vector<Vector> exact_means;  // reference posterior means
  Matrix exact_coeff;               // exact downdate coefficient (k x m)

  static ExperimentContext prepare(const ExperimentConfig& cfg) {
    cfg.validate();
    ModelBundle bundle =
        cfg.elements > 0 ? build_model(cfg.model, cfg.elements) : build_model(cfg.model);
    SeededStream loc_stream(cfg.seeds.locations);
    ObservationOperator obs =
        draw_observation_indices(bundle.system, cfg.observation_count, loc_stream);
    GaussianBelief noise =
        GaussianBelief::isotropic(cfg.observation_count, cfg.noise_variance);
    ExperimentContext ctx{LinearForwardProblem(std::move(bundle.system), std::move(obs),
                                               bundle.prior, std::move(noise)),
                          {}, {}, {}};
    ctx.problem.dense_G();

    // The Foerstner distances below are evaluated through the downdate
    // coefficients, which matches the translational-submatrix pencil only
    // when the restricted prior square root keeps full column rank.
    {
      const std::vector<Index> trans = ctx.problem.system().translational_dofs();
      Matrix restricted(static_cast<Index>(trans.size()), ctx.problem.prior().sqrt_rank());
      for (std::size_t i = 0; i < trans.size(); ++i)
        restricted.row(static_cast<Index>(i)) = ctx.problem.prior().sqrt_factor.row(trans[i]);
      Eigen::ColPivHouseholderQR<Matrix> qr(restricted);
      qr.setThreshold(kRankTruncationTol);
      if (qr.rank() < ctx.problem.prior().sqrt_rank())
        throw numeric_error(
            "run_experiment: translational prior square root is column rank deficient; "
            "the factored Foerstner evaluation does not apply");
    }

    SeededStream data_root(cfg.seeds.data);
    ctx.data.reserve(cfg.replications);
    ctx.exact_means.reserve(cfg.replications);
    for (Index i = 0; i < cfg.replications; ++i) {
      SeededStream rep_stream = data_root.substream(static_cast<std::uint64_t>(i));
      SyntheticData sample = generate_data(ctx.problem, rep_stream);
      ctx.data.push_back(std::move(sample.y));
    }
    for (Index i = 0; i < cfg.replications; ++i) {
      PosteriorApproximation post = exact_posterior(ctx.problem.prior_ptr(), ctx.problem.dense_G(),
                                                    ctx.problem.noise(), ctx.data[i]);
      if (i == 0) ctx.exact_coeff = post.downdate.coeff;
      ctx.exact_means.push_back(std::move(post.mean));
    }
    return ctx;
  }
};

inline ErrorReport run_experiment(const ExperimentConfig& cfg) {
  ExperimentContext ctx = ExperimentContext::prepare(cfg);
  const LinearForwardProblem& prob = ctx.problem;
  const Matrix& S = prob.prior().sqrt_factor;
  const Index r_max = *std::max_element(cfg.ranks.begin(), cfg.ranks.end());

  ErrorReport report;
  report.config = cfg;
  report.digest = config_digest(cfg);

  for (const std::string& method : cfg.methods) {
    const auto t_basis = std::chrono::steady_clock::now();
    ReductionBasis master;
    if (method == "pod") {
      SeededStream snap_stream(cfg.seeds.snapshots);
      const Matrix snapshots = collect_snapshots(prob, cfg.pod_snapshots, snap_stream);
      master = pod_basis(snapshots, std::min<Index>(r_max, std::min(snapshots.rows(), snapshots.cols())));
    } else {
      master = lis_basis(prob, r_max);
    }
    const double basis_seconds = detail::seconds_since(t_basis);

    for (Index r : cfg.ranks) {
      ErrorRow row;
      row.method = method;
      row.r = r;
      if (r > master.rank()) {
        throw numeric_error("run_experiment: rank " + std::to_string(r) +
                            " unavailable for method " + method + " (basis rank " +
                            std::to_string(master.rank()) + ")");
      }
      const auto t_assembly = std::chrono::steady_clock::now();
      const ReductionBasis basis = master.truncated(r);

      std::vector<Vector> approx(cfg.replications);
      std::vector<double> online(cfg.replications);
      Matrix method_coeff;
      try {
        if (method == "olr") {
          OlrOperator olr(prob, basis);
          row.offline_s = basis_seconds + detail::seconds_since(t_assembly);
          for (Index i = 0; i < cfg.replications; ++i) {
            const auto t1 = std::chrono::steady_clock::now();
            approx[i] = prob.prior().mean + S * olr.update_coeff(ctx.data[i]);
            online[i] = detail::seconds_since(t1);
          }
          method_coeff = olr.posterior(ctx.data[0], false).downdate.coeff;
        } else {
          const ReducedInverseProblem red = reduce_petrov_galerkin(prob, basis);
          row.offline_s = basis_seconds + detail::seconds_since(t_assembly);
          for (Index i = 0; i < cfg.replications; ++i) {
            const auto t1 = std::chrono::steady_clock::now();
            const PosteriorApproximation reduced = detail::reduced_update(red, ctx.data[i]);
            approx[i] = prob.prior().mean + S * reduced.update_coeff;
            online[i] = detail::seconds_since(t1);
          }
          method_coeff = detail::reduced_update(red, ctx.data[0]).downdate.coeff;
        }
      } catch (const numeric_error& e) {
        throw numeric_error(std::string(e.what()) + " [method=" + method +
                            ", r=" + std::to_string(r) + "]");
      }

      row.mean_rel_error = mean_error_metric(approx, ctx.exact_means);
      row.online_s = detail::median(online);
      // data-independent, computed once per (method, r)
      row.foerstner = foerstner_downdate_distance(ctx.exact_coeff, method_coeff);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

struct PodSweepRow {
  Index snapshot_count = 0;
  Index r = 0;
  double mean_rel_error = 0.0;
  double foerstner = 0.0;
  double projection_error = 0.0;  // held-out mean of ||u - Phi Phi^T u||
  Vector singular_values;
};

struct PodSweepReport {
  ExperimentConfig config;
  std::string digest;
  std::vector<PodSweepRow> rows;
};

// POD snapshot-count study: posterior errors at r = min(r_max, N), plus
// singular values and the projection error over a held-out 200-sample set.
inline PodSweepReport pod_snapshot_sweep(const ExperimentConfig& cfg,
                                         const std::vector<Index>& snapshot_counts) {
  if (snapshot_counts.empty()) throw config_error("pod_snapshot_sweep: empty count list");
  ExperimentContext ctx = ExperimentContext::prepare(cfg);
  const LinearForwardProblem& prob = ctx.problem;
  const Matrix& S = prob.prior().sqrt_factor;
  const Index r_max = *std::max_element(cfg.ranks.begin(), cfg.ranks.end());
  const Index n_max = *std::max_element(snapshot_counts.begin(), snapshot_counts.end());

  // nested training snapshots; held-out test set from an independent substream
  SeededStream snap_root(cfg.seeds.snapshots);
  SeededStream train_stream = snap_root.substream(1);
  SeededStream test_stream = snap_root.substream(2);
  const Matrix train = collect_snapshots(prob, n_max, train_stream);
  const Matrix test = collect_snapshots(prob, 200, test_stream);

  PodSweepReport report;
  report.config = cfg;
  report.digest = config_digest(cfg);

  for (Index count : snapshot_counts) {
    if (count < 1 || count > n_max) throw config_error("pod_snapshot_sweep: bad snapshot count");
    PodSweepRow row;
    row.snapshot_count = count;
    const Matrix snapshots = train.leftCols(count);
    Eigen::BDCSVD<Matrix> svd(snapshots, Eigen::ComputeThinU);
    const Index nrank = detail::numerical_rank(svd.singularValues());
    row.r = std::min(r_max, nrank);
    row.singular_values = svd.singularValues();

    const ReductionBasis basis = pod_basis(snapshots, row.r);
    double proj_sum = 0.0;
    for (Index j = 0; j < test.cols(); ++j) {
      const Vector u = test.col(j);
      proj_sum += (u - basis.V * (basis.V.transpose() * u)).norm();
    }
    row.projection_error = proj_sum / static_cast<double>(test.cols());

    const ReducedInverseProblem red = reduce_petrov_galerkin(prob, basis);
    std::vector<Vector> approx(cfg.replications);
    for (Index i = 0; i < cfg.replications; ++i) {
      const PosteriorApproximation reduced = detail::reduced_update(red, ctx.data[i]);
      approx[i] = prob.prior().mean + S * reduced.update_coeff;
    }
    row.mean_rel_error = mean_error_metric(approx, ctx.exact_means);
    row.foerstner = foerstner_downdate_distance(
        ctx.exact_coeff, detail::reduced_update(red, ctx.data[0]).downdate.coeff);
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace detail {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

// CSV columns: method,r,mean_rel_error,foerstner,offline_s,online_s.
// with_timings=false zeroes the timing columns so seeded runs are
// byte-reproducible (used by the golden-file test).
inline void emit_report_csv(const ErrorReport& report, const std::string& path,
                            bool with_timings = true) {
  std::ofstream out(path);
  if (!out) throw config_error("emit_report: cannot open '" + path + "'");
  out << "method,r,mean_rel_error,foerstner,offline_s,online_s\n";
  for (const ErrorRow& row : report.rows) {
    out << row.method << ',' << row.r << ',' << detail::fmt17(row.mean_rel_error) << ','
        << detail::fmt17(row.foerstner) << ',' << detail::fmt17(with_timings ? row.offline_s : 0.0)
        << ',' << detail::fmt17(with_timings ? row.online_s : 0.0) << "\n";
  }
  if (!out) throw config_error("emit_report: write failure on '" + path + "'");
}

inline json report_to_json(const ErrorReport& report) {
  json rows = json::array();
  for (const ErrorRow& row : report.rows)
    rows.push_back({{"method", row.method},
                    {"r", row.r},
                    {"mean_rel_error", row.mean_rel_error},
                    {"foerstner", row.foerstner},
                    {"offline_s", row.offline_s},
                    {"online_s", row.online_s}});
  return json{{"format", "lisreduce-report"},
              {"version", kContainerVersion},
              {"config", report.config},
              {"config_digest", report.digest},
              {"rows", rows}};
}

inline ErrorReport report_from_json(const json& j) {
  if (j.value("format", "") != "lisreduce-report")
    throw config_error("report_from_json: not a lisreduce report");
  ErrorReport report;
  report.config = j.at("config").get<ExperimentConfig>();
  report.digest = j.at("config_digest").get<std::string>();
  for (const auto& row : j.at("rows"))
    report.rows.push_back(ErrorRow{row.at("method").get<std::string>(), row.at("r").get<Index>(),
                                   row.at("mean_rel_error").get<double>(),
                                   row.at("foerstner").get<double>(),
                                   row.at("offline_s").get<double>(),
                                   row.at("online_s").get<double>()});
  return report;
}

inline void emit_report(const ErrorReport& report, const std::string& path,
                        const std::string& format, bool with_timings = true) {
  if (format == "csv") {
    emit_report_csv(report, path, with_timings);
  } else if (format == "json") {
    write_json_file(report_to_json(report), path);
  } else {
    throw config_error("emit_report: format must be csv or json");
  }
}

inline json sweep_to_json(const PodSweepReport& report) {
  json rows = json::array();
  for (const PodSweepRow& row : report.rows) {
    std::vector<double> sv(row.singular_values.data(),
                           row.singular_values.data() + row.singular_values.size());
    rows.push_back({{"snapshots", row.snapshot_count},
                    {"r", row.r},
                    {"mean_rel_error", row.mean_rel_error},
                    {"foerstner", row.foerstner},
                    {"projection_error", row.projection_error},
                    {"singular_values", sv}});
  }
  return json{{"format", "lisreduce-pod-sweep"},
              {"version", kContainerVersion},
              {"config", report.config},
              {"config_digest", report.digest},
              {"rows", rows}};
}

inline void emit_sweep_csv(const PodSweepReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("emit_sweep_csv: cannot open '" + path + "'");
  out << "snapshots,r,mean_rel_error,foerstner,projection_error\n";
  for (const PodSweepRow& row : report.rows)
    out << row.snapshot_count << ',' << row.r << ',' << detail::fmt17(row.mean_rel_error) << ','
        << detail::fmt17(row.foerstner) << ',' << detail::fmt17(row.projection_error) << "\n";
  if (!out) throw config_error("emit_sweep_csv: write failure on '" + path + "'");
}

}  // namespace lisreduce

#endif  // LISREDUCE_EXPERIMENT_HPP
