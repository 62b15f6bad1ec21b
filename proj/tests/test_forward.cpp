#include <catch_amalgamated.hpp>

#include <cmath>

#include "lisreduce/fem.hpp"
#include "lisreduce/forward.hpp"

using namespace lisreduce;

namespace {

Matrix random_matrix(SeededStream& s, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = s.normal();
  return m;
}

LinearForwardProblem small_problem(SeededStream& s, Index d, Index m) {
  const Matrix half = random_matrix(s, d, d);
  Matrix k = half * half.transpose() + static_cast<double>(d) * Matrix::Identity(d, d);
  std::vector<DofLabel> labels(d);
  for (Index i = 0; i < d; ++i) labels[i] = {DofKind::translation, static_cast<double>(i)};
  StaticLinearSystem system(std::move(k), std::move(labels));
  ObservationOperator obs = draw_observation_indices(system, m, s);
  auto prior = std::make_shared<GaussianBelief>(random_matrix(s, d, 1).col(0),
                                                random_matrix(s, d, d));
  return LinearForwardProblem(std::move(system), std::move(obs), prior,
                              GaussianBelief::isotropic(m, 1e-2));
}

LinearForwardProblem bar_problem(Index m, std::uint64_t loc_seed, double noise_var = 1e-5) {
  ModelBundle bundle = build_bar();
  SeededStream stream(loc_seed);
  ObservationOperator obs = draw_observation_indices(bundle.system, m, stream);
  return LinearForwardProblem(std::move(bundle.system), std::move(obs), bundle.prior,
                              GaussianBelief::isotropic(m, noise_var));
}

}  // namespace

TEST_CASE("apply_forward: zero load gives zero response") {
  SeededStream s(21);
  const LinearForwardProblem prob = small_problem(s, 7, 3);
  REQUIRE(apply_forward(prob, Vector::Zero(7)).norm() == 0.0);
}

TEST_CASE("apply_forward: bar tip displacement under the mean load") {
  LinearForwardProblem prob = bar_problem(3, 5);
  // constant q = 4e6 N/m -> u(L) = q L^2 / (2 D) = 0.02 m, nodally exact
  const Vector u_obs = apply_forward(prob, prob.prior().mean);
  ModelBundle bundle = build_bar();
  const Vector u = bundle.system.solve(bundle.prior->mean);
  REQUIRE(u[u.size() - 1] == Catch::Approx(0.02).epsilon(1e-12));
  (void)u_obs;
}

TEST_CASE("apply_forward matches the dense-inverse oracle") {
  SeededStream s(22);
  const LinearForwardProblem prob = small_problem(s, 5, 2);
  const Matrix k_inv = prob.system().stiffness().inverse();
  for (int trial = 0; trial < 10; ++trial) {
    const Vector f = random_matrix(s, 5, 1).col(0);
    const Vector expected = prob.observation().apply(k_inv * f);
    REQUIRE((apply_forward(prob, f) - expected).norm() <= 1e-12 * expected.norm());
  }
}

TEST_CASE("apply_forward is linear") {
  SeededStream s(23);
  const LinearForwardProblem prob = small_problem(s, 9, 4);
  const Vector f1 = random_matrix(s, 9, 1).col(0);
  const Vector f2 = random_matrix(s, 9, 1).col(0);
  const double a = 1.7, b = -0.4;
  const Vector lhs = apply_forward(prob, a * f1 + b * f2);
  const Vector rhs = a * apply_forward(prob, f1) + b * apply_forward(prob, f2);
  REQUIRE((lhs - rhs).norm() <= 1e-10 * rhs.norm());
}

TEST_CASE("assemble_dense_G: identity system is a row selector") {
  std::vector<DofLabel> labels(3);
  for (Index i = 0; i < 3; ++i) labels[i] = {DofKind::translation, static_cast<double>(i)};
  StaticLinearSystem system(Matrix::Identity(3, 3), std::move(labels));
  ObservationOperator obs;
  obs.indices = {0, 2};
  auto prior = std::make_shared<GaussianBelief>(Vector::Zero(3), Matrix::Identity(3, 3));
  LinearForwardProblem prob(std::move(system), std::move(obs), prior,
                            GaussianBelief::isotropic(2, 1.0));
  Matrix expected(2, 3);
  expected << 1, 0, 0, 0, 0, 1;
  REQUIRE((assemble_dense_G(prob) - expected).norm() == 0.0);
}

TEST_CASE("assemble_dense_G is consistent with apply_forward") {
  SeededStream s(24);
  const LinearForwardProblem prob = small_problem(s, 8, 3);
  const Matrix& g = assemble_dense_G(prob);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector f = random_matrix(s, 8, 1).col(0);
    const Vector direct = apply_forward(prob, f);
    REQUIRE((g * f - direct).norm() <= 1e-12 * direct.norm());
  }
}

TEST_CASE("assemble_dense_G: bar forward operator has full rank m") {
  LinearForwardProblem prob = bar_problem(10, 7);
  const Matrix& g = assemble_dense_G(prob);
  Eigen::BDCSVD<Matrix> svd(g);
  const Vector sv = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-12 * sv[0]) ++rank;
  REQUIRE(rank == 10);
}

TEST_CASE("generate_data: zero noise square root gives exact observations") {
  SeededStream s(25);
  ModelBundle bundle = build_bar(20);
  SeededStream loc(5);
  ObservationOperator obs = draw_observation_indices(bundle.system, 4, loc);
  LinearForwardProblem prob(std::move(bundle.system), std::move(obs), bundle.prior,
                            GaussianBelief(Vector::Zero(4), Matrix::Zero(4, 1)));
  const SyntheticData data = generate_data(prob, s);
  REQUIRE((data.y - prob.dense_G() * data.f_true).norm() <= 1e-12 * data.y.norm());
}

TEST_CASE("generate_data: deterministic replay") {
  LinearForwardProblem prob = bar_problem(5, 6);
  SeededStream a(1234), b(1234);
  const SyntheticData da = generate_data(prob, a);
  const SyntheticData db = generate_data(prob, b);
  REQUIRE(da.f_true == db.f_true);
  REQUIRE(da.y == db.y);
}

TEST_CASE("generate_data: observation variance matches G Gamma G^T + Gamma_obs") {
  LinearForwardProblem prob = bar_problem(6, 8, 1e-5);
  const Matrix& g = prob.dense_G();
  const Matrix marginal =
      g * prob.prior().covariance() * g.transpose() + prob.noise().covariance();
  SeededStream s(31);
  const int n = 10000;
  Matrix acc = Matrix::Zero(6, 6);
  Vector mean_acc = Vector::Zero(6);
  std::vector<Vector> ys;
  ys.reserve(n);
  for (int i = 0; i < n; ++i) {
    ys.push_back(generate_data(prob, s).y);
    mean_acc += ys.back();
  }
  mean_acc /= n;
  for (const Vector& y : ys) acc += (y - mean_acc) * (y - mean_acc).transpose();
  acc /= n - 1;
  for (Index i = 0; i < 6; ++i)
    REQUIRE(acc(i, i) == Catch::Approx(marginal(i, i)).epsilon(0.05));
}

TEST_CASE("draw_observation_indices: exhaustive draw returns every translational dof") {
  ModelBundle bundle = build_bar(12);
  SeededStream s(4);
  const ObservationOperator obs = draw_observation_indices(bundle.system, 12, s);
  REQUIRE(obs.indices.size() == 12);
  for (Index i = 0; i < 12; ++i) REQUIRE(obs.indices[i] == i);
}

TEST_CASE("draw_observation_indices: deterministic for a fixed seed") {
  ModelBundle bundle = build_bar();
  SeededStream a(77), b(77);
  REQUIRE(draw_observation_indices(bundle.system, 10, a).indices ==
          draw_observation_indices(bundle.system, 10, b).indices);
}

TEST_CASE("draw_observation_indices: single draws are uniform") {
  ModelBundle bundle = build_bar(100);
  SeededStream s(99);
  std::vector<int> counts(100, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const ObservationOperator obs = draw_observation_indices(bundle.system, 1, s);
    counts[obs.indices[0]]++;
  }
  for (int c : counts) {
    const double freq = static_cast<double>(c) / n;
    REQUIRE(freq >= 0.007);
    REQUIRE(freq <= 0.013);
  }
}

TEST_CASE("draw_observation_indices rejects oversized requests") {
  ModelBundle bundle = build_bar(10);
  SeededStream s(1);
  REQUIRE_THROWS_AS(draw_observation_indices(bundle.system, 11, s), config_error);
}

TEST_CASE("StaticLinearSystem rejects singular stiffness") {
  // free-free bar without support: rigid-body mode
  Matrix k(2, 2);
  k << 1.0, -1.0, -1.0, 1.0;
  std::vector<DofLabel> labels(2, DofLabel{DofKind::translation, 0.0});
  StaticLinearSystem system(std::move(k), std::move(labels));
  REQUIRE_THROWS_AS(system.solve(Vector::Ones(2)), numeric_error);
}
