#ifndef LISREDUCE_GAUSSIAN_HPP
#define LISREDUCE_GAUSSIAN_HPP

#include <cmath>
#include <limits>
#include <memory>
#include <utility>

#include "lisreduce/core.hpp"
#include "lisreduce/rng.hpp"

namespace lisreduce {

// Gaussian N(mean, S S^T) carried through its square-root factor S (d x k).
// k < d encodes a singular covariance; the precision is never formed.
struct GaussianBelief {
  Vector mean;
  Matrix sqrt_factor;

  GaussianBelief() = default;
  GaussianBelief(Vector mu, Matrix sqrt) : mean(std::move(mu)), sqrt_factor(std::move(sqrt)) {
    if (sqrt_factor.rows() != mean.size())
      throw config_error("GaussianBelief: sqrt factor rows must match mean length");
  }

  Index dim() const { return mean.size(); }
  Index sqrt_rank() const { return sqrt_factor.cols(); }

  Matrix covariance() const { return sqrt_factor * sqrt_factor.transpose(); }

  static GaussianBelief isotropic(Index d, double variance) {
    return GaussianBelief(Vector::Zero(d), std::sqrt(variance) * Matrix::Identity(d, d));
  }
};

// Covariance Gamma - B B^T as the prior plus a negative semi-definite
// low-rank update. coeff holds F with B = S F when the factor lives in the
// prior's square-root coordinates (true for every posterior produced here).
struct LowRankDowndate {
  std::shared_ptr<const GaussianBelief> base;
  Matrix factor;  // B, d x r
  Matrix coeff;   // F, k x r, with factor = base->sqrt_factor * coeff

  Matrix covariance() const { return base->covariance() - factor * factor.transpose(); }
};

struct PosteriorApproximation {
  Vector mean;
  LowRankDowndate downdate;
  // xi with mean = prior_mean + S xi; shared between a reduced problem and
  // its full-space lift because both use the same prior square root.
  Vector update_coeff;
};

inline Vector sample(const GaussianBelief& belief, SeededStream& stream) {
  return belief.mean + belief.sqrt_factor * stream.normal_vector(belief.sqrt_rank());
}

// Lower Cholesky factor of S S^T; requires full rank.
inline Matrix cholesky_of_sqrt(const Matrix& sqrt_factor) {
  const Matrix cov = sqrt_factor * sqrt_factor.transpose();
  SolveCounter::record(cov.rows());
  Eigen::LLT<Matrix> llt(symmetrized(cov));
  if (llt.info() != Eigen::Success)
    throw numeric_error("cholesky_of_sqrt: covariance numerically singular");
  return llt.matrixL();
}

// Conjugate update for y = G f + eps. The m x m innovation covariance is
// factorized; no d x d matrix is ever inverted or factorized.
inline PosteriorApproximation exact_posterior(std::shared_ptr<const GaussianBelief> prior,
                                              const Matrix& G, const GaussianBelief& noise,
                                              const Vector& y) {
  const Index d = prior->dim();
  const Index m = G.rows();
  if (G.cols() != d) throw config_error("exact_posterior: G columns != prior dimension");
  if (noise.dim() != m || y.size() != m)
    throw config_error("exact_posterior: observation dimensions inconsistent");
  if (!all_finite(G) || !all_finite(y) || !all_finite(prior->mean) || !all_finite(prior->sqrt_factor))
    throw config_error("exact_posterior: non-finite input");

  const Matrix& S = prior->sqrt_factor;
  const Matrix A = G * S;  // m x k
  Matrix M = A * A.transpose() + noise.sqrt_factor * noise.sqrt_factor.transpose();
  symmetrize(M);
  SolveCounter::record(m);
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success)
    throw numeric_error("exact_posterior: innovation covariance numerically indefinite");

  const Vector innovation = y - G * prior->mean;
  const Vector w = llt.solve(innovation);

  PosteriorApproximation post;
  post.update_coeff = A.transpose() * w;
  post.mean = prior->mean + S * post.update_coeff;
  // B B^T = Gamma G^T M^-1 G Gamma via F = (L^-1 A)^T
  const Matrix Linv_A = llt.matrixL().solve(A);
  post.downdate.coeff = Linv_A.transpose();  // k x m
  post.downdate.factor = S * post.downdate.coeff;
  post.downdate.base = std::move(prior);
  return post;
}

inline PosteriorApproximation exact_posterior(const GaussianBelief& prior, const Matrix& G,
                                              const GaussianBelief& noise, const Vector& y) {
  return exact_posterior(std::make_shared<GaussianBelief>(prior), G, noise, y);
}

// Foerstner distance sqrt(sum_i ln^2(lambda_i)) over the generalized
// eigenvalues of the pencil (A, B). Eigen-directions with quadratic forms
// below null_tol * max(trace) in both operands are treated as a shared null
// space and excluded; a direction null in exactly one operand makes the
// distance +infinity.
inline double foerstner_distance(const Matrix& a_in, const Matrix& b_in, double null_tol = 1e-10) {
  if (a_in.rows() != a_in.cols() || b_in.rows() != b_in.cols() || a_in.rows() != b_in.rows())
    throw config_error("foerstner_distance: operands must be square and same size");
  const double inf = std::numeric_limits<double>::infinity();
  const Matrix a = symmetrized(a_in);
  const Matrix b = symmetrized(b_in);
  const double tol = null_tol * std::max(a.trace(), b.trace());

  // joint live subspace of A + B
  Eigen::SelfAdjointEigenSolver<Matrix> joint(a + b);
  const Index n = a.rows();
  Index live = 0;
  for (Index i = 0; i < n; ++i)
    if (joint.eigenvalues()[i] > tol) ++live;
  if (live == 0) return 0.0;
  const Matrix q = joint.eigenvectors().rightCols(live);
  const Matrix ap = q.transpose() * a * q;
  const Matrix bp = q.transpose() * b * q;

  // split off directions where B is null on the live space
  Eigen::SelfAdjointEigenSolver<Matrix> eb(symmetrized(bp));
  Index blive = 0;
  for (Index i = 0; i < live; ++i)
    if (eb.eigenvalues()[i] > tol) ++blive;
  for (Index i = 0; i < live - blive; ++i) {
    const Vector u = eb.eigenvectors().col(i);
    const double qa = u.dot(ap * u);
    if (qa > tol) return inf;  // informative in A only
  }
  if (blive == 0) return 0.0;

  const Matrix ub = eb.eigenvectors().rightCols(blive);
  const Vector db = eb.eigenvalues().tail(blive);
  const Matrix app = ub.transpose() * ap * ub;

  // scale B to the identity, then an ordinary symmetric eigensolve
  const Vector scale = db.array().rsqrt();
  Eigen::SelfAdjointEigenSolver<Matrix> ea(symmetrized(
      Matrix(scale.asDiagonal() * app * scale.asDiagonal())));

  double sum = 0.0;
  for (Index i = 0; i < blive; ++i) {
    const double lambda = ea.eigenvalues()[i];
    // pencil eigenvector in B-live coordinates, unit length
    const Vector x = (scale.asDiagonal() * ea.eigenvectors().col(i)).normalized();
    const double qb = x.dot(db.asDiagonal() * x);
    const double qa = lambda * qb;
    const double qa_abs = std::abs(qa);
    if (qa_abs < tol && qb < tol) continue;
    if (qa_abs < tol || qb < tol) return inf;
    if (lambda <= 0.0) return inf;
    const double l = std::log(lambda);
    sum += l * l;
  }
  return std::sqrt(sum);
}

// Distance between the covariances Gamma - B1 B1^T and Gamma - B2 B2^T of two
// downdates sharing the prior square root S (possibly row-restricted), given
// in S-coordinates: Bi = S Fi. Valid whenever the restricted S has full
// column rank; then the pencil is congruent to (I - F1 F1^T, I - F2 F2^T)
// and only the span of [F1 F2] contributes.
inline double foerstner_downdate_distance(const Matrix& f1, const Matrix& f2) {
  if (f1.rows() != f2.rows())
    throw config_error("foerstner_downdate_distance: coefficient row mismatch");
  const double inf = std::numeric_limits<double>::infinity();
  const Index k = f1.rows();
  Matrix joint(k, f1.cols() + f2.cols());
  joint << f1, f2;
  Eigen::ColPivHouseholderQR<Matrix> qr(joint);
  qr.setThreshold(kRankTruncationTol);
  const Index p = qr.rank();
  if (p == 0) return 0.0;
  const Matrix u = Matrix(qr.householderQ()).leftCols(p);

  const Matrix uf1 = u.transpose() * f1;
  const Matrix uf2 = u.transpose() * f2;
  const Matrix y1 = Matrix::Identity(p, p) - uf1 * uf1.transpose();
  const Matrix y2 = Matrix::Identity(p, p) - uf2 * uf2.transpose();

  Eigen::SelfAdjointEigenSolver<Matrix> e2(symmetrized(y2));
  if (e2.eigenvalues().minCoeff() <= 0.0) return inf;
  const Vector scale = e2.eigenvalues().array().rsqrt();
  const Matrix w = e2.eigenvectors() * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> ea(symmetrized(Matrix(w.transpose() * y1 * w)));
  double sum = 0.0;
  for (Index i = 0; i < p; ++i) {
    const double lambda = ea.eigenvalues()[i];
    if (lambda <= 0.0) return inf;
    const double l = std::log(lambda);
    sum += l * l;
  }
  return std::sqrt(sum);
}

// Largest singular value of the downdate coefficient; <= 1 certifies
// Gamma - B B^T >= 0 on the range of the prior square root.
inline double downdate_spectral_norm(const LowRankDowndate& dd) {
  if (dd.coeff.size() == 0) throw config_error("downdate_spectral_norm: no coefficient stored");
  Eigen::JacobiSVD<Matrix> svd(dd.coeff);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

}  // namespace lisreduce

#endif  // LISREDUCE_GAUSSIAN_HPP
