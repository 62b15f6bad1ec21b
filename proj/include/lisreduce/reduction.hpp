#ifndef LISREDUCE_REDUCTION_HPP
#define LISREDUCE_REDUCTION_HPP

#include <memory>
#include <string>
#include <utility>

#include "lisreduce/forward.hpp"

namespace lisreduce {

enum class BasisKind { lis, pod };

// Paired trial/test bases. LIS: W^T V = I_r (oblique, bi-orthogonal) with
// generalized singular values delta. POD: V = W = Phi_r orthonormal with the
// snapshot singular values in delta.
struct ReductionBasis {
  BasisKind kind = BasisKind::pod;
  Matrix V;      // d x r
  Matrix W;      // d x r
  Vector delta;  // r, descending

  // square-root balancing factors (LIS only): T = S_obs^-1 G S = Om diag(delta) N^T
  Matrix sv_left;   // Om_r, m x r
  Matrix sv_right;  // N_r,  k x r

  Index rank() const { return V.cols(); }

  ReductionBasis truncated(Index r) const {
    if (r < 1 || r > rank()) throw config_error("ReductionBasis: truncation rank out of range");
    ReductionBasis out;
    out.kind = kind;
    out.V = V.leftCols(r);
    out.W = W.leftCols(r);
    out.delta = delta.head(r);
    if (sv_left.size()) out.sv_left = sv_left.leftCols(r);
    if (sv_right.size()) out.sv_right = sv_right.leftCols(r);
    return out;
  }
};

namespace detail {

// Deterministic sign convention: flip each column pair so that the
// largest-magnitude entry of the reference column is positive (ties: lowest
// index). Bases are unique only up to sign; this pins golden files.
inline void align_signs(Matrix& reference, Matrix& companion) {
  for (Index j = 0; j < reference.cols(); ++j) {
    Index imax = 0;
    double best = 0.0;
    for (Index i = 0; i < reference.rows(); ++i) {
      const double mag = std::abs(reference(i, j));
      if (mag > best) {
        best = mag;
        imax = i;
      }
    }
    if (reference(imax, j) < 0.0) {
      reference.col(j) *= -1.0;
      companion.col(j) *= -1.0;
    }
  }
}

inline Index numerical_rank(const Vector& singular_values) {
  if (singular_values.size() == 0) return 0;
  const double cut = kRankTruncationTol * singular_values[0];
  Index rank = 0;
  while (rank < singular_values.size() && singular_values[rank] > cut) ++rank;
  return rank;
}

}  // namespace detail

// Likelihood-informed basis by square-root balancing: SVD of S_obs^-1 G S.
// v_i = S nu_i, w_i = G^T S_obs^-T om_i / delta_i, so W^T V = I_r. Only the
// square roots are touched; works for singular priors (k < d).
inline ReductionBasis lis_basis(const Matrix& G, const Matrix& prior_sqrt,
                                const Matrix& noise_sqrt, Index r) {
  const Index m = G.rows();
  if (prior_sqrt.rows() != G.cols()) throw config_error("lis_basis: prior sqrt rows != G cols");
  if (noise_sqrt.rows() != m || noise_sqrt.cols() != m)
    throw config_error("lis_basis: noise sqrt must be m x m");

  const Matrix noise_chol = cholesky_of_sqrt(noise_sqrt);  // lower triangular
  Matrix balanced = G * prior_sqrt;                        // m x k
  noise_chol.triangularView<Eigen::Lower>().solveInPlace(balanced);

  Eigen::BDCSVD<Matrix> svd(balanced, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index nrank = detail::numerical_rank(svd.singularValues());
  if (r < 1 || r > nrank)
    throw numeric_error("lis_basis: requested rank " + std::to_string(r) +
                        " exceeds numerical rank " + std::to_string(nrank));

  Matrix right = svd.matrixV().leftCols(r);  // k x r
  Matrix left = svd.matrixU().leftCols(r);   // m x r
  detail::align_signs(right, left);

  ReductionBasis basis;
  basis.kind = BasisKind::lis;
  basis.delta = svd.singularValues().head(r);
  basis.sv_left = left;
  basis.sv_right = right;
  basis.V = prior_sqrt * right;
  Matrix whitened_left = left;  // S_obs^-T om_i
  noise_chol.transpose().triangularView<Eigen::Upper>().solveInPlace(whitened_left);
  basis.W = (G.transpose() * whitened_left) * basis.delta.cwiseInverse().asDiagonal();
  return basis;
}

inline ReductionBasis lis_basis(const LinearForwardProblem& prob, Index r) {
  return lis_basis(prob.dense_G(), prob.prior().sqrt_factor, prob.noise().sqrt_factor, r);
}

// Leading left singular vectors of the snapshot matrix.
inline ReductionBasis pod_basis(const Matrix& snapshots, Index r) {
  if (r < 1 || r > std::min(snapshots.rows(), snapshots.cols()))
    throw config_error("pod_basis: rank out of range");
  Eigen::BDCSVD<Matrix> svd(snapshots, Eigen::ComputeThinU);
  const Index nrank = detail::numerical_rank(svd.singularValues());
  if (r > nrank)
    throw numeric_error("pod_basis: requested rank " + std::to_string(r) +
                        " exceeds numerical snapshot rank " + std::to_string(nrank));
  Matrix phi = svd.matrixU().leftCols(r);
  Matrix dummy(0, r);
  detail::align_signs(phi, dummy);

  ReductionBasis basis;
  basis.kind = BasisKind::pod;
  basis.V = phi;
  basis.W = std::move(phi);
  basis.delta = svd.singularValues().head(r);
  return basis;
}

// Column j = K^-1 f_j with f_j drawn from the prior.
inline Matrix collect_snapshots(const LinearForwardProblem& prob, Index count, SeededStream& stream) {
  Matrix snapshots(prob.state_dim(), count);
  for (Index j = 0; j < count; ++j)
    snapshots.col(j) = prob.system().solve(sample(prob.prior(), stream));
  return snapshots;
}

// Reduced inverse problem (K_hat, C_hat, G_hat, r-dim prior) ready for
// O(r)-cost online inference. Keeps the full prior for lifting posteriors
// back to d dimensions.
struct ReducedInverseProblem {
  Matrix K_hat;  // r x r
  Matrix C_hat;  // m x r
  Matrix G_hat;  // m x r
  GaussianBelief prior_hat;
  ReductionBasis basis;
  std::shared_ptr<const GaussianBelief> full_prior;
  GaussianBelief noise;

  Index rank() const { return K_hat.rows(); }
};

namespace detail {

inline Matrix solve_reduced_lu(const Matrix& k_hat, const Matrix& c_hat) {
  SolveCounter::record(k_hat.rows());
  // G_hat = C_hat K_hat^-1  <=>  K_hat^T G_hat^T = C_hat^T
  Eigen::PartialPivLU<Matrix> lu(k_hat.transpose());
  const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
  const double scale = diag.maxCoeff();
  Index rank = 0;
  for (Index i = 0; i < diag.size(); ++i)
    if (diag[i] > kRankTruncationTol * scale) ++rank;
  if (scale <= 0.0 || rank < k_hat.rows())
    throw numeric_error("reduce_petrov_galerkin: reduced operator K_hat singular (rank " +
                        std::to_string(rank) + " of " + std::to_string(k_hat.rows()) + ")");
  return lu.solve(c_hat.transpose()).transpose();
}

}  // namespace detail

// Petrov-Galerkin projection: K_hat = W^T K V, C_hat = C V, G_hat = C_hat
// K_hat^-1, prior (W^T mu, W^T Gamma W). For LIS bases the contraction
// W^T K V collapses analytically (G K = C) to
//   K_hat = Delta^-1 Om^T S_obs^-1 (C S) N,
// which avoids amplifying the K-vs-G solve inconsistency by 1/delta and is
// used instead of the literal triple product.
inline ReducedInverseProblem reduce_petrov_galerkin(const LinearForwardProblem& prob,
                                                    const ReductionBasis& basis) {
  const Index d = prob.state_dim();
  if (basis.V.rows() != d || basis.W.rows() != d)
    throw config_error("reduce_petrov_galerkin: basis dimension != problem dimension");

  ReducedInverseProblem red;
  red.basis = basis;
  red.full_prior = prob.prior_ptr();
  red.noise = prob.noise();
  red.C_hat = prob.observation().select_rows(basis.V);

  if (basis.kind == BasisKind::lis && basis.sv_left.size() && basis.sv_right.size()) {
    const Matrix noise_chol = cholesky_of_sqrt(prob.noise().sqrt_factor);
    Matrix cs = prob.observation().select_rows(prob.prior().sqrt_factor) * basis.sv_right;  // m x r
    noise_chol.triangularView<Eigen::Lower>().solveInPlace(cs);
    red.K_hat = basis.delta.cwiseInverse().asDiagonal() * (basis.sv_left.transpose() * cs);
  } else {
    red.K_hat = basis.W.transpose() * prob.system().stiffness() * basis.V;
  }

  red.G_hat = detail::solve_reduced_lu(red.K_hat, red.C_hat);
  red.prior_hat = GaussianBelief(basis.W.transpose() * prob.prior().mean,
                                 basis.W.transpose() * prob.prior().sqrt_factor);
  return red;
}

namespace detail {

// r-dimensional conjugate update; the returned update coefficient and
// downdate coefficient live in the prior square-root coordinates shared by
// the reduced and the full problem, so the lift is a single multiplication
// by the full S.
inline PosteriorApproximation reduced_update(const ReducedInverseProblem& red, const Vector& y) {
  return exact_posterior(red.prior_hat, red.G_hat, red.noise, y);
}

}  // namespace detail

// Full-space posterior from a reduced solve: the update (and the covariance
// downdate) are mapped back through Gamma W, keeping the prior untouched in
// the complement of the informed subspace; mirrors the mapped covariance
// equation of the reduction.
inline PosteriorApproximation lift_posterior(const ReducedInverseProblem& red,
                                             const PosteriorApproximation& reduced,
                                             bool materialize_factor = true) {
  PosteriorApproximation full;
  full.update_coeff = reduced.update_coeff;
  full.mean = red.full_prior->mean + red.full_prior->sqrt_factor * reduced.update_coeff;
  full.downdate.base = red.full_prior;
  full.downdate.coeff = reduced.downdate.coeff;
  if (materialize_factor)
    full.downdate.factor = red.full_prior->sqrt_factor * reduced.downdate.coeff;
  return full;
}

inline PosteriorApproximation lis_mr_posterior(const ReducedInverseProblem& red, const Vector& y) {
  if (red.basis.kind != BasisKind::lis)
    throw config_error("lis_mr_posterior: reduced problem was not built with an LIS basis");
  return lift_posterior(red, detail::reduced_update(red, y));
}

inline PosteriorApproximation pod_posterior(const ReducedInverseProblem& red, const Vector& y) {
  if (red.basis.kind != BasisKind::pod)
    throw config_error("pod_posterior: reduced problem was not built with a POD basis");
  return lift_posterior(red, detail::reduced_update(red, y));
}

// Optimal low-rank route: G is replaced by G P = (G V) W^T inside the
// full-dimensional conjugate update. The truncated representation (G V,
// S^T W) keeps evaluation at O(r (m + d)).
class OlrOperator {
 public:
  OlrOperator(const LinearForwardProblem& prob, const ReductionBasis& basis)
      : full_prior_(prob.prior_ptr()) {
    if (basis.kind != BasisKind::lis)
      throw config_error("olr_posterior: basis must be LIS type");
    if (basis.V.rows() != prob.state_dim())
      throw config_error("olr_posterior: basis dimension mismatch");
    gv_ = prob.dense_G() * basis.V;                                    // m x r
    cross_ = basis.W.transpose() * full_prior_->sqrt_factor;           // r x k
    projected_mean_ = gv_ * (basis.W.transpose() * full_prior_->mean); // m
    const Matrix a = gv_ * cross_;                                     // m x k
    Matrix innovation_cov = a * a.transpose() +
        prob.noise().sqrt_factor * prob.noise().sqrt_factor.transpose();
    symmetrize(innovation_cov);
    SolveCounter::record(innovation_cov.rows());
    llt_.compute(innovation_cov);
    if (llt_.info() != Eigen::Success)
      throw numeric_error("olr_posterior: innovation covariance numerically indefinite");
    downdate_coeff_ = llt_.matrixL().solve(a).transpose();             // k x m
  }

  Vector update_coeff(const Vector& y) const {
    const Vector w = llt_.solve(y - projected_mean_);
    return cross_.transpose() * (gv_.transpose() * w);
  }

  PosteriorApproximation posterior(const Vector& y, bool materialize_factor = true) const {
    PosteriorApproximation post;
    post.update_coeff = update_coeff(y);
    post.mean = full_prior_->mean + full_prior_->sqrt_factor * post.update_coeff;
    post.downdate.base = full_prior_;
    post.downdate.coeff = downdate_coeff_;
    if (materialize_factor)
      post.downdate.factor = full_prior_->sqrt_factor * downdate_coeff_;
    return post;
  }

 private:
  std::shared_ptr<const GaussianBelief> full_prior_;
  Matrix gv_;
  Matrix cross_;
  Vector projected_mean_;
  Matrix downdate_coeff_;
  Eigen::LLT<Matrix> llt_;
};

inline PosteriorApproximation olr_posterior(const LinearForwardProblem& prob,
                                            const ReductionBasis& basis, const Vector& y) {
  return OlrOperator(prob, basis).posterior(y);
}

// P f = V (W^T f); idempotent oblique projection onto the LIS.
inline Vector projector_apply(const ReductionBasis& basis, const Vector& f) {
  if (basis.kind != BasisKind::lis) throw config_error("projector_apply: LIS basis required");
  if (f.size() != basis.V.rows()) throw config_error("projector_apply: dimension mismatch");
  return basis.V * (basis.W.transpose() * f);
}

}  // namespace lisreduce

#endif  // LISREDUCE_REDUCTION_HPP
