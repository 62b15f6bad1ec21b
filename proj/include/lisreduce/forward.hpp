#ifndef LISREDUCE_FORWARD_HPP
#define LISREDUCE_FORWARD_HPP

#include <algorithm>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "lisreduce/gaussian.hpp"

namespace lisreduce {

enum class DofKind { translation, rotation };

struct DofLabel {
  DofKind kind = DofKind::translation;
  double z = 0.0;  // coordinate along the structure [m]
};

// Static system K u = f with K SPD after boundary conditions. The Cholesky
// factorization is computed on first use and then read-only.
class StaticLinearSystem {
 public:
  StaticLinearSystem() = default;
  StaticLinearSystem(Matrix stiffness, std::vector<DofLabel> labels)
      : K_(std::move(stiffness)), labels_(std::move(labels)) {
    if (K_.rows() != K_.cols()) throw config_error("StaticLinearSystem: K must be square");
    if (static_cast<Index>(labels_.size()) != K_.rows())
      throw config_error("StaticLinearSystem: one dof label per row required");
  }

  Index dim() const { return K_.rows(); }
  const Matrix& stiffness() const { return K_; }
  const std::vector<DofLabel>& dof_labels() const { return labels_; }

  std::vector<Index> translational_dofs() const {
    std::vector<Index> out;
    for (Index i = 0; i < dim(); ++i)
      if (labels_[i].kind == DofKind::translation) out.push_back(i);
    return out;
  }

  const Eigen::LLT<Matrix>& factorization() const {
    if (!llt_) {
      SolveCounter::record(K_.rows());
      llt_.emplace(K_);
      if (llt_->info() != Eigen::Success)
        throw numeric_error("StaticLinearSystem: K not SPD (missing boundary conditions?)");
    }
    return *llt_;
  }

  template <typename Derived>
  typename Derived::PlainObject solve(const Eigen::MatrixBase<Derived>& rhs) const {
    return factorization().solve(rhs.derived());
  }

 private:
  Matrix K_;
  std::vector<DofLabel> labels_;
  mutable std::optional<Eigen::LLT<Matrix>> llt_;
};

// Row-selection observation operator: m distinct dof indices.
struct ObservationOperator {
  std::vector<Index> indices;

  Index count() const { return static_cast<Index>(indices.size()); }

  void validate(Index dim) const {
    std::vector<Index> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw config_error("ObservationOperator: duplicate dof index");
    for (Index i : indices)
      if (i < 0 || i >= dim) throw config_error("ObservationOperator: dof index out of range");
  }

  Vector apply(const Vector& u) const {
    Vector out(count());
    for (Index i = 0; i < count(); ++i) out[i] = u[indices[i]];
    return out;
  }

  Matrix select_rows(const Matrix& a) const {
    Matrix out(count(), a.cols());
    for (Index i = 0; i < count(); ++i) out.row(i) = a.row(indices[i]);
    return out;
  }

  Matrix dense(Index dim) const {
    Matrix c = Matrix::Zero(count(), dim);
    for (Index i = 0; i < count(); ++i) c(i, indices[i]) = 1.0;
    return c;
  }
};

// Inverse problem y = C K^-1 f + eps with Gaussian prior on f.
class LinearForwardProblem {
 public:
  LinearForwardProblem(StaticLinearSystem system, ObservationOperator obs,
                       std::shared_ptr<const GaussianBelief> prior, GaussianBelief noise)
      : system_(std::move(system)), obs_(std::move(obs)), prior_(std::move(prior)),
        noise_(std::move(noise)) {
    obs_.validate(system_.dim());
    if (prior_->dim() != system_.dim())
      throw config_error("LinearForwardProblem: prior dimension != system dimension");
    if (noise_.dim() != obs_.count())
      throw config_error("LinearForwardProblem: noise dimension != observation count");
  }

  const StaticLinearSystem& system() const { return system_; }
  const ObservationOperator& observation() const { return obs_; }
  const std::shared_ptr<const GaussianBelief>& prior_ptr() const { return prior_; }
  const GaussianBelief& prior() const { return *prior_; }
  const GaussianBelief& noise() const { return noise_; }
  Index state_dim() const { return system_.dim(); }
  Index obs_dim() const { return obs_.count(); }

  // Materialized G = C K^-1 (m x d), computed once by m adjoint solves.
  const Matrix& dense_G() const {
    if (G_.size() == 0) {
      const Matrix rhs = obs_.dense(system_.dim()).transpose();  // d x m
      G_ = system_.solve(rhs).transpose();
    }
    return G_;
  }

 private:
  StaticLinearSystem system_;
  ObservationOperator obs_;
  std::shared_ptr<const GaussianBelief> prior_;
  GaussianBelief noise_;
  mutable Matrix G_;
};

inline Vector apply_forward(const LinearForwardProblem& prob, const Vector& f) {
  if (f.size() != prob.state_dim()) throw config_error("apply_forward: rhs dimension mismatch");
  return prob.observation().apply(prob.system().solve(f));
}

inline Matrix assemble_dense_G(const LinearForwardProblem& prob) { return prob.dense_G(); }

struct SyntheticData {
  Vector f_true;
  Vector y;
};

inline SyntheticData generate_data(const LinearForwardProblem& prob, SeededStream& stream) {
  SyntheticData out;
  out.f_true = sample(prob.prior(), stream);
  out.y = apply_forward(prob, out.f_true) + sample(prob.noise(), stream);
  return out;
}

// m distinct indices drawn uniformly without replacement from the
// translational dofs (partial Fisher-Yates), then sorted for stable output.
inline ObservationOperator draw_observation_indices(const StaticLinearSystem& system, Index m,
                                                    SeededStream& stream) {
  std::vector<Index> pool = system.translational_dofs();
  if (m > static_cast<Index>(pool.size()))
    throw config_error("draw_observation_indices: m exceeds translational dof count");
  for (Index i = 0; i < m; ++i) {
    const auto j = i + static_cast<Index>(stream.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  ObservationOperator obs;
  obs.indices.assign(pool.begin(), pool.begin() + m);
  std::sort(obs.indices.begin(), obs.indices.end());
  return obs;
}

}  // namespace lisreduce

#endif  // LISREDUCE_FORWARD_HPP
