#ifndef LISREDUCE_CORE_HPP
#define LISREDUCE_CORE_HPP

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <string>

namespace lisreduce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Bad user input: dimensions, malformed configs, unreadable files. CLI exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown: indefinite innovation, singular reduced operator, ...
// CLI exit code 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kRankTruncationTol = 1e-12;  // sigma_i >= tol * sigma_1

// Records the largest matrix dimension factorized or solved since the last
// reset. Online posterior solves are required to stay at the reduced size;
// the acceptance suite asserts this through the counter.
struct SolveCounter {
  static Index& max_dim() {
    static thread_local Index dim = 0;
    return dim;
  }
  static void record(Index n) {
    if (n > max_dim()) max_dim() = n;
  }
  static void reset() { max_dim() = 0; }
};

inline void symmetrize(Matrix& a) { a = ((a + a.transpose()) * 0.5).eval(); }

inline Matrix symmetrized(const Matrix& a) { return (a + a.transpose()) * 0.5; }

inline bool all_finite(const Matrix& a) { return a.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Cholesky of an SPD matrix that may be borderline indefinite in floating
// point (exponential kernels at large n/theta). Jitter eps*(trace/n) with
// eps = 1e-12, retried once with eps = 1e-9.
inline Matrix jittered_cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw config_error("jittered_cholesky: matrix not square");
  const Matrix sym = symmetrized(a);
  SolveCounter::record(sym.rows());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double scale = sym.trace() / static_cast<double>(sym.rows());
  for (double eps : {1e-12, 1e-9}) {
    Matrix jittered = sym;
    jittered.diagonal().array() += eps * scale;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw numeric_error("jittered_cholesky: matrix not positive definite after jitter");
}

// Smallest eigenvalue of a symmetric matrix. Test/diagnostic helper.
inline double min_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace lisreduce

#endif  // LISREDUCE_CORE_HPP
