#ifndef LISREDUCE_FEM_HPP
#define LISREDUCE_FEM_HPP

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lisreduce/forward.hpp"

namespace lisreduce {

// Stationary exponential-kernel random field for the distributed load.
struct RandomFieldSpec {
  double mean = 0.0;                // mu_Q, load units
  double std_dev = 0.0;             // sigma_Q
  double correlation_length = 0.0;  // theta [m]
};

// Gamma_QQ(i,j) = sigma^2 exp(-|z_i - z_j| / theta) at the element midpoints.
inline Matrix kernel_covariance(const RandomFieldSpec& spec, const Vector& midpoints) {
  if (spec.std_dev <= 0.0 || spec.correlation_length <= 0.0)
    throw config_error("kernel_covariance: sigma and theta must be positive");
  const Index n = midpoints.size();
  Matrix cov(n, n);
  const double var = spec.std_dev * spec.std_dev;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) {
      const double v = var * std::exp(-std::abs(midpoints[i] - midpoints[j]) / spec.correlation_length);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  return cov;
}

// Shape-function integrals mapping elementwise loads q (n) to nodal forces f (d).
struct LoadMap {
  Matrix map;  // d x n

  Vector apply(const Vector& q) const { return map * q; }
};

struct ModelBundle {
  std::string name;
  StaticLinearSystem system;
  LoadMap load_map;
  RandomFieldSpec field;
  Vector midpoints;
  std::shared_ptr<const GaussianBelief> prior;  // on f = L q
  std::map<std::string, double> constants;
};

namespace detail {

inline std::shared_ptr<const GaussianBelief> field_prior(const LoadMap& lmap,
                                                         const RandomFieldSpec& field,
                                                         const Vector& midpoints) {
  const Matrix kernel = kernel_covariance(field, midpoints);
  const Matrix chol = jittered_cholesky(kernel);
  GaussianBelief prior(lmap.map * Vector::Constant(midpoints.size(), field.mean), lmap.map * chol);
  return std::make_shared<GaussianBelief>(std::move(prior));
}

}  // namespace detail

// Cantilever bar D u'' + q = 0, u(0) = 0, u'(L) = 0. Linear elements, the
// clamped dof eliminated, so d = n.
inline ModelBundle build_bar(Index n = 100) {
  if (n < 2) throw config_error("build_bar: need at least 2 elements");
  const double length = 2.0;
  const double rigidity = 4e8;  // D [N]
  const double h = length / static_cast<double>(n);
  const Index d = n;

  Matrix stiffness = Matrix::Zero(d, d);
  Matrix lmap = Matrix::Zero(d, n);
  const double kfac = rigidity / h;
  for (Index e = 0; e < n; ++e) {
    // element e joins nodes e and e+1; free dof index = node - 1
    const Index left = e - 1;
    const Index right = e;
    if (left >= 0) {
      stiffness(left, left) += kfac;
      stiffness(left, right) -= kfac;
      stiffness(right, left) -= kfac;
      lmap(left, e) += h / 2.0;
    }
    stiffness(right, right) += kfac;
    lmap(right, e) += h / 2.0;
  }

  std::vector<DofLabel> labels(d);
  for (Index i = 0; i < d; ++i) labels[i] = {DofKind::translation, (static_cast<double>(i) + 1.0) * h};

  ModelBundle bundle;
  bundle.name = "bar";
  bundle.system = StaticLinearSystem(std::move(stiffness), std::move(labels));
  bundle.load_map = LoadMap{std::move(lmap)};
  bundle.field = RandomFieldSpec{4e6, 0.3 * 4e6, length / 2.0};
  bundle.midpoints = Vector::LinSpaced(n, 0.5 * h, length - 0.5 * h);
  bundle.prior = detail::field_prior(bundle.load_map, bundle.field, bundle.midpoints);
  bundle.constants = {{"length", length}, {"rigidity", rigidity}, {"h", h},
                      {"elements", static_cast<double>(n)}};
  return bundle;
}

struct TunnelOptions {
  double k_sand = 33000.0;  // [kN/m^3]
  double k_clay = 5000.0;
};

// Tunnel beam on a Winkler foundation, free-free, sand/clay interface at
// midspan. Cubic Euler-Bernoulli elements; the ODE is normalized to
// EI_eff u'''' + k u = q with EI_eff = zeta E I / D, so the foundation
// enters with plain k. Nothing is eliminated: d = 2(n+1).
inline ModelBundle build_tunnel(Index n = 800, const TunnelOptions& opt = {}) {
  if (n < 2 || n % 2 != 0) throw config_error("build_tunnel: element count must be even");
  const double length = 200.0;
  const double diameter = 6.2;
  const double wall = 0.35;
  const double zeta = 1.0 / 7.0;
  const double youngs = 35e6;
  const double inertia = M_PI / 64.0 * (std::pow(diameter, 4) - std::pow(diameter - 2.0 * wall, 4));
  const double ei_eff = zeta * youngs * inertia / diameter;
  const double h = length / static_cast<double>(n);
  const Index d = 2 * (n + 1);

  Matrix kb(4, 4), kw(4, 4);
  const double h2 = h * h;
  kb << 12.0, 6.0 * h, -12.0, 6.0 * h,
        6.0 * h, 4.0 * h2, -6.0 * h, 2.0 * h2,
        -12.0, -6.0 * h, 12.0, -6.0 * h,
        6.0 * h, 2.0 * h2, -6.0 * h, 4.0 * h2;
  kb *= ei_eff / (h2 * h);
  kw << 156.0, 22.0 * h, 54.0, -13.0 * h,
        22.0 * h, 4.0 * h2, 13.0 * h, -3.0 * h2,
        54.0, 13.0 * h, 156.0, -22.0 * h,
        -13.0 * h, -3.0 * h2, -22.0 * h, 4.0 * h2;
  kw *= h / 420.0;

  const double load_entries[4] = {h / 2.0, h2 / 12.0, h / 2.0, -h2 / 12.0};

  Matrix stiffness = Matrix::Zero(d, d);
  Matrix lmap = Matrix::Zero(d, n);
  Vector midpoints(n);
  for (Index e = 0; e < n; ++e) {
    const double zmid = (static_cast<double>(e) + 0.5) * h;
    midpoints[e] = zmid;
    const double k_found = zmid < length / 2.0 ? opt.k_sand : opt.k_clay;
    const Index dof0 = 2 * e;
    for (Index a = 0; a < 4; ++a) {
      lmap(dof0 + a, e) += load_entries[a];
      for (Index b = 0; b < 4; ++b)
        stiffness(dof0 + a, dof0 + b) += kb(a, b) + k_found * kw(a, b);
    }
  }

  std::vector<DofLabel> labels(d);
  for (Index node = 0; node <= n; ++node) {
    const double z = static_cast<double>(node) * h;
    labels[2 * node] = {DofKind::translation, z};
    labels[2 * node + 1] = {DofKind::rotation, z};
  }

  ModelBundle bundle;
  bundle.name = "tunnel";
  bundle.system = StaticLinearSystem(std::move(stiffness), std::move(labels));
  bundle.load_map = LoadMap{std::move(lmap)};
  bundle.field = RandomFieldSpec{3.0, 3.0, length / 2.0};
  bundle.midpoints = midpoints;
  bundle.prior = detail::field_prior(bundle.load_map, bundle.field, bundle.midpoints);
  bundle.constants = {{"length", length},   {"diameter", diameter}, {"wall_thickness", wall},
                      {"zeta", zeta},       {"youngs_modulus", youngs}, {"inertia", inertia},
                      {"ei_eff", ei_eff},   {"k_sand", opt.k_sand}, {"k_clay", opt.k_clay},
                      {"h", h},             {"elements", static_cast<double>(n)}};
  return bundle;
}

inline ModelBundle build_model(const std::string& name, Index n) {
  if (name == "bar") return build_bar(n);
  if (name == "tunnel") return build_tunnel(n);
  throw config_error("build_model: unknown model '" + name + "'");
}

inline ModelBundle build_model(const std::string& name) {
  if (name == "bar") return build_bar();
  if (name == "tunnel") return build_tunnel();
  throw config_error("build_model: unknown model '" + name + "'");
}

}  // namespace lisreduce

#endif  // LISREDUCE_FEM_HPP
