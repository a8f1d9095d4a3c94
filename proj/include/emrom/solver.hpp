// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "emrom/operator.hpp"
#include "emrom/pulse.hpp"

namespace emrom
{

// Snapshot fields are dof-major matrices with 2m columns, column (s, p) at index 2s + p.
using Snapshots = std::vector<Matrix>;

struct ArrayGeometry
{
  std::vector<std::array<double, 2>> positions; // snapped to family-A nodes
  std::vector<Index> nodes;
  double separation = 0.0;

  Index m() const { return static_cast<Index>(nodes.size()); }
  double aperture() const { return separation * static_cast<double>(std::max<Index>(m() - 1, 0)); }
};

// m antennas at depth x1 = depth, centered in x2, `separation` apart.
inline ArrayGeometry make_array(const LebedevGrid &grid, Index m, double separation, double depth)
{
  if (m < 1)
  {
    throw Error(ErrorKind::InvalidDimension, "array needs at least one antenna");
  }
  if (separation < grid.ell() && m > 1)
  {
    throw Error(ErrorKind::InvalidDimension, "antenna separation is below the grid spacing");
  }
  ArrayGeometry array;
  array.separation = separation;
  const double center = 0.5 * grid.extent()[1];
  for (Index s = 0; s < m; s++)
  {
    const double x2 = center + (static_cast<double>(s) - 0.5 * static_cast<double>(m - 1)) * separation;
    const Index node = grid.nearest_a(depth, x2);
    array.nodes.push_back(node);
    array.positions.push_back(grid.position(node));
  }
  for (Index s = 1; s < m; s++)
  {
    if (array.nodes[static_cast<std::size_t>(s)] == array.nodes[static_cast<std::size_t>(s - 1)])
    {
      throw Error(ErrorKind::InvalidDimension, "two antennas snap to the same node");
    }
  }
  return array;
}

// Columns F^(s) e_p: nearest-node indicator scaled to unit mass.
inline Matrix source_matrix(const LebedevGrid &grid, const ArrayGeometry &array)
{
  Matrix F = Matrix::Zero(grid.num_dofs(), 2 * array.m());
  for (Index s = 0; s < array.m(); s++)
  {
    const Index node = array.nodes[static_cast<std::size_t>(s)];
    for (Index p = 0; p < 2; p++)
    {
      if (grid.dof_kept(2 * node + p))
      {
        F(2 * node + p, 2 * s + p) = 1.0 / grid.weight();
      }
    }
  }
  return F;
}

// Chebyshev approximation of a scalar function on [0, bound], applied to A via Clenshaw.
class ChebyshevFilter
{
public:
  template <class Fn>
  ChebyshevFilter(Fn &&fn, double bound, int nodes = 4096, double cutoff = 1e-13) : bound_(bound)
  {
    if (!(bound > 0.0))
    {
      throw Error(ErrorKind::InvalidDimension, "Chebyshev interval must be positive");
    }
    Eigen::ArrayXd x(nodes), values(nodes);
    for (int i = 0; i < nodes; i++)
    {
      x(i) = std::cos(std::numbers::pi * (i + 0.5) / nodes);
      values(i) = fn(0.5 * bound * (x(i) + 1.0));
    }
    // Coefficients by the three-term recurrence on the nodes, stopping at the first run of
    // 32 coefficients below the cutoff; past it only the rounding floor of the transform remains.
    std::vector<double> coef;
    Eigen::ArrayXd t_prev = Eigen::ArrayXd::Ones(nodes);
    Eigen::ArrayXd t_cur = x;
    double largest = 0.0;
    int quiet = 0;
    for (int k = 0; k < nodes; k++)
    {
      double c = 0.0;
      if (k == 0)
      {
        c = values.sum() / nodes;
      }
      else
      {
        if (k > 1)
        {
          Eigen::ArrayXd next = 2.0 * x * t_cur - t_prev;
          t_prev = std::move(t_cur);
          t_cur = std::move(next);
        }
        c = 2.0 * (values * t_cur).sum() / nodes;
      }
      coef.push_back(c);
      largest = std::max(largest, std::abs(c));
      quiet = std::abs(c) > cutoff * largest ? 0 : quiet + 1;
      if (quiet == 32)
      {
        coef.resize(coef.size() - 32);
        break;
      }
    }
    if (coef.empty())
    {
      coef.push_back(0.0);
    }
    coef_ = std::move(coef);
  }

  Index degree() const { return static_cast<Index>(coef_.size()) - 1; }

  double operator()(double theta) const
  {
    const double x = 2.0 * theta / bound_ - 1.0;
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = coef_.size(); k-- > 1;)
    {
      const double b0 = 2.0 * x * b1 - b2 + coef_[k];
      b2 = b1;
      b1 = b0;
    }
    return x * b1 - b2 + coef_[0];
  }

  // fn(A) X with the spectrum of A assumed inside [0, bound].
  Matrix apply(const SparseMatrix &A, const Matrix &X) const
  {
    const double scale = 2.0 / bound_;
    auto mapped = [&](const Matrix &v) -> Matrix { return scale * (A * v) - v; };
    Matrix b1 = Matrix::Zero(X.rows(), X.cols());
    Matrix b2 = Matrix::Zero(X.rows(), X.cols());
    for (std::size_t k = coef_.size(); k-- > 1;)
    {
      Matrix b0 = 2.0 * mapped(b1) - b2 + coef_[k] * X;
      b2 = std::move(b1);
      b1 = std::move(b0);
    }
    return mapped(b1) - b2 + coef_[0] * X;
  }

private:
  double bound_;
  std::vector<double> coef_;
};

namespace detail
{

inline void require_interior_array(const LebedevGrid &grid, const ArrayGeometry &array)
{
  for (const Index node : array.nodes)
  {
    if (grid.wall_distance(node) < 2.0 * grid.ell())
    {
      throw Error(ErrorKind::SubdomainTooSmall, "antenna lies within two cells of a wall");
    }
  }
}

}  // namespace detail

// u0 = f^(sqrt(A)) F, evaluated by a Chebyshev expansion of theta -> f^(sqrt(theta)).
inline Matrix initial_snapshot(const DiscreteOperator &op, const ArrayGeometry &array,
                               const PulseSpec &pulse)
{
  detail::require_interior_array(op.grid, array);
  const Matrix F = source_matrix(op.grid, array);
  if (pulse.amplitude == 0.0)
  {
    return Matrix::Zero(F.rows(), F.cols());
  }
  const double bound = gershgorin_bound(op.A) * 1.0001;
  const ChebyshevFilter filter([&](double theta) { return pulse_spectrum(pulse, std::sqrt(std::max(theta, 0.0))); },
                               bound);
  return filter.apply(op.A, F);
}

inline void require_dense_size(const DiscreteOperator &op)
{
  if (op.dofs() > 5000)
  {
    throw Error(ErrorKind::TooLarge, "dense eigensolve limited to 5000 dofs, operator has " +
                                         std::to_string(op.dofs()));
  }
}

// Dense reference for initial_snapshot: explicit eigendecomposition, terms below
// 1e-12 of the largest spectral weight dropped.
inline Matrix initial_snapshot_dense(const DiscreteOperator &op, const ArrayGeometry &array,
                                     const PulseSpec &pulse)
{
  require_dense_size(op);
  detail::require_interior_array(op.grid, array);
  const Matrix F = source_matrix(op.grid, array);
  Eigen::SelfAdjointEigenSolver<Matrix> eig{Matrix(op.A)};
  const Vector &theta = eig.eigenvalues();
  Vector g(theta.size());
  for (Index q = 0; q < theta.size(); q++)
  {
    g(q) = std::abs(pulse_spectrum(pulse, std::sqrt(std::max(theta(q), 0.0))));
  }
  const double top = g.size() ? g.maxCoeff() : 0.0;
  for (Index q = 0; q < g.size(); q++)
  {
    if (g(q) < 1e-12 * top)
    {
      g(q) = 0.0;
    }
  }
  const Matrix &V = eig.eigenvectors();
  return V * (g.asDiagonal() * (V.transpose() * F));
}

// Leapfrog state for u'' = -A u with zero initial velocity: u^1 = u^0 - dt^2/2 A u^0.
class Leapfrog
{
public:
  Leapfrog(const SparseMatrix &A, Matrix u0, double dt) : A_(&A), dt2_(dt * dt), cur_(std::move(u0))
  {
    prev_ = cur_ - 0.5 * dt2_ * ((*A_) * cur_); // u^{-1} = u^{1}
  }

  const Matrix &current() const { return cur_; }
  const Matrix &previous() const { return prev_; }

  void step()
  {
    Matrix next = 2.0 * cur_ - prev_ - dt2_ * ((*A_) * cur_);
    prev_ = std::move(cur_);
    cur_ = std::move(next);
  }

private:
  const SparseMatrix *A_;
  double dt2_;
  Matrix prev_;
  Matrix cur_;
};

inline double cfl_limit(double lambda_max) { return 0.9 * 2.0 / std::sqrt(lambda_max); }

// Returns u_j for j = 0..n_steps-1 at t_j = j tau.
inline Snapshots propagate(const DiscreteOperator &op, const Matrix &u0, double dt, double tau,
                           Index n_steps, double lambda_max = -1.0)
{
  const double ratio = tau / dt;
  const auto stride = static_cast<Index>(std::llround(ratio));
  if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio)
  {
    throw Error(ErrorKind::InvalidDimension, "tau must be an integer multiple of dt");
  }
  if (lambda_max < 0.0)
  {
    lambda_max = estimate_lambda_max(op);
  }
  if (lambda_max > 0.0 && dt > cfl_limit(lambda_max))
  {
    throw Error(ErrorKind::CFLViolation, "dt = " + std::to_string(dt) + " exceeds the stable limit " +
                                             std::to_string(cfl_limit(lambda_max)));
  }
  Snapshots out;
  out.reserve(static_cast<std::size_t>(n_steps));
  if (n_steps <= 0)
  {
    return out;
  }
  out.push_back(u0);
  Leapfrog lf(op.A, u0, dt);
  for (Index j = 1; j < n_steps; j++)
  {
    for (Index k = 0; k < stride; k++)
    {
      lf.step();
    }
    if (!lf.current().allFinite())
    {
      throw Error(ErrorKind::NonFiniteField, "non-finite field at snapshot " + std::to_string(j));
    }
    out.push_back(lf.current());
  }
  return out;
}

// Time step for `steps_per_tau` sub-steps per tau, checked against the stability limit.
inline double choose_dt(double tau, Index steps_per_tau, double lambda_max)
{
  const double dt = tau / static_cast<double>(steps_per_tau);
  if (dt > cfl_limit(lambda_max))
  {
    throw Error(ErrorKind::CFLViolation,
                "tau / " + std::to_string(steps_per_tau) + " exceeds the stable limit; need at least " +
                    std::to_string(static_cast<long>(std::ceil(tau / cfl_limit(lambda_max)))) +
                    " steps per tau");
  }
  return dt;
}

// u_j = cos(j tau sqrt(A)) u0 by dense eigendecomposition.
inline Snapshots exact_snapshots(const DiscreteOperator &op, const Matrix &u0, double tau,
                                 Index n_steps)
{
  require_dense_size(op);
  Eigen::SelfAdjointEigenSolver<Matrix> eig{Matrix(op.A)};
  const Matrix &V = eig.eigenvectors();
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix coef = V.transpose() * u0;
  Snapshots out;
  for (Index j = 0; j < n_steps; j++)
  {
    if (j == 0)
    {
      out.push_back(u0);
      continue;
    }
    const Vector c = (static_cast<double>(j) * tau * root).array().cos();
    out.push_back(V * (c.asDiagonal() * coef));
  }
  return out;
}

}  // namespace emrom
