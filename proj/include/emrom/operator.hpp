// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Sparse>

#include "emrom/medium.hpp"

namespace emrom
{

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Discrete curl-curl operator A = C L^T D L C on the kept degrees of freedom.
// Removed (wall-tangential) dofs have zero rows and columns.
struct DiscreteOperator
{
  LebedevGrid grid;
  SparseMatrix A;
  SparseMatrix curl; // B with A = B^T B

  Index dofs() const { return A.rows(); }
  double weight() const { return grid.weight(); }

  Matrix apply(const Matrix &x) const { return A * x; }
};

namespace detail
{

struct CurlTerm
{
  Index node;
  int comp;
  double coef;
};

// Stencil of the discrete rotated divergence d1 (c psi)_2 - d2 (c psi)_1 at every scalar node,
// in terms of (c psi) values. Also returns the quadrature factor of each scalar node
// (1 interior, 1/2 on a wall).
inline void curl_stencil(const LebedevGrid &g, std::vector<std::vector<CurlTerm>> &rows,
                         std::vector<double> &factor)
{
  const Index n1 = g.n1();
  const Index n2 = g.n2();
  const double h = 1.0 / g.ell();
  rows.assign(static_cast<std::size_t>(g.num_alpha() + g.num_beta()), {});
  factor.assign(rows.size(), 1.0);

  auto push = [&](std::vector<CurlTerm> &row, Index node, int comp, double coef) {
    if (g.dof_kept(2 * node + comp))
    {
      row.push_back({node, comp, coef});
    }
  };

  // alpha nodes (i+1/2, j)
  for (Index i = 0; i + 1 < n1; i++)
  {
    for (Index j = 0; j < n2; j++)
    {
      const auto s = static_cast<std::size_t>(i * n2 + j);
      auto &row = rows[s];
      push(row, g.index_a(i + 1, j), 1, h);
      push(row, g.index_a(i, j), 1, -h);
      // - d2 (c psi)_1 from B(i, j) and B(i, j-1), odd mirror across the x2 walls.
      if (j == 0)
      {
        push(row, g.index_b(i, 0), 0, -2.0 * h);
        factor[s] = 0.5;
      }
      else if (j == n2 - 1)
      {
        push(row, g.index_b(i, n2 - 2), 0, 2.0 * h);
        factor[s] = 0.5;
      }
      else
      {
        push(row, g.index_b(i, j), 0, -h);
        push(row, g.index_b(i, j - 1), 0, h);
      }
    }
  }
  // beta nodes (i, j+1/2)
  const Index offset = g.num_alpha();
  for (Index i = 0; i < n1; i++)
  {
    for (Index j = 0; j + 1 < n2; j++)
    {
      const auto s = static_cast<std::size_t>(offset + i * (n2 - 1) + j);
      auto &row = rows[s];
      // d1 (c psi)_2 from B(i, j) and B(i-1, j), odd mirror across the x1 walls.
      if (i == 0)
      {
        push(row, g.index_b(0, j), 1, 2.0 * h);
        factor[s] = 0.5;
      }
      else if (i == n1 - 1)
      {
        push(row, g.index_b(n1 - 2, j), 1, -2.0 * h);
        factor[s] = 0.5;
      }
      else
      {
        push(row, g.index_b(i, j), 1, h);
        push(row, g.index_b(i - 1, j), 1, -h);
      }
      push(row, g.index_a(i, j + 1), 0, -h);
      push(row, g.index_a(i, j), 0, h);
    }
  }
}

}  // namespace detail

// Weighted curl map B = sqrt(D) L C restricted to kept dofs, so that A = B^T B.
inline SparseMatrix weighted_curl(const MediumField &medium)
{
  const LebedevGrid &g = medium.grid();
  std::vector<std::vector<detail::CurlTerm>> rows;
  std::vector<double> factor;
  detail::curl_stencil(g, rows, factor);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(rows.size() * 8);
  for (std::size_t s = 0; s < rows.size(); s++)
  {
    const double sq = std::sqrt(factor[s]);
    for (const auto &t : rows[s])
    {
      const SpeedTensor c = medium.tensor(t.node);
      const double row0 = t.comp == 0 ? c.c11 : c.c12;
      const double row1 = t.comp == 0 ? c.c12 : c.c22;
      const Index d0 = 2 * t.node;
      if (g.dof_kept(d0) && row0 != 0.0)
      {
        triplets.emplace_back(static_cast<Index>(s), d0, sq * t.coef * row0);
      }
      if (g.dof_kept(d0 + 1) && row1 != 0.0)
      {
        triplets.emplace_back(static_cast<Index>(s), d0 + 1, sq * t.coef * row1);
      }
    }
  }
  SparseMatrix B(static_cast<Index>(rows.size()), g.num_dofs());
  B.setFromTriplets(triplets.begin(), triplets.end());
  return B;
}

inline DiscreteOperator assemble_operator(const MediumField &medium)
{
  SparseMatrix B = weighted_curl(medium);
  SparseMatrix A = SparseMatrix(B.transpose()) * B;
  SparseMatrix At = A.transpose();
  A = 0.5 * (A + At);
  A.prune(0.0);
  A.makeCompressed();
  return {medium.grid(), std::move(A), B};
}

// Largest eigenvalue estimate by power iteration (deterministic start).
inline double estimate_lambda_max(const DiscreteOperator &op, int iterations = 200)
{
  Vector x(op.dofs());
  for (Index k = 0; k < x.size(); k++)
  {
    x(k) = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(k)) +
           0.25 * std::cos(1.3 * static_cast<double>(k * k % 97));
  }
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; it++)
  {
    Vector y = op.A * x;
    const double next = x.dot(y);
    const double norm = y.norm();
    if (norm == 0.0)
    {
      return 0.0;
    }
    x = y / norm;
    if (it > 10 && std::abs(next - lambda) <= 1e-6 * std::abs(next))
    {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

// Gershgorin bound on the spectrum of A.
inline double gershgorin_bound(const SparseMatrix &A)
{
  double bound = 0.0;
  for (Index r = 0; r < A.outerSize(); r++)
  {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(A, r); it; ++it)
    {
      sum += std::abs(it.value());
    }
    bound = std::max(bound, sum);
  }
  return bound;
}

}  // namespace emrom
