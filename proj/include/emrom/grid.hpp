// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <string>

#include "emrom/block_linalg.hpp"

namespace emrom
{

// Lebedev grid on [0,(n1-1)l] x [0,(n2-1)l].
//
// Family A: nodes (i l, j l), 0 <= i < n1, 0 <= j < n2.
// Family B: nodes ((i+1/2) l, (j+1/2) l), 0 <= i < n1-1, 0 <= j < n2-1.
// Node order: family A row-major (i*n2 + j), then family B row-major.
// Both field components live at every node; dof = 2*node + comp.
//
// Scalar (curl) nodes:
//   alpha (i+1/2, j), 0 <= i < n1-1, 0 <= j < n2
//   beta  (i, j+1/2), 0 <= i < n1,   0 <= j < n2-1
class LebedevGrid
{
public:
  LebedevGrid() = default;

  LebedevGrid(Index n1, Index n2, double ell) : n1_(n1), n2_(n2), ell_(ell)
  {
    if (n1 < 8 || n2 < 8)
    {
      throw Error(ErrorKind::InvalidDimension, "grid needs at least 8x8 nodes, got " +
                                                   std::to_string(n1) + "x" + std::to_string(n2));
    }
    if (!(ell > 0.0) || !std::isfinite(ell))
    {
      throw Error(ErrorKind::InvalidDimension, "grid spacing must be positive");
    }
  }

  Index n1() const { return n1_; }
  Index n2() const { return n2_; }
  double ell() const { return ell_; }

  Index num_a() const { return n1_ * n2_; }
  Index num_b() const { return (n1_ - 1) * (n2_ - 1); }
  Index num_nodes() const { return num_a() + num_b(); }
  Index num_dofs() const { return 2 * num_nodes(); }
  Index num_alpha() const { return (n1_ - 1) * n2_; }
  Index num_beta() const { return n1_ * (n2_ - 1); }

  // Quadrature weight of every vector node; the two families tile the domain twice.
  double weight() const { return 0.5 * ell_ * ell_; }

  Index index_a(Index i, Index j) const { return i * n2_ + j; }
  Index index_b(Index i, Index j) const { return num_a() + i * (n2_ - 1) + j; }
  bool is_a(Index node) const { return node < num_a(); }

  std::array<double, 2> position(Index node) const
  {
    if (node < num_a())
    {
      return {static_cast<double>(node / n2_) * ell_, static_cast<double>(node % n2_) * ell_};
    }
    const Index k = node - num_a();
    return {(static_cast<double>(k / (n2_ - 1)) + 0.5) * ell_,
            (static_cast<double>(k % (n2_ - 1)) + 0.5) * ell_};
  }

  std::array<double, 2> extent() const
  {
    return {static_cast<double>(n1_ - 1) * ell_, static_cast<double>(n2_ - 1) * ell_};
  }

  bool contains(double x1, double x2) const
  {
    const auto e = extent();
    return x1 >= 0.0 && x2 >= 0.0 && x1 <= e[0] && x2 <= e[1];
  }

  // Nearest family-A node; ties round half away from zero.
  Index nearest_a(double x1, double x2) const
  {
    if (!contains(x1, x2))
    {
      throw Error(ErrorKind::RegionOutsideDomain, "point (" + std::to_string(x1) + ", " +
                                                      std::to_string(x2) + ") is outside the grid");
    }
    const Index i = static_cast<Index>(std::lround(x1 / ell_));
    const Index j = static_cast<Index>(std::lround(x2 / ell_));
    return index_a(std::min(i, n1_ - 1), std::min(j, n2_ - 1));
  }

  // Distance from a node to the nearest wall.
  double wall_distance(Index node) const
  {
    const auto p = position(node);
    const auto e = extent();
    return std::min({p[0], p[1], e[0] - p[0], e[1] - p[1]});
  }

  // False for tangential components of family-A boundary nodes, which the perfectly
  // conducting wall forces to zero.
  bool dof_kept(Index dof) const
  {
    const Index node = dof / 2;
    if (node >= num_a())
    {
      return true;
    }
    const Index comp = dof % 2;
    const Index i = node / n2_;
    const Index j = node % n2_;
    if (comp == 1 && (i == 0 || i == n1_ - 1))
    {
      return false;
    }
    if (comp == 0 && (j == 0 || j == n2_ - 1))
    {
      return false;
    }
    return true;
  }

private:
  Index n1_ = 0;
  Index n2_ = 0;
  double ell_ = 1.0;
};

inline LebedevGrid build_grid(Index n1, Index n2, double ell)
{
  return LebedevGrid(n1, n2, ell);
}

}  // namespace emrom
