// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "emrom/rom.hpp"

namespace emrom
{

// Orthonormal causal basis V = U~ C of the reference snapshot space, U~ = [u~_0 .. u~_{n-1}].
// C is R(c~)^{-1}, or Y Lambda^{-1/2} Q when the ROM was spectrally truncated.
// V is never formed in full; rows are evaluated on demand.
struct ReferenceBasis
{
  LebedevGrid grid;
  Index m = 0;
  Index n = 0;
  double tau = 0.0;
  Snapshots u;        // u~_0..u~_{2n-1} in the reference medium
  DataSeries data;    // D(t_j; c~)
  BlockMatrix M;      // brute-force Gram of u~_0..u~_{n-1}
  BlockMatrix S;      // brute-force stiffness
  BlockTriangular R;  // R(c~), possibly regularized
  Matrix C;           // 2nm x 2rm
  RegularizationRecord regularization;

  Index order() const { return R.num_blocks(); }
  Index block_size() const { return 2 * m; }

  // U~ restricted to the given dof rows, n blocks of 2m columns side by side.
  Matrix snapshot_rows(const std::vector<Index> &rows) const
  {
    const Index b = block_size();
    Matrix out(static_cast<Index>(rows.size()), n * b);
    for (Index j = 0; j < n; j++)
    {
      const Matrix &uj = u[static_cast<std::size_t>(j)];
      for (std::size_t r = 0; r < rows.size(); r++)
      {
        out.block(static_cast<Index>(r), j * b, 1, b) = uj.row(rows[r]);
      }
    }
    return out;
  }

  // V on the given dof rows.
  Matrix rows(const std::vector<Index> &dofs) const { return snapshot_rows(dofs) * C; }

  // V on every dof.
  Matrix full() const
  {
    const Index b = block_size();
    Matrix out = Matrix::Zero(u.front().rows(), C.cols());
    for (Index j = 0; j < n; j++)
    {
      out.noalias() += u[static_cast<std::size_t>(j)] * C.middleRows(j * b, b);
    }
    return out;
  }
};

namespace detail
{

inline void snapshot_grams(const Snapshots &u, Index n, double w, BlockMatrix &M, BlockMatrix &S)
{
  const Index b = u.front().cols();
  M = BlockMatrix::zeros(n, b);
  S = BlockMatrix::zeros(n, b);
  for (Index j = 0; j < n; j++)
  {
    const Matrix &uj = u[static_cast<std::size_t>(j)];
    for (Index l = 0; l < n; l++)
    {
      M.block(j, l) = w * uj.transpose() * u[static_cast<std::size_t>(l)];
      const Matrix Pu = 0.5 * (u[static_cast<std::size_t>(l + 1)] + u[static_cast<std::size_t>(l == 0 ? 1 : l - 1)]);
      S.block(j, l) = w * uj.transpose() * Pu;
    }
  }
  M = BlockMatrix(symmetrized(M.data()), b);
  S = BlockMatrix(symmetrized(S.data()), b);
}

}  // namespace detail

// Reference run in c~ and its orthonormal basis, regularized like the data-side ROM.
inline ReferenceBasis reference_basis(const DiscreteOperator &op_ref, const ArrayGeometry &array,
                                      const PulseSpec &pulse, double tau, Index n, Index steps_per_tau,
                                      const RegularizationRecord &regularization = {},
                                      double lambda_max = -1.0)
{
  ReferenceBasis basis;
  basis.grid = op_ref.grid;
  basis.m = array.m();
  basis.n = n;
  basis.tau = tau;
  basis.regularization = regularization;
  SnapshotRun run = run_snapshots(op_ref, array, pulse, tau, n, steps_per_tau, lambda_max);
  basis.u = std::move(run.u);
  basis.data = std::move(run.data);
  detail::snapshot_grams(basis.u, n, op_ref.weight(), basis.M, basis.S);

  switch (regularization.method)
  {
    case RegularizationMethod::None:
    case RegularizationMethod::Boost:
    {
      BlockMatrix M = basis.M;
      if (regularization.method == RegularizationMethod::Boost)
      {
        const DataSeries boosted = regularize_boost(basis.data, regularization.alpha);
        M = BlockMatrix(M.data() + assemble_mass(boosted).data() - assemble_mass(basis.data).data(),
                        M.block_size());
      }
      basis.R = block_cholesky(M);
      basis.C = block_tri_inverse(basis.R);
      break;
    }
    case RegularizationMethod::Spectral:
    {
      const SpectralRegularization reg = regularize_spectral(basis.M, basis.S, regularization.order);
      basis.R = block_cholesky(reg.M_reg);
      const Vector inv_root = reg.truncation.lambda.cwiseSqrt().cwiseInverse();
      basis.C = reg.truncation.Y * inv_root.asDiagonal() * reg.Q;
      break;
    }
  }
  basis.regularization.order = basis.order();
  return basis;
}

namespace detail
{

inline void require_matching(const ReferenceBasis &basis, const BlockTriangular &R_data, Index j)
{
  if (R_data.dim() != basis.C.cols() || R_data.block_size() != basis.block_size())
  {
    throw Error(ErrorKind::DimensionMismatch,
                "data factor is " + std::to_string(R_data.dim()) + " wide, basis has " +
                    std::to_string(basis.C.cols()) + " columns");
  }
  if (j < 0 || j >= R_data.num_blocks())
  {
    throw Error(ErrorKind::DimensionMismatch, "snapshot index " + std::to_string(j) + " out of range");
  }
}

}  // namespace detail

// u_j^est = V(c~) R i_j, all dofs.
inline Matrix estimate_internal_wave(const ReferenceBasis &basis, const BlockTriangular &R_data, Index j)
{
  detail::require_matching(basis, R_data, j);
  const Matrix coef = basis.C * R_data.block_column(j);
  Matrix out = Matrix::Zero(basis.u.front().rows(), basis.block_size());
  for (Index k = 0; k < basis.n; k++)
  {
    out.noalias() += basis.u[static_cast<std::size_t>(k)] * coef.middleRows(k * basis.block_size(), basis.block_size());
  }
  return out;
}

// u_j^est on selected dof rows.
inline Matrix estimate_internal_wave(const ReferenceBasis &basis, const BlockTriangular &R_data, Index j,
                                     const std::vector<Index> &rows)
{
  detail::require_matching(basis, R_data, j);
  return basis.snapshot_rows(rows) * (basis.C * R_data.block_column(j));
}

// V(c~) R(c~) i_j, the reference snapshot itself when no truncation was applied.
inline Matrix born_wave(const ReferenceBasis &basis, Index j)
{
  return estimate_internal_wave(basis, basis.R, j);
}

// Rows x1, x2, column, component, value for every node.
inline void write_snapshot_csv(const std::string &path, const LebedevGrid &grid, const Matrix &field)
{
  std::ofstream out(path);
  if (!out)
  {
    throw Error(ErrorKind::IOError, "cannot open " + path);
  }
  out.precision(12);
  out << "x1,x2,column,component,value\n";
  for (Index node = 0; node < grid.num_nodes(); node++)
  {
    const auto x = grid.position(node);
    for (Index c = 0; c < field.cols(); c++)
    {
      for (int p = 0; p < 2; p++)
      {
        out << x[0] << ',' << x[1] << ',' << c << ',' << p + 1 << ',' << field(2 * node + p, c) << '\n';
      }
    }
  }
}

}  // namespace emrom
