// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emrom/error.hpp"

namespace emrom
{

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Default tolerances of the dense kernels. All of them can be overridden per call.
struct LinalgTolerances
{
  double symmetry = 1e-12;          // relative Frobenius asymmetry accepted as symmetric
  double singular_condition = 1e14; // diagonal-block condition number treated as singular
  double breakdown = 1e-10;         // relative residual-block size signalling Lanczos breakdown
};

inline double relative_asymmetry(const Matrix &M)
{
  const double norm = M.norm();
  if (norm == 0.0)
  {
    return 0.0;
  }
  return (M - M.transpose()).norm() / norm;
}

inline Matrix symmetrized(const Matrix &M)
{
  return 0.5 * (M + M.transpose());
}

// Dense square matrix partitioned into square blocks of a fixed size.
class BlockMatrix
{
public:
  BlockMatrix() = default;

  BlockMatrix(Matrix data, Index block_size) : data_(std::move(data)), block_size_(block_size)
  {
    if (block_size_ <= 0 || data_.rows() != data_.cols() || data_.rows() % block_size_ != 0)
    {
      throw Error(ErrorKind::InvalidDimension,
                  "block matrix of size " + std::to_string(data_.rows()) + "x" +
                      std::to_string(data_.cols()) + " is not divisible into blocks of " +
                      std::to_string(block_size_));
    }
  }

  static BlockMatrix zeros(Index num_blocks, Index block_size)
  {
    return BlockMatrix(Matrix::Zero(num_blocks * block_size, num_blocks * block_size),
                       block_size);
  }

  const Matrix &data() const { return data_; }
  Matrix &data() { return data_; }
  Index block_size() const { return block_size_; }
  Index num_blocks() const { return block_size_ == 0 ? 0 : data_.rows() / block_size_; }
  Index dim() const { return data_.rows(); }

  auto block(Index i, Index j)
  {
    return data_.block(i * block_size_, j * block_size_, block_size_, block_size_);
  }
  auto block(Index i, Index j) const
  {
    return data_.block(i * block_size_, j * block_size_, block_size_, block_size_);
  }

  // Frobenius norm of all blocks with |i - j| >= 2.
  double off_tridiagonal_norm() const
  {
    double sum = 0.0;
    for (Index i = 0; i < num_blocks(); i++)
    {
      for (Index j = 0; j < num_blocks(); j++)
      {
        if (std::abs(i - j) >= 2)
        {
          sum += block(i, j).squaredNorm();
        }
      }
    }
    return std::sqrt(sum);
  }

  bool is_symmetric(double tol = 1e-12) const { return relative_asymmetry(data_) <= tol; }

private:
  Matrix data_;
  Index block_size_ = 0;
};

// Upper block triangular matrix with SPD diagonal blocks, as produced by block_cholesky.
class BlockTriangular
{
public:
  BlockTriangular() = default;

  BlockTriangular(Matrix data, Index block_size) : data_(std::move(data)), block_size_(block_size)
  {
    if (block_size_ <= 0 || data_.rows() != data_.cols() || data_.rows() % block_size_ != 0)
    {
      throw Error(ErrorKind::InvalidDimension, "block triangular matrix has incompatible size");
    }
    for (Index i = 1; i < num_blocks(); i++)
    {
      for (Index j = 0; j < i; j++)
      {
        if (!data_.block(i * block_size_, j * block_size_, block_size_, block_size_).isZero(0.0))
        {
          throw Error(ErrorKind::InvalidDimension,
                      "block (" + std::to_string(i) + "," + std::to_string(j) +
                          ") below the diagonal is nonzero");
        }
      }
    }
  }

  const Matrix &data() const { return data_; }
  Index block_size() const { return block_size_; }
  Index num_blocks() const { return block_size_ == 0 ? 0 : data_.rows() / block_size_; }
  Index dim() const { return data_.rows(); }

  auto block(Index i, Index j) const
  {
    return data_.block(i * block_size_, j * block_size_, block_size_, block_size_);
  }

  // Block column j, i.e. R * i_j.
  auto block_column(Index j) const { return data_.middleCols(j * block_size_, block_size_); }

private:
  Matrix data_;
  Index block_size_ = 0;
};

namespace detail
{

inline void require_symmetric(const Matrix &M, double tol, const char *what)
{
  if (M.rows() != M.cols())
  {
    throw Error(ErrorKind::InvalidDimension, std::string(what) + " is not square");
  }
  const double asym = relative_asymmetry(M);
  if (!(asym <= tol))
  {
    throw Error(ErrorKind::NotSymmetric, std::string(what) + " has relative asymmetry " +
                                             std::to_string(asym));
  }
}

// Square root and inverse square root of a symmetric positive definite matrix, computed
// from one eigendecomposition. Returns false when an eigenvalue is not positive.
inline bool spd_sqrt_pair(const Matrix &M, Matrix &root, Matrix *inverse_root,
                          double *condition = nullptr)
{
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
  if (eig.info() != Eigen::Success)
  {
    return false;
  }
  const Vector &lambda = eig.eigenvalues();
  if (lambda.size() > 0 && !(lambda.minCoeff() > 0.0))
  {
    return false;
  }
  const Matrix &V = eig.eigenvectors();
  root = symmetrized(V * lambda.cwiseSqrt().asDiagonal() * V.transpose());
  if (inverse_root)
  {
    *inverse_root = symmetrized(V * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose());
  }
  if (condition && lambda.size() > 0)
  {
    *condition = std::sqrt(lambda.maxCoeff() / lambda.minCoeff());
  }
  return true;
}

}  // namespace detail

// The unique symmetric positive definite square root.
inline Matrix spd_sqrt(const Matrix &M, const LinalgTolerances &tol = {})
{
  detail::require_symmetric(M, tol.symmetry, "spd_sqrt input");
  Matrix root;
  if (!detail::spd_sqrt_pair(symmetrized(M), root, nullptr))
  {
    throw Error(ErrorKind::NotSPD, "spd_sqrt input has a non-positive eigenvalue");
  }
  return root;
}

// Block Cholesky factorization M = R^T R with R upper block triangular. The diagonal blocks
// are the SPD square roots of the Schur-complement pivots, which makes the factor unique.
inline BlockTriangular block_cholesky(const BlockMatrix &M, const LinalgTolerances &tol = {})
{
  detail::require_symmetric(M.data(), tol.symmetry, "block_cholesky input");
  const Index b = M.block_size();
  const Index nb = M.num_blocks();
  const Matrix A = symmetrized(M.data());
  Matrix R = Matrix::Zero(A.rows(), A.cols());
  Matrix root, inverse_root;
  for (Index k = 0; k < nb; k++)
  {
    const Index row = k * b;
    // Schur-complement rows k of the remaining matrix: A_k,k: - sum_i R_i,k^T R_i,k:
    Matrix rows = A.block(row, row, b, A.cols() - row);
    if (k > 0)
    {
      rows.noalias() -=
          R.block(0, row, row, b).transpose() * R.block(0, row, row, A.cols() - row);
    }
    Matrix pivot = symmetrized(rows.leftCols(b));
    if (!detail::spd_sqrt_pair(pivot, root, &inverse_root))
    {
      throw Error(ErrorKind::NotSPD, "block_cholesky pivot block " + std::to_string(k) +
                                         " is not positive definite");
    }
    R.block(row, row, b, b) = root;
    if (row + b < A.cols())
    {
      R.block(row, row + b, b, A.cols() - row - b).noalias() =
          inverse_root * rows.rightCols(A.cols() - row - b);
    }
  }
  return BlockTriangular(std::move(R), b);
}

// Inverse of an upper block triangular matrix by block back substitution.
inline Matrix block_tri_inverse(const BlockTriangular &R, const LinalgTolerances &tol = {})
{
  const Index b = R.block_size();
  const Index nb = R.num_blocks();
  Matrix X = Matrix::Zero(R.dim(), R.dim());
  std::vector<Matrix> diag_inv(static_cast<std::size_t>(nb));
  for (Index k = 0; k < nb; k++)
  {
    const Matrix D = R.block(k, k);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(D));
    const Vector &lambda = eig.eigenvalues();
    const double largest = lambda.cwiseAbs().maxCoeff();
    const double smallest = lambda.cwiseAbs().minCoeff();
    if (eig.info() != Eigen::Success || smallest == 0.0 ||
        largest / smallest > tol.singular_condition)
    {
      throw Error(ErrorKind::Singular,
                  "diagonal block " + std::to_string(k) + " is numerically singular");
    }
    diag_inv[static_cast<std::size_t>(k)] =
        eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  }
  for (Index j = 0; j < nb; j++)
  {
    X.block(j * b, j * b, b, b) = diag_inv[static_cast<std::size_t>(j)];
    for (Index i = j - 1; i >= 0; i--)
    {
      // X_ij = -R_ii^{-1} sum_{k=i+1}^{j} R_ik X_kj
      Matrix acc = R.data().block(i * b, (i + 1) * b, b, (j - i) * b) *
                   X.block((i + 1) * b, j * b, (j - i) * b, b);
      X.block(i * b, j * b, b, b).noalias() = -diag_inv[static_cast<std::size_t>(i)] * acc;
    }
  }
  return X;
}

struct SpectralTruncation
{
  Matrix Y;      // column-orthonormal eigenvectors, descending eigenvalue order
  Vector lambda; // kept eigenvalues, descending
  Matrix Lambda() const { return lambda.asDiagonal(); }
};

// Keep the `rank` algebraically largest eigenpairs of a symmetric matrix.
inline SpectralTruncation spectral_truncate(const BlockMatrix &M, Index rank,
                                            const LinalgTolerances &tol = {})
{
  const Index b = M.block_size();
  if (rank <= 0 || rank % b != 0)
  {
    throw Error(ErrorKind::InvalidDimension, "truncation rank " + std::to_string(rank) +
                                                 " is not a positive multiple of " +
                                                 std::to_string(b));
  }
  if (rank > M.dim())
  {
    throw Error(ErrorKind::RankTooLarge,
                "rank " + std::to_string(rank) + " exceeds dimension " + std::to_string(M.dim()));
  }
  detail::require_symmetric(M.data(), std::max(tol.symmetry, 1e-10), "spectral_truncate input");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(M.data()));
  const Index n = M.dim();
  SpectralTruncation out;
  out.Y.resize(n, rank);
  out.lambda.resize(rank);
  for (Index k = 0; k < rank; k++)
  {
    // Eigen sorts ascending.
    out.lambda(k) = eig.eigenvalues()(n - 1 - k);
    out.Y.col(k) = eig.eigenvectors().col(n - 1 - k);
  }
  if (!(out.lambda(rank - 1) > 0.0))
  {
    throw Error(ErrorKind::NonPositiveSpectrum,
                "kept eigenvalue " + std::to_string(out.lambda(rank - 1)) +
                    " is not positive; reduce the truncation rank");
  }
  return out;
}

// Largest multiple of the block size such that all kept eigenvalues exceed `threshold`.
inline Index spectral_rank_for_threshold(const BlockMatrix &M, double threshold)
{
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(M.data()), Eigen::EigenvaluesOnly);
  const Index count = (eig.eigenvalues().array() > threshold).count();
  return (count / M.block_size()) * M.block_size();
}

struct LanczosResult
{
  Matrix Q;      // orthogonal, first block column equals the starting block
  BlockMatrix T; // Q^T Pi Q, block tridiagonal
};

namespace detail
{

// Thin QR with the diagonal of the triangular factor made non-negative.
inline std::pair<Matrix, Matrix> positive_qr(const Matrix &Z)
{
  Eigen::HouseholderQR<Matrix> qr(Z);
  const Index b = Z.cols();
  Matrix Q = qr.householderQ() * Matrix::Identity(Z.rows(), b);
  Matrix R = qr.matrixQR().topRows(b).triangularView<Eigen::Upper>();
  for (Index k = 0; k < b; k++)
  {
    if (R(k, k) < 0.0)
    {
      R.row(k) *= -1.0;
      Q.col(k) *= -1.0;
    }
  }
  return {std::move(Q), std::move(R)};
}

}  // namespace detail

// Block Lanczos tridiagonalization with full reorthogonalization against all previous blocks.
inline LanczosResult block_lanczos(const Matrix &Pi, Index b, const Matrix &B0,
                                   const LinalgTolerances &tol = {})
{
  detail::require_symmetric(Pi, std::max(tol.symmetry, 1e-10), "block_lanczos operator");
  const Index n = Pi.rows();
  if (b <= 0 || n % b != 0 || B0.rows() != n || B0.cols() != b)
  {
    throw Error(ErrorKind::InvalidDimension, "block_lanczos starting block has the wrong shape");
  }
  if (!(B0.transpose() * B0).isIdentity(1e-10))
  {
    throw Error(ErrorKind::InvalidDimension, "block_lanczos starting block is not orthonormal");
  }
  const Matrix P = symmetrized(Pi);
  const Index nb = n / b;
  const double scale = std::max(P.norm(), std::numeric_limits<double>::min());
  Matrix Q = Matrix::Zero(n, n);
  Q.leftCols(b) = B0;
  for (Index k = 0; k + 1 < nb; k++)
  {
    Matrix Z = P * Q.middleCols(k * b, b);
    const Index done = (k + 1) * b;
    // Two passes of classical Gram-Schmidt against every accepted block.
    for (int pass = 0; pass < 2; pass++)
    {
      Z -= Q.leftCols(done) * (Q.leftCols(done).transpose() * Z);
    }
    auto [Qk, Bk] = detail::positive_qr(Z);
    const double smallest = Bk.diagonal().cwiseAbs().minCoeff();
    if (smallest <= tol.breakdown * scale)
    {
      throw Error(ErrorKind::Breakdown, "block Lanczos residual block at step " +
                                            std::to_string(k + 1) + " is rank deficient");
    }
    Q.middleCols(done, b) = Qk;
  }
  Matrix T = symmetrized(Q.transpose() * P * Q);
  return {std::move(Q), BlockMatrix(std::move(T), b)};
}

}  // namespace emrom
