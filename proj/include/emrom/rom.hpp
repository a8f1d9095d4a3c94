// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "emrom/binary_io.hpp"
#include "emrom/block_linalg.hpp"
#include "emrom/data.hpp"

namespace emrom
{

namespace detail
{

inline void require_full_series(const DataSeries &data)
{
  if (data.m < 1 || data.n < 1 || data.size() < 2 * data.n)
  {
    throw Error(ErrorKind::InsufficientData, "ROM of order n needs D_0..D_{2n-1}, got " +
                                                 std::to_string(data.size()) + " matrices");
  }
}

}  // namespace detail

// M_{j,l} = (D_{j+l} + D_{|j-l|}) / 2, j, l = 0..n-1
inline BlockMatrix assemble_mass(const DataSeries &data)
{
  detail::require_full_series(data);
  const Index b = 2 * data.m;
  BlockMatrix M = BlockMatrix::zeros(data.n, b);
  for (Index j = 0; j < data.n; j++)
  {
    for (Index l = 0; l < data.n; l++)
    {
      M.block(j, l) = 0.5 * (data.even(j + l) + data.even(j - l));
    }
  }
  return BlockMatrix(symmetrized(M.data()), b);
}

// S_{j,l} = (D_{j+l+1} + D_{|j-l-1|} + D_{|j+l-1|} + D_{|j-l+1|}) / 4
inline BlockMatrix assemble_stiffness(const DataSeries &data)
{
  detail::require_full_series(data);
  const Index b = 2 * data.m;
  BlockMatrix S = BlockMatrix::zeros(data.n, b);
  for (Index j = 0; j < data.n; j++)
  {
    for (Index l = 0; l < data.n; l++)
    {
      S.block(j, l) = 0.25 * (data.even(j + l + 1) + data.even(j - l - 1) + data.even(j + l - 1) +
                              data.even(j - l + 1));
    }
  }
  return BlockMatrix(symmetrized(S.data()), b);
}

// D_0 -> (1 + 2 alpha) D_0, i.e. every diagonal block of M gains alpha D_0.
inline DataSeries regularize_boost(const DataSeries &data, double alpha)
{
  DataSeries out = data;
  out.D[0] = (1.0 + 2.0 * alpha) * data.D[0];
  return out;
}

struct SpectralRegularization
{
  SpectralTruncation truncation;
  Matrix Pi; // Lambda^{-1/2} Y^T S Y Lambda^{-1/2}
  Matrix Q;
  BlockMatrix M_reg; // Q^T Lambda Q
  BlockMatrix P_reg; // Q^T Pi Q, block tridiagonal
};

// Keep the 2rm largest eigenpairs of M and restore block structure by block Lanczos, started
// on the coordinates of the first state in the truncated basis.
inline SpectralRegularization regularize_spectral(const BlockMatrix &M, const BlockMatrix &S, Index r)
{
  const Index b = M.block_size();
  if (S.dim() != M.dim() || S.block_size() != b)
  {
    throw Error(ErrorKind::DimensionMismatch, "mass and stiffness shapes differ");
  }
  SpectralRegularization out;
  out.truncation = spectral_truncate(M, r * b);
  const Matrix &Y = out.truncation.Y;
  const Vector inv_root = out.truncation.lambda.cwiseSqrt().cwiseInverse();
  out.Pi = symmetrized(inv_root.asDiagonal() * (Y.transpose() * S.data() * Y) * inv_root.asDiagonal());

  const Matrix start = inv_root.asDiagonal() * (Y.transpose() * M.data().leftCols(b));
  const Matrix B0 = detail::positive_qr(start).first;
  LanczosResult lanczos = block_lanczos(out.Pi, b, B0);
  out.Q = std::move(lanczos.Q);
  out.P_reg = std::move(lanczos.T);
  out.M_reg = BlockMatrix(symmetrized(out.Q.transpose() * out.truncation.Lambda() * out.Q), b);
  return out;
}

enum class RegularizationMethod
{
  None,
  Boost,
  Spectral
};

inline std::string to_string(RegularizationMethod method)
{
  switch (method)
  {
    case RegularizationMethod::None:
      return "none";
    case RegularizationMethod::Boost:
      return "boost";
    case RegularizationMethod::Spectral:
      return "spectral";
  }
  return "unknown";
}

struct RegularizationRecord
{
  RegularizationMethod method = RegularizationMethod::None;
  double alpha = 0.0;     // boost factor
  double threshold = 0.0; // absolute eigenvalue threshold of the spectral cut (0 if r was given)
  Index order = 0;        // effective ROM order r
};

struct Rom
{
  Index m = 0;
  Index n = 0;
  double tau = 0.0;
  BlockTriangular R;
  BlockMatrix S;
  BlockMatrix P;
  RegularizationRecord regularization;

  Index order() const { return R.num_blocks(); }
  Index block_size() const { return 2 * m; }
};

// R = block_cholesky(M), P = R^{-T} S R^{-1}.
inline Rom build_rom(const BlockMatrix &M, const BlockMatrix &S)
{
  if (S.dim() != M.dim() || S.block_size() != M.block_size())
  {
    throw Error(ErrorKind::DimensionMismatch, "mass and stiffness shapes differ");
  }
  Rom rom;
  rom.m = M.block_size() / 2;
  rom.n = M.num_blocks();
  try
  {
    rom.R = block_cholesky(M);
  }
  catch (const Error &e)
  {
    if (e.kind() != ErrorKind::NotSPD)
    {
      throw;
    }
    throw Error(ErrorKind::NotSPD, e.detail() +
                                       "; the mass matrix is indefinite, regularize the data first");
  }
  const Matrix Rinv = block_tri_inverse(rom.R);
  rom.S = S;
  rom.P = BlockMatrix(symmetrized(Rinv.transpose() * S.data() * Rinv), M.block_size());
  rom.regularization.order = rom.n;
  return rom;
}

inline Rom build_rom(const SpectralRegularization &reg)
{
  Rom rom;
  const Index b = reg.M_reg.block_size();
  rom.m = b / 2;
  rom.n = reg.M_reg.num_blocks();
  rom.R = block_cholesky(reg.M_reg);
  rom.P = reg.P_reg;
  rom.S = BlockMatrix(symmetrized(rom.R.data().transpose() * reg.P_reg.data() * rom.R.data()), b);
  rom.regularization.method = RegularizationMethod::Spectral;
  rom.regularization.order = rom.n;
  return rom;
}

struct RomOptions
{
  enum class Mode
  {
    None,
    Boost,
    Spectral,
    Auto
  };
  Mode mode = Mode::Auto;
  double alpha = 1e-6;           // boost factor
  Index order = 0;               // spectral order r; 0 picks it from the threshold
  double relative_threshold = 1e-9; // spectral threshold relative to the largest eigenvalue of M
};

namespace detail
{

inline Index spectral_order(const BlockMatrix &M, double relative_threshold, double &threshold)
{
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M.data(), Eigen::EigenvaluesOnly);
  threshold = relative_threshold * eig.eigenvalues().maxCoeff();
  return spectral_rank_for_threshold(M, threshold) / M.block_size();
}

}  // namespace detail

// Data -> ROM with the requested regularization. Auto keeps the plain construction when every
// eigenvalue of M clears the spectral threshold and truncates otherwise.
inline Rom make_rom(const DataSeries &data, const RomOptions &options = {})
{
  detail::require_full_series(data);
  const DataSeries series = data.size() > 2 * data.n ? data.truncated(data.n) : data;
  Rom rom;
  if (options.mode == RomOptions::Mode::Boost)
  {
    const DataSeries boosted = regularize_boost(series, options.alpha);
    rom = build_rom(assemble_mass(boosted), assemble_stiffness(boosted));
    rom.regularization.method = RegularizationMethod::Boost;
    rom.regularization.alpha = options.alpha;
  }
  else
  {
    const BlockMatrix M = assemble_mass(series);
    const BlockMatrix S = assemble_stiffness(series);
    if (options.mode == RomOptions::Mode::None)
    {
      rom = build_rom(M, S);
    }
    else
    {
      double threshold = 0.0;
      Index r = options.order;
      if (r == 0)
      {
        r = detail::spectral_order(M, options.relative_threshold, threshold);
      }
      if (r < 1)
      {
        throw Error(ErrorKind::NonPositiveSpectrum,
                    "no block of eigenvalues of the mass matrix clears the spectral threshold");
      }
      if (options.mode == RomOptions::Mode::Auto && r == M.num_blocks())
      {
        rom = build_rom(M, S);
      }
      else
      {
        // A Krylov space that closes early means the data only carry r' < r independent blocks.
        for (;; r--)
        {
          try
          {
            rom = build_rom(regularize_spectral(M, S, r));
            break;
          }
          catch (const Error &e)
          {
            if (e.kind() != ErrorKind::Breakdown || r == 1)
            {
              throw;
            }
          }
        }
        rom.regularization.threshold = threshold;
      }
    }
  }
  rom.m = series.m;
  rom.n = series.n;
  rom.tau = series.tau;
  return rom;
}

// u_{j+1} = 2 P u_j - u_{|j-1|}, u_0 = R i_0; returns j = 0..j_max.
inline std::vector<Matrix> rom_propagate(const Rom &rom, Index j_max)
{
  if (j_max < 1)
  {
    throw Error(ErrorKind::InvalidDimension, "j_max must be at least 1");
  }
  const Matrix &P = rom.P.data();
  std::vector<Matrix> u;
  u.reserve(static_cast<std::size_t>(j_max) + 1);
  u.push_back(rom.R.block_column(0));
  u.push_back(P * u[0]);
  for (Index j = 1; j < j_max; j++)
  {
    u.push_back(2.0 * P * u.back() - u[static_cast<std::size_t>(j - 1)]);
  }
  return u;
}

// Coefficients of the Galerkin recursion M (g_{j+1} + g_{|j-1|}) = 2 S g_j, g_0 = i_0, solved
// with the block Cholesky factor of M.
inline std::vector<Matrix> galerkin_coefficients(const BlockMatrix &M, const BlockMatrix &S, Index count)
{
  const Index b = M.block_size();
  const Matrix Rinv = block_tri_inverse(block_cholesky(M));
  auto solve = [&](const Matrix &rhs) -> Matrix { return Rinv * (Rinv.transpose() * rhs); };
  std::vector<Matrix> g;
  g.push_back(Matrix::Identity(M.dim(), b));
  if (count > 1)
  {
    g.push_back(solve(S.data() * g[0]));
  }
  for (Index j = 1; j + 1 < count; j++)
  {
    g.push_back(2.0 * solve(S.data() * g.back()) - g[static_cast<std::size_t>(j - 1)]);
  }
  return g;
}

struct InterpolationReport
{
  double max_residual = 0.0; // max over j <= 2n-2 of ||u0^T u_j - D_j|| / ||D_j||
  Index worst_j = 0;
  double last_residual = 0.0;      // j = 2n-1, informational
  double off_tridiagonal = 0.0;    // ||off-tridiagonal blocks of P|| / ||P||
  double spectral_radius = 0.0;    // max |eigenvalue| of P
};

inline InterpolationReport verify_interpolation(const Rom &rom, const DataSeries &data)
{
  if (data.m != rom.m || data.size() < 2 * rom.order())
  {
    throw Error(ErrorKind::DimensionMismatch, "data do not match the ROM");
  }
  const Index r = rom.order();
  const std::vector<Matrix> u = rom_propagate(rom, 2 * r - 1);
  InterpolationReport report;
  for (Index j = 0; j <= 2 * r - 1; j++)
  {
    const Matrix fit = u[0].transpose() * u[static_cast<std::size_t>(j)];
    const double res = (fit - data[j]).norm() / data[j].norm();
    if (j == 2 * r - 1)
    {
      report.last_residual = res;
    }
    else if (res >= report.max_residual)
    {
      report.max_residual = res;
      report.worst_j = j;
    }
  }
  const double pnorm = rom.P.data().norm();
  report.off_tridiagonal = pnorm > 0.0 ? rom.P.off_tridiagonal_norm() / pnorm : 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(rom.P.data(), Eigen::EigenvaluesOnly);
  report.spectral_radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  return report;
}

inline void write_rom(const std::string &path, const Rom &rom)
{
  io::BinaryWriter w(path);
  w.magic("ROMR");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(rom.m));
  w.u32(static_cast<std::uint32_t>(rom.n));
  w.f64(rom.tau);
  w.u32(static_cast<std::uint32_t>(rom.regularization.method));
  w.f64(rom.regularization.alpha);
  w.f64(rom.regularization.threshold);
  w.u32(static_cast<std::uint32_t>(rom.order()));
  w.matrix(rom.R.data());
  w.matrix(rom.S.data());
  w.matrix(rom.P.data());
  w.close();
}

inline Rom read_rom(const std::string &path)
{
  io::BinaryReader r(path);
  r.expect_magic("ROMR");
  const std::uint32_t version = r.u32();
  if (version != 1)
  {
    throw Error(ErrorKind::IOError, "unsupported ROM version " + std::to_string(version));
  }
  Rom rom;
  rom.m = r.u32();
  rom.n = r.u32();
  rom.tau = r.f64();
  const std::uint32_t method = r.u32();
  if (method > 2)
  {
    throw Error(ErrorKind::IOError, "unknown regularization method in " + path);
  }
  rom.regularization.method = static_cast<RegularizationMethod>(method);
  rom.regularization.alpha = r.f64();
  rom.regularization.threshold = r.f64();
  rom.regularization.order = r.u32();
  const Index b = 2 * rom.m;
  const Index dim = b * rom.regularization.order;
  rom.R = BlockTriangular(r.matrix(dim, dim), b);
  rom.S = BlockMatrix(r.matrix(dim, dim), b);
  rom.P = BlockMatrix(r.matrix(dim, dim), b);
  return rom;
}

}  // namespace emrom
