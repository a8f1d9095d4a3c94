// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emrom/data.hpp"
#include "emrom/medium.hpp"
#include "emrom/rom.hpp"

namespace emrom
{

// Gaussian basis on a rectangular lattice of centers. Coefficients are l-major:
// alpha(l * N + j) multiplies phi_j in gamma_{l+1}.
struct Parametrization
{
  std::vector<std::array<double, 2>> centers;
  double sigma1 = 2.3;
  double sigma2 = 2.9;
  double c_o = 1.0;

  Index size() const { return static_cast<Index>(centers.size()); }
  Index unknowns() const { return 3 * size(); }

  double phi(Index j, double x1, double x2) const
  {
    const auto &c = centers[static_cast<std::size_t>(j)];
    const double d1 = (x1 - c[0]) / sigma1;
    const double d2 = (x2 - c[1]) / sigma2;
    return std::exp(-0.5 * (d1 * d1 + d2 * d2));
  }
};

// Centers spaced lambda_c/4 in x1 and 5 lambda_c/16 in x2 over [x1_min, x1_max] x [x2_min, x2_max],
// widths 2.3 ell and 2.9 ell.
inline Parametrization make_parametrization(const LebedevGrid &grid, double lambda_c, double c_o, double x1_min,
                                            double x1_max, double x2_min, double x2_max)
{
  if (!(x1_max >= x1_min) || !(x2_max >= x2_min) || !grid.contains(x1_min, x2_min) ||
      !grid.contains(x1_max, x2_max))
  {
    throw Error(ErrorKind::RegionOutsideDomain, "inversion domain must lie inside the grid");
  }
  Parametrization p;
  p.sigma1 = 2.3 * grid.ell();
  p.sigma2 = 2.9 * grid.ell();
  p.c_o = c_o;
  const double h1 = lambda_c / 4.0;
  const double h2 = 5.0 * lambda_c / 16.0;
  const auto n1 = static_cast<Index>(std::floor((x1_max - x1_min) / h1 + 1e-9)) + 1;
  const auto n2 = static_cast<Index>(std::floor((x2_max - x2_min) / h2 + 1e-9)) + 1;
  // Center the lattice in the box.
  const double o1 = x1_min + 0.5 * ((x1_max - x1_min) - static_cast<double>(n1 - 1) * h1);
  const double o2 = x2_min + 0.5 * ((x2_max - x2_min) - static_cast<double>(n2 - 1) * h2);
  for (Index a = 0; a < n1; a++)
  {
    for (Index b = 0; b < n2; b++)
    {
      p.centers.push_back({o1 + static_cast<double>(a) * h1, o2 + static_cast<double>(b) * h2});
    }
  }
  return p;
}

// Upper-triangular [[gamma1, gamma3], [0, gamma2]].
inline Eigen::Matrix2d gamma_field(const Parametrization &param, const Vector &alpha, double x1, double x2)
{
  const Index N = param.size();
  if (alpha.size() != 3 * N)
  {
    throw Error(ErrorKind::LengthMismatch, "expected " + std::to_string(3 * N) + " coefficients, got " +
                                               std::to_string(alpha.size()));
  }
  double g[3] = {1.0 / param.c_o, 1.0 / param.c_o, 0.0};
  for (Index j = 0; j < N; j++)
  {
    const double f = param.phi(j, x1, x2);
    if (f < 1e-300)
    {
      continue;
    }
    for (Index l = 0; l < 3; l++)
    {
      g[l] += alpha(l * N + j) * f;
    }
  }
  Eigen::Matrix2d out;
  out << g[0], g[2], 0.0, g[1];
  return out;
}

// c~ = (gamma^T gamma)^{-1/2}.
inline Eigen::Matrix2d speed_from_gamma(const Eigen::Matrix2d &gamma, double c_o = 1.0)
{
  if (!(gamma(0, 0) > 1e-12 / c_o) || !(gamma(1, 1) > 1e-12 / c_o))
  {
    throw Error(ErrorKind::DegenerateGamma, "gamma diagonal (" + std::to_string(gamma(0, 0)) + ", " +
                                                std::to_string(gamma(1, 1)) + ") is not positive");
  }
  const Eigen::Matrix2d G = gamma.transpose() * gamma;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(G);
  const Eigen::Vector2d s = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  const Eigen::Matrix2d c = eig.eigenvectors() * s.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (c + c.transpose());
}

// c~(alpha) on every node of the grid.
inline MediumField medium_from_alpha(const Parametrization &param, const Vector &alpha, const LebedevGrid &grid)
{
  const Index nodes = grid.num_nodes();
  Vector c11(nodes), c22(nodes), c12(nodes);
  for (Index k = 0; k < nodes; k++)
  {
    const auto x = grid.position(k);
    const Eigen::Matrix2d c = speed_from_gamma(gamma_field(param, alpha, x[0], x[1]), param.c_o);
    c11(k) = c(0, 0);
    c22(k) = c(1, 1);
    c12(k) = c(0, 1);
  }
  return MediumField(grid, param.c_o, c11, c22, c12);
}

// Everything a forward run in c~ needs.
struct ForwardContext
{
  LebedevGrid grid;
  ArrayGeometry array;
  PulseSpec pulse;
  double tau = 0.0;
  Index steps_per_tau = 16;
};

inline DataSeries forward_data(const ForwardContext &ctx, const MediumField &medium, Index n)
{
  try
  {
    return run_snapshots(assemble_operator(medium), ctx.array, ctx.pulse, ctx.tau, n, ctx.steps_per_tau).data;
  }
  catch (const Error &e)
  {
    throw Error(ErrorKind::ForwardFailure, "forward run failed: " + std::string(e.what()));
  }
}

// R from data with a fixed regularization, so reference and measured factors share a space.
inline BlockTriangular factor_like(const DataSeries &data, const RegularizationRecord &reg)
{
  try
  {
    switch (reg.method)
    {
      case RegularizationMethod::None:
        return block_cholesky(assemble_mass(data));
      case RegularizationMethod::Boost:
        return block_cholesky(assemble_mass(regularize_boost(data, reg.alpha)));
      case RegularizationMethod::Spectral:
        return block_cholesky(regularize_spectral(assemble_mass(data), assemble_stiffness(data), reg.order).M_reg);
    }
  }
  catch (const Error &e)
  {
    throw Error(ErrorKind::FactorizationFailure, "reference factor: " + std::string(e.what()));
  }
  return {};
}

struct Evaluation
{
  double value = 0.0;
  Vector residual;
};

// O = ||R(c~) R_data^{-1} - I||_F^2, residual vec(R(c~) R_data^{-1} - I).
inline Evaluation rom_misfit(const BlockTriangular &R_ref, const Matrix &R_data_inverse)
{
  if (R_ref.dim() != R_data_inverse.rows())
  {
    throw Error(ErrorKind::DimensionMismatch, "reference and data factors differ in size");
  }
  Matrix E = R_ref.data() * R_data_inverse;
  E.diagonal().array() -= 1.0;
  Evaluation out;
  out.residual = E.reshaped();
  out.value = out.residual.squaredNorm();
  return out;
}

struct RomObjective
{
  ForwardContext ctx;
  Parametrization param;
  Index n = 0;
  RegularizationRecord regularization;
  Matrix R_data_inverse;

  RomObjective(ForwardContext c, Parametrization p, const Rom &data_rom)
    : ctx(std::move(c)), param(std::move(p)), n(data_rom.n), regularization(data_rom.regularization),
      R_data_inverse(block_tri_inverse(data_rom.R))
  {
  }

  Evaluation operator()(const Vector &alpha) const
  {
    const DataSeries d = forward_data(ctx, medium_from_alpha(param, alpha, ctx.grid), n);
    return rom_misfit(factor_like(d, regularization), R_data_inverse);
  }
};

// O = tau sum_j ||D_j - D_j(c~)||_F^2 over j = 0..2n-1, residual sqrt(tau) vec(D_j(c~) - D_j).
inline Evaluation fwi_misfit(const DataSeries &model, const DataSeries &data)
{
  if (model.size() != data.size() || model.m != data.m)
  {
    throw Error(ErrorKind::DimensionMismatch, "model and measured series differ in size");
  }
  const Index b = 2 * data.m;
  const double root = std::sqrt(data.tau);
  Evaluation out;
  out.residual.resize(data.size() * b * b);
  for (Index j = 0; j < data.size(); j++)
  {
    out.residual.segment(j * b * b, b * b) = root * (model[j] - data[j]).reshaped();
  }
  out.value = out.residual.squaredNorm();
  return out;
}

struct FwiObjective
{
  ForwardContext ctx;
  Parametrization param;
  DataSeries data;

  Evaluation operator()(const Vector &alpha) const
  {
    return fwi_misfit(forward_data(ctx, medium_from_alpha(param, alpha, ctx.grid), data.n), data);
  }
};

using ResidualFn = std::function<Vector(const Vector &)>;

// Forward differences, one column per coefficient.
inline Matrix jacobian_fd(const ResidualFn &residual, const Vector &alpha, double h,
                          const Vector *r0_in = nullptr)
{
  if (!(h > 0.0))
  {
    throw Error(ErrorKind::InvalidDimension, "finite-difference step must be positive");
  }
  const Vector r0 = r0_in ? *r0_in : residual(alpha);
  Matrix J(r0.size(), alpha.size());
  for (Index k = 0; k < alpha.size(); k++)
  {
    Vector a = alpha;
    a(k) += h;
    try
    {
      J.col(k) = (residual(a) - r0) / h;
    }
    catch (const Error &e)
    {
      throw Error(e.kind(), "Jacobian column " + std::to_string(k) + ": " + e.detail());
    }
  }
  return J;
}

// -(J^T J + nu I)^{-1} J^T r.
inline Vector tikhonov_step(const Matrix &J, const Vector &r, double nu)
{
  if (J.rows() != r.size())
  {
    throw Error(ErrorKind::DimensionMismatch, "Jacobian and residual sizes differ");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(J.transpose() * J);
  const Vector shifted = (eig.eigenvalues().array() + nu).matrix();
  if (!(shifted.maxCoeff() > 0.0) || shifted.minCoeff() <= 1e-14 * shifted.maxCoeff())
  {
    throw Error(ErrorKind::SingularSystem, "regularized normal matrix is singular");
  }
  const Matrix &V = eig.eigenvectors();
  const Vector coef = V.transpose() * (J.transpose() * r);
  return -(V * (coef.array() / shifted.array()).matrix());
}

struct GaussNewtonStep
{
  Vector delta;
  double nu = 0.0;
};

// nu = lambda_k of J^T J in descending order, k = round(fraction * base) (1-based, clamped);
// delta = -(J^T J + nu I)^{-1} J^T r.
inline GaussNewtonStep gauss_newton_step(const Matrix &J, const Vector &r, Index base, double fraction = 0.9)
{
  if (!(fraction > 0.0 && fraction <= 1.0))
  {
    throw Error(ErrorKind::InvalidDimension, "regularization fraction must lie in (0, 1]");
  }
  if (J.rows() != r.size())
  {
    throw Error(ErrorKind::DimensionMismatch, "Jacobian and residual sizes differ");
  }
  const Matrix H = J.transpose() * J;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  const Vector lambda = eig.eigenvalues().reverse();
  const Index k = std::clamp<Index>(static_cast<Index>(std::llround(fraction * static_cast<double>(base))), 1,
                                    lambda.size());
  return {tikhonov_step(J, r, std::max(lambda(k - 1), 0.0)), std::max(lambda(k - 1), 0.0)};
}

struct InversionConfig
{
  enum class Objective
  {
    Rom,
    Fwi
  };
  Objective objective = Objective::Rom;
  double h = 1e-4;                 // times 1/c_o
  Index max_iterations = 30;
  double relative_decrease = 1e-4;
  Index patience = 2;              // consecutive small decreases before stopping
  double nu_fraction = 0.9;
  Index nu_base = 0;               // 0: the basis count N
  std::vector<Index> schedule;     // increasing n'; empty runs the full order once
  Index max_halvings = 10;
  RomOptions rom;                  // regularization of the data ROM

  void validate(Index n) const
  {
    if (!(nu_fraction > 0.0 && nu_fraction <= 1.0))
    {
      throw Error(ErrorKind::ValidationError, "nu fraction must lie in (0, 1]");
    }
    if (!(h > 0.0) || max_iterations < 1 || patience < 1)
    {
      throw Error(ErrorKind::ValidationError, "invalid iteration settings");
    }
    for (std::size_t k = 0; k < schedule.size(); k++)
    {
      if (schedule[k] < 1 || schedule[k] > n || (k > 0 && schedule[k] <= schedule[k - 1]))
      {
        throw Error(ErrorKind::ValidationError, "layer-peel schedule must increase strictly within 1..n");
      }
    }
  }
};

struct IterationRecord
{
  Index stage_order = 0; // n'
  Index iteration = 0;
  double objective = 0.0;
  double step_norm = 0.0;
  double nu = 0.0;
  Index halvings = 0;
};

struct InversionResult
{
  Vector alpha;
  MediumField medium;
  std::vector<IterationRecord> log;
  bool converged = false;
  std::string status;
};

namespace detail
{

inline bool feasible(const Parametrization &param, const Vector &alpha, const LebedevGrid &grid)
{
  for (Index k = 0; k < grid.num_nodes(); k++)
  {
    const auto x = grid.position(k);
    const Eigen::Matrix2d g = gamma_field(param, alpha, x[0], x[1]);
    if (!(g(0, 0) > 1e-12 / param.c_o) || !(g(1, 1) > 1e-12 / param.c_o))
    {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Gauss-Newton on one objective from alpha0; appends to `log`. Returns true on convergence.
inline bool gauss_newton(const std::function<Evaluation(const Vector &)> &objective, const Parametrization &param,
                         const LebedevGrid &grid, const InversionConfig &config, Index stage, Vector &alpha,
                         std::vector<IterationRecord> &log, std::string &status)
{
  const double h = config.h / param.c_o;
  const Index base = config.nu_base > 0 ? config.nu_base : param.size();
  Evaluation current = objective(alpha);
  log.push_back({stage, 0, current.value, 0.0, 0.0, 0});
  Index small = 0;
  for (Index it = 1; it <= config.max_iterations; it++)
  {
    if (current.value == 0.0)
    {
      status = "objective is zero";
      return true;
    }
    const ResidualFn residual = [&](const Vector &a) { return objective(a).residual; };
    const Matrix J = jacobian_fd(residual, alpha, h, &current.residual);
    const GaussNewtonStep step = gauss_newton_step(J, current.residual, base, config.nu_fraction);

    Vector delta = step.delta;
    Index halvings = 0;
    std::optional<Evaluation> accepted;
    for (; halvings <= config.max_halvings; halvings++)
    {
      const Vector trial = alpha + delta;
      if (detail::feasible(param, trial, grid))
      {
        Evaluation e = objective(trial);
        if (e.value <= current.value)
        {
          accepted = std::move(e);
          break;
        }
      }
      delta *= 0.5;
    }
    if (!accepted)
    {
      log.push_back({stage, it, current.value, 0.0, step.nu, config.max_halvings});
      status = "no descent step after " + std::to_string(config.max_halvings) + " halvings";
      return false;
    }
    alpha += delta;
    const double decrease = (current.value - accepted->value) / current.value;
    current = std::move(*accepted);
    log.push_back({stage, it, current.value, delta.norm(), step.nu, halvings});
    small = decrease < config.relative_decrease ? small + 1 : 0;
    if (small >= config.patience)
    {
      status = "relative decrease below threshold";
      return true;
    }
  }
  status = "iteration limit reached";
  return false;
}

// Algorithm: factor the data ROM, then Gauss-Newton from alpha = 0, optionally per layer-peel order.
inline InversionResult invert(const DataSeries &data, const InversionConfig &config, const Parametrization &param,
                              const ForwardContext &ctx)
{
  data.validate();
  config.validate(data.n);
  std::vector<Index> stages = config.schedule;
  if (stages.empty())
  {
    stages.push_back(data.n);
  }
  InversionResult result;
  result.alpha = Vector::Zero(param.unknowns());
  for (const Index n_prime : stages)
  {
    const DataSeries part = data.truncated(n_prime);
    std::function<Evaluation(const Vector &)> objective;
    if (config.objective == InversionConfig::Objective::Rom)
    {
      objective = RomObjective(ctx, param, make_rom(part, config.rom));
    }
    else
    {
      objective = FwiObjective{ctx, param, part};
    }
    result.converged = gauss_newton(objective, param, ctx.grid, config, n_prime, result.alpha, result.log,
                                    result.status);
  }
  result.medium = medium_from_alpha(param, result.alpha, ctx.grid);
  return result;
}

}  // namespace emrom
