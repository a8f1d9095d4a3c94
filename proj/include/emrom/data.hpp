// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>

#include "emrom/binary_io.hpp"
#include "emrom/solver.hpp"

namespace emrom
{

// D_j, j = 0..2n-1, each 2m x 2m, sampled at t_j = j tau.
struct DataSeries
{
  Index m = 0;
  Index n = 0;
  double tau = 0.0;
  std::vector<Matrix> D;

  const Matrix &operator[](Index j) const { return D[static_cast<std::size_t>(j)]; }

  // Even extension D(t_{-k}) = D(t_k).
  const Matrix &even(Index j) const { return D[static_cast<std::size_t>(j < 0 ? -j : j)]; }

  Index size() const { return static_cast<Index>(D.size()); }

  void validate() const
  {
    if (m < 1 || n < 1 || static_cast<Index>(D.size()) != 2 * n)
    {
      throw Error(ErrorKind::LengthMismatch, "data series must hold 2n matrices");
    }
    for (const Matrix &M : D)
    {
      if (M.rows() != 2 * m || M.cols() != 2 * m)
      {
        throw Error(ErrorKind::DimensionMismatch, "data matrix is not 2m x 2m");
      }
    }
  }

  // First `n_prime` ROM orders: D_0..D_{2n'-1}.
  DataSeries truncated(Index n_prime) const
  {
    if (n_prime < 1 || n_prime > n)
    {
      throw Error(ErrorKind::InsufficientData, "cannot truncate to order " + std::to_string(n_prime));
    }
    DataSeries out{m, n_prime, tau, {}};
    out.D.assign(D.begin(), D.begin() + 2 * n_prime);
    return out;
  }
};

// D_j = w u0^T u_j
inline DataSeries compute_data(const Snapshots &snapshots, const Matrix &u0, double weight,
                               double tau)
{
  if (snapshots.empty() || snapshots.size() % 2 != 0)
  {
    throw Error(ErrorKind::LengthMismatch, "need an even, positive number of snapshots, got " +
                                               std::to_string(snapshots.size()));
  }
  DataSeries out;
  out.m = u0.cols() / 2;
  out.n = static_cast<Index>(snapshots.size()) / 2;
  out.tau = tau;
  for (const Matrix &u : snapshots)
  {
    if (u.rows() != u0.rows() || u.cols() != u0.cols())
    {
      throw Error(ErrorKind::LengthMismatch, "snapshot shape differs from the initial state");
    }
    out.D.push_back(weight * (u0.transpose() * u));
  }
  return out;
}

struct SnapshotRun
{
  Matrix u0;
  Snapshots u; // u_0..u_{2n-1}
  DataSeries data;
  double dt = 0.0;
};

// Initial state in the given medium, 2n leapfrog snapshots and their data matrices.
inline SnapshotRun run_snapshots(const DiscreteOperator &op, const ArrayGeometry &array,
                                 const PulseSpec &pulse, double tau, Index n, Index steps_per_tau,
                                 double lambda_max = -1.0)
{
  if (lambda_max < 0.0)
  {
    lambda_max = estimate_lambda_max(op);
  }
  SnapshotRun run;
  run.dt = choose_dt(tau, steps_per_tau, lambda_max);
  run.u0 = initial_snapshot(op, array, pulse);
  run.u = propagate(op, run.u0, run.dt, tau, 2 * n, lambda_max);
  run.data = compute_data(run.u, run.u0, op.weight(), tau);
  return run;
}

// Adds i.i.d. N(0, (level * rms)^2) to every entry, rms the entrywise RMS over the series.
inline DataSeries add_noise(const DataSeries &data, double level, std::uint64_t seed)
{
  if (level < 0.0)
  {
    throw Error(ErrorKind::ValidationError, "noise level must be non-negative");
  }
  DataSeries out = data;
  if (level == 0.0)
  {
    return out;
  }
  double sum = 0.0;
  double count = 0.0;
  for (const Matrix &M : data.D)
  {
    sum += M.squaredNorm();
    count += static_cast<double>(M.size());
  }
  const double sigma = level * std::sqrt(sum / count);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (Matrix &M : out.D)
  {
    for (Index i = 0; i < M.rows(); i++)
    {
      for (Index j = 0; j < M.cols(); j++)
      {
        M(i, j) += normal(rng);
      }
    }
  }
  return out;
}

inline void write_data(const std::string &path, const DataSeries &data)
{
  data.validate();
  io::BinaryWriter w(path);
  w.magic("ROMD");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(data.m));
  w.u32(static_cast<std::uint32_t>(data.n));
  w.f64(data.tau);
  for (const Matrix &M : data.D)
  {
    w.matrix(M);
  }
  w.close();
}

inline DataSeries read_data(const std::string &path)
{
  io::BinaryReader r(path);
  r.expect_magic("ROMD");
  const std::uint32_t version = r.u32();
  if (version != 1)
  {
    throw Error(ErrorKind::IOError, "unsupported data version " + std::to_string(version));
  }
  DataSeries data;
  data.m = r.u32();
  data.n = r.u32();
  data.tau = r.f64();
  for (Index j = 0; j < 2 * data.n; j++)
  {
    data.D.push_back(r.matrix(2 * data.m, 2 * data.m));
  }
  data.validate();
  return data;
}

inline void write_data_csv(const std::string &path, const DataSeries &data)
{
  std::ofstream out(path);
  if (!out)
  {
    throw Error(ErrorKind::IOError, "cannot open " + path);
  }
  out.precision(17);
  out << "j,t,row,col,value\n";
  for (Index j = 0; j < data.size(); j++)
  {
    for (Index r = 0; r < 2 * data.m; r++)
    {
      for (Index c = 0; c < 2 * data.m; c++)
      {
        out << j << ',' << static_cast<double>(j) * data.tau << ',' << r << ',' << c << ','
            << data[j](r, c) << '\n';
      }
    }
  }
}

// Projection onto range(A) = range(B^T): v -> B^T z with (B B^T) z = B v.
inline Matrix range_projection(const DiscreteOperator &op, const Matrix &v, double tol = 1e-11)
{
  const SparseMatrix &B = op.curl;
  const Eigen::SparseMatrix<double> BBt = Eigen::SparseMatrix<double>(B * SparseMatrix(B.transpose()));
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(20 * static_cast<Index>(BBt.rows()));
  cg.compute(BBt);
  Matrix out(v.rows(), v.cols());
  for (Index c = 0; c < v.cols(); c++)
  {
    const Vector rhs = B * v.col(c);
    const Vector z = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
    {
      throw Error(ErrorKind::NonConvergence, "range projection did not converge");
    }
    out.col(c) = B.transpose() * z;
  }
  return out;
}

// Response matrices W(t_k) at t_k = (first + k) dt.
struct ResponseSeries
{
  double dt = 0.0;
  Index first = 0;
  std::vector<Matrix> W;

  Index last() const { return first + static_cast<Index>(W.size()) - 1; }

  // Zero before the recording starts (the field is quiescent there).
  Matrix at(Index k) const
  {
    if (k < first)
    {
      return Matrix::Zero(W.front().rows(), W.front().cols());
    }
    if (k > last())
    {
      throw Error(ErrorKind::InsufficientData, "response requested past the recording window");
    }
    return W[static_cast<std::size_t>(k - first)];
  }

  // Samples at t_j = j tau, j = 0..count-1.
  DataSeries subsample(double tau, Index n) const
  {
    const auto stride = static_cast<Index>(std::llround(tau / dt));
    DataSeries out{W.front().rows() / 2, n, tau, {}};
    for (Index j = 0; j < 2 * n; j++)
    {
      out.D.push_back(at(j * stride));
    }
    return out;
  }
};

struct ForcedResponse
{
  ResponseSeries range; // divergence-free part, the transformed response
  ResponseSeries raw;   // physical recordings including the short-lived null-space part
};

// Solves (A + d_t^2) U = -c_o^2 f'(t) P_range F from t = -T_f with leapfrog and records
// w F^T U at the antennas, through t = (2n - 1) tau + T_f.
inline ForcedResponse simulate_response(const DiscreteOperator &op, const ArrayGeometry &array,
                                        const PulseSpec &pulse, double c_o, double tau, Index n,
                                        Index steps_per_tau, double lambda_max = -1.0)
{
  if (lambda_max < 0.0)
  {
    lambda_max = estimate_lambda_max(op);
  }
  const double dt = choose_dt(tau, steps_per_tau, lambda_max);
  const PulseWaveform wave(pulse);
  const double t_f = wave.support();
  const Index k0 = static_cast<Index>(std::ceil(t_f / dt));
  const Index k_end = (2 * n - 1) * steps_per_tau + k0;

  const double w = op.weight();
  const Matrix F = source_matrix(op.grid, array);
  const Matrix Fr = range_projection(op, F);
  const Matrix null_at_antennas = w * F.transpose() * (F - Fr);
  const Matrix Ft = w * F.transpose();

  ForcedResponse out;
  out.range.dt = out.raw.dt = dt;
  out.range.first = out.raw.first = -k0;
  Matrix prev = Matrix::Zero(F.rows(), F.cols());
  Matrix cur = prev;
  const double c2 = c_o * c_o;
  for (Index k = -k0; k <= k_end; k++)
  {
    const double t = static_cast<double>(k) * dt;
    const Matrix rec = Ft * cur;
    out.range.W.push_back(rec);
    out.raw.W.push_back(rec - c2 * wave.integral(t) * null_at_antennas);
    Matrix next = 2.0 * cur - prev - dt * dt * (op.A * cur + c2 * wave.derivative(t) * Fr);
    prev = std::move(cur);
    cur = std::move(next);
    if (((k - (-k0)) % 64 == 0) && !cur.allFinite())
    {
      throw Error(ErrorKind::NonFiniteField, "forced simulation diverged");
    }
  }
  return out;
}

// D(t) = -c_o^{-2} int f(s) [W(t + s) + W(s - t)] ds by the trapezoidal rule on the
// recording grid, sampled at t_j = j tau for j = 0..2n-1.
inline DataSeries transform_response(const ResponseSeries &W, const PulseSpec &pulse, double c_o,
                                     double tau, Index n)
{
  if (W.W.empty())
  {
    throw Error(ErrorKind::InsufficientData, "empty response series");
  }
  const double ratio = tau / W.dt;
  const auto stride = static_cast<Index>(std::llround(ratio));
  if (W.dt > tau / 8.0 * (1.0 + 1e-12) || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio)
  {
    throw Error(ErrorKind::UndersampledInput,
                "response step must divide tau and be at most tau/8");
  }
  const PulseWaveform wave(pulse);
  const Index ks = static_cast<Index>(std::ceil(wave.support() / W.dt));
  std::vector<double> f(static_cast<std::size_t>(2 * ks + 1));
  for (Index k = -ks; k <= ks; k++)
  {
    f[static_cast<std::size_t>(k + ks)] = wave.value(static_cast<double>(k) * W.dt);
  }
  const Index rows = W.W.front().rows();
  DataSeries out{rows / 2, n, tau, {}};
  const double scale = -W.dt / (c_o * c_o);
  for (Index j = 0; j < 2 * n; j++)
  {
    Matrix acc = Matrix::Zero(rows, rows);
    const Index shift = j * stride;
    for (Index k = -ks; k <= ks; k++)
    {
      const double fk = f[static_cast<std::size_t>(k + ks)];
      acc += fk * W.at(shift + k);
      if (k - shift >= W.first)
      {
        acc += fk * W.at(k - shift);
      }
    }
    out.D.push_back(scale * acc);
  }
  return out;
}

}  // namespace emrom
