// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "emrom/internal_wave.hpp"
#include "emrom/inversion.hpp"
#include "emrom/rom.hpp"

namespace emrom
{

// One invariant of the library checked on a small self-contained problem.
struct CheckResult
{
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool higher_is_better = false;
  bool passed = false;
  std::string note;
};

namespace detail
{

inline Matrix random_spd(std::mt19937_64 &rng, Index n)
{
  std::normal_distribution<double> normal;
  Matrix G(n, n);
  for (Index i = 0; i < n; i++)
  {
    for (Index j = 0; j < n; j++)
    {
      G(i, j) = normal(rng);
    }
  }
  return G * G.transpose() + static_cast<double>(n) * Matrix::Identity(n, n);
}

inline bool same_bits(const Matrix &a, const Matrix &b)
{
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data(), [](double x, double y) {
           return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
         });
}

// 24 x 21 grid, two antennas, a small anisotropic block below them.
struct VerifyScene
{
  LebedevGrid grid{24, 21, 1.0};
  ArrayGeometry array = make_array(grid, 2, 6.0, 4.0);
  PulseSpec pulse = make_pulse(16.0, 1.0);
  double tau = 0.45 * std::numbers::pi / (2.0 * std::numbers::pi / 16.0);
  Index n = 3;
  MediumField background{grid, 1.0};
  MediumField truth = make_truth();

  MediumField make_truth() const
  {
    Vector c11 = Vector::Constant(grid.num_nodes(), 1.0);
    Vector c22 = c11;
    Vector c12 = Vector::Zero(grid.num_nodes());
    for (Index k = 0; k < grid.num_nodes(); k++)
    {
      const auto p = grid.position(k);
      if (p[0] >= 10.0 && p[0] <= 15.0 && p[1] >= 7.0 && p[1] <= 13.0)
      {
        c11(k) = 1.15;
        c22(k) = 0.95;
        c12(k) = 0.05;
      }
    }
    return MediumField(grid, 1.0, c11, c22, c12);
  }
};

}  // namespace detail

inline std::vector<CheckResult> run_invariant_suite(std::uint64_t seed, const std::filesystem::path &scratch)
{
  std::vector<CheckResult> out;
  auto record = [&](std::string name, double value, double tol, bool higher = false, std::string note = "") {
    const bool ok = std::isfinite(value) && (higher ? value >= tol : value <= tol);
    out.push_back({std::move(name), value, tol, higher, ok, std::move(note)});
  };
  auto guarded = [&](const std::string &name, double tol, bool higher, const std::function<double()> &f) {
    try
    {
      record(name, f(), tol, higher);
    }
    catch (const std::exception &e)
    {
      out.push_back({name, std::nan(""), tol, higher, false, e.what()});
    }
  };
  std::mt19937_64 rng(seed);

  guarded("block Cholesky R^T R = M", 1e-11, false, [&] {
    const Matrix M = detail::random_spd(rng, 12);
    const BlockTriangular R = block_cholesky(BlockMatrix(M, 3));
    return (R.data().transpose() * R.data() - M).norm() / M.norm();
  });
  guarded("spd_sqrt multiply-back", 1e-12, false, [&] {
    const Matrix M = detail::random_spd(rng, 4);
    const Matrix root = spd_sqrt(M);
    return (root * root - M).norm() / M.norm();
  });
  guarded("block Lanczos keeps eigenvalues", 1e-9, false, [&] {
    Matrix Pi = detail::random_spd(rng, 12);
    Pi = Pi / Pi.norm();
    const Matrix B0 = Matrix::Identity(12, 3);
    const LanczosResult res = block_lanczos(Pi, 3, B0);
    Eigen::SelfAdjointEigenSolver<Matrix> a(Pi, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> b(res.T.data(), Eigen::EigenvaluesOnly);
    return (a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff();
  });

  const detail::VerifyScene s;
  const DiscreteOperator op = assemble_operator(s.truth);
  const double lmax = estimate_lambda_max(op);
  const Matrix u0 = initial_snapshot(op, s.array, s.pulse);
  const Snapshots exact = exact_snapshots(op, u0, s.tau, 2 * s.n);

  guarded("leapfrog order in dt", 1.8, true, [&] {
    double e[2];
    for (int k = 0; k < 2; k++)
    {
      const Index steps = 16 << k;
      const Snapshots u = propagate(op, u0, choose_dt(s.tau, steps, lmax), s.tau, 2 * s.n, lmax);
      e[k] = (u.back() - exact.back()).norm() / exact.back().norm();
    }
    return std::log2(e[0] / e[1]);
  });

  const DataSeries exact_data = compute_data(exact, u0, op.weight(), s.tau);
  guarded("data Grams equal snapshot Grams", 1e-9, false, [&] {
    BlockMatrix M, S;
    detail::snapshot_grams(exact, s.n, op.weight(), M, S);
    const double em = (assemble_mass(exact_data).data() - M.data()).norm() / M.data().norm();
    const double es = (assemble_stiffness(exact_data).data() - S.data()).norm() / S.data().norm();
    return std::max(em, es);
  });

  InterpolationReport report;
  bool have_report = false;
  guarded("ROM interpolates data", 1e-8, false, [&] {
    report = verify_interpolation(make_rom(exact_data, {RomOptions::Mode::None}), exact_data);
    have_report = true;
    return report.max_residual;
  });
  guarded("ROM propagator block tridiagonal", 1e-8, false, [&] {
    if (!have_report)
    {
      throw Error(ErrorKind::Singular, "no ROM");
    }
    return report.off_tridiagonal;
  });
  guarded("ROM propagator spectrum in [-1, 1]", 1.0 + 1e-8, false, [&] {
    if (!have_report)
    {
      throw Error(ErrorKind::Singular, "no ROM");
    }
    return report.spectral_radius;
  });

  guarded("internal wave exact at the true medium", 1e-7, false, [&] {
    const ReferenceBasis basis = reference_basis(op, s.array, s.pulse, s.tau, s.n, 16, {}, lmax);
    const Rom rom = make_rom(basis.data, {RomOptions::Mode::None});
    double worst = 0.0;
    for (Index j = 0; j < s.n; j++)
    {
      const Matrix est = estimate_internal_wave(basis, rom.R, j);
      const Matrix &uj = basis.u[static_cast<std::size_t>(j)];
      worst = std::max(worst, (est - uj).norm() / uj.norm());
    }
    return worst;
  });

  guarded("data file round-trip is bitwise", 0.0, false, [&] {
    const auto path = scratch / "verify_data.romd";
    write_data(path.string(), exact_data);
    const DataSeries back = read_data(path.string());
    std::filesystem::remove(path);
    double bad = back.tau == exact_data.tau ? 0.0 : 1.0;
    for (Index j = 0; j < exact_data.size(); j++)
    {
      bad += detail::same_bits(back[j], exact_data[j]) ? 0.0 : 1.0;
    }
    return bad;
  });
  guarded("ROM file round-trip is bitwise", 0.0, false, [&] {
    const Rom rom = make_rom(exact_data, {RomOptions::Mode::None});
    const auto path = scratch / "verify_rom.romr";
    write_rom(path.string(), rom);
    const Rom back = read_rom(path.string());
    std::filesystem::remove(path);
    const bool same = detail::same_bits(back.R.data(), rom.R.data()) && detail::same_bits(back.S.data(), rom.S.data()) &&
                      detail::same_bits(back.P.data(), rom.P.data()) && back.tau == rom.tau;
    return same ? 0.0 : 1.0;
  });
  guarded("seeded noise is reproducible", 0.0, false, [&] {
    const DataSeries a = add_noise(exact_data, 1e-3, seed);
    const DataSeries b = add_noise(exact_data, 1e-3, seed);
    double bad = 0.0;
    for (Index j = 0; j < a.size(); j++)
    {
      bad += detail::same_bits(a[j], b[j]) ? 0.0 : 1.0;
    }
    return bad;
  });

  guarded("homogeneous truth gives a zero first step", 1e-8, false, [&] {
    const ForwardContext ctx{s.grid, s.array, s.pulse, s.tau, 16};
    const Parametrization param = make_parametrization(s.grid, 16.0, 1.0, 10.0, 14.0, 8.0, 12.0);
    const DataSeries data = forward_data(ctx, s.background, s.n);
    InversionConfig config;
    config.rom.mode = RomOptions::Mode::None;
    config.max_iterations = 1;
    return invert(data, config, param, ctx).alpha.norm();
  });
  return out;
}

inline bool print_check_table(std::ostream &os, const std::vector<CheckResult> &checks)
{
  bool all = true;
  std::size_t width = 0;
  for (const CheckResult &c : checks)
  {
    width = std::max(width, c.name.size());
  }
  for (const CheckResult &c : checks)
  {
    all = all && c.passed;
    os << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << c.name << "  "
       << std::scientific << std::setprecision(3) << c.value << (c.higher_is_better ? " >= " : " <= ") << c.tolerance;
    if (!c.note.empty())
    {
      os << "  (" << c.note << ")";
    }
    os << '\n';
  }
  os << std::defaultfloat;
  return all;
}

}  // namespace emrom
