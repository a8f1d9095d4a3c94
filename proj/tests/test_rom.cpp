// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include <catch_amalgamated.hpp>

#include "emrom/rom.hpp"
#include "test_helpers.hpp"

using namespace emrom;
using Catch::Matchers::WithinAbs;

namespace
{

double tau_inversion(const PulseSpec &p) { return 0.45 * std::numbers::pi / p.omega_c(); }

// Noise-free leapfrog data on a grid where the mass matrix is well conditioned for n = 5.
const SnapshotRun &well_posed_run()
{
  static const SnapshotRun run = [] {
    const LebedevGrid grid(50, 41, 1.0);
    const MediumField medium = build_medium(phantoms::rectangle_inclusion(16.0, 1.5, 2.0, 1.0, 1.5, SpeedTensor::isotropic(1.3)),
                                            grid, 1.0);
    const DiscreteOperator op = assemble_operator(medium);
    const ArrayGeometry array = make_array(grid, 3, 8.0, 8.0);
    const PulseSpec pulse = make_pulse(16.0, 1.0);
    return run_snapshots(op, array, pulse, tau_inversion(pulse), 5, 16);
  }();
  return run;
}

DataSeries random_series(Index m, Index n, std::mt19937_64 &rng)
{
  DataSeries d{m, n, 1.0, {}};
  for (Index j = 0; j < 2 * n; j++)
  {
    d.D.push_back(test::random_symmetric(2 * m, rng));
  }
  return d;
}

double block_rel(const Matrix &a, const Matrix &b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("mass and stiffness from data", "[rom]")
{
  std::mt19937_64 rng(7);
  const DataSeries d = random_series(2, 4, rng);
  const BlockMatrix M = assemble_mass(d);
  const BlockMatrix S = assemble_stiffness(d);
  CHECK(M.block(0, 0) == d[0]);
  for (Index j = 0; j < 4; j++)
  {
    CHECK(block_rel(M.block(0, j), d[j]) < 1e-15);
  }
  CHECK(block_rel(S.block(0, 0), d[1]) < 1e-15);
  CHECK(M.is_symmetric(0.0));
  CHECK(S.is_symmetric(0.0));

  DataSeries short_series = d;
  short_series.D.pop_back();
  CHECK_THROWS_AS(assemble_mass(short_series), Error);
  CHECK_THROWS_AS(assemble_stiffness(short_series), Error);
}

TEST_CASE("data-driven Grams equal snapshot Grams", "[rom]")
{
  const LebedevGrid grid(24, 25, 1.0);
  const MediumField medium = build_medium(phantoms::rectangle_inclusion(16.0, 0.9, 1.1, 0.5, 1.0, SpeedTensor::isotropic(0.8)),
                                          grid, 1.0);
  const DiscreteOperator op = assemble_operator(medium);
  const ArrayGeometry array = make_array(grid, 2, 4.0, 8.0);
  const PulseSpec pulse = make_pulse(16.0, 1.0);
  const double tau = tau_inversion(pulse);
  const Index n = 3;
  const Matrix u0 = initial_snapshot(op, array, pulse);
  const Snapshots u = exact_snapshots(op, u0, tau, 2 * n + 1);
  const DataSeries d = compute_data(Snapshots(u.begin(), u.begin() + 2 * n), u0, op.weight(), tau);

  const Index b = 4;
  Matrix M(n * b, n * b), S(n * b, n * b);
  for (Index j = 0; j < n; j++)
  {
    for (Index l = 0; l < n; l++)
    {
      const Matrix &uj = u[static_cast<std::size_t>(j)];
      M.block(j * b, l * b, b, b) = op.weight() * uj.transpose() * u[static_cast<std::size_t>(l)];
      const Matrix Pul = 0.5 * (u[static_cast<std::size_t>(l + 1)] + u[static_cast<std::size_t>(std::abs(l - 1))]);
      S.block(j * b, l * b, b, b) = op.weight() * uj.transpose() * Pul;
    }
  }
  CHECK(block_rel(assemble_mass(d).data(), M) < 1e-9);
  CHECK(block_rel(assemble_stiffness(d).data(), S) < 1e-9);
}

TEST_CASE("boost regularization", "[rom]")
{
  std::mt19937_64 rng(8);
  const DataSeries d = random_series(2, 3, rng);
  const DataSeries same = regularize_boost(d, 0.0);
  CHECK(same[0] == d[0]);
  const double alpha = 1e-3;
  const BlockMatrix M0 = assemble_mass(d);
  const BlockMatrix M1 = assemble_mass(regularize_boost(d, alpha));
  for (Index j = 0; j < 3; j++)
  {
    // M_00 = D_0 itself, so the first diagonal block gains twice as much.
    const double gain = j == 0 ? 2.0 * alpha : alpha;
    CHECK(block_rel(M1.block(j, j), M0.block(j, j) + gain * d[0]) < 1e-14);
    for (Index l = 0; l < 3; l++)
    {
      if (l != j)
      {
        CHECK(M1.block(j, l) == M0.block(j, l));
      }
    }
  }
}

TEST_CASE("ROM of order one", "[rom]")
{
  std::mt19937_64 rng(9);
  DataSeries d{2, 1, 1.0, {test::random_spd(4, rng), test::random_symmetric(4, rng)}};
  const Rom rom = build_rom(assemble_mass(d), assemble_stiffness(d));
  const Matrix root = spd_sqrt(d[0]);
  CHECK(block_rel(rom.R.data(), root) < 1e-12);
  const Matrix P = root.inverse() * d[1] * root.inverse();
  CHECK(block_rel(rom.P.data(), P) < 1e-12);
}

TEST_CASE("ROM from noise-free data", "[rom]")
{
  const SnapshotRun &run = well_posed_run();
  const BlockMatrix M = assemble_mass(run.data);
  const BlockMatrix S = assemble_stiffness(run.data);
  const Rom rom = build_rom(M, S);
  const Index n = rom.n;
  REQUIRE(n == 5);

  SECTION("factor and propagator")
  {
    const Matrix RtR = rom.R.data().transpose() * rom.R.data();
    CHECK(block_rel(RtR, M.data()) < 1e-10);
    CHECK(rom.P.is_symmetric(1e-10));
    CHECK(rom.P.off_tridiagonal_norm() <= 1e-8 * rom.P.data().norm());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(rom.P.data(), Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-8);
    CHECK(eig.eigenvalues().minCoeff() >= -1.0 - 1e-8);
  }

  SECTION("first states are the block columns of R")
  {
    const std::vector<Matrix> u = rom_propagate(rom, n - 1);
    for (Index j = 0; j < n; j++)
    {
      const Matrix col = rom.R.block_column(j);
      CHECK((u[static_cast<std::size_t>(j)] - col).norm() <= 1e-9 * rom.R.data().norm());
    }
  }

  SECTION("interpolation of the data")
  {
    const InterpolationReport rep = verify_interpolation(rom, run.data);
    CHECK(rep.max_residual <= 1e-8);
    CHECK(rep.off_tridiagonal <= 1e-8);
    CHECK(rep.spectral_radius <= 1.0 + 1e-8);
    const std::vector<Matrix> u = rom_propagate(rom, 2 * n - 2);
    for (Index j = 0; j <= 2 * n - 2; j++)
    {
      CHECK(block_rel(u[0].transpose() * u[static_cast<std::size_t>(j)], run.data[j]) <= 1e-8);
    }
  }

  SECTION("Galerkin coefficients of the first states are canonical")
  {
    // The solve amplifies round-off by cond(M); order 4 keeps cond(M) near 1e7.
    const DataSeries d4 = run.data.truncated(4);
    const BlockMatrix M4 = assemble_mass(d4);
    const std::vector<Matrix> g = galerkin_coefficients(M4, assemble_stiffness(d4), 4);
    for (Index j = 0; j < 4; j++)
    {
      Matrix canonical = Matrix::Zero(M4.dim(), M4.block_size());
      canonical.middleRows(j * M4.block_size(), M4.block_size()).setIdentity();
      CHECK((g[static_cast<std::size_t>(j)] - canonical).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }

  SECTION("boosted data degrade the fit in a controlled way")
  {
    const Rom boosted = make_rom(run.data, {RomOptions::Mode::Boost, 1e-6});
    CHECK(boosted.regularization.method == RegularizationMethod::Boost);
    const InterpolationReport rep = verify_interpolation(boosted, run.data);
    CHECK(rep.max_residual <= 1e-4);
    CHECK(rep.max_residual > 1e-10);
  }

  SECTION("perturbing R breaks interpolation monotonically")
  {
    std::mt19937_64 rng(21);
    const Matrix E = test::random_matrix(rom.R.dim(), rom.R.dim(), rng).triangularView<Eigen::Upper>();
    double previous = 0.0;
    for (double eps : {1e-8, 1e-6, 1e-4, 1e-2})
    {
      Rom bad = rom;
      const Matrix R = rom.R.data() + eps * rom.R.data().norm() / E.norm() * Matrix(E);
      Matrix Rb = R;
      for (Index i = 1; i < rom.n; i++)
      {
        for (Index j = 0; j < i; j++)
        {
          Rb.block(i * 6, j * 6, 6, 6).setZero();
        }
      }
      bad.R = BlockTriangular(Rb, 6);
      const double res = verify_interpolation(bad, run.data).max_residual;
      CHECK(res > previous);
      previous = res;
    }
  }

  SECTION("auto mode")
  {
    RomOptions loose;
    loose.relative_threshold = 1e-14;
    const Rom plain = make_rom(run.data, loose);
    CHECK(plain.regularization.method == RegularizationMethod::None);
    CHECK(plain.R.data() == rom.R.data());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(M.data(), Eigen::EigenvaluesOnly);
    RomOptions tight;
    tight.relative_threshold = 2.0 * eig.eigenvalues().minCoeff() / eig.eigenvalues().maxCoeff();
    const Rom cut = make_rom(run.data, tight);
    CHECK(cut.regularization.method == RegularizationMethod::Spectral);
    CHECK(cut.order() == n - 1);
  }
}

TEST_CASE("identity propagator", "[rom]")
{
  std::mt19937_64 rng(4);
  Rom rom;
  rom.m = 1;
  rom.n = 3;
  rom.R = block_cholesky(BlockMatrix(test::random_spd(6, rng), 2));
  rom.P = BlockMatrix(Matrix::Identity(6, 6), 2);
  const std::vector<Matrix> u = rom_propagate(rom, 7);
  REQUIRE(u.size() == 8);
  for (const Matrix &uj : u)
  {
    CHECK((uj - u[0]).norm() <= 1e-14 * u[0].norm());
  }
  CHECK_THROWS_AS(rom_propagate(rom, 0), Error);
}

TEST_CASE("spectral regularization", "[rom]")
{
  const SnapshotRun &run = well_posed_run();
  const BlockMatrix M = assemble_mass(run.data);
  const BlockMatrix S = assemble_stiffness(run.data);

  SECTION("full order reproduces the spectrum of the plain propagator")
  {
    const SpectralRegularization reg = regularize_spectral(M, S, 5);
    const Rom plain = build_rom(M, S);
    Eigen::SelfAdjointEigenSolver<Matrix> a(plain.P.data(), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> b(reg.P_reg.data(), Eigen::EigenvaluesOnly);
    // The two paths factor M differently; they agree to first order in eps cond(M) (about 5e-7 here).
    Eigen::SelfAdjointEigenSolver<Matrix> m(M.data(), Eigen::EigenvaluesOnly);
    const double cond = m.eigenvalues().maxCoeff() / m.eigenvalues()(0);
    CHECK((a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff() <= std::numeric_limits<double>::epsilon() * cond);
  }

  SECTION("truncated order")
  {
    const SpectralRegularization reg = regularize_spectral(M, S, 3);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(reg.M_reg.data(), Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= reg.truncation.lambda.minCoeff() * (1.0 - 1e-10));
    CHECK(reg.P_reg.off_tridiagonal_norm() <= 1e-9 * reg.P_reg.data().norm());
    const Rom rom = build_rom(reg);
    CHECK(rom.order() == 3);
    CHECK(rom.regularization.method == RegularizationMethod::Spectral);
    CHECK(block_rel(rom.R.data().transpose() * rom.R.data(), reg.M_reg.data()) < 1e-10);
  }

  SECTION("noisy data: indefinite mass matrix, regularized ROM")
  {
    const DataSeries noisy = add_noise(run.data, 1e-3, 1234);
    const BlockMatrix Mn = assemble_mass(noisy);
    Eigen::SelfAdjointEigenSolver<Matrix> raw(Mn.data(), Eigen::EigenvaluesOnly);
    CHECK(raw.eigenvalues().minCoeff() < 0.0);
    CHECK_THROWS_AS(make_rom(noisy, {RomOptions::Mode::None}), Error);

    RomOptions opts;
    opts.mode = RomOptions::Mode::Spectral;
    opts.relative_threshold = 1e-4;
    const Rom rom = make_rom(noisy, opts);
    CHECK(rom.order() >= 1);
    CHECK(rom.order() < 5);
    CHECK(rom.P.off_tridiagonal_norm() <= 1e-9 * rom.P.data().norm());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(rom.R.data().transpose() * rom.R.data(), Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);

    const Rom boosted = make_rom(noisy, {RomOptions::Mode::Boost, 1e-1});
    CHECK(boosted.order() == 5);
  }
}

TEST_CASE("ROM file round trip", "[rom]")
{
  const SnapshotRun &run = well_posed_run();
  const Rom rom = make_rom(run.data);
  const auto path = std::filesystem::temp_directory_path() / "emrom_test.romr";
  write_rom(path.string(), rom);
  const Rom back = read_rom(path.string());
  std::filesystem::remove(path);
  CHECK(back.m == rom.m);
  CHECK(back.n == rom.n);
  CHECK(back.tau == rom.tau);
  CHECK(back.regularization.method == rom.regularization.method);
  CHECK(back.order() == rom.order());
  CHECK(back.R.data() == rom.R.data());
  CHECK(back.S.data() == rom.S.data());
  CHECK(back.P.data() == rom.P.data());
}
