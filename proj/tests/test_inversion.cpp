// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <random>

#include "emrom/inversion.hpp"
#include "test_helpers.hpp"

using namespace emrom;

namespace
{

// Small well-posed scene: a 10% isotropic inclusion below a three-antenna array.
struct Scene
{
  LebedevGrid grid{40, 33, 1.0};
  PulseSpec pulse = make_pulse(16.0, 1.0);
  ForwardContext ctx{grid, make_array(grid, 3, 8.0, 6.0), pulse, 0.45 * std::numbers::pi / pulse.omega_c(), 16};
  Index n = 4;
  Parametrization param = make_parametrization(grid, 16.0, 1.0, 10.0, 22.0, 11.0, 21.0);
  MediumField truth =
      build_medium(phantoms::rectangle_inclusion(16.0, 0.75, 1.125, 0.8125, 1.1875, SpeedTensor::isotropic(1.1)),
                   grid, 1.0);
  DataSeries data = forward_data(ctx, truth, n);
  DataSeries background = forward_data(ctx, MediumField(grid, 1.0), n);
};

const Scene &scene()
{
  static const Scene s;
  return s;
}

}  // namespace

TEST_CASE("parametrization lattice", "[inversion]")
{
  const LebedevGrid grid(60, 50, 1.0);
  const Parametrization p = make_parametrization(grid, 16.0, 1.0, 12.0, 28.0, 10.0, 40.0);
  REQUIRE(p.size() == 5 * 7);
  CHECK(p.unknowns() == 105);
  CHECK(p.sigma1 == 2.3);
  CHECK(p.sigma2 == 2.9);
  CHECK(p.centers[1][1] - p.centers[0][1] == Catch::Approx(5.0));
  CHECK(p.centers[7][0] - p.centers[0][0] == Catch::Approx(4.0));
  for (Index j = 0; j < p.size(); j++)
  {
    const auto &c = p.centers[static_cast<std::size_t>(j)];
    CHECK(p.phi(j, c[0], c[1]) == 1.0);
  }
  CHECK(p.phi(0, p.centers[0][0] + 2.3, p.centers[0][1]) == Catch::Approx(std::exp(-0.5)));
  CHECK_THROWS_AS(make_parametrization(grid, 16.0, 1.0, 12.0, 80.0, 10.0, 40.0), Error);
}

TEST_CASE("gamma field and speed tensor", "[inversion]")
{
  const LebedevGrid grid(60, 50, 1.0);
  const double c_o = 1.5;
  const Parametrization p = make_parametrization(grid, 16.0, c_o, 12.0, 28.0, 10.0, 40.0);
  const Index N = p.size();
  Vector alpha = Vector::Zero(3 * N);

  const Eigen::Matrix2d g0 = gamma_field(p, alpha, 20.0, 25.0);
  CHECK((g0 - Eigen::Matrix2d::Identity() / c_o).norm() <= 1e-15);
  CHECK((speed_from_gamma(g0, c_o) - c_o * Eigen::Matrix2d::Identity()).norm() <= 1e-14);
  const MediumField flat = medium_from_alpha(p, alpha, grid);
  CHECK((flat.c11().array() - c_o).abs().maxCoeff() <= 1e-14);
  CHECK(flat.c12().cwiseAbs().maxCoeff() <= 1e-14);

  const Index j = 9;
  const auto &c = p.centers[static_cast<std::size_t>(j)];
  alpha(j) = 0.2;
  const Eigen::Matrix2d g1 = gamma_field(p, alpha, c[0], c[1]);
  CHECK(g1(0, 0) == Catch::Approx(1.0 / c_o + 0.2));
  CHECK(g1(1, 1) == Catch::Approx(1.0 / c_o));
  CHECK(g1(1, 0) == 0.0);
  alpha(2 * N + j) = -0.1;
  CHECK(gamma_field(p, alpha, c[0], c[1])(0, 1) == Catch::Approx(-0.1));
  CHECK_THROWS_AS(gamma_field(p, Vector::Zero(N), 0.0, 0.0), Error);

  Eigen::Matrix2d d;
  d << 2.0, 0.0, 0.0, 0.5;
  Eigen::Matrix2d expect;
  expect << 0.5, 0.0, 0.0, 2.0;
  CHECK((speed_from_gamma(d) - expect).norm() <= 1e-14);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.2, 2.0), v(-1.0, 1.0);
  for (int trial = 0; trial < 20; trial++)
  {
    Eigen::Matrix2d g;
    g << u(rng), v(rng), 0.0, u(rng);
    const Eigen::Matrix2d s = speed_from_gamma(g);
    CHECK((s - s.transpose()).norm() == 0.0);
    CHECK(s.determinant() > 0.0);
    CHECK(s(0, 0) > 0.0);
    const Eigen::Matrix2d back = (s * s).inverse();
    CHECK((back - g.transpose() * g).norm() <= 1e-12 * (g.transpose() * g).norm());
  }

  Eigen::Matrix2d bad;
  bad << 1.0, 0.3, 0.0, -0.1;
  CHECK_THROWS_AS(speed_from_gamma(bad), Error);
  bad(1, 1) = 1e-14;
  CHECK_THROWS_AS(speed_from_gamma(bad), Error);
  alpha.setZero();
  alpha(N + j) = -5.0;
  CHECK_THROWS_AS(medium_from_alpha(p, alpha, grid), Error);
}

TEST_CASE("finite-difference Jacobian", "[inversion]")
{
  std::mt19937_64 rng(5);
  const Matrix B = test::random_matrix(7, 4, rng);
  const ResidualFn linear = [&](const Vector &a) -> Vector { return B * a; };
  const Vector a0 = test::random_matrix(4, 1, rng);
  CHECK((jacobian_fd(linear, a0, 1e-4) - B).cwiseAbs().maxCoeff() <= 1e-9);

  // r(a) = (a0^2, a0 a1, a1^2): forward differences are O(h).
  const ResidualFn quad = [](const Vector &a) -> Vector {
    Vector r(3);
    r << a(0) * a(0), a(0) * a(1), a(1) * a(1);
    return r;
  };
  Vector a(2);
  a << 0.7, -1.3;
  Matrix exact(3, 2);
  exact << 2 * a(0), 0.0, a(1), a(0), 0.0, 2 * a(1);
  const double e1 = (jacobian_fd(quad, a, 1e-3) - exact).norm();
  const double e2 = (jacobian_fd(quad, a, 5e-4) - exact).norm();
  CHECK(e1 / e2 == Catch::Approx(2.0).epsilon(0.01));

  const ResidualFn broken = [](const Vector &x) -> Vector {
    if (x(1) != 0.0)
    {
      throw Error(ErrorKind::ForwardFailure, "unstable");
    }
    return x;
  };
  try
  {
    jacobian_fd(broken, Vector::Zero(3), 1e-4);
    FAIL("expected a failure");
  }
  catch (const Error &e)
  {
    CHECK(e.kind() == ErrorKind::ForwardFailure);
    CHECK(std::string(e.what()).find("column 1") != std::string::npos);
  }
  CHECK_THROWS_AS(jacobian_fd(linear, a0, 0.0), Error);
}

TEST_CASE("Gauss-Newton step", "[inversion]")
{
  // N = 1, three unknowns, J = I: every eigenvalue is 1, nu = 1, step = -r/2.
  Vector r(3);
  r << 1.0, -2.0, 0.5;
  const GaussNewtonStep id = gauss_newton_step(Matrix::Identity(3, 3), r, 1);
  CHECK(id.nu == 1.0);
  CHECK((id.delta + 0.5 * r).norm() <= 1e-15);

  std::mt19937_64 rng(9);
  const Matrix J = test::random_matrix(40, 15, rng);
  const Vector res = test::random_matrix(40, 1, rng);
  CHECK(gauss_newton_step(J, Vector::Zero(40), 5).delta.norm() == 0.0);

  const GaussNewtonStep step = gauss_newton_step(J, res, 5);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(J.transpose() * J);
  const Vector desc = eig.eigenvalues().reverse();
  CHECK(step.nu == Catch::Approx(desc(4))); // round(0.9 * 5) = 5, the fifth largest
  const Matrix H = J.transpose() * J + step.nu * Matrix::Identity(15, 15);
  const Vector direct = -H.ldlt().solve(J.transpose() * res);
  CHECK((step.delta - direct).norm() <= 1e-12 * direct.norm());

  double previous = std::numeric_limits<double>::infinity();
  for (const double nu : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0})
  {
    const double norm = tikhonov_step(J, res, nu).norm();
    CHECK(norm < previous);
    previous = norm;
  }
  CHECK_THROWS_AS(gauss_newton_step(Matrix::Zero(5, 3), Vector::Ones(5), 1), Error);
  CHECK_THROWS_AS(gauss_newton_step(J, res, 5, 0.0), Error);
}

TEST_CASE("misfit functions", "[inversion]")
{
  const BlockTriangular I(Matrix::Identity(6, 6), 2);
  CHECK(rom_misfit(I, I.data()).value == 0.0);

  std::mt19937_64 rng(2);
  DataSeries d{2, 3, 0.5, {}};
  DataSeries zero{2, 3, 0.5, {}};
  for (int j = 0; j < 6; j++)
  {
    d.D.push_back(test::random_matrix(4, 4, rng));
    zero.D.push_back(Matrix::Zero(4, 4));
  }
  const Evaluation base = fwi_misfit(zero, d);
  CHECK(base.value >= 0.0);
  double sum = 0.0;
  for (const Matrix &m : d.D)
  {
    sum += m.squaredNorm();
  }
  CHECK(base.value == Catch::Approx(0.5 * sum));
  DataSeries doubled = d;
  for (Matrix &m : doubled.D)
  {
    m *= 2.0;
  }
  CHECK(fwi_misfit(zero, doubled).value == Catch::Approx(4.0 * base.value));
  CHECK(fwi_misfit(d, d).value == 0.0);
  CHECK_THROWS_AS(fwi_misfit(d.truncated(2), d), Error);
}

TEST_CASE("objectives vanish at the truth", "[inversion]")
{
  const Scene &s = scene();
  const Vector zero = Vector::Zero(s.param.unknowns());

  const RomObjective homog(s.ctx, s.param, make_rom(s.background, {RomOptions::Mode::None}));
  CHECK(homog(zero).value <= 1e-10);
  const FwiObjective fwi{s.ctx, s.param, s.background};
  CHECK(fwi(zero).value == 0.0);

  // Local minimum: any single-coefficient perturbation increases the objective.
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<Index> pick(0, s.param.unknowns() - 1);
  for (int trial = 0; trial < 10; trial++)
  {
    Vector a = zero;
    a(pick(rng)) = trial % 2 == 0 ? 0.02 : -0.02;
    CHECK(homog(a).value > 1e-8);
    CHECK(fwi(a).value > 0.0);
  }

  // The FWI objective against inclusion data is positive at the background.
  const FwiObjective incl{s.ctx, s.param, s.data};
  CHECK(incl(zero).value > 0.0);
}

TEST_CASE("ROM objective gradient", "[inversion]")
{
  const Scene &s = scene();
  const RomObjective obj(s.ctx, s.param, make_rom(s.data, {RomOptions::Mode::None}));
  const Vector a0 = Vector::Zero(s.param.unknowns());
  const Evaluation e0 = obj(a0);
  REQUIRE(e0.value > 0.0);
  const ResidualFn residual = [&](const Vector &a) { return obj(a).residual; };
  const Matrix J = jacobian_fd(residual, a0, 1e-4, &e0.residual);
  const Vector grad = J.transpose() * e0.residual;

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; trial++)
  {
    Vector d = test::random_matrix(a0.size(), 1, rng);
    d.normalize();
    const double eps = 1e-3;
    const double fd = (obj(a0 + eps * d).value - obj(a0 - eps * d).value) / (4.0 * eps);
    const double an = grad.dot(d);
    INFO("directional derivative " << fd << " vs " << an);
    CHECK(std::abs(fd - an) <= 0.01 * std::abs(fd));
  }
}

TEST_CASE("inversion from the background", "[inversion][slow]")
{
  const Scene &s = scene();
  InversionConfig config;
  config.max_iterations = 4;

  const InversionResult flat = invert(s.background, config, s.param, s.ctx);
  REQUIRE_FALSE(flat.log.empty());
  CHECK(flat.log.back().step_norm <= 1e-8);
  CHECK(flat.alpha.norm() <= 1e-8);

  const InversionResult incl = invert(s.data, config, s.param, s.ctx);
  REQUIRE(incl.log.size() >= 2);
  const RomObjective obj(s.ctx, s.param, make_rom(s.data, {}));
  const double initial = obj(Vector::Zero(s.param.unknowns())).value;
  CHECK(incl.log.front().iteration == 0);
  CHECK(incl.log.front().objective == initial);
  for (std::size_t k = 1; k < incl.log.size(); k++)
  {
    CHECK(incl.log[k].objective <= incl.log[k - 1].objective);
  }
  CHECK(incl.log.back().objective <= 0.1 * initial);
  const Index center = s.grid.nearest_a(15.0, 16.0);
  INFO("c11 at the center " << incl.medium.c11()(center));
  CHECK(incl.medium.c11()(center) > 1.03);

  InversionConfig bad = config;
  bad.schedule = {3, 2};
  CHECK_THROWS_AS(invert(s.data, bad, s.param, s.ctx), Error);
}

TEST_CASE("layer peeling warm starts each order", "[inversion][slow]")
{
  const Scene &s = scene();
  InversionConfig config;
  config.max_iterations = 2;
  config.schedule = {2, 4};
  const InversionResult r = invert(s.data, config, s.param, s.ctx);
  REQUIRE_FALSE(r.log.empty());
  CHECK(r.log.front().stage_order == 2);
  CHECK(r.log.back().stage_order == 4);
}
