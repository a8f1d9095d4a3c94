// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include <catch_amalgamated.hpp>

#include "emrom/operator.hpp"
#include "test_helpers.hpp"

using namespace emrom;

namespace
{

using Field2 = std::function<Eigen::Vector2d(double, double)>;
using Tensor2 = std::function<Eigen::Matrix2d(double, double)>;

bool expect_kind(ErrorKind kind, const std::function<void()> &fn)
{
  try
  {
    fn();
  }
  catch (const Error &e)
  {
    return e.kind() == kind;
  }
  return false;
}

Matrix sample(const LebedevGrid &g, const Field2 &f)
{
  Matrix psi(g.num_dofs(), 1);
  for (Index k = 0; k < g.num_nodes(); k++)
  {
    const auto p = g.position(k);
    const Eigen::Vector2d v = f(p[0], p[1]);
    psi(2 * k, 0) = g.dof_kept(2 * k) ? v(0) : 0.0;
    psi(2 * k + 1, 0) = g.dof_kept(2 * k + 1) ? v(1) : 0.0;
  }
  return psi;
}

// Fourth-order central difference.
double d4(const std::function<double(double)> &f, double x, double h)
{
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

}  // namespace

TEST_CASE("build_grid counts and coordinates", "[medium-grid]")
{
  const auto g = build_grid(8, 8, 1.0);
  CHECK(g.num_a() == 64);
  CHECK(g.num_b() == 49);
  const auto b0 = g.position(g.num_a());
  CHECK(b0[0] == 0.5);
  CHECK(b0[1] == 0.5);

  const auto g2 = build_grid(10, 20, 0.5);
  const auto e = g2.extent();
  CHECK(e[0] == 4.5);
  CHECK(e[1] == 9.5);
  const auto last_a = g2.position(g2.num_a() - 1);
  CHECK(last_a[0] == 4.5);
  CHECK(last_a[1] == 9.5);

  // B coordinates equal A coordinates shifted by (l/2, l/2).
  for (Index i = 0; i + 1 < g2.n1(); i++)
  {
    for (Index j = 0; j + 1 < g2.n2(); j++)
    {
      const auto a = g2.position(g2.index_a(i, j));
      const auto b = g2.position(g2.index_b(i, j));
      CHECK(b[0] - a[0] == 0.25);
      CHECK(b[1] - a[1] == 0.25);
    }
  }

  CHECK(expect_kind(ErrorKind::InvalidDimension, [] { build_grid(7, 8, 1.0); }));
  CHECK(expect_kind(ErrorKind::InvalidDimension, [] { build_grid(8, 8, 0.0); }));
}

TEST_CASE("homogeneous and rectangle phantoms", "[medium-grid]")
{
  const auto g = build_grid(64, 48, 1.0);
  const MediumField hom = build_medium(phantoms::homogeneous(16.0), g, 1.5);
  for (Index k = 0; k < g.num_nodes(); k++)
  {
    REQUIRE(hom.tensor(k) == SpeedTensor::isotropic(1.5));
  }

  const SpeedTensor inside{1.3, 0.8, 0.1};
  const auto spec = phantoms::rectangle_inclusion(16.0, 1.5, 2.5, 1.0, 2.0, inside);
  const MediumField rect = build_medium(spec, g, 1.0);
  std::set<std::tuple<double, double, double>> values;
  Index count_inside = 0;
  for (Index k = 0; k < g.num_nodes(); k++)
  {
    const auto t = rect.tensor(k);
    values.insert({t.c11, t.c22, t.c12});
    const auto p = g.position(k);
    const bool in = p[0] >= 24.0 && p[0] <= 40.0 && p[1] >= 16.0 && p[1] <= 32.0;
    count_inside += in ? 1 : 0;
    REQUIRE((t == (in ? inside : SpeedTensor::isotropic(1.0))));
  }
  CHECK(values.size() == 2);
  CHECK(count_inside > 0);
}

TEST_CASE("crack phantom keeps the collar homogeneous", "[medium-grid]")
{
  const auto g = build_grid(100, 50, 1.0);
  const double lc = 16.0;
  const auto spec = phantoms::crack(lc, 49.0 / lc, 2.5);
  const MediumField m = build_medium(spec, g, 1.0);
  const Region &crack = spec.regions.front();
  Index inside = 0;
  for (Index k = 0; k < g.num_nodes(); k++)
  {
    const auto p = g.position(k);
    if (crack.contains(p[0] / lc, p[1] / lc))
    {
      inside++;
      CHECK(m.tensor(k) == crack.speed);
    }
    else
    {
      CHECK(m.is_background(k));
    }
    if (p[0] < spec.exclusion_depth || g.wall_distance(k) < spec.boundary_layer)
    {
      CHECK(m.is_background(k));
    }
  }
  CHECK(inside > 10);
  // Contrast eps/eps_o = (c_o/c)^2 for an isotropic medium.
  CHECK(std::pow(1.0 / crack.speed.c11, 2) == Catch::Approx(4.0));
  CHECK_NOTHROW(m.check_collar({{8.0, 24.0}}, 8.0, spec.boundary_layer));
}

TEST_CASE("phantom validation errors", "[medium-grid]")
{
  const auto g = build_grid(40, 40, 1.0);
  auto spec = phantoms::rectangle_inclusion(16.0, 1.0, 1.5, 1.0, 1.5, {1.0, 1.0, 2.0});
  CHECK(expect_kind(ErrorKind::NonSPDContrast, [&] { build_medium(spec, g, 1.0); }));
  spec = phantoms::rectangle_inclusion(16.0, 1.0, 3.0, 1.0, 1.5, {1.2, 1.2, 0.0});
  CHECK(expect_kind(ErrorKind::RegionOutsideDomain, [&] { build_medium(spec, g, 1.0); }));
  spec = phantoms::rectangle_inclusion(16.0, 0.2, 1.0, 1.0, 1.5, {1.2, 1.2, 0.0});
  CHECK(expect_kind(ErrorKind::RegionOutsideDomain, [&] { build_medium(spec, g, 1.0); }));
}

TEST_CASE("operator is exactly symmetric and positive semidefinite", "[medium-grid]")
{
  const auto g = build_grid(16, 16, 1.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector c11(g.num_nodes()), c22(g.num_nodes()), c12(g.num_nodes());
  for (Index k = 0; k < g.num_nodes(); k++)
  {
    c11(k) = 0.7 + 0.6 * u(rng);
    c22(k) = 0.7 + 0.6 * u(rng);
    c12(k) = 0.3 * (u(rng) - 0.5);
  }
  const MediumField m(g, 1.0, c11, c22, c12);
  const auto op = assemble_operator(m);
  const Matrix A = Matrix(op.A);
  CHECK((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A, Eigen::EigenvaluesOnly);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * A.norm());

  const double est = estimate_lambda_max(op);
  CHECK(est <= eig.eigenvalues().maxCoeff() * (1 + 1e-12));
  CHECK(est >= 0.97 * eig.eigenvalues().maxCoeff());
  CHECK(gershgorin_bound(op.A) >= eig.eigenvalues().maxCoeff());

  // Wall-tangential dofs are removed.
  for (Index d = 0; d < g.num_dofs(); d++)
  {
    if (!g.dof_kept(d))
    {
      REQUIRE(A.row(d).norm() == 0.0);
    }
  }
}

TEST_CASE("discrete gradients lie in the null space", "[medium-grid]")
{
  const auto g = build_grid(20, 18, 1.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector c11(g.num_nodes()), c22(g.num_nodes()), c12(g.num_nodes());
  for (Index k = 0; k < g.num_nodes(); k++)
  {
    c11(k) = 1.0 + 0.2 * std::sin(0.3 * static_cast<double>(k));
    c22(k) = 1.1 + 0.1 * std::cos(0.2 * static_cast<double>(k));
    c12(k) = 0.05 * std::sin(0.11 * static_cast<double>(k));
  }
  const MediumField m(g, 1.0, c11, c22, c12);
  const auto op = assemble_operator(m);
  const Index n1 = g.n1(), n2 = g.n2();
  const double l = g.ell();

  // Potentials at beta positions (i, j+1/2) and alpha positions (i+1/2, j), zero near walls.
  Matrix Nb = Matrix::Zero(n1, n2 - 1);
  Matrix Na = Matrix::Zero(n1 - 1, n2);
  for (Index i = 2; i + 2 < n1; i++)
  {
    for (Index j = 2; j + 3 < n2; j++)
    {
      Nb(i, j) = normal(rng);
    }
  }
  for (Index i = 2; i + 3 < n1; i++)
  {
    for (Index j = 2; j + 2 < n2; j++)
    {
      Na(i, j) = normal(rng);
    }
  }
  // grad N, component by component, then psi = c^{-1} grad N.
  Matrix grad = Matrix::Zero(g.num_dofs(), 1);
  for (Index i = 0; i < n1; i++)
  {
    for (Index j = 0; j < n2; j++)
    {
      const Index a = g.index_a(i, j);
      if (j >= 1 && j + 1 < n2)
      {
        grad(2 * a + 1, 0) = (Nb(i, j) - Nb(i, j - 1)) / l;
      }
      if (i >= 1 && i + 1 < n1)
      {
        grad(2 * a, 0) = (Na(i, j) - Na(i - 1, j)) / l;
      }
    }
  }
  for (Index i = 0; i + 1 < n1; i++)
  {
    for (Index j = 0; j + 1 < n2; j++)
    {
      const Index b = g.index_b(i, j);
      grad(2 * b, 0) = (Nb(i + 1, j) - Nb(i, j)) / l;
      grad(2 * b + 1, 0) = (Na(i, j + 1) - Na(i, j)) / l;
    }
  }
  Matrix psi(g.num_dofs(), 1);
  for (Index k = 0; k < g.num_nodes(); k++)
  {
    psi.block(2 * k, 0, 2, 1) = m.tensor(k).matrix().inverse() * grad.block(2 * k, 0, 2, 1);
  }
  REQUIRE(psi.norm() > 1.0);
  const double anorm = Matrix(op.A).norm();
  CHECK((op.A * psi).norm() <= 1e-10 * anorm * psi.norm());
}

TEST_CASE("plane waves reproduce the stencil symbol", "[medium-grid]")
{
  const auto g = build_grid(24, 20, 1.0);
  const double c = 1.3;
  const auto op = assemble_operator(MediumField(g, c));
  const double l = g.ell();
  const double k1 = 0.4, k2 = 0.7;
  const double s1 = 2.0 / l * std::sin(k1 * l / 2), s2 = 2.0 / l * std::sin(k2 * l / 2);
  const double symbol = c * c * (s1 * s1 + s2 * s2);

  for (int lattice = 0; lattice < 2; lattice++)
  {
    // lattice 0: comp 2 on A, comp 1 on B; lattice 1: comp 1 on A, comp 2 on B.
    Matrix psi = Matrix::Zero(g.num_dofs(), 1);
    for (Index k = 0; k < g.num_nodes(); k++)
    {
      const auto p = g.position(k);
      const double phase = std::cos(k1 * p[0] + k2 * p[1] + 0.2);
      const bool on_a = g.is_a(k);
      if ((lattice == 0) == on_a)
      {
        psi(2 * k + 1, 0) = s1 * phase;
      }
      else
      {
        psi(2 * k, 0) = -s2 * phase;
      }
    }
    const Matrix Apsi = op.A * psi;
    double worst = 0.0;
    for (Index k = 0; k < g.num_nodes(); k++)
    {
      if (g.wall_distance(k) < 3.0)
      {
        continue;
      }
      for (int comp = 0; comp < 2; comp++)
      {
        worst = std::max(worst, std::abs(Apsi(2 * k + comp, 0) - symbol * psi(2 * k + comp, 0)));
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("operator converges at second order on smooth fields", "[medium-grid]")
{
  const Field2 psi_fn = [](double x1, double x2) {
    return Eigen::Vector2d(std::sin(1.3 * x1 + 0.4) * std::cos(0.9 * x2),
                           std::cos(0.7 * x1) * std::sin(1.1 * x2 + 0.2));
  };
  const Tensor2 c_fn = [](double x1, double x2) {
    Eigen::Matrix2d c;
    const double c12 = 0.1 * std::sin(x1 * x2);
    c << 1.0 + 0.2 * std::sin(x1) * std::cos(x2), c12, c12, 1.0 + 0.15 * std::cos(x1 + x2);
    return c;
  };
  const double fd = 1e-3;
  auto cpsi = [&](double x1, double x2) -> Eigen::Vector2d { return c_fn(x1, x2) * psi_fn(x1, x2); };
  auto q = [&](double x1, double x2) {
    return d4([&](double t) { return cpsi(t, x2)(1); }, x1, fd) -
           d4([&](double t) { return cpsi(x1, t)(0); }, x2, fd);
  };
  auto exact = [&](double x1, double x2) -> Eigen::Vector2d {
    const double dq1 = d4([&](double t) { return q(t, x2); }, x1, fd);
    const double dq2 = d4([&](double t) { return q(x1, t); }, x2, fd);
    return c_fn(x1, x2) * Eigen::Vector2d(dq2, -dq1);
  };

  std::vector<double> errors;
  for (const Index n : {17, 33, 65})
  {
    const double l = 2.0 / static_cast<double>(n - 1);
    const auto g = build_grid(n, n, l);
    Vector c11(g.num_nodes()), c22(g.num_nodes()), c12(g.num_nodes());
    for (Index k = 0; k < g.num_nodes(); k++)
    {
      const auto p = g.position(k);
      const auto c = c_fn(p[0], p[1]);
      c11(k) = c(0, 0);
      c22(k) = c(1, 1);
      c12(k) = c(0, 1);
    }
    const auto op = assemble_operator(MediumField(g, 1.0, c11, c22, c12));
    const Matrix Apsi = op.A * sample(g, psi_fn);
    double err = 0.0;
    for (Index k = 0; k < g.num_nodes(); k++)
    {
      const auto p = g.position(k);
      if (p[0] < 0.5 || p[0] > 1.5 || p[1] < 0.5 || p[1] > 1.5)
      {
        continue;
      }
      const auto ex = exact(p[0], p[1]);
      err = std::max({err, std::abs(Apsi(2 * k, 0) - ex(0)), std::abs(Apsi(2 * k + 1, 0) - ex(1))});
    }
    errors.push_back(err);
  }
  const double order1 = std::log2(errors[0] / errors[1]);
  const double order2 = std::log2(errors[1] / errors[2]);
  INFO("errors " << errors[0] << " " << errors[1] << " " << errors[2]);
  CHECK(order1 >= 1.8);
  CHECK(order2 >= 1.8);
}
