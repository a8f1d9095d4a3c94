// SPDX-License-Identifier: Apache-2.0
//
// One pass/fail line per acceptance criterion. Desk scale: 100 x 50 nodes per family, m = 5,
// n = 20, lambda_c = 16, noise-free unless a criterion says otherwise.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "emrom/pipeline.hpp"

using namespace emrom;

namespace
{

constexpr double kLambdaC = 16.0;
constexpr Index kN1 = 100;
constexpr Index kN2 = 50;
constexpr Index kM = 5;
constexpr Index kN = 20;
constexpr double kDepth = 8.0;

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3)
{
  std::ostringstream s;
  s << std::scientific << std::setprecision(digits) << v;
  return s.str();
}

std::string fixed(double v, int digits = 2)
{
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

double omega_c() { return 2.0 * std::numbers::pi / kLambdaC; }
double tau_of(double fraction) { return fraction * std::numbers::pi / omega_c(); }

LebedevGrid desk_grid() { return LebedevGrid(kN1, kN2, 1.0); }
double desk_width() { return static_cast<double>(kN2 - 1) / kLambdaC; }

PhantomSpec crack_spec() { return phantoms::crack(kLambdaC, desk_width(), 2.5); }

double relative(const Matrix &a, const Matrix &b) { return (a - b).norm() / b.norm(); }

double min_eigenvalue(const Matrix &M)
{
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

double max_eigenvalue(const Matrix &M)
{
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

// Shared desk run: crack phantom, default tau = 0.3 pi / omega_c, separation 8.
struct DeskCrack
{
  LebedevGrid grid = desk_grid();
  PulseSpec pulse = make_pulse(kLambdaC, 1.0);
  ArrayGeometry array = make_array(grid, kM, 8.0, kDepth);
  double tau = tau_of(0.3);
  DiscreteOperator op = assemble_operator(build_medium(crack_spec(), grid, 1.0));
  double lmax = estimate_lambda_max(op);
  SnapshotRun run = run_snapshots(op, array, pulse, tau, kN, 8, lmax);
};

const DeskCrack &desk_crack()
{
  static const DeskCrack d;
  return d;
}

// 50 x 41, m = 3, separation 8, tau = 0.45 pi / omega_c, n = 5: a configuration whose mass matrix is
// well conditioned, reported next to the desk results.
struct WellPosed
{
  LebedevGrid grid{50, 41, 1.0};
  PulseSpec pulse = make_pulse(kLambdaC, 1.0);
  ArrayGeometry array = make_array(grid, 3, 8.0, kDepth);
  double tau = tau_of(0.45);
  Index n = 5;
  DiscreteOperator op = assemble_operator(build_medium(
      phantoms::rectangle_inclusion(kLambdaC, 1.5, 2.0, 1.0, 1.5, SpeedTensor::isotropic(1.3)), grid, 1.0));
  SnapshotRun run = run_snapshots(op, array, pulse, tau, n, 16);
};

const WellPosed &well_posed()
{
  static const WellPosed w;
  return w;
}

std::string mass_diagnostics(const DataSeries &data)
{
  const Matrix M = assemble_mass(data).data();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  Index rank = 0;
  for (Index k = 0; k < eig.eigenvalues().size(); k++)
  {
    rank += eig.eigenvalues()(k) > 1e-12 * top ? 1 : 0;
  }
  return "lambda_min/lambda_max(M) = " + fmt(eig.eigenvalues()(0) / top) + ", " + std::to_string(rank) + " of " +
         std::to_string(M.rows()) + " eigenvalues above 1e-12 lambda_max";
}

// 1. Data Grams equal brute-force snapshot Grams.
Outcome criterion1()
{
  // The exact cosine oracle needs a dense eigendecomposition, so it runs on a 30 x 25 grid.
  const LebedevGrid grid(30, 25, 1.0);
  MediumField medium(grid, 1.0);
  {
    Vector c11 = Vector::Constant(grid.num_nodes(), 1.0), c22 = c11, c12 = Vector::Zero(grid.num_nodes());
    for (Index k = 0; k < grid.num_nodes(); k++)
    {
      const auto p = grid.position(k);
      if (p[0] >= 16.0 && p[0] <= 22.0 && p[1] >= 8.0 && p[1] <= 16.0)
      {
        c11(k) = 1.2;
        c22(k) = 0.9;
        c12(k) = 0.05;
      }
    }
    medium = MediumField(grid, 1.0, c11, c22, c12);
  }
  const DiscreteOperator op = assemble_operator(medium);
  const ArrayGeometry array = make_array(grid, kM, 4.0, 6.0);
  const PulseSpec pulse = make_pulse(kLambdaC, 1.0);
  const double tau = tau_of(0.3);
  const Matrix u0 = initial_snapshot_dense(op, array, pulse);
  const Snapshots exact = exact_snapshots(op, u0, tau, 2 * kN);
  const DataSeries data = compute_data(exact, u0, op.weight(), tau);
  BlockMatrix M, S;
  detail::snapshot_grams(exact, kN, op.weight(), M, S);
  const double e_exact =
      std::max(relative(assemble_mass(data).data(), M.data()), relative(assemble_stiffness(data).data(), S.data()));

  // Desk scale with leapfrog snapshots, which obey the same identity for their discrete propagator.
  const DeskCrack &d = desk_crack();
  BlockMatrix Md, Sd;
  detail::snapshot_grams(d.run.u, kN, d.op.weight(), Md, Sd);
  const double e_desk = std::max(relative(assemble_mass(d.run.data).data(), Md.data()),
                                 relative(assemble_stiffness(d.run.data).data(), Sd.data()));
  const bool pass = e_exact <= 1e-9 && e_desk <= 1e-9;
  return {pass, "exact snapshots (30x25, m=5, n=20): " + fmt(e_exact) + "; desk leapfrog snapshots: " +
                    fmt(e_desk) + " (tol 1e-9)"};
}

// 2. and 3. on the unregularized desk ROM.
struct PlainRom
{
  bool built = false;
  std::string failure;
  InterpolationReport report;
};

const PlainRom &plain_desk_rom()
{
  static const PlainRom r = [] {
    PlainRom out;
    const DeskCrack &d = desk_crack();
    try
    {
      out.report = verify_interpolation(make_rom(d.run.data, {RomOptions::Mode::None}), d.run.data);
      out.built = true;
    }
    catch (const Error &e)
    {
      out.failure = e.what();
    }
    return out;
  }();
  return r;
}

const InterpolationReport &well_posed_report()
{
  static const InterpolationReport r = [] {
    const WellPosed &w = well_posed();
    return verify_interpolation(make_rom(w.run.data, {RomOptions::Mode::None}), w.run.data);
  }();
  return r;
}

Outcome criterion2()
{
  const PlainRom &r = plain_desk_rom();
  const InterpolationReport &wp = well_posed_report();
  const std::string side = "; 50x41, m=3, n=5: residual " + fmt(wp.max_residual);
  if (!r.built)
  {
    return {false, "desk ROM without regularization cannot be built (" + r.failure + "); " +
                       mass_diagnostics(desk_crack().run.data) + side};
  }
  return {r.report.max_residual <= 1e-8,
          "max residual over j <= 2n-2: " + fmt(r.report.max_residual) + " (tol 1e-8)" + side};
}

Outcome criterion3()
{
  const PlainRom &r = plain_desk_rom();
  const InterpolationReport &wp = well_posed_report();
  const std::string side = "; 50x41, m=3, n=5: off-tridiagonal " + fmt(wp.off_tridiagonal) + ", spectral radius " +
                           fixed(wp.spectral_radius, 6);
  if (!r.built)
  {
    return {false, "desk ROM without regularization cannot be built (" + r.failure + ")" + side};
  }
  const bool pass = r.report.off_tridiagonal <= 1e-8 && r.report.spectral_radius <= 1.0 + 1e-8;
  return {pass, "off-tridiagonal " + fmt(r.report.off_tridiagonal) + " (tol 1e-8), spectral radius " +
                    fixed(r.report.spectral_radius, 6) + side};
}

// 4. Noisy data through the pipeline with spectral regularization.
Outcome criterion4(const std::filesystem::path &scratch)
{
  ExperimentConfig c;
  c.phantom.variant = PhantomVariant::Crack;
  c.rom.noise = 1e-3;
  c.io.output_dir = (scratch / "criterion4").string();
  std::ostringstream log;
  std::string detail;
  bool indefinite = false;
  for (std::uint64_t seed = 1; seed <= 3 && !indefinite; seed++)
  {
    c.io.seed = seed;
    c.validate();
    run_pipeline(Command::Simulate, c, log);
    const DataSeries noisy = read_data((std::filesystem::path(c.io.output_dir) / artifacts::data).string());
    const Matrix M = assemble_mass(noisy).data();
    const double ratio = min_eigenvalue(M) / max_eigenvalue(M);
    detail += "seed " + std::to_string(seed) + ": lambda_min/lambda_max(M) = " + fmt(ratio) + "; ";
    indefinite = ratio < 0.0;
  }
  if (!indefinite)
  {
    return {false, detail + "raw mass matrix stayed positive definite"};
  }
  try
  {
    run_pipeline(Command::Rom, c, log);
    run_pipeline(Command::Image, c, log);
  }
  catch (const Error &e)
  {
    return {false, detail + "pipeline failed: " + e.what()};
  }
  const Rom rom = read_rom((std::filesystem::path(c.io.output_dir) / artifacts::rom).string());
  const Matrix M_reg = rom.R.data().transpose() * rom.R.data();
  const double spd = min_eigenvalue(M_reg);
  const double off = rom.P.off_tridiagonal_norm() / rom.P.data().norm();
  const bool pass = rom.regularization.method == RegularizationMethod::Spectral && spd > 0.0 && off <= 1e-9;
  return {pass, detail + "spectral order " + std::to_string(rom.order()) + ", lambda_min(M_reg) = " + fmt(spd) +
                    ", P_reg off-tridiagonal " + fmt(off) + " (tol 1e-9), rom and image completed"};
}

// 5. Internal-wave exactness and measurement consistency.
struct WaveErrors
{
  double exact = 0.0;
  double consistency = 0.0;
};

WaveErrors wave_errors(const DiscreteOperator &truth, const ArrayGeometry &array, const PulseSpec &pulse, double tau,
                       Index n, Index steps, const SnapshotRun &run, const Rom &rom)
{
  WaveErrors out;
  const ReferenceBasis ideal = reference_basis(truth, array, pulse, tau, n, steps, rom.regularization);
  const Index r = std::min(n, rom.order());
  for (Index j = 0; j < r; j++)
  {
    const Matrix &uj = run.u[static_cast<std::size_t>(j)];
    out.exact = std::max(out.exact, relative(estimate_internal_wave(ideal, rom.R, j), uj));
  }
  const LebedevGrid &grid = truth.grid;
  const ReferenceBasis bg =
      reference_basis(assemble_operator(MediumField(grid, 1.0)), array, pulse, tau, n, steps, rom.regularization);
  const double w = truth.weight();
  const Matrix e0 = estimate_internal_wave(bg, rom.R, 0);
  for (Index j = 0; j < r; j++)
  {
    const Matrix fit = w * e0.transpose() * estimate_internal_wave(bg, rom.R, j);
    out.consistency = std::max(out.consistency, relative(fit, run.data[j]));
  }
  return out;
}

Outcome criterion5()
{
  const WellPosed &w = well_posed();
  const WaveErrors wp = wave_errors(w.op, w.array, w.pulse, w.tau, w.n, 16, w.run,
                                    make_rom(w.run.data, {RomOptions::Mode::None}));
  const std::string side =
      "; 50x41, m=3, n=5: exactness " + fmt(wp.exact) + ", consistency " + fmt(wp.consistency);
  const DeskCrack &d = desk_crack();
  Rom rom;
  try
  {
    rom = make_rom(d.run.data, {RomOptions::Mode::None});
  }
  catch (const Error &e)
  {
    // Report what the regularized desk ROM achieves; exactness needs the unregularized factor.
    const Rom reg = make_rom(d.run.data);
    const WaveErrors r = wave_errors(d.op, d.array, d.pulse, d.tau, kN, 8, d.run, reg);
    return {false, "desk ROM needs regularization (" + std::string(e.what()) + "); with spectral order " +
                       std::to_string(reg.order()) + ": exactness " + fmt(r.exact) + ", consistency " +
                       fmt(r.consistency) + side};
  }
  const WaveErrors r = wave_errors(d.op, d.array, d.pulse, d.tau, kN, 8, d.run, rom);
  return {r.exact <= 1e-7 && r.consistency <= 1e-8,
          "exactness " + fmt(r.exact) + " (tol 1e-7), consistency " + fmt(r.consistency) + " (tol 1e-8)" + side};
}

// 6. Observed orders of the leapfrog scheme and of the stencil.
double d4(const std::function<double(double)> &f, double x, double h)
{
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

std::array<double, 2> stencil_orders()
{
  using Field2 = std::function<Eigen::Vector2d(double, double)>;
  const Field2 psi_fn = [](double x1, double x2) {
    return Eigen::Vector2d(std::sin(1.3 * x1 + 0.4) * std::cos(0.9 * x2), std::cos(0.7 * x1) * std::sin(1.1 * x2 + 0.2));
  };
  auto c_fn = [](double x1, double x2) {
    Eigen::Matrix2d c;
    const double c12 = 0.1 * std::sin(x1 * x2);
    c << 1.0 + 0.2 * std::sin(x1) * std::cos(x2), c12, c12, 1.0 + 0.15 * std::cos(x1 + x2);
    return c;
  };
  const double fd = 1e-3;
  auto cpsi = [&](double x1, double x2) -> Eigen::Vector2d { return c_fn(x1, x2) * psi_fn(x1, x2); };
  auto q = [&](double x1, double x2) {
    return d4([&](double t) { return cpsi(t, x2)(1); }, x1, fd) - d4([&](double t) { return cpsi(x1, t)(0); }, x2, fd);
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
    const LebedevGrid g(n, n, l);
    Vector c11(g.num_nodes()), c22(g.num_nodes()), c12(g.num_nodes());
    Matrix psi(g.num_dofs(), 1);
    for (Index k = 0; k < g.num_nodes(); k++)
    {
      const auto p = g.position(k);
      const auto c = c_fn(p[0], p[1]);
      c11(k) = c(0, 0);
      c22(k) = c(1, 1);
      c12(k) = c(0, 1);
      const Eigen::Vector2d v = psi_fn(p[0], p[1]);
      psi(2 * k, 0) = g.dof_kept(2 * k) ? v(0) : 0.0;
      psi(2 * k + 1, 0) = g.dof_kept(2 * k + 1) ? v(1) : 0.0;
    }
    const Matrix Apsi = assemble_operator(MediumField(g, 1.0, c11, c22, c12)).A * psi;
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
  return {std::log2(errors[0] / errors[1]), std::log2(errors[1] / errors[2])};
}

Outcome criterion6()
{
  const LebedevGrid grid(30, 25, 1.0);
  const DiscreteOperator op = assemble_operator(build_medium(
      phantoms::rectangle_inclusion(kLambdaC, 1.0, 1.4, 0.5, 1.0, SpeedTensor{1.2, 0.9, 0.05}), grid, 1.0));
  const ArrayGeometry array = make_array(grid, 3, 6.0, 6.0);
  const double tau = tau_of(0.3);
  const Matrix u0 = initial_snapshot_dense(op, array, make_pulse(kLambdaC, 1.0));
  const Index count = 10;
  const Snapshots exact = exact_snapshots(op, u0, tau, count);
  const double lmax = estimate_lambda_max(op);
  std::vector<double> errors;
  for (const Index steps : {8, 16, 32})
  {
    const Snapshots u = propagate(op, u0, choose_dt(tau, steps, lmax), tau, count, lmax);
    double err = 0.0;
    for (Index j = 1; j < count; j++)
    {
      err = std::max(err, relative(u[static_cast<std::size_t>(j)], exact[static_cast<std::size_t>(j)]));
    }
    errors.push_back(err);
  }
  const double t1 = std::log2(errors[0] / errors[1]);
  const double t2 = std::log2(errors[1] / errors[2]);
  const auto s = stencil_orders();
  const bool pass = std::min({t1, t2, s[0], s[1]}) >= 1.8;
  return {pass, "leapfrog orders " + fixed(t1) + ", " + fixed(t2) + "; stencil orders " + fixed(s[0]) + ", " +
                    fixed(s[1]) + " (need >= 1.8)"};
}

// 7. Crack imaging: ROM versus RTM.
double reflector_distance(const PhantomSpec &spec, const std::array<double, 2> &y)
{
  double best = std::numeric_limits<double>::infinity();
  for (const Region &r : spec.regions)
  {
    best = std::min(best, r.distance(y[0] / spec.lambda_c, y[1] / spec.lambda_c) * spec.lambda_c);
  }
  return best;
}

Outcome criterion7()
{
  // tau = 0.45 pi / omega_c so that n tau reaches the zone 2 lambda_c below the crack.
  const LebedevGrid grid = desk_grid();
  const PulseSpec pulse = make_pulse(kLambdaC, 1.0);
  const ArrayGeometry array = make_array(grid, kM, 8.0, kDepth);
  const double tau = tau_of(0.45);
  const Index steps = 8;
  const PhantomSpec spec = crack_spec();
  const DiscreteOperator truth = assemble_operator(build_medium(spec, grid, 1.0));
  const DiscreteOperator bg = assemble_operator(MediumField(grid, 1.0));
  const double lmax = estimate_lambda_max(truth);
  const double lmax_bg = estimate_lambda_max(bg);
  const ImagingGrid im = make_imaging_grid(grid, kDepth + kLambdaC, kDepth + static_cast<double>(kN) * tau, 2.0,
                                           static_cast<double>(kN2 - 1) - 2.0, 1.0);

  const SnapshotRun run = run_snapshots(truth, array, pulse, tau, kN, steps, lmax);
  const Rom rom = make_rom(run.data);
  const ReferenceBasis basis = reference_basis(bg, array, pulse, tau, kN, steps, rom.regularization, lmax_bg);
  const ImageField rom_img = rom_image(basis, rom.R, 2, 2, im);

  const DataSeries W = simulate_response(truth, array, pulse, 1.0, tau, kN, steps, lmax).raw.subsample(tau, kN);
  const GreenFields greens = compute_greens(bg, array, im, tau, 2 * kN, steps, 1.5 * omega_c(), lmax_bg);
  const ImageField rtm_img = rtm_image(W.D, greens, 2, 2);

  const double r_rom = peak_to_artifact(rom_img, spec);
  const double r_rtm = peak_to_artifact(rtm_img, spec);
  const auto peak = image_peak(range_derivative(rom_img));
  const double dist = reflector_distance(spec, peak);

  // Diagnostics: RTM of the scattered response and the ideal image.
  const DataSeries W0 = simulate_response(bg, array, pulse, 1.0, tau, kN, steps, lmax_bg).raw.subsample(tau, kN);
  std::vector<Matrix> scattered;
  for (Index k = 0; k < W.size(); k++)
  {
    scattered.push_back(W[k] - W0[k]);
  }
  const ImageField rtm_s = rtm_image(scattered, greens, 2, 2);
  const ReferenceBasis ideal_basis = reference_basis(truth, array, pulse, tau, kN, steps, rom.regularization, lmax);
  const ImageField ideal = rom_image(ideal_basis, rom.R, 2, 2, im, ImageProvenance::Ideal);
  const auto ideal_peak = image_peak(range_derivative(ideal));

  const bool pass = r_rom > r_rtm && dist <= kLambdaC;
  return {pass, "peak/artifact rom " + fixed(r_rom) + " vs rtm " + fixed(r_rtm) + "; rom range-derivative peak (" +
                    fixed(peak[0], 0) + ", " + fixed(peak[1], 0) + ") at " + fixed(dist, 1) +
                    " from the crack (tol 16); [scattered-W rtm ratio " + fixed(peak_to_artifact(rtm_s, spec)) +
                    ", ideal range-derivative peak " + fixed(reflector_distance(spec, ideal_peak), 1) +
                    " from the crack, ROM order " + std::to_string(rom.order()) + "]"};
}

// 8. Gauss-Newton on a weak isotropic inclusion.
struct InversionScene
{
  LebedevGrid grid = desk_grid();
  ForwardContext ctx{grid, make_array(grid, kM, 8.0, kDepth), make_pulse(kLambdaC, 1.0), tau_of(0.45), 8};
  Parametrization param = make_parametrization(grid, kLambdaC, 1.0, 28.0, 36.0, 19.5, 29.5);
  RomOptions rom{RomOptions::Mode::Boost, 1e-6};
};

Outcome criterion8()
{
  const InversionScene s;
  const Index N = s.param.size();
  // Inclusion inside the search space: c = 1.1 at the central lattice point.
  Vector alpha_true = Vector::Zero(s.param.unknowns());
  const Index center = N / 2;
  alpha_true(center) = 1.0 / 1.1 - 1.0;
  alpha_true(N + center) = 1.0 / 1.1 - 1.0;
  const MediumField truth = medium_from_alpha(s.param, alpha_true, s.grid);
  const DataSeries data = forward_data(s.ctx, truth, kN);

  InversionConfig config;
  config.rom = s.rom;
  // The damping rule keeps nu near 70 here, so the decrease is gradual: 1.0e-2 at step 9, 9.2e-3 at step 10.
  config.max_iterations = 12;
  const InversionResult result = invert(data, config, s.param, s.ctx);
  const double initial = result.log.front().objective;
  const double final_value = result.log.back().objective;
  const auto c0 = s.param.centers[static_cast<std::size_t>(center)];
  const Index node = s.grid.nearest_a(c0[0], c0[1]);
  const double c_true = truth.c11()(node);
  const double c_est = result.medium.c11()(node);
  const double value_error = std::abs(c_est - c_true) / c_true;
  const double contrast_error = std::abs(c_est - c_true) / std::abs(c_true - 1.0);

  // Homogeneous truth.
  InversionConfig flat_config = config;
  flat_config.max_iterations = 1;
  const InversionResult flat = invert(forward_data(s.ctx, MediumField(s.grid, 1.0), kN), flat_config, s.param, s.ctx);
  const double flat_step = flat.alpha.norm();

  // Gradient 2 J^T r against central differences of the objective.
  const RomObjective objective(s.ctx, s.param, make_rom(data, s.rom));
  const Vector a0 = Vector::Zero(s.param.unknowns());
  const Evaluation e0 = objective(a0);
  const Matrix J = jacobian_fd([&](const Vector &a) { return objective(a).residual; }, a0, config.h, &e0.residual);
  const Vector grad = 2.0 * J.transpose() * e0.residual;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  const double eps = 1e-3;
  for (int k = 0; k < 5; k++)
  {
    Vector d(s.param.unknowns());
    for (Index i = 0; i < d.size(); i++)
    {
      d(i) = normal(rng);
    }
    d.normalize();
    const double fd = (objective(a0 + eps * d).value - objective(a0 - eps * d).value) / (2.0 * eps);
    worst = std::max(worst, std::abs(fd - grad.dot(d)) / std::abs(fd));
  }

  const bool pass = final_value <= 1e-2 * initial && value_error <= 0.3 && flat_step <= 1e-8 && worst <= 0.01;
  return {pass, "objective " + fmt(initial) + " -> " + fmt(final_value) + " (ratio " + fmt(final_value / initial) +
                    ", tol 1e-2) in " + std::to_string(result.log.size() - 1) + " steps; c11 at center " +
                    fixed(c_est, 4) + " vs " + fixed(c_true, 4) + " (error " + fixed(100 * value_error, 1) +
                    "%, tol 30%; error relative to the contrast " + fixed(100 * contrast_error, 1) + "%); homogeneous step " + fmt(flat_step) + " (tol 1e-8); gradient mismatch " +
                    fmt(worst) + " (tol 1e-2)"};
}

// 9. Bottom edge of a rectangle imaged with c_o I and with the inverted medium.
double bottom_edge(const ImageField &drange, double x1_from, double x2_lo, double x2_hi)
{
  double sum = 0.0;
  int count = 0;
  for (Index b = 0; b < drange.grid.cols; b++)
  {
    const double x2 = drange.grid.point(0, b)[1];
    if (x2 < x2_lo || x2 > x2_hi)
    {
      continue;
    }
    double best = -1.0, where = 0.0;
    for (Index a = 0; a < drange.grid.rows; a++)
    {
      const double x1 = drange.grid.point(a, b)[0];
      if (x1 >= x1_from && std::abs(drange(a, b)) > best)
      {
        best = std::abs(drange(a, b));
        where = x1;
      }
    }
    sum += where;
    count++;
  }
  return sum / count;
}

Outcome criterion9()
{
  const LebedevGrid grid = desk_grid();
  const double tau = tau_of(0.45);
  // The fastest speed in the rectangle (1.5) needs 9 steps per tau; 10 keeps a margin.
  const Index steps = 10;
  const ForwardContext ctx{grid, make_array(grid, kM, 8.0, kDepth), make_pulse(kLambdaC, 1.0), tau, steps};
  // Rectangle 28..44 in depth, 18..31 across.
  const double top = 28.0, bottom = 44.0, left = 18.0, right = 31.0;
  const PhantomSpec spec = phantoms::rectangle_inclusion(kLambdaC, top / kLambdaC, bottom / kLambdaC,
                                                         left / kLambdaC, right / kLambdaC, SpeedTensor{1.35, 1.5, 0.05});
  const MediumField truth = build_medium(spec, grid, 1.0);
  const DataSeries data = forward_data(ctx, truth, kN);
  const Parametrization param = make_parametrization(grid, kLambdaC, 1.0, top, bottom, 19.5, 29.5);
  InversionConfig config;
  config.rom = {RomOptions::Mode::Boost, 1e-6};
  config.max_iterations = 4;
  const InversionResult inv = invert(data, config, param, ctx);

  const Rom rom = make_rom(data, config.rom);
  const ImagingGrid im = make_imaging_grid(grid, kDepth + kLambdaC, kDepth + static_cast<double>(kN) * tau, 2.0,
                                           static_cast<double>(kN2 - 1) - 2.0, 1.0);
  auto edge = [&](const MediumField &reference) {
    const ReferenceBasis basis =
        reference_basis(assemble_operator(reference), ctx.array, ctx.pulse, tau, kN, steps, rom.regularization);
    return bottom_edge(range_derivative(rom_image(basis, rom.R, 2, 2, im)), 0.5 * (top + bottom), left, right);
  };
  const double with_inverted = edge(inv.medium);
  const double with_background = edge(MediumField(grid, 1.0));
  const double off_inv = std::abs(with_inverted - bottom);
  const double off_bg = std::abs(with_background - bottom);
  const bool pass = off_inv <= 2.0 * kLambdaC && off_inv < off_bg;
  return {pass, "bottom edge at " + fixed(bottom, 1) + ": inverted kinematics " + fixed(with_inverted, 1) +
                    " (offset " + fixed(off_inv, 1) + ", tol 32), c_o I " + fixed(with_background, 1) + " (offset " +
                    fixed(off_bg, 1) + "); inversion objective " + fmt(inv.log.front().objective) + " -> " +
                    fmt(inv.log.back().objective)};
}

// 10. Linear-algebra kernels on random matrices.
Outcome criterion10()
{
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal;
  auto random = [&](Index r, Index c) {
    Matrix G(r, c);
    for (Index j = 0; j < c; j++)
    {
      for (Index i = 0; i < r; i++)
      {
        G(i, j) = normal(rng);
      }
    }
    return G;
  };
  double chol = 0.0, lanczos = 0.0, root = 0.0;
  for (int trial = 0; trial < 5; trial++)
  {
    const Index b = 2 * kM;
    const Matrix G = random(kN * b, kN * b);
    const Matrix M = G * G.transpose() + Matrix::Identity(kN * b, kN * b);
    const BlockTriangular R = block_cholesky(BlockMatrix(M, b));
    chol = std::max(chol, relative(R.data().transpose() * R.data(), M));

    const Matrix H = random(60, 60);
    Matrix Pi = 0.5 * (H + H.transpose());
    Pi /= Pi.norm();
    const Matrix B0 = detail::positive_qr(random(60, 6)).first;
    const LanczosResult L = block_lanczos(Pi, 6, B0);
    Eigen::SelfAdjointEigenSolver<Matrix> a(Pi, Eigen::EigenvaluesOnly), t(L.T.data(), Eigen::EigenvaluesOnly);
    lanczos = std::max(lanczos, (a.eigenvalues() - t.eigenvalues()).cwiseAbs().maxCoeff());

    const Matrix K = random(4, 4);
    const Matrix S = K * K.transpose() + 0.1 * Matrix::Identity(4, 4);
    const Matrix Q = spd_sqrt(S);
    root = std::max(root, relative(Q * Q, S));
  }
  const bool pass = chol <= 1e-11 && lanczos <= 1e-9 && root <= 1e-12;
  return {pass, "R^T R = M " + fmt(chol) + " (tol 1e-11, 200x200 in 10x10 blocks); Lanczos eigenvalues " +
                    fmt(lanczos) + " (tol 1e-9); spd_sqrt " + fmt(root) + " (tol 1e-12)"};
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Acceptance criteria at desk scale"};
  std::vector<int> only;
  std::string scratch = (std::filesystem::temp_directory_path() / "emrom_acceptance").string();
  app.add_option("--only", only, "run only these criteria (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--scratch", scratch, "directory for pipeline artifacts");
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(scratch);

  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}
                                              : std::set<int>(only.begin(), only.end());
  const std::function<Outcome()> criteria[] = {criterion1,
                                               criterion2,
                                               criterion3,
                                               [&] { return criterion4(scratch); },
                                               criterion5,
                                               criterion6,
                                               criterion7,
                                               criterion8,
                                               criterion9,
                                               criterion10};
  int failures = 0;
  for (const int k : selected)
  {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try
    {
      o = criteria[k - 1]();
    }
    catch (const std::exception &e)
    {
      o = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << std::setw(2) << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fixed(seconds, 0) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
