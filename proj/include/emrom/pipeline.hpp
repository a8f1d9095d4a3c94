// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

#include <json.hpp>

#include "emrom/config.hpp"
#include "emrom/imaging.hpp"
#include "emrom/internal_wave.hpp"
#include "emrom/inversion.hpp"
#include "emrom/verify.hpp"

namespace emrom
{

enum class Command
{
  Simulate,
  Rom,
  Image,
  Invert,
  Verify
};

inline Command parse_command(const std::string &name)
{
  if (name == "simulate")
  {
    return Command::Simulate;
  }
  if (name == "rom")
  {
    return Command::Rom;
  }
  if (name == "image")
  {
    return Command::Image;
  }
  if (name == "invert")
  {
    return Command::Invert;
  }
  if (name == "verify")
  {
    return Command::Verify;
  }
  throw Error(ErrorKind::ValidationError, "unknown command '" + name + "'");
}

// File names inside io.output_dir.
namespace artifacts
{
inline constexpr const char *data = "data.romd";
inline constexpr const char *raw_response = "raw_response.romd";
inline constexpr const char *rom = "rom.romr";
inline constexpr const char *rom_report = "rom_report.txt";
inline constexpr const char *true_medium = "medium_true.csv";
inline constexpr const char *estimate = "medium_estimate.csv";
inline constexpr const char *inversion_log = "inversion_log.jsonl";
}  // namespace artifacts

namespace detail
{

inline std::filesystem::path output_dir(const ExperimentConfig &c)
{
  const std::filesystem::path dir(c.io.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
  {
    throw Error(ErrorKind::IOError, "cannot create " + dir.string() + ": " + ec.message());
  }
  return dir;
}

inline std::string require_artifact(const std::filesystem::path &dir, const char *name, const char *producer)
{
  const std::filesystem::path p = dir / name;
  if (!std::filesystem::exists(p))
  {
    throw Error(ErrorKind::MissingArtifact, p.string() + " not found; run `" + producer + "` first");
  }
  return p.string();
}

inline ArrayGeometry make_config_array(const ExperimentConfig &c, const LebedevGrid &grid)
{
  return make_array(grid, c.array.m, c.array.separation, c.array.depth);
}

inline MediumField true_medium(const ExperimentConfig &c, const LebedevGrid &grid)
{
  return build_medium(c.phantom_spec(), grid, c.pulse.c_o);
}

// Family-A raster of one tensor component as a PGM.
inline void write_component_pgm(const std::string &path, const MediumField &medium, int component)
{
  const LebedevGrid &g = medium.grid();
  ImageField img{ImagingGrid{0, 0, g.n1(), g.n2(), 1, g.ell()}, Vector(g.n1() * g.n2()), 1, 1,
                 ImageProvenance::Ideal, "raw"};
  for (Index k = 0; k < g.num_a(); k++)
  {
    const SpeedTensor t = medium.tensor(k);
    img.values(k) = component == 0 ? t.c11 : component == 1 ? t.c22 : t.c12;
  }
  write_image_pgm(path, img);
}

inline void write_report(const std::string &path, const Rom &rom, const InterpolationReport &r)
{
  std::ofstream out(path);
  if (!out)
  {
    throw Error(ErrorKind::IOError, "cannot open " + path);
  }
  out << std::setprecision(6) << std::scientific;
  out << "m " << rom.m << "\nn " << rom.n << "\ntau " << rom.tau << "\norder " << rom.order()
      << "\nregularization " << to_string(rom.regularization.method) << "\nalpha " << rom.regularization.alpha
      << "\nthreshold " << rom.regularization.threshold << "\nmax_residual " << r.max_residual << "\nworst_j "
      << r.worst_j << "\nlast_residual " << r.last_residual << "\noff_tridiagonal " << r.off_tridiagonal
      << "\nspectral_radius " << r.spectral_radius << '\n';
}

inline void simulate(const ExperimentConfig &c, std::ostream &log)
{
  const auto dir = output_dir(c);
  const LebedevGrid grid = c.make_grid();
  const MediumField medium = true_medium(c, grid);
  const ArrayGeometry array = make_config_array(c, grid);
  const DiscreteOperator op = assemble_operator(medium);
  const double lmax = estimate_lambda_max(op);
  const PulseSpec pulse = c.pulse_spec();
  const SnapshotRun run = run_snapshots(op, array, pulse, c.tau(), c.rom.n, c.rom.steps_per_tau, lmax);
  const DataSeries data = add_noise(run.data, c.rom.noise, c.io.seed);
  write_data((dir / artifacts::data).string(), data);
  medium.write_csv((dir / artifacts::true_medium).string());
  log << "simulate: " << grid.n1() << "x" << grid.n2() << " grid, m = " << array.m() << ", n = " << c.rom.n
      << ", tau = " << c.tau() << ", dt = " << run.dt << ", noise = " << c.rom.noise << '\n';
  if (c.rom.raw_response)
  {
    const ForcedResponse W = simulate_response(op, array, pulse, c.pulse.c_o, c.tau(), c.rom.n, c.rom.steps_per_tau, lmax);
    write_data((dir / artifacts::raw_response).string(), W.raw.subsample(c.tau(), c.rom.n));
    log << "simulate: raw response recorded\n";
  }
}

inline Rom build(const ExperimentConfig &c, const DataSeries &data)
{
  return make_rom(data, c.rom.options);
}

inline void rom(const ExperimentConfig &c, std::ostream &log)
{
  const auto dir = output_dir(c);
  const DataSeries data = read_data(require_artifact(dir, artifacts::data, "simulate"));
  const Rom r = build(c, data);
  write_rom((dir / artifacts::rom).string(), r);
  const InterpolationReport report = verify_interpolation(r, data);
  write_report((dir / artifacts::rom_report).string(), r, report);
  log << "rom: order " << r.order() << " (" << to_string(r.regularization.method) << "), max residual "
      << std::scientific << std::setprecision(3) << report.max_residual << ", off-tridiagonal "
      << report.off_tridiagonal << ", spectral radius " << report.spectral_radius << std::defaultfloat << '\n';
}

inline void image(const ExperimentConfig &c, std::ostream &log)
{
  const auto dir = output_dir(c);
  const DataSeries data = read_data(require_artifact(dir, artifacts::data, "simulate"));
  std::vector<Matrix> W;
  if (c.imaging.rtm)
  {
    const DataSeries raw = read_data(require_artifact(dir, artifacts::raw_response, "simulate with raw_response"));
    W = raw.D;
  }
  const LebedevGrid grid = c.make_grid();
  const ArrayGeometry array = make_config_array(c, grid);
  const PulseSpec pulse = c.pulse_spec();
  const MediumField reference = c.imaging.truth_reference ? true_medium(c, grid) : MediumField(grid, c.pulse.c_o);
  const DiscreteOperator op_ref = assemble_operator(reference);
  const double lmax = estimate_lambda_max(op_ref);
  const ImagingGrid im = c.imaging_grid();

  const Rom r = build(c, data);
  const ReferenceBasis basis =
      reference_basis(op_ref, array, pulse, c.tau(), data.n, c.rom.steps_per_tau, r.regularization, lmax);
  auto emit = [&](const ImageField &img) {
    write_image_csv((dir / image_filename("image", img, "csv")).string(), img);
    write_image_pgm((dir / image_filename("image", img, "pgm")).string(), img);
    const auto peak = image_peak(img);
    log << "image: " << image_filename("image", img, "csv") << " peak at (" << peak[0] << ", " << peak[1] << ")\n";
  };
  for (const auto &pp : c.imaging.polarizations)
  {
    const ImageField img = rom_image(basis, r.R, pp[1], pp[0], im);
    emit(img);
    emit(range_derivative(img));
  }
  if (c.imaging.rtm)
  {
    if (c.imaging.rtm_subtract_reference)
    {
      const ForcedResponse W0 =
          simulate_response(op_ref, array, pulse, c.pulse.c_o, c.tau(), data.n, c.rom.steps_per_tau, lmax);
      const DataSeries W0s = W0.raw.subsample(c.tau(), data.n);
      for (std::size_t k = 0; k < W.size(); k++)
      {
        W[k] -= W0s.D[k];
      }
    }
    const GreenFields greens = compute_greens(op_ref, array, im, c.tau(), static_cast<Index>(W.size()),
                                              c.rom.steps_per_tau, c.imaging.green_sigma * c.omega_c(), lmax);
    for (const auto &pp : c.imaging.polarizations)
    {
      const ImageField img = rtm_image(W, greens, pp[1], pp[0]);
      emit(img);
      emit(range_derivative(img));
    }
  }
}

inline void invert(const ExperimentConfig &c, std::ostream &log)
{
  const auto dir = output_dir(c);
  const DataSeries data = read_data(require_artifact(dir, artifacts::data, "simulate"));
  const LebedevGrid grid = c.make_grid();
  const ForwardContext ctx{grid, make_config_array(c, grid), c.pulse_spec(), c.tau(), c.rom.steps_per_tau};
  InversionConfig config = c.inversion.config;
  config.rom = c.rom.options;
  const Parametrization param = c.parametrization();
  log << "invert: " << param.size() << " basis functions, " << param.unknowns() << " unknowns\n";
  const InversionResult result = emrom::invert(data, config, param, ctx);

  result.medium.write_csv((dir / artifacts::estimate).string());
  const char *names[] = {"c11", "c22", "c12"};
  for (int comp = 0; comp < 3; comp++)
  {
    write_component_pgm((dir / ("medium_estimate_" + std::string(names[comp]) + ".pgm")).string(), result.medium,
                        comp);
  }
  std::ofstream jsonl(dir / artifacts::inversion_log);
  if (!jsonl)
  {
    throw Error(ErrorKind::IOError, "cannot open " + (dir / artifacts::inversion_log).string());
  }
  for (const IterationRecord &rec : result.log)
  {
    const nlohmann::json row{{"stage_order", rec.stage_order}, {"iteration", rec.iteration},
                             {"objective", rec.objective},     {"step_norm", rec.step_norm},
                             {"nu", rec.nu},                   {"halvings", rec.halvings}};
    jsonl << row.dump() << '\n';
    log << "invert: n' = " << rec.stage_order << " it " << rec.iteration << " objective " << std::scientific
        << std::setprecision(4) << rec.objective << " step " << rec.step_norm << std::defaultfloat << '\n';
  }
  const nlohmann::json summary{{"converged", result.converged},
                               {"status", result.status},
                               {"alpha", std::vector<double>(result.alpha.data(), result.alpha.data() + result.alpha.size())}};
  jsonl << summary.dump() << '\n';
  log << "invert: " << result.status << '\n';
}

}  // namespace detail

// Runs one subcommand; returns the process exit status. Module errors propagate as Error.
inline int run_pipeline(Command cmd, const ExperimentConfig &config, std::ostream &log)
{
  switch (cmd)
  {
    case Command::Simulate:
      detail::simulate(config, log);
      return 0;
    case Command::Rom:
      detail::rom(config, log);
      return 0;
    case Command::Image:
      detail::image(config, log);
      return 0;
    case Command::Invert:
      detail::invert(config, log);
      return 0;
    case Command::Verify:
    {
      const auto dir = detail::output_dir(config);
      return print_check_table(log, run_invariant_suite(config.io.seed, dir)) ? 0 : 1;
    }
  }
  return 2;
}

}  // namespace emrom
