// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "emrom/imaging.hpp"
#include "emrom/inversion.hpp"
#include "emrom/medium.hpp"
#include "emrom/pulse.hpp"
#include "emrom/rom.hpp"

namespace emrom
{

// Experiment description. Lengths are in grid units (ell = 1 by default), speeds relative to c_o.
//
// Grammar: one `key = value` per line inside `[section]` headers; `#` starts a comment.
// Lists are comma separated. Unknown sections and keys are errors.
struct ExperimentConfig
{
  struct Grid
  {
    Index n1 = 100;
    Index n2 = 50;
    double ell = 1.0;
  } grid;

  struct Pulse
  {
    double lambda_c = 16.0;
    double c_o = 1.0;
    std::optional<double> omega_o; // default 0.6 omega_c
    std::optional<double> omega_b; // default: 25 dB down at omega_c
    double amplitude = 1.0;
  } pulse;

  struct Array
  {
    Index m = 5;
    double separation = 8.0;
    double depth = 8.0;
  } array;

  struct Rom
  {
    Index n = 20;
    std::optional<double> tau; // default 0.3 pi / omega_c
    Index steps_per_tau = 8;
    RomOptions options;
    double noise = 0.0;
    bool raw_response = false;
  } rom;

  struct Phantom
  {
    PhantomVariant variant = PhantomVariant::Homogeneous;
    double crack_depth = 2.5; // lambda_c
    double top = 1.5;         // lambda_c, anisotropic inclusions
    double x1_top = 1.5, x1_bottom = 2.5, x2_left = 1.0, x2_right = 2.0;
    SpeedTensor speed{1.2, 0.9, 0.05};
    double boundary_layer = 4.0;
    double exclusion_depth = 12.0;
  } phantom;

  struct Imaging
  {
    std::optional<double> x1_min, x1_max, x2_min, x2_max;
    double spacing = 1.0;
    std::vector<std::array<int, 2>> polarizations{{2, 2}}; // (p', p)
    bool truth_reference = false;
    bool rtm = false;
    bool rtm_subtract_reference = false; // migrate W - W(reference) instead of the raw W
    double green_sigma = 1.5; // times omega_c
  } imaging;

  struct Inversion
  {
    InversionConfig config;
    std::optional<double> x1_min, x1_max, x2_min, x2_max;
  } inversion;

  struct Io
  {
    std::string output_dir = ".";
    std::uint64_t seed = 1;
  } io;

  PulseSpec pulse_spec() const
  {
    PulseSpec p = make_pulse(pulse.lambda_c, pulse.c_o);
    if (pulse.omega_o)
    {
      p.omega_o = *pulse.omega_o;
    }
    if (pulse.omega_b)
    {
      p.omega_b = *pulse.omega_b;
    }
    p.amplitude = pulse.amplitude;
    return p;
  }

  double omega_c() const { return 2.0 * std::numbers::pi * pulse.c_o / pulse.lambda_c; }
  double tau() const { return rom.tau ? *rom.tau : 0.3 * std::numbers::pi / omega_c(); }
  double reach() const { return static_cast<double>(rom.n) * pulse.c_o * tau(); }

  LebedevGrid make_grid() const { return LebedevGrid(grid.n1, grid.n2, grid.ell); }

  PhantomSpec phantom_spec() const
  {
    const double width = static_cast<double>(grid.n2 - 1) * grid.ell / pulse.lambda_c;
    PhantomSpec spec;
    switch (phantom.variant)
    {
      case PhantomVariant::Homogeneous:
      case PhantomVariant::CustomRaster:
        spec = phantoms::homogeneous(pulse.lambda_c);
        break;
      case PhantomVariant::Crack:
        spec = phantoms::crack(pulse.lambda_c, width, phantom.crack_depth);
        break;
      case PhantomVariant::MultiCrack:
        spec = phantoms::multi_crack(pulse.lambda_c, width, phantom.crack_depth);
        break;
      case PhantomVariant::AnisoInclusions:
        spec = phantoms::aniso_inclusions(pulse.lambda_c, width, phantom.top);
        break;
      case PhantomVariant::RectangleInclusion:
        spec = phantoms::rectangle_inclusion(pulse.lambda_c, phantom.x1_top, phantom.x1_bottom, phantom.x2_left,
                                             phantom.x2_right, phantom.speed);
        break;
    }
    spec.boundary_layer = phantom.boundary_layer;
    spec.exclusion_depth = phantom.exclusion_depth;
    return spec;
  }

  // Imaging box; by default from the exclusion depth down to the data reach, 2 cells off the side walls.
  ImagingGrid imaging_grid() const
  {
    const LebedevGrid g = make_grid();
    const auto e = g.extent();
    const double x1_hi = std::min(array.depth + reach(), e[0] - 2.0 * grid.ell);
    return make_imaging_grid(g, imaging.x1_min.value_or(phantom.exclusion_depth), imaging.x1_max.value_or(x1_hi),
                             imaging.x2_min.value_or(2.0 * grid.ell), imaging.x2_max.value_or(e[1] - 2.0 * grid.ell),
                             imaging.spacing);
  }

  Parametrization parametrization() const
  {
    const LebedevGrid g = make_grid();
    const auto e = g.extent();
    const double x1_hi = std::min(array.depth + reach(), e[0] - phantom.boundary_layer);
    return make_parametrization(g, pulse.lambda_c, pulse.c_o, inversion.x1_min.value_or(phantom.exclusion_depth),
                                inversion.x1_max.value_or(x1_hi), inversion.x2_min.value_or(phantom.boundary_layer),
                                inversion.x2_max.value_or(e[1] - phantom.boundary_layer));
  }

  // Throws ValidationError naming the first violated invariant.
  void validate() const
  {
    auto fail = [](const std::string &msg) { throw Error(ErrorKind::ValidationError, msg); };
    if (grid.n1 < 8 || grid.n2 < 8 || !(grid.ell > 0.0))
    {
      fail("grid needs n1, n2 >= 8 and ell > 0");
    }
    if (!(pulse.lambda_c > 0.0) || !(pulse.c_o > 0.0))
    {
      fail("lambda_c and c_o must be positive");
    }
    if (array.m < 1 || rom.n < 1 || rom.steps_per_tau < 1)
    {
      fail("m, n and steps_per_tau must be positive");
    }
    if (array.m > 1 && array.separation < grid.ell)
    {
      fail("antenna separation " + std::to_string(array.separation) + " is below the grid spacing");
    }
    const PulseSpec p = pulse_spec();
    const double nyquist = std::numbers::pi / p.omega_o;
    if (!(tau() > 0.0) || tau() > nyquist * (1.0 + 1e-12))
    {
      fail("tau = " + std::to_string(tau()) + " violates the Nyquist bound tau <= pi/omega_o = " +
           std::to_string(nyquist));
    }
    const double depth = imaging_grid().point(imaging_grid().rows - 1, 0)[0] - array.depth;
    if (reach() < depth - 1e-9)
    {
      fail("n c_o tau = " + std::to_string(reach()) + " is shorter than the imaging depth L = " +
           std::to_string(depth) + " below the array; need n c_o tau >= L");
    }
    if (rom.noise < 0.0)
    {
      fail("noise level must be non-negative");
    }
    if (!(imaging.green_sigma > 0.0))
    {
      fail("green_sigma must be positive");
    }
    inversion.config.validate(rom.n);
  }
};

namespace detail
{

inline std::string trim(const std::string &s)
{
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos)
  {
    return "";
  }
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string &s)
{
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
  {
    item = trim(item);
    if (!item.empty())
    {
      out.push_back(item);
    }
  }
  return out;
}

class ValueReader
{
public:
  ValueReader(std::string value, int line) : value_(std::move(value)), line_(line) {}

  double real() const
  {
    try
    {
      std::size_t used = 0;
      const double v = std::stod(value_, &used);
      if (used != value_.size() || !std::isfinite(v))
      {
        throw std::invalid_argument(value_);
      }
      return v;
    }
    catch (const std::exception &)
    {
      throw error("expected a number, got '" + value_ + "'");
    }
  }

  Index integer() const
  {
    const double v = real();
    if (v != std::floor(v) || std::abs(v) > 1e15)
    {
      throw error("expected an integer, got '" + value_ + "'");
    }
    return static_cast<Index>(v);
  }

  bool boolean() const
  {
    if (value_ == "true" || value_ == "yes" || value_ == "1")
    {
      return true;
    }
    if (value_ == "false" || value_ == "no" || value_ == "0")
    {
      return false;
    }
    throw error("expected true or false, got '" + value_ + "'");
  }

  const std::string &text() const { return value_; }

  Error error(const std::string &msg) const
  {
    return Error(ErrorKind::ParseError, "line " + std::to_string(line_) + ": " + msg);
  }

private:
  std::string value_;
  int line_;
};

inline PhantomVariant parse_variant(const ValueReader &v)
{
  static const std::map<std::string, PhantomVariant> names{{"homogeneous", PhantomVariant::Homogeneous},
                                                           {"crack", PhantomVariant::Crack},
                                                           {"multi_crack", PhantomVariant::MultiCrack},
                                                           {"aniso_inclusions", PhantomVariant::AnisoInclusions},
                                                           {"rectangle_inclusion", PhantomVariant::RectangleInclusion}};
  const auto it = names.find(v.text());
  if (it == names.end())
  {
    throw v.error("unknown phantom variant '" + v.text() + "'");
  }
  return it->second;
}

inline RomOptions::Mode parse_mode(const ValueReader &v)
{
  static const std::map<std::string, RomOptions::Mode> names{{"none", RomOptions::Mode::None},
                                                             {"boost", RomOptions::Mode::Boost},
                                                             {"spectral", RomOptions::Mode::Spectral},
                                                             {"auto", RomOptions::Mode::Auto}};
  const auto it = names.find(v.text());
  if (it == names.end())
  {
    throw v.error("unknown regularization '" + v.text() + "'");
  }
  return it->second;
}

inline std::vector<std::array<int, 2>> parse_polarizations(const ValueReader &v)
{
  std::vector<std::array<int, 2>> out;
  for (const std::string &item : split_list(v.text()))
  {
    if (item.size() != 2 || (item[0] != '1' && item[0] != '2') || (item[1] != '1' && item[1] != '2'))
    {
      throw v.error("polarization pairs are written 11, 12, 21 or 22");
    }
    out.push_back({item[0] - '0', item[1] - '0'});
  }
  if (out.empty())
  {
    throw v.error("empty polarization list");
  }
  return out;
}

inline std::vector<Index> parse_schedule(const ValueReader &v)
{
  std::vector<Index> out;
  for (const std::string &item : split_list(v.text()))
  {
    out.push_back(ValueReader(item, 0).integer());
  }
  return out;
}

}  // namespace detail

// Parses and validates. ParseError carries the line number.
inline ExperimentConfig parse_config(const std::string &text)
{
  using detail::ValueReader;
  ExperimentConfig c;
  using Setter = std::function<void(const ValueReader &)>;
  const std::map<std::string, std::map<std::string, Setter>> keys{
      {"grid",
       {{"n1", [&](const ValueReader &v) { c.grid.n1 = v.integer(); }},
        {"n2", [&](const ValueReader &v) { c.grid.n2 = v.integer(); }},
        {"ell", [&](const ValueReader &v) { c.grid.ell = v.real(); }}}},
      {"pulse",
       {{"lambda_c", [&](const ValueReader &v) { c.pulse.lambda_c = v.real(); }},
        {"c_o", [&](const ValueReader &v) { c.pulse.c_o = v.real(); }},
        {"omega_o", [&](const ValueReader &v) { c.pulse.omega_o = v.real(); }},
        {"omega_b", [&](const ValueReader &v) { c.pulse.omega_b = v.real(); }},
        {"amplitude", [&](const ValueReader &v) { c.pulse.amplitude = v.real(); }}}},
      {"array",
       {{"m", [&](const ValueReader &v) { c.array.m = v.integer(); }},
        {"separation", [&](const ValueReader &v) { c.array.separation = v.real(); }},
        {"depth", [&](const ValueReader &v) { c.array.depth = v.real(); }}}},
      {"rom",
       {{"n", [&](const ValueReader &v) { c.rom.n = v.integer(); }},
        {"tau", [&](const ValueReader &v) { c.rom.tau = v.real(); }},
        {"steps_per_tau", [&](const ValueReader &v) { c.rom.steps_per_tau = v.integer(); }},
        {"regularization", [&](const ValueReader &v) { c.rom.options.mode = detail::parse_mode(v); }},
        {"alpha", [&](const ValueReader &v) { c.rom.options.alpha = v.real(); }},
        {"order", [&](const ValueReader &v) { c.rom.options.order = v.integer(); }},
        {"threshold", [&](const ValueReader &v) { c.rom.options.relative_threshold = v.real(); }},
        {"noise", [&](const ValueReader &v) { c.rom.noise = v.real(); }},
        {"raw_response", [&](const ValueReader &v) { c.rom.raw_response = v.boolean(); }}}},
      {"phantom",
       {{"variant", [&](const ValueReader &v) { c.phantom.variant = detail::parse_variant(v); }},
        {"crack_depth", [&](const ValueReader &v) { c.phantom.crack_depth = v.real(); }},
        {"top", [&](const ValueReader &v) { c.phantom.top = v.real(); }},
        {"x1_top", [&](const ValueReader &v) { c.phantom.x1_top = v.real(); }},
        {"x1_bottom", [&](const ValueReader &v) { c.phantom.x1_bottom = v.real(); }},
        {"x2_left", [&](const ValueReader &v) { c.phantom.x2_left = v.real(); }},
        {"x2_right", [&](const ValueReader &v) { c.phantom.x2_right = v.real(); }},
        {"c11", [&](const ValueReader &v) { c.phantom.speed.c11 = v.real(); }},
        {"c22", [&](const ValueReader &v) { c.phantom.speed.c22 = v.real(); }},
        {"c12", [&](const ValueReader &v) { c.phantom.speed.c12 = v.real(); }},
        {"boundary_layer", [&](const ValueReader &v) { c.phantom.boundary_layer = v.real(); }},
        {"exclusion_depth", [&](const ValueReader &v) { c.phantom.exclusion_depth = v.real(); }}}},
      {"imaging",
       {{"x1_min", [&](const ValueReader &v) { c.imaging.x1_min = v.real(); }},
        {"x1_max", [&](const ValueReader &v) { c.imaging.x1_max = v.real(); }},
        {"x2_min", [&](const ValueReader &v) { c.imaging.x2_min = v.real(); }},
        {"x2_max", [&](const ValueReader &v) { c.imaging.x2_max = v.real(); }},
        {"spacing", [&](const ValueReader &v) { c.imaging.spacing = v.real(); }},
        {"polarizations", [&](const ValueReader &v) { c.imaging.polarizations = detail::parse_polarizations(v); }},
        {"reference",
         [&](const ValueReader &v) {
           if (v.text() != "background" && v.text() != "truth")
           {
             throw v.error("reference is background or truth");
           }
           c.imaging.truth_reference = v.text() == "truth";
         }},
        {"rtm", [&](const ValueReader &v) { c.imaging.rtm = v.boolean(); }},
        {"rtm_subtract_reference", [&](const ValueReader &v) { c.imaging.rtm_subtract_reference = v.boolean(); }},
        {"green_sigma", [&](const ValueReader &v) { c.imaging.green_sigma = v.real(); }}}},
      {"inversion",
       {{"objective",
         [&](const ValueReader &v) {
           if (v.text() != "rom" && v.text() != "fwi")
           {
             throw v.error("objective is rom or fwi");
           }
           c.inversion.config.objective =
               v.text() == "rom" ? InversionConfig::Objective::Rom : InversionConfig::Objective::Fwi;
         }},
        {"x1_min", [&](const ValueReader &v) { c.inversion.x1_min = v.real(); }},
        {"x1_max", [&](const ValueReader &v) { c.inversion.x1_max = v.real(); }},
        {"x2_min", [&](const ValueReader &v) { c.inversion.x2_min = v.real(); }},
        {"x2_max", [&](const ValueReader &v) { c.inversion.x2_max = v.real(); }},
        {"h", [&](const ValueReader &v) { c.inversion.config.h = v.real(); }},
        {"max_iterations", [&](const ValueReader &v) { c.inversion.config.max_iterations = v.integer(); }},
        {"relative_decrease", [&](const ValueReader &v) { c.inversion.config.relative_decrease = v.real(); }},
        {"patience", [&](const ValueReader &v) { c.inversion.config.patience = v.integer(); }},
        {"nu_fraction", [&](const ValueReader &v) { c.inversion.config.nu_fraction = v.real(); }},
        {"nu_base", [&](const ValueReader &v) { c.inversion.config.nu_base = v.integer(); }},
        {"max_halvings", [&](const ValueReader &v) { c.inversion.config.max_halvings = v.integer(); }},
        {"schedule", [&](const ValueReader &v) { c.inversion.config.schedule = detail::parse_schedule(v); }}}},
      {"io",
       {{"output_dir", [&](const ValueReader &v) { c.io.output_dir = v.text(); }},
        {"seed",
         [&](const ValueReader &v) {
           const Index s = v.integer();
           if (s < 0)
           {
             throw v.error("seed must be non-negative");
           }
           c.io.seed = static_cast<std::uint64_t>(s);
         }}}}};

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::string section;
  std::set<std::string> seen;
  while (std::getline(in, raw))
  {
    line++;
    const auto hash = raw.find('#');
    const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty())
    {
      continue;
    }
    const ValueReader here(s, line);
    if (s.front() == '[')
    {
      if (s.back() != ']')
      {
        throw here.error("unterminated section header");
      }
      section = detail::trim(s.substr(1, s.size() - 2));
      if (!keys.contains(section))
      {
        throw here.error("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
    {
      throw here.error("expected key = value");
    }
    if (section.empty())
    {
      throw here.error("key outside any section");
    }
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    const auto &table = keys.at(section);
    const auto it = table.find(key);
    if (it == table.end())
    {
      throw here.error("unknown key '" + key + "' in [" + section + "]");
    }
    if (!seen.insert(section + "." + key).second)
    {
      throw here.error("duplicate key '" + key + "' in [" + section + "]");
    }
    if (value.empty())
    {
      throw here.error("missing value for '" + key + "'");
    }
    it->second(ValueReader(value, line));
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw Error(ErrorKind::IOError, "cannot open " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace emrom
