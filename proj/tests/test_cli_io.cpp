// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "emrom/pipeline.hpp"

using namespace emrom;

namespace
{

ErrorKind kind_of(const std::string &text)
{
  try
  {
    parse_config(text);
  }
  catch (const Error &e)
  {
    return e.kind();
  }
  return ErrorKind::Singular;
}

std::string message_of(const std::string &text)
{
  try
  {
    parse_config(text);
  }
  catch (const Error &e)
  {
    return e.what();
  }
  return "";
}

std::string small_config(const std::filesystem::path &dir)
{
  return "[grid]\nn1 = 40\nn2 = 30\n[array]\nm = 2\nseparation = 6\ndepth = 6\n[rom]\nn = 4\n"
         "regularization = none\nraw_response = false\n[io]\noutput_dir = " +
         dir.string() + "\nseed = 3\n";
}

std::filesystem::path scratch(const std::string &name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("emrom_cli_io_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path &p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("defaults", "[cli-io]")
{
  const ExperimentConfig c = parse_config("");
  CHECK(c.grid.n1 == 100);
  CHECK(c.grid.n2 == 50);
  CHECK(c.array.m == 5);
  CHECK(c.array.depth == 8.0);
  CHECK(c.rom.n == 20);
  // 0.3 pi / omega_c with omega_c = 2 pi / 16.
  CHECK(c.tau() == Catch::Approx(2.4).epsilon(1e-14));
  CHECK(c.rom.options.mode == RomOptions::Mode::Auto);
  CHECK(c.io.seed == 1);
}

TEST_CASE("values and comments", "[cli-io]")
{
  const ExperimentConfig c = parse_config("# comment\n[rom]\nn = 12  # trailing\ntau = 3.0\n"
                                          "[imaging]\npolarizations = 11, 22\nreference = truth\n");
  CHECK(c.rom.n == 12);
  CHECK(c.tau() == 3.0);
  REQUIRE(c.imaging.polarizations.size() == 2);
  CHECK(c.imaging.polarizations[0] == std::array<int, 2>{1, 1});
  CHECK(c.imaging.truth_reference);
}

TEST_CASE("parse errors carry the line", "[cli-io]")
{
  CHECK(kind_of("[nowhere]\n") == ErrorKind::ParseError);
  CHECK(message_of("[grid]\nn1 = 40\nwidth = 3\n").find("line 3") != std::string::npos);
  CHECK(message_of("[grid]\nn1 = 40\nn1 = 41\n").find("duplicate") != std::string::npos);
  CHECK(message_of("[rom]\n\nn = twelve\n").find("line 3") != std::string::npos);
  CHECK(kind_of("n1 = 40\n") == ErrorKind::ParseError);
  CHECK(kind_of("[grid\n") == ErrorKind::ParseError);
  CHECK(kind_of("[grid]\nn1\n") == ErrorKind::ParseError);
  CHECK(kind_of("[grid]\nn1 =\n") == ErrorKind::ParseError);
  CHECK(kind_of("[rom]\nraw_response = maybe\n") == ErrorKind::ParseError);
}

TEST_CASE("validation errors", "[cli-io]")
{
  // omega_o = 0.6 omega_c, so pi/omega_o = 40/3; tau = 2 pi/omega_o is twice the bound.
  CHECK(kind_of("[rom]\ntau = 26.7\n") == ErrorKind::ValidationError);
  CHECK(message_of("[rom]\ntau = 26.7\n").find("Nyquist") != std::string::npos);
  // n c_o tau = 4 * 2.4 = 9.6 < 60 - 8.
  CHECK(message_of("[rom]\nn = 4\n[imaging]\nx1_max = 60\n").find("need n c_o tau >= L") != std::string::npos);
  CHECK(kind_of("[array]\nseparation = 0.5\n") == ErrorKind::ValidationError);
  CHECK(kind_of("[rom]\nnoise = -1\n") == ErrorKind::ValidationError);
  CHECK(kind_of("[imaging]\ngreen_sigma = 0\n") == ErrorKind::ValidationError);
}

TEST_CASE("load_config on a missing file", "[cli-io]")
{
  try
  {
    load_config("/nonexistent/emrom.cfg");
    FAIL("no error");
  }
  catch (const Error &e)
  {
    CHECK(e.kind() == ErrorKind::IOError);
  }
}

TEST_CASE("simulate then rom on a homogeneous medium", "[cli-io]")
{
  const auto dir = scratch("pipeline");
  const ExperimentConfig c = parse_config(small_config(dir));
  std::ostringstream log;
  REQUIRE(run_pipeline(Command::Simulate, c, log) == 0);
  REQUIRE(run_pipeline(Command::Rom, c, log) == 0);
  CHECK(std::filesystem::exists(dir / artifacts::rom));
  CHECK(std::filesystem::exists(dir / artifacts::true_medium));

  std::ifstream report(dir / artifacts::rom_report);
  std::string key;
  double residual = -1.0, off = -1.0;
  std::string value;
  while (report >> key >> value)
  {
    if (key == "max_residual")
    {
      residual = std::stod(value);
    }
    if (key == "off_tridiagonal")
    {
      off = std::stod(value);
    }
  }
  CHECK(residual >= 0.0);
  CHECK(residual <= 1e-8);
  CHECK(off <= 1e-8);

  const Rom rom = read_rom((dir / artifacts::rom).string());
  const DataSeries data = read_data((dir / artifacts::data).string());
  CHECK(rom.order() == 4);
  CHECK(verify_interpolation(rom, data).max_residual <= 1e-8);
}

TEST_CASE("missing artifacts", "[cli-io]")
{
  const auto dir = scratch("missing");
  ExperimentConfig c = parse_config(small_config(dir));
  std::ostringstream log;
  try
  {
    run_pipeline(Command::Rom, c, log);
    FAIL("no error");
  }
  catch (const Error &e)
  {
    CHECK(e.kind() == ErrorKind::MissingArtifact);
  }
  REQUIRE(run_pipeline(Command::Simulate, c, log) == 0);
  c.imaging.rtm = true;
  try
  {
    run_pipeline(Command::Image, c, log);
    FAIL("no error");
  }
  catch (const Error &e)
  {
    CHECK(e.kind() == ErrorKind::MissingArtifact);
  }
}

TEST_CASE("same seed gives identical files", "[cli-io]")
{
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  std::string ca = small_config(a), cb = small_config(b);
  ca.replace(ca.find("[rom]\n"), 6, "[rom]\nnoise = 1e-3\n");
  cb.replace(cb.find("[rom]\n"), 6, "[rom]\nnoise = 1e-3\n");
  std::ostringstream log;
  run_pipeline(Command::Simulate, parse_config(ca), log);
  run_pipeline(Command::Simulate, parse_config(cb), log);
  const std::string da = slurp(a / artifacts::data);
  CHECK(!da.empty());
  CHECK(da == slurp(b / artifacts::data));

  std::string cc = ca;
  cc.replace(cc.find("seed = 3"), 8, "seed = 4");
  const auto c = scratch("seed_c");
  cc.replace(cc.find(a.string()), a.string().size(), c.string());
  run_pipeline(Command::Simulate, parse_config(cc), log);
  CHECK(da != slurp(c / artifacts::data));
}
