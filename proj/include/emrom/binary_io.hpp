// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "emrom/block_linalg.hpp"

namespace emrom::io
{

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts are not supported");

class BinaryWriter
{
public:
  explicit BinaryWriter(const std::string &path) : path_(path), out_(path, std::ios::binary)
  {
    if (!out_)
    {
      throw Error(ErrorKind::IOError, "cannot open " + path + " for writing");
    }
  }

  void magic(const char (&tag)[5]) { raw(tag, 4); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void matrix(const Matrix &M)
  {
    for (Index i = 0; i < M.rows(); i++)
    {
      for (Index j = 0; j < M.cols(); j++)
      {
        f64(M(i, j));
      }
    }
  }

  void close()
  {
    out_.close();
    if (!out_)
    {
      throw Error(ErrorKind::IOError, "failed writing " + path_);
    }
  }

private:
  void raw(const void *p, std::size_t n)
  {
    out_.write(static_cast<const char *>(p), static_cast<std::streamsize>(n));
    if (!out_)
    {
      throw Error(ErrorKind::IOError, "failed writing " + path_);
    }
  }

  std::string path_;
  std::ofstream out_;
};

class BinaryReader
{
public:
  explicit BinaryReader(const std::string &path) : path_(path), in_(path, std::ios::binary)
  {
    if (!in_)
    {
      throw Error(ErrorKind::MissingArtifact, "cannot open " + path);
    }
  }

  void expect_magic(const char (&tag)[5])
  {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, tag, 4) != 0)
    {
      throw Error(ErrorKind::IOError, path_ + " is not a " + std::string(tag) + " file");
    }
  }

  std::uint32_t u32()
  {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }

  double f64()
  {
    double v;
    raw(&v, sizeof v);
    return v;
  }

  Matrix matrix(Index rows, Index cols)
  {
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; i++)
    {
      for (Index j = 0; j < cols; j++)
      {
        M(i, j) = f64();
      }
    }
    return M;
  }

private:
  void raw(void *p, std::size_t n)
  {
    in_.read(static_cast<char *>(p), static_cast<std::streamsize>(n));
    if (!in_)
    {
      throw Error(ErrorKind::IOError, "truncated file " + path_);
    }
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace emrom::io
