// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "emrom/grid.hpp"

namespace emrom
{

// Symmetric 2x2 wave-speed tensor; c12 is stored once.
struct SpeedTensor
{
  double c11 = 1.0;
  double c22 = 1.0;
  double c12 = 0.0;

  bool spd() const
  {
    return std::isfinite(c11) && std::isfinite(c22) && std::isfinite(c12) && c11 > 0.0 &&
           c22 > 0.0 && c11 * c22 - c12 * c12 > 0.0;
  }

  Eigen::Matrix2d matrix() const
  {
    Eigen::Matrix2d m;
    m << c11, c12, c12, c22;
    return m;
  }

  static SpeedTensor from_matrix(const Eigen::Matrix2d &m)
  {
    return {m(0, 0), m(1, 1), 0.5 * (m(0, 1) + m(1, 0))};
  }

  static SpeedTensor isotropic(double c) { return {c, c, 0.0}; }

  bool operator==(const SpeedTensor &) const = default;
};

enum class PhantomVariant
{
  Homogeneous,
  Crack,
  MultiCrack,
  AnisoInclusions,
  RectangleInclusion,
  CustomRaster
};

enum class RegionShape
{
  Rectangle, // [a1, b1] x [a2, b2]
  Ellipse,   // center (a1, a2), semi-axes (b1, b2)
  Segment    // endpoints (a1, a2), (b1, b2), half-thickness
};

// Geometry in units of lambda_c; speed relative to c_o.
struct Region
{
  RegionShape shape = RegionShape::Rectangle;
  double a1 = 0.0;
  double a2 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double half_thickness = 0.0;
  SpeedTensor speed;

  bool contains(double y1, double y2) const
  {
    switch (shape)
    {
      case RegionShape::Rectangle:
        return y1 >= a1 && y1 <= b1 && y2 >= a2 && y2 <= b2;
      case RegionShape::Ellipse:
      {
        const double d1 = (y1 - a1) / b1;
        const double d2 = (y2 - a2) / b2;
        return d1 * d1 + d2 * d2 <= 1.0;
      }
      case RegionShape::Segment:
        return segment_distance(y1, y2) <= half_thickness;
    }
    return false;
  }

  // Distance (lambda_c units) from a point to the region; zero inside.
  double distance(double y1, double y2) const
  {
    switch (shape)
    {
      case RegionShape::Rectangle:
      {
        const double d1 = std::max({a1 - y1, 0.0, y1 - b1});
        const double d2 = std::max({a2 - y2, 0.0, y2 - b2});
        return std::hypot(d1, d2);
      }
      case RegionShape::Ellipse:
      {
        if (contains(y1, y2))
        {
          return 0.0;
        }
        // Radial estimate, exact for circles.
        const double r = std::hypot((y1 - a1) / b1, (y2 - a2) / b2);
        return std::hypot(y1 - a1, y2 - a2) * (1.0 - 1.0 / r);
      }
      case RegionShape::Segment:
        return std::max(0.0, segment_distance(y1, y2) - half_thickness);
    }
    return 0.0;
  }

  // Bounding box {min1, min2, max1, max2}.
  std::array<double, 4> bounds() const
  {
    switch (shape)
    {
      case RegionShape::Rectangle:
        return {a1, a2, b1, b2};
      case RegionShape::Ellipse:
        return {a1 - b1, a2 - b2, a1 + b1, a2 + b2};
      case RegionShape::Segment:
        return {std::min(a1, b1) - half_thickness, std::min(a2, b2) - half_thickness,
                std::max(a1, b1) + half_thickness, std::max(a2, b2) + half_thickness};
    }
    return {0, 0, 0, 0};
  }

private:
  double segment_distance(double y1, double y2) const
  {
    const double d1 = b1 - a1;
    const double d2 = b2 - a2;
    const double len2 = d1 * d1 + d2 * d2;
    double t = len2 > 0.0 ? ((y1 - a1) * d1 + (y2 - a2) * d2) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(y1 - a1 - t * d1, y2 - a2 - t * d2);
  }
};

struct PhantomSpec
{
  PhantomVariant variant = PhantomVariant::Homogeneous;
  double lambda_c = 16.0;          // length units per geometry unit
  std::vector<Region> regions;     // later regions override earlier ones
  std::vector<SpeedTensor> raster; // CustomRaster only, one per node, relative to c_o
  double boundary_layer = 4.0;     // length; regions must keep this distance from every wall
  double exclusion_depth = 12.0;   // length; regions must lie at x1 >= this
};

class MediumField
{
public:
  MediumField() = default;

  // Uniform background c_o I.
  MediumField(const LebedevGrid &grid, double c_o)
    : grid_(grid), c_o_(c_o), c11_(Vector::Constant(grid.num_nodes(), c_o)),
      c22_(Vector::Constant(grid.num_nodes(), c_o)), c12_(Vector::Zero(grid.num_nodes()))
  {
    if (!(c_o > 0.0))
    {
      throw Error(ErrorKind::NonSPDContrast, "reference speed must be positive");
    }
  }

  MediumField(const LebedevGrid &grid, double c_o, Vector c11, Vector c22, Vector c12)
    : grid_(grid), c_o_(c_o), c11_(std::move(c11)), c22_(std::move(c22)), c12_(std::move(c12))
  {
    if (c11_.size() != grid.num_nodes() || c22_.size() != grid.num_nodes() ||
        c12_.size() != grid.num_nodes())
    {
      throw Error(ErrorKind::LengthMismatch, "medium arrays do not match the node count");
    }
    for (Index k = 0; k < grid.num_nodes(); k++)
    {
      if (!tensor(k).spd())
      {
        throw Error(ErrorKind::NonSPDContrast, "speed tensor at node " + std::to_string(k) +
                                                   " is not positive definite");
      }
    }
  }

  const LebedevGrid &grid() const { return grid_; }
  double c_o() const { return c_o_; }
  const Vector &c11() const { return c11_; }
  const Vector &c22() const { return c22_; }
  const Vector &c12() const { return c12_; }

  SpeedTensor tensor(Index node) const { return {c11_(node), c22_(node), c12_(node)}; }

  bool is_background(Index node) const
  {
    return c11_(node) == c_o_ && c22_(node) == c_o_ && c12_(node) == 0.0;
  }

  // Pointwise product c(x) psi(x) for every column of a dof-major field.
  Matrix apply(const Matrix &psi) const
  {
    Matrix out(psi.rows(), psi.cols());
    for (Index k = 0; k < grid_.num_nodes(); k++)
    {
      out.row(2 * k) = c11_(k) * psi.row(2 * k) + c12_(k) * psi.row(2 * k + 1);
      out.row(2 * k + 1) = c12_(k) * psi.row(2 * k) + c22_(k) * psi.row(2 * k + 1);
    }
    return out;
  }

  // Throws unless c = c_o I within `margin` of each point and within `layer` of every wall.
  void check_collar(const std::vector<std::array<double, 2>> &antennas, double margin,
                    double layer) const
  {
    for (Index k = 0; k < grid_.num_nodes(); k++)
    {
      if (is_background(k))
      {
        continue;
      }
      const auto p = grid_.position(k);
      if (grid_.wall_distance(k) < layer)
      {
        throw Error(ErrorKind::RegionOutsideDomain,
                    "medium differs from the background inside the boundary layer at (" +
                        std::to_string(p[0]) + ", " + std::to_string(p[1]) + ")");
      }
      for (const auto &a : antennas)
      {
        if (std::hypot(p[0] - a[0], p[1] - a[1]) < margin)
        {
          throw Error(ErrorKind::RegionOutsideDomain,
                      "medium differs from the background near an antenna at (" +
                          std::to_string(p[0]) + ", " + std::to_string(p[1]) + ")");
        }
      }
    }
  }

  void write_csv(const std::string &path) const
  {
    std::ofstream out(path);
    if (!out)
    {
      throw Error(ErrorKind::IOError, "cannot open " + path);
    }
    out.precision(17);
    out << "x1,x2,c11,c22,c12\n";
    for (Index k = 0; k < grid_.num_nodes(); k++)
    {
      const auto p = grid_.position(k);
      out << p[0] << ',' << p[1] << ',' << c11_(k) << ',' << c22_(k) << ',' << c12_(k) << '\n';
    }
  }

private:
  LebedevGrid grid_;
  double c_o_ = 1.0;
  Vector c11_, c22_, c12_;
};

// Nearest-node rasterization of a phantom.
inline MediumField build_medium(const PhantomSpec &spec, const LebedevGrid &grid, double c_o)
{
  MediumField background(grid, c_o);
  const Index nodes = grid.num_nodes();
  Vector c11 = background.c11(), c22 = background.c22(), c12 = background.c12();

  auto check_node = [&](Index k) {
    const auto p = grid.position(k);
    if (grid.wall_distance(k) < spec.boundary_layer || p[0] < spec.exclusion_depth)
    {
      throw Error(ErrorKind::RegionOutsideDomain,
                  "phantom touches the homogeneous collar at (" + std::to_string(p[0]) + ", " +
                      std::to_string(p[1]) + ")");
    }
  };

  if (spec.variant == PhantomVariant::CustomRaster)
  {
    if (static_cast<Index>(spec.raster.size()) != nodes)
    {
      throw Error(ErrorKind::LengthMismatch, "raster has " + std::to_string(spec.raster.size()) +
                                                 " entries, grid has " + std::to_string(nodes));
    }
    for (Index k = 0; k < nodes; k++)
    {
      const SpeedTensor &t = spec.raster[static_cast<std::size_t>(k)];
      if (!t.spd())
      {
        throw Error(ErrorKind::NonSPDContrast, "raster tensor at node " + std::to_string(k) +
                                                   " is not positive definite");
      }
      if (!(t == SpeedTensor::isotropic(1.0)))
      {
        check_node(k);
      }
      c11(k) = c_o * t.c11;
      c22(k) = c_o * t.c22;
      c12(k) = c_o * t.c12;
    }
    return MediumField(grid, c_o, c11, c22, c12);
  }

  const auto extent = grid.extent();
  for (const Region &r : spec.regions)
  {
    if (!r.speed.spd())
    {
      throw Error(ErrorKind::NonSPDContrast, "region speed tensor is not positive definite");
    }
    const auto b = r.bounds();
    if (b[0] < 0.0 || b[1] < 0.0 || b[2] * spec.lambda_c > extent[0] ||
        b[3] * spec.lambda_c > extent[1])
    {
      throw Error(ErrorKind::RegionOutsideDomain, "region bounding box leaves the domain");
    }
    for (Index k = 0; k < nodes; k++)
    {
      const auto p = grid.position(k);
      if (r.contains(p[0] / spec.lambda_c, p[1] / spec.lambda_c))
      {
        check_node(k);
        c11(k) = c_o * r.speed.c11;
        c22(k) = c_o * r.speed.c22;
        c12(k) = c_o * r.speed.c12;
      }
    }
  }
  return MediumField(grid, c_o, c11, c22, c12);
}

// Preset phantoms. `width` and `depth` are the domain extents in lambda_c units.
namespace phantoms
{

inline PhantomSpec homogeneous(double lambda_c)
{
  PhantomSpec spec;
  spec.lambda_c = lambda_c;
  return spec;
}

// Thin slanted crack of slow material (contrast eps/eps_o = 4).
inline PhantomSpec crack(double lambda_c, double width, double crack_depth)
{
  PhantomSpec spec;
  spec.variant = PhantomVariant::Crack;
  spec.lambda_c = lambda_c;
  Region r;
  r.shape = RegionShape::Segment;
  r.a1 = crack_depth - 0.1;
  r.a2 = 0.5 * width - 0.6;
  r.b1 = crack_depth + 0.1;
  r.b2 = 0.5 * width + 0.6;
  r.half_thickness = 0.07;
  r.speed = SpeedTensor::isotropic(0.5);
  spec.regions.push_back(r);
  return spec;
}

inline PhantomSpec multi_crack(double lambda_c, double width, double crack_depth)
{
  PhantomSpec spec = crack(lambda_c, width, crack_depth);
  spec.variant = PhantomVariant::MultiCrack;
  Region second = spec.regions.front();
  second.a1 = crack_depth + 1.0;
  second.b1 = crack_depth + 1.2;
  second.a2 = 0.5 * width - 0.9;
  second.b2 = 0.5 * width - 0.1;
  spec.regions.push_back(second);
  return spec;
}

// Three anisotropic inclusions.
inline PhantomSpec aniso_inclusions(double lambda_c, double width, double top)
{
  PhantomSpec spec;
  spec.variant = PhantomVariant::AnisoInclusions;
  spec.lambda_c = lambda_c;
  Region left;
  left.shape = RegionShape::Ellipse;
  left.a1 = top + 0.5;
  left.a2 = 0.25 * width;
  left.b1 = 0.4;
  left.b2 = 0.3;
  left.speed = {1.2, 1.1, 0.1};
  Region mid = left;
  mid.shape = RegionShape::Rectangle;
  mid.a1 = top + 1.2;
  mid.b1 = top + 1.7;
  mid.a2 = 0.45 * width;
  mid.b2 = 0.6 * width;
  mid.speed = {0.9, 1.15, -0.08};
  Region right = left;
  right.a1 = top + 0.6;
  right.a2 = 0.78 * width;
  right.b1 = 0.5;
  right.b2 = 0.1;
  right.speed = {1.15, 0.95, 0.05};
  spec.regions = {left, mid, right};
  return spec;
}

// Rectangle [x1_top, x1_bottom] x [x2_left, x2_right] of anisotropic material.
inline PhantomSpec rectangle_inclusion(double lambda_c, double x1_top, double x1_bottom,
                                       double x2_left, double x2_right, SpeedTensor speed)
{
  PhantomSpec spec;
  spec.variant = PhantomVariant::RectangleInclusion;
  spec.lambda_c = lambda_c;
  Region r;
  r.shape = RegionShape::Rectangle;
  r.a1 = x1_top;
  r.b1 = x1_bottom;
  r.a2 = x2_left;
  r.b2 = x2_right;
  r.speed = speed;
  spec.regions.push_back(r);
  return spec;
}

}  // namespace phantoms

}  // namespace emrom
