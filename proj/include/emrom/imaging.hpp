// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "emrom/internal_wave.hpp"
#include "emrom/medium.hpp"

namespace emrom
{

// Lattice of family-A nodes (i0 + a*stride, j0 + b*stride), a < rows, b < cols.
// Rows run along x1 (depth), columns along x2.
struct ImagingGrid
{
  Index i0 = 0;
  Index j0 = 0;
  Index rows = 0;
  Index cols = 0;
  Index stride = 1;
  double ell = 1.0;

  Index size() const { return rows * cols; }
  double spacing() const { return static_cast<double>(stride) * ell; }
  Index i(Index a) const { return i0 + a * stride; }
  Index j(Index b) const { return j0 + b * stride; }
  std::array<double, 2> point(Index a, Index b) const
  {
    return {static_cast<double>(i(a)) * ell, static_cast<double>(j(b)) * ell};
  }

  // Throws PointOutsideBasis unless every point is an interior node of `grid`.
  void require_inside(const LebedevGrid &grid) const
  {
    if (rows < 1 || cols < 1 || stride < 1)
    {
      throw Error(ErrorKind::PointOutsideBasis, "empty imaging grid");
    }
    if (std::abs(ell - grid.ell()) > 1e-12 * grid.ell() || i0 < 1 || j0 < 1 || i(rows - 1) > grid.n1() - 2 ||
        j(cols - 1) > grid.n2() - 2)
    {
      throw Error(ErrorKind::PointOutsideBasis, "imaging points are not interior nodes of the evaluation grid");
    }
  }

  // Node indices in image order (a-major).
  std::vector<Index> nodes(const LebedevGrid &grid) const
  {
    require_inside(grid);
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (Index a = 0; a < rows; a++)
    {
      for (Index b = 0; b < cols; b++)
      {
        out.push_back(grid.index_a(i(a), j(b)));
      }
    }
    return out;
  }

  // Both components of every node: dof 2k + p' belongs to point k.
  std::vector<Index> dofs(const LebedevGrid &grid) const
  {
    std::vector<Index> out;
    for (const Index node : nodes(grid))
    {
      out.push_back(2 * node);
      out.push_back(2 * node + 1);
    }
    return out;
  }

  bool operator==(const ImagingGrid &) const = default;
};

// Box [x1_min, x1_max] x [x2_min, x2_max] in length units, snapped inward to nodes.
inline ImagingGrid make_imaging_grid(const LebedevGrid &grid, double x1_min, double x1_max, double x2_min,
                                     double x2_max, double spacing)
{
  const double ell = grid.ell();
  const auto stride = static_cast<Index>(std::llround(spacing / ell));
  if (stride < 1 || std::abs(static_cast<double>(stride) * ell - spacing) > 1e-9 * spacing)
  {
    throw Error(ErrorKind::PointOutsideBasis, "imaging spacing must be a multiple of the grid spacing");
  }
  ImagingGrid g;
  g.ell = ell;
  g.stride = stride;
  g.i0 = static_cast<Index>(std::ceil(x1_min / ell - 1e-9));
  g.j0 = static_cast<Index>(std::ceil(x2_min / ell - 1e-9));
  const auto i1 = static_cast<Index>(std::floor(x1_max / ell + 1e-9));
  const auto j1 = static_cast<Index>(std::floor(x2_max / ell + 1e-9));
  g.rows = i1 >= g.i0 ? (i1 - g.i0) / stride + 1 : 0;
  g.cols = j1 >= g.j0 ? (j1 - g.j0) / stride + 1 : 0;
  g.require_inside(grid);
  return g;
}

enum class ImageProvenance
{
  Rom,
  Rtm,
  Ideal
};

constexpr std::string_view to_string(ImageProvenance p)
{
  switch (p)
  {
    case ImageProvenance::Rom:
      return "rom";
    case ImageProvenance::Rtm:
      return "rtm";
    case ImageProvenance::Ideal:
      return "ideal";
  }
  return "?";
}

struct ImageField
{
  ImagingGrid grid;
  Vector values; // a-major
  int p_out = 1; // p'
  int p_in = 1;  // p
  ImageProvenance provenance = ImageProvenance::Rom;
  std::string display = "raw";

  double operator()(Index a, Index b) const { return values(a * grid.cols + b); }
};

namespace detail
{

inline void require_polarization(int p)
{
  if (p != 1 && p != 2)
  {
    throw Error(ErrorKind::InvalidDimension, "polarization index must be 1 or 2");
  }
}

}  // namespace detail

// I(y) = sum_j sum_s |e_p'^T u_j^est(s,p)(y)|^2, j < order.
inline ImageField rom_image(const ReferenceBasis &basis, const BlockTriangular &R_data, int p, int p_out,
                            const ImagingGrid &im, ImageProvenance provenance = ImageProvenance::Rom)
{
  detail::require_polarization(p);
  detail::require_polarization(p_out);
  detail::require_matching(basis, R_data, 0);
  const std::vector<Index> dofs = im.dofs(basis.grid);
  const Matrix V = basis.rows(dofs);

  ImageField img{im, Vector::Zero(im.size()), p_out, p, provenance, "raw"};
  for (Index j = 0; j < R_data.num_blocks(); j++)
  {
    const Matrix u = V * R_data.block_column(j);
    for (Index k = 0; k < im.size(); k++)
    {
      for (Index s = 0; s < basis.m; s++)
      {
        const double v = u(2 * k + (p_out - 1), 2 * s + (p - 1));
        img.values(k) += v * v;
      }
    }
  }
  return img;
}

// Impulse responses of the reference medium sampled at t_j = j tau on the imaging grid.
// h[j] has rows 2k + q (point k, component q) and columns 2s + p (antenna s, polarization p).
struct GreenFields
{
  ImagingGrid grid;
  Index m = 0;
  double tau = 0.0;
  std::vector<Matrix> h;

  Index count() const { return static_cast<Index>(h.size()); }
};

// Dipole runs U'' + A U = delta(t) g(sqrt(A)) P_range F in c~, g(w) = exp(-w^2 / (2 sigma^2)).
// The divergence-free projection keeps the null-space part from growing linearly in time.
inline GreenFields compute_greens(const DiscreteOperator &op_ref, const ArrayGeometry &array, const ImagingGrid &im,
                                  double tau, Index count, Index steps_per_tau, double sigma,
                                  double lambda_max = -1.0)
{
  if (lambda_max < 0.0)
  {
    lambda_max = estimate_lambda_max(op_ref);
  }
  const double dt = choose_dt(tau, steps_per_tau, lambda_max);
  const std::vector<Index> dofs = im.dofs(op_ref.grid);
  detail::require_interior_array(op_ref.grid, array);

  const Matrix Fr = range_projection(op_ref, source_matrix(op_ref.grid, array));
  const double bound = gershgorin_bound(op_ref.A) * 1.0001;
  const ChebyshevFilter lowpass([&](double theta) { return std::exp(-std::max(theta, 0.0) / (2.0 * sigma * sigma)); },
                                bound);
  const Matrix v0 = lowpass.apply(op_ref.A, Fr);

  auto sample = [&](const Matrix &u) {
    Matrix out(static_cast<Index>(dofs.size()), u.cols());
    for (std::size_t r = 0; r < dofs.size(); r++)
    {
      out.row(static_cast<Index>(r)) = u.row(dofs[r]);
    }
    return out;
  };

  GreenFields g{im, array.m(), tau, {}};
  Matrix prev = Matrix::Zero(v0.rows(), v0.cols());
  Matrix cur = dt * (v0 - dt * dt / 6.0 * (op_ref.A * v0));
  const double dt2 = dt * dt;
  g.h.push_back(sample(prev));
  for (Index j = 1; j < count; j++)
  {
    const Index steps = j == 1 ? steps_per_tau - 1 : steps_per_tau;
    for (Index k = 0; k < steps; k++)
    {
      Matrix next = 2.0 * cur - prev - dt2 * (op_ref.A * cur);
      prev = std::move(cur);
      cur = std::move(next);
    }
    if (!cur.allFinite())
    {
      throw Error(ErrorKind::NonFiniteField, "Green field diverged");
    }
    g.h.push_back(sample(cur));
  }
  return g;
}

// I(y) = tau^2 sum_{s,s'} sum_{j+k <= 2n-1} w_j w_k e_p'^T G(t_j, x_s', y) G(t_k, y, x_s) e_p W(t_{j+k}),
// w_0 = 1/2 and 1 otherwise. W holds the raw response at t_0 .. t_{2n-1}.
inline ImageField rtm_image(const std::vector<Matrix> &W, const GreenFields &greens, int p, int p_out)
{
  detail::require_polarization(p);
  detail::require_polarization(p_out);
  const auto count = static_cast<Index>(W.size());
  if (count == 0 || greens.count() < count)
  {
    throw Error(ErrorKind::MissingGreens, "need Green fields at " + std::to_string(count) + " times, have " +
                                              std::to_string(greens.count()));
  }
  const Index m = greens.m;
  for (const Matrix &w : W)
  {
    if (w.rows() != 2 * m || w.cols() != 2 * m)
    {
      throw Error(ErrorKind::DimensionMismatch, "response size does not match the Green fields");
    }
  }
  // Polarization-restricted response blocks W_p'p(t) (m x m).
  std::vector<Matrix> Wpp;
  for (const Matrix &w : W)
  {
    Matrix b(m, m);
    for (Index s1 = 0; s1 < m; s1++)
    {
      for (Index s = 0; s < m; s++)
      {
        b(s1, s) = w(2 * s1 + p_out - 1, 2 * s + p - 1);
      }
    }
    Wpp.push_back(std::move(b));
  }

  const ImagingGrid &im = greens.grid;
  ImageField img{im, Vector::Zero(im.size()), p_out, p, ImageProvenance::Rtm, "raw"};
  const double tau2 = greens.tau * greens.tau;
  Matrix hp_out(2, m);
  Matrix hp(2, m);
  for (Index y = 0; y < im.size(); y++)
  {
    // Columns restricted to the two polarizations, all times.
    std::vector<Matrix> gout, gin;
    for (Index j = 0; j < count; j++)
    {
      const Matrix &h = greens.h[static_cast<std::size_t>(j)];
      for (Index s = 0; s < m; s++)
      {
        hp_out.col(s) = h.block(2 * y, 2 * s + p_out - 1, 2, 1);
        hp.col(s) = h.block(2 * y, 2 * s + p - 1, 2, 1);
      }
      gout.push_back(hp_out);
      gin.push_back(hp);
    }
    double sum = 0.0;
    for (Index j = 0; j < count; j++)
    {
      const double wj = j == 0 ? 0.5 : 1.0;
      for (Index k = 0; j + k < count; k++)
      {
        const double wk = k == 0 ? 0.5 : 1.0;
        const Matrix cross = gout[static_cast<std::size_t>(j)].transpose() * gin[static_cast<std::size_t>(k)];
        sum += wj * wk * cross.cwiseProduct(Wpp[static_cast<std::size_t>(j + k)]).sum();
      }
    }
    img.values(y) = tau2 * sum;
  }
  return img;
}

// Derivative along x1: centered inside, second-order one-sided at the first and last rows.
inline ImageField range_derivative(const ImageField &img)
{
  const ImagingGrid &g = img.grid;
  ImageField out = img;
  out.display = img.display == "raw" ? "range derivative" : img.display + ", range derivative";
  const double h = g.spacing();
  for (Index b = 0; b < g.cols; b++)
  {
    auto v = [&](Index a) { return img(a, b); };
    for (Index a = 0; a < g.rows; a++)
    {
      double d = 0.0;
      if (g.rows == 1)
      {
        d = 0.0;
      }
      else if (g.rows == 2)
      {
        d = (v(1) - v(0)) / h;
      }
      else if (a == 0)
      {
        d = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
      }
      else if (a == g.rows - 1)
      {
        d = (3.0 * v(a) - 4.0 * v(a - 1) + v(a - 2)) / (2.0 * h);
      }
      else
      {
        d = (v(a + 1) - v(a - 1)) / (2.0 * h);
      }
      out.values(a * g.cols + b) = d;
    }
  }
  return out;
}

// Position of max |img|.
inline std::array<double, 2> image_peak(const ImageField &img)
{
  Index best = 0;
  img.values.cwiseAbs().maxCoeff(&best);
  return img.grid.point(best / img.grid.cols, best % img.grid.cols);
}

// max |img| within lambda_c/2 of the reflectors over max |img| at least 2 lambda_c from them
// and deeper than their lowest point. Capped at 1e6.
inline double peak_to_artifact(const ImageField &img, const PhantomSpec &truth)
{
  if (truth.regions.empty())
  {
    throw Error(ErrorKind::EmptyRegion, "phantom has no reflector");
  }
  const double lc = truth.lambda_c;
  double bottom = -std::numeric_limits<double>::infinity();
  for (const Region &r : truth.regions)
  {
    bottom = std::max(bottom, r.bounds()[2]);
  }
  double near = -1.0, far = -1.0;
  for (Index a = 0; a < img.grid.rows; a++)
  {
    for (Index b = 0; b < img.grid.cols; b++)
    {
      const auto y = img.grid.point(a, b);
      double dist = std::numeric_limits<double>::infinity();
      for (const Region &r : truth.regions)
      {
        dist = std::min(dist, r.distance(y[0] / lc, y[1] / lc));
      }
      const double v = std::abs(img(a, b));
      if (dist <= 0.5)
      {
        near = std::max(near, v);
      }
      else if (dist >= 2.0 && y[0] / lc > bottom)
      {
        far = std::max(far, v);
      }
    }
  }
  if (near < 0.0 || far < 0.0)
  {
    throw Error(ErrorKind::EmptyRegion, near < 0.0 ? "no imaging point near the reflector"
                                                   : "no imaging point below the reflector");
  }
  if (far == 0.0 || near >= 1e6 * far)
  {
    return near == 0.0 ? 1.0 : 1e6;
  }
  return near / far;
}

inline std::string image_filename(const std::string &stem, const ImageField &img, const std::string &ext)
{
  std::string name = stem + "_" + std::string(to_string(img.provenance)) + "_p" + std::to_string(img.p_out) +
                     std::to_string(img.p_in);
  if (img.display != "raw")
  {
    name += "_drange";
  }
  return name + "." + ext;
}

namespace detail
{

inline double image_scale(const ImageField &img)
{
  const double top = img.values.size() ? img.values.cwiseAbs().maxCoeff() : 0.0;
  return top > 0.0 ? 1.0 / top : 1.0;
}

}  // namespace detail

// x1, x2, value normalized by max |value|.
inline void write_image_csv(const std::string &path, const ImageField &img)
{
  std::ofstream out(path);
  if (!out)
  {
    throw Error(ErrorKind::IOError, "cannot open " + path);
  }
  out.precision(12);
  out << "x1,x2,value\n";
  const double scale = detail::image_scale(img);
  for (Index a = 0; a < img.grid.rows; a++)
  {
    for (Index b = 0; b < img.grid.cols; b++)
    {
      const auto y = img.grid.point(a, b);
      out << y[0] << ',' << y[1] << ',' << scale * img(a, b) << '\n';
    }
  }
}

// Binary PGM, x2 across and x1 down; normalized values mapped linearly from [min, max] to [0, 255].
inline void write_image_pgm(const std::string &path, const ImageField &img)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw Error(ErrorKind::IOError, "cannot open " + path);
  }
  const double scale = detail::image_scale(img);
  const Vector v = scale * img.values;
  const double lo = v.size() ? v.minCoeff() : 0.0;
  const double hi = v.size() ? v.maxCoeff() : 0.0;
  const double span = hi > lo ? hi - lo : 1.0;
  out << "P5\n" << img.grid.cols << ' ' << img.grid.rows << "\n255\n";
  for (Index k = 0; k < v.size(); k++)
  {
    const auto byte = static_cast<unsigned char>(std::lround(255.0 * (v(k) - lo) / span));
    out.put(static_cast<char>(byte));
  }
}

}  // namespace emrom
