// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "emrom/error.hpp"

namespace emrom
{

// f^(w) = amplitude * (w^2/2) [exp(-(w-wo)^2/(2 wb^2)) + exp(-(w+wo)^2/(2 wb^2))]
struct PulseSpec
{
  double omega_o = 0.6 * 2.0 * std::numbers::pi / 16.0;
  double omega_b = 0.0;
  double amplitude = 1.0;

  double omega_c() const { return 5.0 / 3.0 * omega_o; }
};

inline double pulse_spectrum(const PulseSpec &p, double omega)
{
  const double a = (omega - p.omega_o) / p.omega_b;
  const double b = (omega + p.omega_o) / p.omega_b;
  return p.amplitude * 0.5 * omega * omega * (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b));
}

// h(theta) with f^(sqrt(theta)) = theta * h(theta); smooth in theta >= 0.
inline double pulse_spectrum_over_theta(const PulseSpec &p, double theta)
{
  const double r = std::sqrt(std::max(theta, 0.0));
  const double a = (r - p.omega_o) / p.omega_b;
  const double b = (r + p.omega_o) / p.omega_b;
  return p.amplitude * 0.5 * (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b));
}

namespace detail
{

inline double pulse_peak(const PulseSpec &p)
{
  // Golden-section search on (0, wo + 6 wb); the spectrum is unimodal on w > 0 for wb < wo.
  double lo = 0.0, hi = p.omega_o + 6.0 * p.omega_b;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = pulse_spectrum(p, x1), f2 = pulse_spectrum(p, x2);
  for (int it = 0; it < 200; it++)
  {
    if (f1 < f2)
    {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = pulse_spectrum(p, x2);
    }
    else
    {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = pulse_spectrum(p, x1);
    }
  }
  return pulse_spectrum(p, 0.5 * (lo + hi));
}

}  // namespace detail

// Pulse for a cutoff wavelength lambda_c: w_c = 2 pi c_o / lambda_c, w_o = 0.6 w_c, and w_b chosen
// so the spectrum at w_c is 25 dB (amplitude) below its peak.
inline PulseSpec make_pulse(double lambda_c, double c_o)
{
  PulseSpec p;
  const double omega_c = 2.0 * std::numbers::pi * c_o / lambda_c;
  p.omega_o = 0.6 * omega_c;
  const double target = std::pow(10.0, -25.0 / 20.0);
  double lo = 0.01 * p.omega_o, hi = 0.9 * p.omega_o;
  for (int it = 0; it < 200; it++)
  {
    p.omega_b = 0.5 * (lo + hi);
    const double ratio = pulse_spectrum(p, omega_c) / detail::pulse_peak(p);
    (ratio > target ? hi : lo) = p.omega_b;
  }
  p.omega_b = 0.5 * (lo + hi);
  return p;
}

// Time-domain pulse from the spectrum by trapezoidal quadrature of
// f(t) = (1/pi) int_0^W f^(w) cos(w t) dw on a uniform frequency grid with
// W = w_o + 10 w_b and `intervals` subintervals.
class PulseWaveform
{
public:
  explicit PulseWaveform(const PulseSpec &p, int intervals = 4096)
    : pulse_(p), intervals_(intervals), top_(p.omega_o + 10.0 * p.omega_b)
  {
    if (!(p.omega_b > 0.0) || !(p.omega_o > 0.0))
    {
      throw Error(ErrorKind::InvalidDimension, "pulse frequencies must be positive");
    }
    const double dw = top_ / intervals_;
    omega_.resize(static_cast<std::size_t>(intervals_) + 1);
    weight_.resize(omega_.size());
    for (int k = 0; k <= intervals_; k++)
    {
      const double w = k * dw;
      const double trap = (k == 0 || k == intervals_) ? 0.5 : 1.0;
      omega_[static_cast<std::size_t>(k)] = w;
      weight_[static_cast<std::size_t>(k)] = trap * pulse_spectrum(pulse_, w) * dw / std::numbers::pi;
    }
  }

  const PulseSpec &spec() const { return pulse_; }

  // f(t)
  double value(double t) const
  {
    return integrate([t](double w, double s) { return s * std::cos(w * t); });
  }

  // f'(t)
  double derivative(double t) const
  {
    return integrate([t](double w, double s) { return -w * s * std::sin(w * t); });
  }

  // int_{-inf}^t f; well defined because f^(0) = 0.
  double integral(double t) const
  {
    return integrate([t](double w, double s) { return w > 0.0 ? s / w * std::sin(w * t) : 0.0; });
  }

  // Time after which |f(t)| / max|f| stays below `level` (f is even, peak at t = 0).
  double support(double level = 1e-6, double step = 0.25) const
  {
    const double peak = std::abs(value(0.0));
    // The envelope is Gaussian with std 1/w_b; scan well past its 1e-6 point.
    const double horizon = 12.0 / pulse_.omega_b;
    double last = 0.0;
    for (double t = 0.0; t <= horizon; t += step)
    {
      if (std::abs(value(t)) >= level * peak)
      {
        last = t;
      }
    }
    return last + step;
  }

private:
  template <class F>
  double integrate(F &&f) const
  {
    double sum = 0.0;
    for (std::size_t k = 0; k < omega_.size(); k++)
    {
      sum += f(omega_[k], weight_[k]);
    }
    return sum;
  }

  PulseSpec pulse_;
  int intervals_;
  double top_;
  std::vector<double> omega_;
  std::vector<double> weight_; // trapezoid weight times spectrum
};

}  // namespace emrom
