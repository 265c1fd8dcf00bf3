#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fetalnet/core/grid.hpp"

namespace fetalnet {

/// One output coordinate of a linear interpolation: out = (1-frac)*in[lo] + frac*in[hi].
struct LinearTap {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

/// Half-pixel-centre linear taps mapping `in_size` samples onto `out_size` samples
/// (the align_corners=false convention). Identity when the sizes agree.
inline std::vector<LinearTap> linear_taps(int in_size, int out_size) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::max(src, 0.0);
    int lo = std::min(static_cast<int>(std::floor(src)), in_size - 1);
    int hi = std::min(lo + 1, in_size - 1);
    taps[o] = {lo, hi, src - lo};
  }
  return taps;
}

/// Bilinear resize of a row-major plane.
inline void resize_plane(const double* in, int in_h, int in_w, double* out, int out_h, int out_w) {
  const auto ty = linear_taps(in_h, out_h);
  const auto tx = linear_taps(in_w, out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto& t = ty[y];
    const double* r0 = in + static_cast<std::size_t>(t.lo) * in_w;
    const double* r1 = in + static_cast<std::size_t>(t.hi) * in_w;
    for (int x = 0; x < out_w; ++x) {
      const auto& s = tx[x];
      const double top = r0[s.lo] + s.frac * (r0[s.hi] - r0[s.lo]);
      const double bot = r1[s.lo] + s.frac * (r1[s.hi] - r1[s.lo]);
      out[static_cast<std::size_t>(y) * out_w + x] = top + t.frac * (bot - top);
    }
  }
}

/// Adjoint of resize_plane: scatters `grad_out` back onto the input grid (accumulating).
inline void resize_plane_adjoint(const double* grad_out, int out_h, int out_w, double* grad_in,
                                 int in_h, int in_w) {
  const auto ty = linear_taps(in_h, out_h);
  const auto tx = linear_taps(in_w, out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto& t = ty[y];
    double* r0 = grad_in + static_cast<std::size_t>(t.lo) * in_w;
    double* r1 = grad_in + static_cast<std::size_t>(t.hi) * in_w;
    for (int x = 0; x < out_w; ++x) {
      const auto& s = tx[x];
      const double g = grad_out[static_cast<std::size_t>(y) * out_w + x];
      const double gt = g * (1.0 - t.frac);
      const double gb = g * t.frac;
      r0[s.lo] += gt * (1.0 - s.frac);
      r0[s.hi] += gt * s.frac;
      r1[s.lo] += gb * (1.0 - s.frac);
      r1[s.hi] += gb * s.frac;
    }
  }
}

inline Image resize_bilinear(const Image& in, int out_rows, int out_cols) {
  if (in.rows() == out_rows && in.cols() == out_cols) return in;
  Image out(out_rows, out_cols);
  resize_plane(in.data(), in.rows(), in.cols(), out.data(), out_rows, out_cols);
  return out;
}

/// Nearest-neighbour resize; keeps the value set of the input (used for masks).
template <typename T>
Grid<T> resize_nearest(const Grid<T>& in, int out_rows, int out_cols) {
  if (in.rows() == out_rows && in.cols() == out_cols) return in;
  Grid<T> out(out_rows, out_cols);
  const double sy = static_cast<double>(in.rows()) / out_rows;
  const double sx = static_cast<double>(in.cols()) / out_cols;
  for (int y = 0; y < out_rows; ++y) {
    const int iy = std::min(static_cast<int>(std::floor((y + 0.5) * sy)), in.rows() - 1);
    for (int x = 0; x < out_cols; ++x) {
      const int ix = std::min(static_cast<int>(std::floor((x + 0.5) * sx)), in.cols() - 1);
      out(y, x) = in(iy, ix);
    }
  }
  return out;
}

}  // namespace fetalnet
