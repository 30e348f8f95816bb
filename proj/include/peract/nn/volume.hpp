#pragma once

// Dense 3D volume helpers over row-major (x, y, z) flattened grids with
// channels as columns.

#include <array>
#include <cmath>
#include <vector>

#include "peract/nn/tensor.hpp"

namespace peract::nn {

using Dims3 = std::array<int, 3>;

[[nodiscard]] inline Eigen::Index volume(const Dims3& d) { return Eigen::Index{d[0]} * d[1] * d[2]; }

[[nodiscard]] inline Eigen::Index flat3(const Dims3& d, int x, int y, int z) {
  return (Eigen::Index{x} * d[1] + y) * d[2] + z;
}

/// Non-overlapping P^3 patches: row n of the result is lattice cell n, with
/// columns ordered (dx, dy, dz, channel). A strided P^3 convolution is this
/// gather followed by a Linear layer.
template <typename Scalar>
Mat<Scalar> patchify_gather(const Mat<Scalar>& voxels, const Dims3& grid, int patch) {
  const Dims3 lattice{grid[0] / patch, grid[1] / patch, grid[2] / patch};
  const Eigen::Index c = voxels.cols();
  Mat<Scalar> out(volume(lattice), Eigen::Index{patch} * patch * patch * c);
  for (int i = 0; i < lattice[0]; ++i) {
    for (int j = 0; j < lattice[1]; ++j) {
      for (int k = 0; k < lattice[2]; ++k) {
        Scalar* dst = out.row(flat3(lattice, i, j, k)).data();
        for (int dx = 0; dx < patch; ++dx) {
          for (int dy = 0; dy < patch; ++dy) {
            for (int dz = 0; dz < patch; ++dz) {
              const Scalar* src = voxels.row(flat3(grid, i * patch + dx, j * patch + dy, k * patch + dz)).data();
              std::copy(src, src + c, dst);
              dst += c;
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> patchify_scatter(const Mat<Scalar>& dpatches, const Dims3& grid, int patch, Eigen::Index channels) {
  const Dims3 lattice{grid[0] / patch, grid[1] / patch, grid[2] / patch};
  Mat<Scalar> dvox(volume(grid), channels);
  for (int i = 0; i < lattice[0]; ++i) {
    for (int j = 0; j < lattice[1]; ++j) {
      for (int k = 0; k < lattice[2]; ++k) {
        const Scalar* src = dpatches.row(flat3(lattice, i, j, k)).data();
        for (int dx = 0; dx < patch; ++dx) {
          for (int dy = 0; dy < patch; ++dy) {
            for (int dz = 0; dz < patch; ++dz) {
              Scalar* dst = dvox.row(flat3(grid, i * patch + dx, j * patch + dy, k * patch + dz)).data();
              std::copy(src, src + channels, dst);
              src += channels;
            }
          }
        }
      }
    }
  }
  return dvox;
}

/// 3x3x3 neighbourhoods with zero padding (im2col for a same-size 3^3 convolution).
template <typename Scalar>
Mat<Scalar> neighbourhood_gather(const Mat<Scalar>& cells, const Dims3& dims) {
  const Eigen::Index c = cells.cols();
  Mat<Scalar> out = Mat<Scalar>::Zero(volume(dims), 27 * c);
  for (int x = 0; x < dims[0]; ++x) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int z = 0; z < dims[2]; ++z) {
        Scalar* dst = out.row(flat3(dims, x, y, z)).data();
        for (int dx = -1; dx <= 1; ++dx) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dz = -1; dz <= 1; ++dz, dst += c) {
              const int sx = x + dx, sy = y + dy, sz = z + dz;
              if (sx < 0 || sy < 0 || sz < 0 || sx >= dims[0] || sy >= dims[1] || sz >= dims[2]) continue;
              const Scalar* src = cells.row(flat3(dims, sx, sy, sz)).data();
              std::copy(src, src + c, dst);
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> neighbourhood_scatter(const Mat<Scalar>& dcols, const Dims3& dims, Eigen::Index channels) {
  Mat<Scalar> dcells = Mat<Scalar>::Zero(volume(dims), channels);
  for (int x = 0; x < dims[0]; ++x) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int z = 0; z < dims[2]; ++z) {
        const Scalar* src = dcols.row(flat3(dims, x, y, z)).data();
        for (int dx = -1; dx <= 1; ++dx) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dz = -1; dz <= 1; ++dz, src += channels) {
              const int sx = x + dx, sy = y + dy, sz = z + dz;
              if (sx < 0 || sy < 0 || sz < 0 || sx >= dims[0] || sy >= dims[1] || sz >= dims[2]) continue;
              Scalar* dst = dcells.row(flat3(dims, sx, sy, sz)).data();
              for (Eigen::Index ch = 0; ch < channels; ++ch) dst[ch] += src[ch];
            }
          }
        }
      }
    }
  }
  return dcells;
}

/// Per-axis interpolation taps for trilinear upsampling by an integer factor
/// (half-pixel centres, edge-clamped).
struct UpsampleTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;

  UpsampleTaps(int in_size, int factor) {
    const int out_size = in_size * factor;
    lo.resize(static_cast<std::size_t>(out_size));
    hi.resize(lo.size());
    frac.resize(lo.size());
    for (int o = 0; o < out_size; ++o) {
      double src = (o + 0.5) / factor - 0.5;
      if (src < 0.0) src = 0.0;
      int i0 = static_cast<int>(std::floor(src));
      if (i0 > in_size - 1) i0 = in_size - 1;
      const auto s = static_cast<std::size_t>(o);
      lo[s] = i0;
      hi[s] = std::min(i0 + 1, in_size - 1);
      frac[s] = src - i0;
    }
  }
};

template <typename Scalar>
Mat<Scalar> trilinear_upsample(const Mat<Scalar>& cells, const Dims3& dims, int factor) {
  const Dims3 out_dims{dims[0] * factor, dims[1] * factor, dims[2] * factor};
  const UpsampleTaps tx(dims[0], factor), ty(dims[1], factor), tz(dims[2], factor);
  const Eigen::Index c = cells.cols();
  Mat<Scalar> out = Mat<Scalar>::Zero(volume(out_dims), c);
  for (int x = 0; x < out_dims[0]; ++x) {
    const auto sx = static_cast<std::size_t>(x);
    const int xs[2] = {tx.lo[sx], tx.hi[sx]};
    const Scalar wx[2] = {Scalar(1 - tx.frac[sx]), Scalar(tx.frac[sx])};
    for (int y = 0; y < out_dims[1]; ++y) {
      const auto sy = static_cast<std::size_t>(y);
      const int ys[2] = {ty.lo[sy], ty.hi[sy]};
      const Scalar wy[2] = {Scalar(1 - ty.frac[sy]), Scalar(ty.frac[sy])};
      for (int z = 0; z < out_dims[2]; ++z) {
        const auto sz = static_cast<std::size_t>(z);
        const int zs[2] = {tz.lo[sz], tz.hi[sz]};
        const Scalar wz[2] = {Scalar(1 - tz.frac[sz]), Scalar(tz.frac[sz])};
        Scalar* dst = out.row(flat3(out_dims, x, y, z)).data();
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            for (int d = 0; d < 2; ++d) {
              const Scalar w = wx[a] * wy[b] * wz[d];
              if (w == Scalar(0)) continue;
              const Scalar* src = cells.row(flat3(dims, xs[a], ys[b], zs[d])).data();
              for (Eigen::Index ch = 0; ch < c; ++ch) dst[ch] += w * src[ch];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> trilinear_upsample_backward(const Mat<Scalar>& dout, const Dims3& dims, int factor) {
  const Dims3 out_dims{dims[0] * factor, dims[1] * factor, dims[2] * factor};
  const UpsampleTaps tx(dims[0], factor), ty(dims[1], factor), tz(dims[2], factor);
  const Eigen::Index c = dout.cols();
  Mat<Scalar> dcells = Mat<Scalar>::Zero(volume(dims), c);
  for (int x = 0; x < out_dims[0]; ++x) {
    const auto sx = static_cast<std::size_t>(x);
    const int xs[2] = {tx.lo[sx], tx.hi[sx]};
    const Scalar wx[2] = {Scalar(1 - tx.frac[sx]), Scalar(tx.frac[sx])};
    for (int y = 0; y < out_dims[1]; ++y) {
      const auto sy = static_cast<std::size_t>(y);
      const int ys[2] = {ty.lo[sy], ty.hi[sy]};
      const Scalar wy[2] = {Scalar(1 - ty.frac[sy]), Scalar(ty.frac[sy])};
      for (int z = 0; z < out_dims[2]; ++z) {
        const auto sz = static_cast<std::size_t>(z);
        const int zs[2] = {tz.lo[sz], tz.hi[sz]};
        const Scalar wz[2] = {Scalar(1 - tz.frac[sz]), Scalar(tz.frac[sz])};
        const Scalar* src = dout.row(flat3(out_dims, x, y, z)).data();
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            for (int d = 0; d < 2; ++d) {
              const Scalar w = wx[a] * wy[b] * wz[d];
              if (w == Scalar(0)) continue;
              Scalar* dst = dcells.row(flat3(dims, xs[a], ys[b], zs[d])).data();
              for (Eigen::Index ch = 0; ch < c; ++ch) dst[ch] += w * src[ch];
            }
          }
        }
      }
    }
  }
  return dcells;
}

/// Column-wise max over all rows; `argmax` records the winning row per column.
template <typename Scalar>
Mat<Scalar> global_max_pool(const Mat<Scalar>& x, std::vector<Eigen::Index>* argmax = nullptr) {
  Mat<Scalar> out(1, x.cols());
  if (argmax) argmax->assign(static_cast<std::size_t>(x.cols()), 0);
  for (Eigen::Index c = 0; c < x.cols(); ++c) out(0, c) = x(0, c);
  for (Eigen::Index r = 1; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (x(r, c) > out(0, c)) {
        out(0, c) = x(r, c);
        if (argmax) (*argmax)[static_cast<std::size_t>(c)] = r;
      }
    }
  }
  return out;
}

}  // namespace peract::nn
