#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace peract::nn {

/// Row-major matrix: rows are tokens / voxels, columns are channels.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Uniform draws built directly from the engine's bits so that initialization
/// does not depend on the standard library's distribution implementations.
class InitRng {
public:
  explicit InitRng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  template <typename Scalar>
  void fill_uniform(Mat<Scalar>& m, double bound) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(uniform(-bound, bound));
  }

private:
  std::mt19937_64 engine_;
};

/// tanh approximation of GELU.
template <typename Scalar>
struct Gelu {
  static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double kA = 0.044715;

  // Array expressions so Eigen vectorizes tanh; the scalar path dominated training time.
  static Mat<Scalar> forward(const Mat<Scalar>& x) {
    const auto v = x.array();
    return (Scalar(0.5) * v * (Scalar(1) + (Scalar(kC) * (v + Scalar(kA) * v.cube())).tanh())).matrix();
  }

  static Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& dy) {
    const auto v = x.array();
    const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t =
        (Scalar(kC) * (v + Scalar(kA) * v.cube())).tanh();
    const auto du = Scalar(kC) * (Scalar(1) + Scalar(3 * kA) * v.square());
    return (dy.array() * (Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * v * (Scalar(1) - t.square()) * du)).matrix();
  }
};

/// In-place row-wise softmax.
template <typename Scalar>
void softmax_rows(Mat<Scalar>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const Scalar mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

}  // namespace peract::nn
