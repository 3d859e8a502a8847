#pragma once

#include <cmath>

#include "mmenc/ops.hpp"

namespace mmenc {

// Guards the denominator of the correlation; a zero-variance column scores 0.
inline constexpr double kPearsonEps = 1e-8;

// Column-wise Pearson correlation between ground truth and predictions,
// both [stimuli × voxels]. Sums run in double.
template <typename DerivedG, typename DerivedP>
Eigen::VectorXd pearson_per_voxel(const Eigen::MatrixBase<DerivedG>& truth, const Eigen::MatrixBase<DerivedP>& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw ShapeError("pearson_per_voxel: truth " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) +
                     " and prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                     " differ");
  }
  const Index t = truth.rows();
  if (t < 2) throw UsageError("pearson_per_voxel: need at least 2 stimuli, got " + std::to_string(t));
  Eigen::VectorXd r(truth.cols());
  for (Index v = 0; v < truth.cols(); ++v) {
    double gm = 0.0, pm = 0.0;
    for (Index i = 0; i < t; ++i) {
      gm += static_cast<double>(truth(i, v));
      pm += static_cast<double>(pred(i, v));
    }
    gm /= static_cast<double>(t);
    pm /= static_cast<double>(t);
    double sgp = 0.0, sgg = 0.0, spp = 0.0;
    for (Index i = 0; i < t; ++i) {
      const double g = static_cast<double>(truth(i, v)) - gm;
      const double p = static_cast<double>(pred(i, v)) - pm;
      sgp += g * p;
      sgg += g * g;
      spp += p * p;
    }
    r(v) = sgp / std::sqrt(sgg * spp + kPearsonEps);
  }
  return r;
}

namespace ops {

// Differentiable (with respect to `pred`) per-voxel correlation; result shape [voxels].
template <typename Scalar>
Var<Scalar> pearson_per_voxel(const Matrix<Scalar>& truth, const Var<Scalar>& pred) {
  auto& g = detail::graph_of(pred);
  const auto& pm = pred.mat();
  if (pred.shape().size() != 2 || truth.rows() != pm.rows() || truth.cols() != pm.cols()) {
    throw ShapeError("pearson_per_voxel: truth " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) +
                     " and prediction " + shape_string(pred.shape()) + " differ");
  }
  const Index t = pm.rows();
  const Index voxels = pm.cols();
  if (t < 2) throw UsageError("pearson_per_voxel: need at least 2 stimuli, got " + std::to_string(t));

  // Centered columns and the three sums per voxel, saved for backward.
  Eigen::MatrixXd gc(t, voxels), pc(t, voxels);
  Eigen::VectorXd sgp(voxels), sgg(voxels), spp(voxels);
  Matrix<Scalar> out(1, voxels);
  for (Index v = 0; v < voxels; ++v) {
    double gmean = 0.0, pmean = 0.0;
    for (Index i = 0; i < t; ++i) {
      gmean += static_cast<double>(truth(i, v));
      pmean += static_cast<double>(pm(i, v));
    }
    gmean /= static_cast<double>(t);
    pmean /= static_cast<double>(t);
    double a = 0.0, b = 0.0, c = 0.0;
    for (Index i = 0; i < t; ++i) {
      const double gv = static_cast<double>(truth(i, v)) - gmean;
      const double pv = static_cast<double>(pm(i, v)) - pmean;
      gc(i, v) = gv;
      pc(i, v) = pv;
      a += gv * pv;
      b += gv * gv;
      c += pv * pv;
    }
    sgp(v) = a;
    sgg(v) = b;
    spp(v) = c;
    out(0, v) = static_cast<Scalar>(a / std::sqrt(b * c + kPearsonEps));
  }
  return g.record(Tensor<Scalar>(Shape{voxels}, std::move(out)), {pred},
                  [pred, gc = std::move(gc), pc = std::move(pc), sgp, sgg, spp](Graph<Scalar>& gr,
                                                                                const Matrix<Scalar>& dout) {
                    // dR/dP_i = g_i / D - Sgp·Sgg·p_i / D³ with D = sqrt(Sgg·Spp + eps);
                    // the centering projection vanishes because g and p sum to zero.
                    Matrix<Scalar> d(gc.rows(), gc.cols());
                    for (Index v = 0; v < gc.cols(); ++v) {
                      const double denom = std::sqrt(sgg(v) * spp(v) + kPearsonEps);
                      const double a = 1.0 / denom;
                      const double b = sgp(v) * sgg(v) / (denom * denom * denom);
                      const double go = static_cast<double>(dout(0, v));
                      for (Index i = 0; i < gc.rows(); ++i) d(i, v) = static_cast<Scalar>(go * (a * gc(i, v) - b * pc(i, v)));
                    }
                    gr.accumulate(pred, d);
                  });
}

// 1 − mean over voxels of the per-voxel correlation. Lies in [0, 2].
template <typename Scalar>
Var<Scalar> pearson_loss(const Matrix<Scalar>& truth, const Var<Scalar>& pred) {
  return affine(mean(pearson_per_voxel(truth, pred)), Scalar(-1), Scalar(1));
}

}  // namespace ops

}  // namespace mmenc
