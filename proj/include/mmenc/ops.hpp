#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmenc/graph.hpp"

// Differentiable operations over Graph variables. Every op validates shapes
// eagerly, computes its value, and records a backward rule.
namespace mmenc::ops {

namespace detail {

template <typename Scalar>
Graph<Scalar>& graph_of(const Var<Scalar>& a) {
  if (a.graph() == nullptr) throw UsageError("variable is not attached to a graph");
  return *a.graph();
}

inline void require_rank2(const Shape& s, std::string_view op) {
  if (s.size() != 2) throw ShapeError(std::string(op) + ": expected a 2-d tensor, got " + shape_string(s));
}

inline void require_same(const Shape& a, const Shape& b, std::string_view op) {
  if (a != b) throw ShapeError(std::string(op) + ": shapes " + shape_string(a) + " and " + shape_string(b) + " differ");
}

// Row-wise softmax with max subtraction; sums are accumulated in double.
template <typename Derived>
void softmax_rows_inplace(Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  for (Index r = 0; r < m.rows(); ++r) {
    const Scalar peak = m.row(r).maxCoeff();
    double total = 0.0;
    for (Index c = 0; c < m.cols(); ++c) {
      const Scalar e = std::exp(m(r, c) - peak);
      m(r, c) = e;
      total += static_cast<double>(e);
    }
    const Scalar inv = static_cast<Scalar>(1.0 / total);
    m.row(r) *= inv;
  }
}

}  // namespace detail

enum class Activation { Tanh, Gelu, Relu };

inline Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "gelu") return Activation::Gelu;
  if (name == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected tanh, gelu or relu)");
}

// Exact Gaussian-CDF form of gelu.
template <typename Scalar>
Scalar gelu_value(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <typename Scalar>
Scalar gelu_derivative(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<Scalar> / std::numbers::sqrt2_v<Scalar>;
  return cdf + x * pdf;
}

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& g = detail::graph_of(a);
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: cannot multiply " + shape_string(sa) + " by " + shape_string(sb));
  }
  Matrix<Scalar> out(sa[0], sb[1]);
  out.noalias() = a.mat() * b.mat();
  return g.record(Tensor<Scalar>::from_matrix(std::move(out)), {a, b},
                  [a, b](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    if (gr.requires_grad(a)) gr.accumulate(a, dout * b.mat().transpose());
                    if (gr.requires_grad(b)) gr.accumulate(b, a.mat().transpose() * dout);
                  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& g = detail::graph_of(a);
  detail::require_same(a.shape(), b.shape(), "add");
  Matrix<Scalar> out = a.mat() + b.mat();
  return g.record(Tensor<Scalar>(a.shape(), std::move(out)), {a, b},
                  [a, b](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    gr.accumulate(a, dout);
                    gr.accumulate(b, dout);
                  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& g = detail::graph_of(a);
  detail::require_same(a.shape(), b.shape(), "sub");
  Matrix<Scalar> out = a.mat() - b.mat();
  return g.record(Tensor<Scalar>(a.shape(), std::move(out)), {a, b},
                  [a, b](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    gr.accumulate(a, dout);
                    gr.accumulate(b, -dout);
                  });
}

// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& g = detail::graph_of(a);
  detail::require_same(a.shape(), b.shape(), "mul");
  Matrix<Scalar> out = a.mat().cwiseProduct(b.mat());
  return g.record(Tensor<Scalar>(a.shape(), std::move(out)), {a, b},
                  [a, b](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    if (gr.requires_grad(a)) gr.accumulate(a, dout.cwiseProduct(b.mat()));
                    if (gr.requires_grad(b)) gr.accumulate(b, dout.cwiseProduct(a.mat()));
                  });
}

// scale * x + shift
template <typename Scalar>
Var<Scalar> affine(const Var<Scalar>& x, Scalar scale, Scalar shift) {
  auto& g = detail::graph_of(x);
  Matrix<Scalar> out = (x.mat().array() * scale + shift).matrix();
  return g.record(Tensor<Scalar>(x.shape(), std::move(out)), {x},
                  [x, scale](Graph<Scalar>& gr, const Matrix<Scalar>& dout) { gr.accumulate(x, dout * scale); });
}

// x[m×n] + row[1×n] broadcast over rows.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& x, const Var<Scalar>& row) {
  auto& g = detail::graph_of(x);
  detail::require_rank2(x.shape(), "add_row");
  if (row.value().size() != x.shape()[1]) {
    throw ShapeError("add_row: row " + shape_string(row.shape()) + " does not match width of " + shape_string(x.shape()));
  }
  const auto r = Eigen::Map<const RowVector<Scalar>>(row.mat().data(), x.shape()[1]);
  Matrix<Scalar> out = x.mat().rowwise() + r;
  return g.record(Tensor<Scalar>(x.shape(), std::move(out)), {x, row},
                  [x, row](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    gr.accumulate(x, dout);
                    if (gr.requires_grad(row)) {
                      const RowVector<Scalar> s = dout.colwise().sum();
                      gr.accumulate(row, Eigen::Map<const Matrix<Scalar>>(s.data(), row.mat().rows(), row.mat().cols()));
                    }
                  });
}

// x[B·S×n] + block[S×n], the block repeated for each of the B row groups.
template <typename Scalar>
Var<Scalar> add_tiled(const Var<Scalar>& x, const Var<Scalar>& block) {
  auto& g = detail::graph_of(x);
  detail::require_rank2(x.shape(), "add_tiled");
  detail::require_rank2(block.shape(), "add_tiled");
  const Index rows = block.shape()[0];
  if (block.shape()[1] != x.shape()[1] || x.shape()[0] % rows != 0) {
    throw ShapeError("add_tiled: block " + shape_string(block.shape()) + " does not tile " + shape_string(x.shape()));
  }
  const Index groups = x.shape()[0] / rows;
  Matrix<Scalar> out = x.mat();
  for (Index b = 0; b < groups; ++b) out.middleRows(b * rows, rows) += block.mat();
  return g.record(Tensor<Scalar>(x.shape(), std::move(out)), {x, block},
                  [x, block, rows, groups](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    gr.accumulate(x, dout);
                    if (gr.requires_grad(block)) {
                      Matrix<Scalar> s = Matrix<Scalar>::Zero(rows, dout.cols());
                      for (Index b = 0; b < groups; ++b) s += dout.middleRows(b * rows, rows);
                      gr.accumulate(block, s);
                    }
                  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  auto& g = detail::graph_of(x);
  double total = 0.0;
  for (Scalar v : x.value().values()) total += static_cast<double>(v);
  Matrix<Scalar> out(1, 1);
  out(0, 0) = static_cast<Scalar>(total);
  return g.record(Tensor<Scalar>(Shape{1}, std::move(out)), {x}, [x](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
    gr.accumulate(x, Matrix<Scalar>::Constant(x.mat().rows(), x.mat().cols(), dout(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x) {
  return affine(sum(x), static_cast<Scalar>(1.0 / static_cast<double>(x.value().size())), Scalar(0));
}

template <typename Scalar>
Var<Scalar> unary(Activation kind, const Var<Scalar>& x) {
  auto& g = detail::graph_of(x);
  Matrix<Scalar> out = x.mat();
  switch (kind) {
    case Activation::Tanh:
      out = out.array().tanh().matrix();
      break;
    case Activation::Gelu:
      out = out.unaryExpr([](Scalar v) { return gelu_value(v); });
      break;
    case Activation::Relu:
      out = out.cwiseMax(Scalar(0));
      break;
  }
  Matrix<Scalar> saved = kind == Activation::Tanh ? out : Matrix<Scalar>();
  return g.record(Tensor<Scalar>(x.shape(), std::move(out)), {x},
                  [x, kind, y = std::move(saved)](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    const auto& in = x.mat();
                    switch (kind) {
                      case Activation::Tanh:
                        gr.accumulate(x, (dout.array() * (Scalar(1) - y.array().square())).matrix());
                        break;
                      case Activation::Gelu:
                        gr.accumulate(x, dout.cwiseProduct(in.unaryExpr([](Scalar v) { return gelu_derivative(v); })));
                        break;
                      case Activation::Relu:
                        gr.accumulate(x, (dout.array() * (in.array() > Scalar(0)).template cast<Scalar>()).matrix());
                        break;
                    }
                  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  return unary(Activation::Tanh, x);
}

template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& x) {
  return unary(Activation::Gelu, x);
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  return unary(Activation::Relu, x);
}

template <typename Scalar>
Var<Scalar> softmax_lastdim(const Var<Scalar>& x) {
  auto& g = detail::graph_of(x);
  Matrix<Scalar> out = x.mat();
  detail::softmax_rows_inplace(out);
  Matrix<Scalar> saved = out;
  return g.record(Tensor<Scalar>(x.shape(), std::move(out)), {x},
                  [x, y = std::move(saved)](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = dout.cwiseProduct(y).rowwise().sum();
                    gr.accumulate(x, (y.array() * (dout.colwise() - dots).array()).matrix());
                  });
}

// Normalizes each last-dim slice to zero mean / unit variance, then applies gamma and beta.
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta, Scalar eps = Scalar(1e-5)) {
  auto& g = detail::graph_of(x);
  const Index width = x.mat().cols();
  if (gamma.value().size() != width || beta.value().size() != width) {
    throw ShapeError("layer_norm: gamma " + shape_string(gamma.shape()) + " / beta " + shape_string(beta.shape()) +
                     " do not match last dimension of " + shape_string(x.shape()));
  }
  if (!(eps > Scalar(0))) throw UsageError("layer_norm: eps must be positive");
  const auto& in = x.mat();
  const Index rows = in.rows();
  Matrix<Scalar> normalized(rows, width);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (Index c = 0; c < width; ++c) mu += static_cast<double>(in(r, c));
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (Index c = 0; c < width; ++c) {
      const double d = static_cast<double>(in(r, c)) - mu;
      var += d * d;
    }
    var /= static_cast<double>(width);
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    inv_std(r) = static_cast<Scalar>(is);
    for (Index c = 0; c < width; ++c) normalized(r, c) = static_cast<Scalar>((static_cast<double>(in(r, c)) - mu) * is);
  }
  const auto gam = Eigen::Map<const RowVector<Scalar>>(gamma.mat().data(), width);
  const auto bet = Eigen::Map<const RowVector<Scalar>>(beta.mat().data(), width);
  Matrix<Scalar> out = (normalized.array().rowwise() * gam.array()).matrix();
  out.rowwise() += bet;
  return g.record(
      Tensor<Scalar>(x.shape(), std::move(out)), {x, gamma, beta},
      [x, gamma, beta, width, xhat = std::move(normalized), inv_std](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
        if (gr.requires_grad(gamma)) {
          const RowVector<Scalar> dg = dout.cwiseProduct(xhat).colwise().sum();
          gr.accumulate(gamma, Eigen::Map<const Matrix<Scalar>>(dg.data(), gamma.mat().rows(), gamma.mat().cols()));
        }
        if (gr.requires_grad(beta)) {
          const RowVector<Scalar> db = dout.colwise().sum();
          gr.accumulate(beta, Eigen::Map<const Matrix<Scalar>>(db.data(), beta.mat().rows(), beta.mat().cols()));
        }
        if (gr.requires_grad(x)) {
          const auto gam = Eigen::Map<const RowVector<Scalar>>(gamma.mat().data(), width);
          const Matrix<Scalar> dxhat = (dout.array().rowwise() * gam.array()).matrix();
          Matrix<Scalar> dx(dxhat.rows(), width);
          const Scalar inv_w = Scalar(1) / static_cast<Scalar>(width);
          for (Index r = 0; r < dxhat.rows(); ++r) {
            const Scalar m1 = dxhat.row(r).sum() * inv_w;
            const Scalar m2 = dxhat.row(r).dot(xhat.row(r)) * inv_w;
            dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
          }
          gr.accumulate(x, dx);
        }
      });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& x) {
  auto& g = detail::graph_of(x);
  detail::require_rank2(x.shape(), "transpose");
  Matrix<Scalar> out = x.mat().transpose();
  return g.record(Tensor<Scalar>::from_matrix(std::move(out)), {x},
                  [x](Graph<Scalar>& gr, const Matrix<Scalar>& dout) { gr.accumulate(x, dout.transpose()); });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& x, Shape shape) {
  auto& g = detail::graph_of(x);
  Tensor<Scalar> out = x.value().reshaped(std::move(shape));
  return g.record(std::move(out), {x}, [x](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
    const auto& m = x.mat();
    gr.accumulate(x, Eigen::Map<const Matrix<Scalar>>(dout.data(), m.rows(), m.cols()));
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& x, Index begin, Index count) {
  auto& g = detail::graph_of(x);
  detail::require_rank2(x.shape(), "slice_rows");
  if (begin < 0 || count <= 0 || begin + count > x.shape()[0]) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + shape_string(x.shape()));
  }
  Matrix<Scalar> out = x.mat().middleRows(begin, count);
  return g.record(Tensor<Scalar>::from_matrix(std::move(out)), {x},
                  [x, begin, count](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    Matrix<Scalar> full = Matrix<Scalar>::Zero(x.mat().rows(), x.mat().cols());
                    full.middleRows(begin, count) = dout;
                    gr.accumulate(x, full);
                  });
}

// Stacks 2-d variables of equal width. The same variable may appear more than once.
template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  auto& g = detail::graph_of(parts.front());
  const Index width = parts.front().mat().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    detail::require_rank2(p.shape(), "concat_rows");
    if (p.mat().cols() != width) {
      throw ShapeError("concat_rows: width " + std::to_string(p.mat().cols()) + " differs from " + std::to_string(width));
    }
    rows += p.mat().rows();
  }
  Matrix<Scalar> out(rows, width);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.mat().rows()) = p.mat();
    at += p.mat().rows();
  }
  return g.record(Tensor<Scalar>::from_matrix(std::move(out)), parts,
                  [parts](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    Index off = 0;
                    for (const auto& p : parts) {
                      const Index n = p.mat().rows();
                      gr.accumulate(p, dout.middleRows(off, n));
                      off += n;
                    }
                  });
}

// Embedding lookup: row i of the result is table[ids[i]].
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& table, std::span<const Index> ids) {
  auto& g = detail::graph_of(table);
  detail::require_rank2(table.shape(), "gather_rows");
  if (ids.empty()) throw UsageError("gather_rows: no ids");
  const Index vocab = table.shape()[0];
  Matrix<Scalar> out(static_cast<Index>(ids.size()), table.shape()[1]);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw DataError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " + std::to_string(vocab));
    }
    out.row(static_cast<Index>(i)) = table.mat().row(ids[i]);
  }
  std::vector<Index> saved(ids.begin(), ids.end());
  return g.record(Tensor<Scalar>::from_matrix(std::move(out)), {table},
                  [table, saved = std::move(saved)](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
                    Matrix<Scalar> d = Matrix<Scalar>::Zero(table.mat().rows(), table.mat().cols());
                    for (std::size_t i = 0; i < saved.size(); ++i) d.row(saved[i]) += dout.row(static_cast<Index>(i));
                    gr.accumulate(table, d);
                  });
}

// Valid (unpadded) 1-d cross-correlation.
//   x:       [channels × length]
//   kernels: [out_channels × channels × k]   (or [channels × k] for a single output channel)
//   bias:    optional, one value per output channel
// Result: [out_channels × (floor((length - k) / stride) + 1)].
template <typename Scalar>
Var<Scalar> conv1d(const Var<Scalar>& x, const Var<Scalar>& kernels, std::optional<Var<Scalar>> bias, Index stride = 1) {
  auto& g = detail::graph_of(x);
  Shape xs = x.shape();
  if (xs.size() == 1) xs = {1, xs[0]};
  if (xs.size() != 2) throw ShapeError("conv1d: input must be [channels x length], got " + shape_string(x.shape()));
  const Index channels = xs[0];
  const Index length = xs[1];
  const auto& ks = kernels.shape();
  Index out_channels = 0;
  Index klen = 0;
  if (ks.size() == 3 && ks[1] == channels) {
    out_channels = ks[0];
    klen = ks[2];
  } else if (ks.size() == 2 && ks[0] == channels) {
    out_channels = 1;
    klen = ks[1];
  } else if (ks.size() == 1 && channels == 1) {
    out_channels = 1;
    klen = ks[0];
  } else {
    throw ShapeError("conv1d: kernels " + shape_string(ks) + " incompatible with input " + shape_string(x.shape()));
  }
  if (stride < 1) throw UsageError("conv1d: stride must be >= 1");
  if (klen > length) {
    throw ShapeError("conv1d: kernel length " + std::to_string(klen) + " exceeds input length " + std::to_string(length));
  }
  if (bias && bias->value().size() != out_channels) {
    throw ShapeError("conv1d: bias " + shape_string(bias->shape()) + " does not match " + std::to_string(out_channels) +
                     " output channels");
  }
  const Index out_len = (length - klen) / stride + 1;
  // Kernel storage is row-major over (out_channel, channel, tap).
  const Scalar* kdata = kernels.mat().data();
  const Scalar* xdata = x.mat().data();
  Matrix<Scalar> out(out_channels, out_len);
  for (Index o = 0; o < out_channels; ++o) {
    const Scalar b = bias ? bias->mat().data()[o] : Scalar(0);
    for (Index j = 0; j < out_len; ++j) {
      Scalar acc = b;
      for (Index c = 0; c < channels; ++c) {
        const Scalar* kr = kdata + (o * channels + c) * klen;
        const Scalar* xr = xdata + c * length + j * stride;
        for (Index t = 0; t < klen; ++t) acc += kr[t] * xr[t];
      }
      out(o, j) = acc;
    }
  }
  std::vector<Var<Scalar>> inputs{x, kernels};
  if (bias) inputs.push_back(*bias);
  return g.record(
      Tensor<Scalar>(Shape{out_channels, out_len}, std::move(out)), inputs,
      [x, kernels, bias, channels, length, out_channels, klen, out_len, stride](Graph<Scalar>& gr,
                                                                               const Matrix<Scalar>& dout) {
        const Scalar* kdata = kernels.mat().data();
        const Scalar* xdata = x.mat().data();
        if (gr.requires_grad(x)) {
          Matrix<Scalar> dx = Matrix<Scalar>::Zero(x.mat().rows(), x.mat().cols());
          Scalar* dxd = dx.data();
          for (Index o = 0; o < out_channels; ++o)
            for (Index j = 0; j < out_len; ++j) {
              const Scalar go = dout(o, j);
              for (Index c = 0; c < channels; ++c) {
                const Scalar* kr = kdata + (o * channels + c) * klen;
                Scalar* dr = dxd + c * length + j * stride;
                for (Index t = 0; t < klen; ++t) dr[t] += go * kr[t];
              }
            }
          gr.accumulate(x, dx);
        }
        if (gr.requires_grad(kernels)) {
          Matrix<Scalar> dk = Matrix<Scalar>::Zero(kernels.mat().rows(), kernels.mat().cols());
          Scalar* dkd = dk.data();
          for (Index o = 0; o < out_channels; ++o)
            for (Index j = 0; j < out_len; ++j) {
              const Scalar go = dout(o, j);
              for (Index c = 0; c < channels; ++c) {
                Scalar* kr = dkd + (o * channels + c) * klen;
                const Scalar* xr = xdata + c * length + j * stride;
                for (Index t = 0; t < klen; ++t) kr[t] += go * xr[t];
              }
            }
          gr.accumulate(kernels, dk);
        }
        if (bias && gr.requires_grad(*bias)) {
          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> db = dout.rowwise().sum();
          gr.accumulate(*bias, Eigen::Map<const Matrix<Scalar>>(db.data(), bias->mat().rows(), bias->mat().cols()));
        }
      });
}

template <typename Scalar>
Var<Scalar> conv1d(const Var<Scalar>& x, const Var<Scalar>& kernels, Index stride = 1) {
  return conv1d(x, kernels, std::optional<Var<Scalar>>{}, stride);
}

template <typename Scalar>
Var<Scalar> conv1d(const Var<Scalar>& x, const Var<Scalar>& kernels, const Var<Scalar>& bias, Index stride) {
  return conv1d(x, kernels, std::optional<Var<Scalar>>(bias), stride);
}

// Multi-head scaled dot-product self-attention over `batch` independent
// sequences stacked along the rows of q, k, v ([batch·seq × width]). Heads
// split the width into equal contiguous column blocks.
template <typename Scalar>
Var<Scalar> self_attention(const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v, Index batch, Index heads) {
  auto& g = detail::graph_of(q);
  detail::require_same(q.shape(), k.shape(), "self_attention");
  detail::require_same(q.shape(), v.shape(), "self_attention");
  detail::require_rank2(q.shape(), "self_attention");
  const Index rows = q.shape()[0];
  const Index width = q.shape()[1];
  if (batch < 1 || rows % batch != 0) throw ShapeError("self_attention: rows not divisible by batch");
  if (heads < 1 || width % heads != 0) throw ShapeError("self_attention: width not divisible by heads");
  const Index seq = rows / batch;
  const Index hd = width / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));

  Matrix<Scalar> out(rows, width);
  std::vector<Matrix<Scalar>> probs(static_cast<std::size_t>(batch * heads));
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < heads; ++h) {
      auto& a = probs[static_cast<std::size_t>(b * heads + h)];
      a.noalias() = q.mat().block(b * seq, h * hd, seq, hd) * k.mat().block(b * seq, h * hd, seq, hd).transpose();
      a *= scale;
      detail::softmax_rows_inplace(a);
      out.block(b * seq, h * hd, seq, hd).noalias() = a * v.mat().block(b * seq, h * hd, seq, hd);
    }
  }
  return g.record(
      Tensor<Scalar>::from_matrix(std::move(out)), {q, k, v},
      [q, k, v, batch, heads, seq, hd, scale, probs = std::move(probs)](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
        Matrix<Scalar> dq = Matrix<Scalar>::Zero(dout.rows(), dout.cols());
        Matrix<Scalar> dk = dq;
        Matrix<Scalar> dv = dq;
        Matrix<Scalar> da(seq, seq);
        for (Index b = 0; b < batch; ++b) {
          for (Index h = 0; h < heads; ++h) {
            const auto& a = probs[static_cast<std::size_t>(b * heads + h)];
            const auto go = dout.block(b * seq, h * hd, seq, hd);
            dv.block(b * seq, h * hd, seq, hd).noalias() = a.transpose() * go;
            da.noalias() = go * v.mat().block(b * seq, h * hd, seq, hd).transpose();
            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = da.cwiseProduct(a).rowwise().sum();
            const Matrix<Scalar> ds = (a.array() * (da.colwise() - dots).array()).matrix() * scale;
            dq.block(b * seq, h * hd, seq, hd).noalias() = ds * k.mat().block(b * seq, h * hd, seq, hd);
            dk.block(b * seq, h * hd, seq, hd).noalias() = ds.transpose() * q.mat().block(b * seq, h * hd, seq, hd);
          }
        }
        gr.accumulate(q, dq);
        gr.accumulate(k, dk);
        gr.accumulate(v, dv);
      });
}

}  // namespace mmenc::ops
