// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "dafc/error.hpp"

namespace dafc {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_tag(std::uint8_t tag) {
  if (tag > static_cast<std::uint8_t>(Activation::kSigmoid)) {
    throw InvalidArgument("unknown activation tag " + std::to_string(tag));
  }
  return static_cast<Activation>(tag);
}

namespace {

void check_affine_shapes(const Matrix& x, const Matrix& W, const Vector& b) {
  if (x.cols() != W.rows() || W.cols() != b.size()) {
    throw DimensionError("affine map: input has " + std::to_string(x.cols()) + " columns, W is " +
                         std::to_string(W.rows()) + "x" + std::to_string(W.cols()) + ", b has " +
                         std::to_string(b.size()) + " entries");
  }
}

// Row ranges handed to each OpenMP thread for the elementwise passes.
template <typename Fn>
void for_row_blocks(Index rows, Fn&& fn) {
#pragma omp parallel
  {
    const Index nt = omp_get_num_threads();
    const Index t = omp_get_thread_num();
    const Index chunk = (rows + nt - 1) / nt;
    const Index begin = std::min(rows, t * chunk);
    const Index end = std::min(rows, begin + chunk);
    if (end > begin) fn(begin, end - begin);
  }
}

template <typename Block>
void activate_block(Activation act, Block&& blk) {
  auto a = blk.array();
  switch (act) {
    case Activation::kIdentity: break;
    // 1 - 2/(exp(2x)+1) saturates cleanly to +-1 and vectorizes.
    case Activation::kTanh: a = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0); break;
    case Activation::kRelu: a = a.max(0.0); break;
    case Activation::kSigmoid: a = 1.0 / (1.0 + (-a).exp()); break;
  }
}

template <typename GradBlock, typename OutBlock>
void scale_by_derivative(Activation act, GradBlock&& g, const OutBlock& y) {
  auto ga = g.array();
  const auto ya = y.array();
  switch (act) {
    case Activation::kIdentity: break;
    case Activation::kTanh: ga *= 1.0 - ya.square(); break;
    case Activation::kRelu: ga = (ya > 0.0).select(ga, 0.0); break;
    case Activation::kSigmoid: ga *= ya * (1.0 - ya); break;
  }
}

// c (+)= a * b through Eigen's blocked GEMM.
template <typename A, typename B>
void gemm(const A& a, const B& b, Matrix& c, bool accumulate) {
  if (accumulate) {
    c.noalias() += a * b;
  } else {
    c.noalias() = a * b;
  }
}

}  // namespace

namespace kernels {


void activate(Activation act, Matrix& m) {
  for_row_blocks(m.rows(), [&](Index r0, Index n) { activate_block(act, m.middleRows(r0, n)); });
}

void affine_forward(const Matrix& x, const Matrix& W, const Vector& b, Activation act, Matrix& out) {
  check_affine_shapes(x, W, b);
  out.resize(x.rows(), W.cols());
  gemm(x, W, out, false);
  for_row_blocks(out.rows(), [&](Index r0, Index n) {
    auto blk = out.middleRows(r0, n);
    blk.rowwise() += b.transpose();
    activate_block(act, blk);
  });
}

void affine_backward(const Matrix& x, const Matrix& W, Activation act, const Matrix& out, Matrix grad_out,
                     Matrix& grad_W, Vector& grad_b, Matrix* grad_x, bool grad_is_preactivation) {
  if (grad_out.rows() != out.rows() || grad_out.cols() != out.cols() || x.rows() != out.rows()) {
    throw DimensionError("affine backward: gradient shape does not match the forward output");
  }
  Matrix& pre_grad = grad_out;
  if (!grad_is_preactivation) {
    for_row_blocks(pre_grad.rows(), [&](Index r0, Index n) {
      scale_by_derivative(act, pre_grad.middleRows(r0, n), out.middleRows(r0, n));
    });
  }
  gemm(x.transpose(), pre_grad, grad_W, true);
  grad_b.noalias() += pre_grad.colwise().sum().transpose();
  if (grad_x) {
    grad_x->resize(x.rows(), x.cols());
    gemm(pre_grad, W.transpose(), *grad_x, false);
  }
}

void block_transpose(const Matrix& x, Index block_rows, Matrix& out) {
  if (block_rows <= 0 || x.rows() % block_rows != 0) {
    throw DimensionError("block transpose: " + std::to_string(x.rows()) + " rows do not split into blocks of " +
                         std::to_string(block_rows));
  }
  const Index blocks = x.rows() / block_rows;
  const Index cols = x.cols();
  out.resize(blocks * cols, block_rows);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    out.middleRows(b * cols, cols) = x.middleRows(b * block_rows, block_rows).transpose();
  }
}

}  // namespace kernels

namespace reference {

double activate(Activation act, double v) {
  switch (act) {
    case Activation::kIdentity: return v;
    case Activation::kTanh: return std::tanh(v);
    case Activation::kRelu: return v > 0.0 ? v : 0.0;
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

double activation_derivative_from_output(Activation act, double y) {
  switch (act) {
    case Activation::kIdentity: return 1.0;
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kRelu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

void affine_forward(const Matrix& x, const Matrix& W, const Vector& b, Activation act, Matrix& out) {
  check_affine_shapes(x, W, b);
  out.resize(x.rows(), W.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < W.cols(); ++c) {
      double acc = b(c);
      for (Index k = 0; k < x.cols(); ++k) acc += x(r, k) * W(k, c);
      out(r, c) = activate(act, acc);
    }
  }
}

void affine_backward(const Matrix& x, const Matrix& W, Activation act, const Matrix& out, const Matrix& grad_out,
                     Matrix& grad_W, Vector& grad_b, Matrix* grad_x, bool grad_is_preactivation) {
  Matrix pre(out.rows(), out.cols());
  for (Index r = 0; r < out.rows(); ++r) {
    for (Index c = 0; c < out.cols(); ++c) {
      pre(r, c) = grad_is_preactivation ? grad_out(r, c)
                                        : grad_out(r, c) * activation_derivative_from_output(act, out(r, c));
    }
  }
  for (Index k = 0; k < x.cols(); ++k) {
    for (Index c = 0; c < out.cols(); ++c) {
      double acc = 0.0;
      for (Index r = 0; r < x.rows(); ++r) acc += x(r, k) * pre(r, c);
      grad_W(k, c) += acc;
    }
  }
  for (Index c = 0; c < out.cols(); ++c) {
    for (Index r = 0; r < out.rows(); ++r) grad_b(c) += pre(r, c);
  }
  if (grad_x) {
    grad_x->resize(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
      for (Index k = 0; k < x.cols(); ++k) {
        double acc = 0.0;
        for (Index c = 0; c < out.cols(); ++c) acc += pre(r, c) * W(k, c);
        (*grad_x)(r, k) = acc;
      }
    }
  }
}

void block_transpose(const Matrix& x, Index block_rows, Matrix& out) {
  if (block_rows <= 0 || x.rows() % block_rows != 0) throw DimensionError("block transpose: bad block size");
  const Index blocks = x.rows() / block_rows;
  out.resize(blocks * x.cols(), block_rows);
  for (Index b = 0; b < blocks; ++b) {
    for (Index i = 0; i < block_rows; ++i) {
      for (Index j = 0; j < x.cols(); ++j) out(b * x.cols() + j, i) = x(b * block_rows + i, j);
    }
  }
}

}  // namespace reference
}  // namespace dafc
