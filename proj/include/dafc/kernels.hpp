// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

#include "dafc/types.hpp"

namespace dafc {

enum class Activation : std::uint8_t { kIdentity = 0, kTanh = 1, kRelu = 2, kSigmoid = 3 };

std::string_view activation_name(Activation a);
Activation activation_from_tag(std::uint8_t tag);

namespace kernels {

// Row-wise affine map with elementwise activation:
//   out = h(x * W + 1 b^T)
// x is N x D_in, W is D_in x D_out, b has D_out entries.
void affine_forward(const Matrix& x, const Matrix& W, const Vector& b, Activation act, Matrix& out);

// Backward of affine_forward given its output. Accumulates into grad_W and
// grad_b; writes grad_x when non-null. When grad_is_preactivation is set,
// grad_out is already d(loss)/d(pre-activation) and h' is skipped. grad_out
// is taken by value so callers done with it can move it in.
void affine_backward(const Matrix& x, const Matrix& W, Activation act, const Matrix& out, Matrix grad_out,
                     Matrix& grad_W, Vector& grad_b, Matrix* grad_x, bool grad_is_preactivation = false);

// x stacks B blocks of shape block_rows x C; out stacks their transposes,
// B blocks of shape C x block_rows.
void block_transpose(const Matrix& x, Index block_rows, Matrix& out);

// Applies h in place.
void activate(Activation act, Matrix& m);

}  // namespace kernels

// Plain loop versions of the kernels above. Kept as the test oracle for the
// parallel/vectorized path and as the benchmark baseline.
namespace reference {

void affine_forward(const Matrix& x, const Matrix& W, const Vector& b, Activation act, Matrix& out);
void affine_backward(const Matrix& x, const Matrix& W, Activation act, const Matrix& out, const Matrix& grad_out,
                     Matrix& grad_W, Vector& grad_b, Matrix* grad_x, bool grad_is_preactivation = false);
void block_transpose(const Matrix& x, Index block_rows, Matrix& out);
double activate(Activation act, double v);
double activation_derivative_from_output(Activation act, double y);

}  // namespace reference
}  // namespace dafc
