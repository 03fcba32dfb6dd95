// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/autodiff.hpp"

#include <cmath>

#include "dafc/error.hpp"

namespace dafc {

AffineLayer::AffineLayer(std::string layer_name, Index in_dim, Index out_dim, Activation act)
    : name(std::move(layer_name)),
      W(Matrix::Zero(in_dim, out_dim)),
      b(Vector::Zero(out_dim)),
      activation(act),
      grad_W(Matrix::Zero(in_dim, out_dim)),
      grad_b(Vector::Zero(out_dim)) {
  if (in_dim <= 0 || out_dim <= 0) throw DimensionError("layer " + name + " needs positive dimensions");
}

void AffineLayer::init_uniform_fan(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index r = 0; r < W.rows(); ++r) {
    for (Index c = 0; c < W.cols(); ++c) W(r, c) = dist(rng);
  }
  b.setZero();
}

void AffineLayer::zero_grad() {
  grad_W.setZero(W.rows(), W.cols());
  grad_b.setZero(b.size());
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericalError("non-finite value in " + what);
}

Matrix affine_forward(const Matrix& Z, const AffineLayer& layer) {
  Matrix out;
  kernels::affine_forward(Z, layer.W, layer.b, layer.activation, out);
  require_finite(out, "output of layer " + layer.name);
  return out;
}

Graph::Node& Graph::at(NodeId id) {
  if (id >= nodes_.size()) throw StateError("graph node " + std::to_string(id) + " does not exist");
  return nodes_[id];
}

const Graph::Node& Graph::at(NodeId id) const {
  if (id >= nodes_.size()) throw StateError("graph node " + std::to_string(id) + " does not exist");
  return nodes_[id];
}

Graph::NodeId Graph::input(Matrix values, bool requires_grad) {
  require_finite(values, "graph input");
  Node n{Op::kInput, Tensor{std::move(values), {}, false}};
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Graph::NodeId Graph::affine(NodeId x, AffineLayer& layer) {
  // Finiteness is checked once at the loss rather than after every layer.
  Node n{Op::kAffine, Tensor{}};
  kernels::affine_forward(at(x).t.values, layer.W, layer.b, layer.activation, n.t.values);
  n.parent = x;
  n.layer = &layer;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Graph::NodeId Graph::block_transpose(NodeId x, Index block_rows) {
  Node n{Op::kBlockTranspose, Tensor{}};
  kernels::block_transpose(at(x).t.values, block_rows, n.t.values);
  n.parent = x;
  n.block_rows = block_rows;
  n.requires_grad = at(x).requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Graph::NodeId Graph::reshape(NodeId x, Index rows, Index cols) {
  const Matrix& src = at(x).t.values;
  if (rows * cols != src.size()) {
    throw DimensionError("reshape " + std::to_string(src.rows()) + "x" + std::to_string(src.cols()) + " to " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  Node n{Op::kReshape, Tensor{Eigen::Map<const Matrix>(src.data(), rows, cols), {}, false}};
  n.parent = x;
  n.requires_grad = at(x).requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

const AffineLayer* Graph::layer_of(NodeId id) const { return at(id).layer; }

const Matrix& Graph::value(NodeId id) const { return at(id).t.values; }

const Matrix& Graph::grad(NodeId id) const {
  const Node& n = at(id);
  if (!n.t.has_grad) throw StateError("node " + std::to_string(id) + " has no gradient; run backward first");
  return n.t.grad;
}

void Graph::accumulate(NodeId id, Matrix&& g) {
  Node& n = at(id);
  if (!n.requires_grad) return;
  if (n.t.has_grad) {
    n.t.grad += g;
  } else {
    n.t.grad = std::move(g);
    n.t.has_grad = true;
  }
}

void Graph::backward(NodeId output, const Matrix& seed_grad, Seed seed) {
  if (nodes_.empty() || output >= nodes_.size()) throw StateError("backward called before any forward pass");
  Node& out = nodes_[output];
  if (seed_grad.rows() != out.t.rows() || seed_grad.cols() != out.t.cols()) {
    throw DimensionError("backward seed gradient shape does not match the output");
  }
  if (seed == Seed::kPreActivation && out.op != Op::kAffine) {
    throw StateError("pre-activation seeding requires an affine output node");
  }
  require_finite(seed_grad, "loss gradient");
  for (auto& n : nodes_) {
    n.t.grad.resize(0, 0);
    n.t.has_grad = false;
  }
  out.t.grad = seed_grad;
  out.t.has_grad = true;

  for (NodeId id = output + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.t.has_grad || n.op == Op::kInput) continue;
    Node& parent = nodes_[n.parent];
    switch (n.op) {
      case Op::kAffine: {
        AffineLayer& layer = *n.layer;
        Matrix gx;
        const bool pre = seed == Seed::kPreActivation && id == output;
        kernels::affine_backward(parent.t.values, layer.W, layer.activation, n.t.values, std::move(n.t.grad),
                                 layer.grad_W, layer.grad_b, parent.requires_grad ? &gx : nullptr, pre);
        if (parent.requires_grad) accumulate(n.parent, std::move(gx));
        break;
      }
      case Op::kBlockTranspose: {
        // The inverse of a block transpose with blocks of r rows over c
        // columns is a block transpose with blocks of c rows.
        Matrix gx;
        kernels::block_transpose(n.t.grad, parent.t.cols(), gx);
        accumulate(n.parent, std::move(gx));
        break;
      }
      case Op::kReshape: {
        accumulate(n.parent, Eigen::Map<const Matrix>(n.t.grad.data(), parent.t.rows(), parent.t.cols()));
        break;
      }
      case Op::kInput: break;
    }
    // Intermediate gradients are not needed once propagated.
    if (id != output && n.op != Op::kInput) {
      n.t.grad.resize(0, 0);
      n.t.has_grad = false;
    }
  }
}

AdamState::AdamState(std::span<AffineLayer* const> layers, double learning_rate) : lr(learning_rate) {
  for (const AffineLayer* layer : layers) {
    m_W.push_back(Matrix::Zero(layer->W.rows(), layer->W.cols()));
    v_W.push_back(Matrix::Zero(layer->W.rows(), layer->W.cols()));
    m_b.push_back(Vector::Zero(layer->b.size()));
    v_b.push_back(Vector::Zero(layer->b.size()));
  }
}

void adam_step(std::span<AffineLayer* const> layers, AdamState& state) {
  if (state.m_W.size() != layers.size()) throw DimensionError("Adam state does not match the parameter list");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const AffineLayer& layer = *layers[i];
    if (state.m_W[i].rows() != layer.W.rows() || state.m_W[i].cols() != layer.W.cols() ||
        state.m_b[i].size() != layer.b.size()) {
      throw DimensionError("Adam moments do not match layer " + layer.name);
    }
    if (!layer.grad_W.allFinite() || !layer.grad_b.allFinite()) {
      throw NumericalError("non-finite gradient in parameter block " + layer.name);
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double step = state.lr / c1;
  const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v.array() = b2 * v.array() + (1.0 - b2) * grad.array().square();
    param.array() -= step * m.array() / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    AffineLayer& layer = *layers[i];
    update(layer.W, layer.grad_W, state.m_W[i], state.v_W[i]);
    update(layer.b, layer.grad_b, state.m_b[i], state.v_b[i]);
  }
}

LrScheduler::LrScheduler(double lr, int patience, double factor, double initial_best)
    : lr_(lr), patience_(patience), factor_(factor), best_(initial_best) {
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (patience < 1) throw InvalidArgument("scheduler patience must be at least 1");
  if (!(factor > 0.0 && factor < 1.0)) throw InvalidArgument("scheduler factor must lie in (0, 1)");
}

double LrScheduler::step(double metric) {
  if (!std::isfinite(metric)) throw NumericalError("scheduler received a non-finite metric");
  if (metric < best_) {
    best_ = metric;
    bad_ = 0;
  } else if (++bad_ >= patience_) {
    lr_ *= factor_;
    bad_ = 0;
    ++reductions_;
  }
  return lr_;
}

void LrScheduler::restore(double lr, double best, int bad, int reductions) {
  lr_ = lr;
  best_ = best;
  bad_ = bad;
  reductions_ = reductions;
}

}  // namespace dafc
