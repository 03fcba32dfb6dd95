// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dafc/error.hpp"

namespace dafc {
namespace {

// sup_{a in A} inf_{b in B} |a - b|, both non-empty.
double directed(std::span<const double> A, std::span<const double> B) {
  double worst = 0.0;
  for (double a : A) {
    double best = std::numeric_limits<double>::infinity();
    for (double b : B) best = std::min(best, std::abs(a - b));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

double hausdorff(std::span<const double> A, std::span<const double> B, double empty_penalty) {
  if (A.empty() && B.empty()) return 0.0;
  if (A.empty() || B.empty()) return empty_penalty;
  return std::max(directed(A, B), directed(B, A));
}

double record_distance(const EvalRecord& r, double empty_penalty) {
  return hausdorff(r.true_doas, r.est_doas, empty_penalty);
}

double rmsd(std::span<const EvalRecord> records, double empty_penalty) {
  if (records.empty()) throw InvalidArgument("rmsd of an empty record set");
  double sum = 0.0;
  for (const auto& r : records) {
    const double d = record_distance(r, empty_penalty);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(records.size()));
}

bool resolution_event(const EvalRecord& r, double tol) {
  if (r.true_doas.empty()) throw InvalidArgument("resolution event needs at least one true DOA");
  if (r.est_M() < r.true_M()) return false;
  // Slack of a few ulps so grid points exactly tol away count as resolved.
  const double limit = tol + 1e-12;
  for (double t : r.true_doas) {
    double best = std::numeric_limits<double>::infinity();
    for (double e : r.est_doas) best = std::min(best, std::abs(t - e));
    if (best > limit) return false;
  }
  return true;
}

double p_res(std::span<const EvalRecord> records, double tol) {
  if (records.empty()) throw InvalidArgument("p_res of an empty record set");
  std::size_t hits = 0;
  for (const auto& r : records) hits += resolution_event(r, tol) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

ConfusionMatrix::ConfusionMatrix(int max_true, int max_predicted)
    : max_true_(max_true),
      max_predicted_(max_predicted),
      counts_(static_cast<std::size_t>((max_true + 1) * (max_predicted + 1)), 0) {
  if (max_true < 1 || max_predicted < 0) throw InvalidArgument("confusion matrix bounds must be positive");
}

void ConfusionMatrix::add(int true_m, int predicted_m) {
  if (true_m < 0 || true_m > max_true_ || predicted_m < 0 || predicted_m > max_predicted_) {
    throw InvalidArgument("confusion entry (" + std::to_string(true_m) + ", " + std::to_string(predicted_m) +
                          ") outside the table");
  }
  ++counts_[static_cast<std::size_t>(true_m * (max_predicted_ + 1) + predicted_m)];
}

long long ConfusionMatrix::count(int true_m, int predicted_m) const {
  if (true_m < 0 || true_m > max_true_ || predicted_m < 0 || predicted_m > max_predicted_) return 0;
  return counts_[static_cast<std::size_t>(true_m * (max_predicted_ + 1) + predicted_m)];
}

long long ConfusionMatrix::row_total(int true_m) const {
  long long s = 0;
  for (int p = 0; p <= max_predicted_; ++p) s += count(true_m, p);
  return s;
}

std::string ConfusionMatrix::to_csv(bool normalized) const {
  std::ostringstream out;
  out.precision(6);
  out << "true_M";
  for (int p = 0; p <= max_predicted_; ++p) out << ",pred_" << p;
  out << ",n\n";
  for (int t = 1; t <= max_true_; ++t) {
    const long long n = row_total(t);
    out << t;
    for (int p = 0; p <= max_predicted_; ++p) {
      out << ',';
      if (normalized) {
        out << (n > 0 ? static_cast<double>(count(t, p)) / static_cast<double>(n) : 0.0);
      } else {
        out << count(t, p);
      }
    }
    out << ',' << n << '\n';
  }
  return out.str();
}

}  // namespace dafc
