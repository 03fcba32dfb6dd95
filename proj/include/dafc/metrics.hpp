// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dafc/types.hpp"

namespace dafc {

// Distance charged when exactly one of the two sets is empty: the width of
// the field of view.
inline const double kEmptySetPenalty = deg2rad(120.0);

// Resolution tolerance on the angular error of each true DOA.
inline const double kResolutionTolerance = deg2rad(2.0);

// max(sup_a inf_b |a-b|, sup_b inf_a |a-b|). One empty set costs
// empty_penalty; two empty sets are at distance zero.
double hausdorff(std::span<const double> A, std::span<const double> B, double empty_penalty = kEmptySetPenalty);

struct EvalRecord {
  std::vector<double> true_doas;  // radians
  std::vector<double> est_doas;   // radians
  int true_M() const { return static_cast<int>(true_doas.size()); }
  int est_M() const { return static_cast<int>(est_doas.size()); }
};

double record_distance(const EvalRecord& r, double empty_penalty = kEmptySetPenalty);

// sqrt(mean of squared Hausdorff distances).
double rmsd(std::span<const EvalRecord> records, double empty_penalty = kEmptySetPenalty);

// 1 iff every true DOA has an estimate within tol and |est| >= |true|.
bool resolution_event(const EvalRecord& r, double tol = kResolutionTolerance);

double p_res(std::span<const EvalRecord> records, double tol = kResolutionTolerance);

class ConfusionMatrix {
 public:
  ConfusionMatrix(int max_true, int max_predicted);
  void add(int true_m, int predicted_m);
  void add(const EvalRecord& r) { add(r.true_M(), r.est_M()); }
  long long count(int true_m, int predicted_m) const;
  long long row_total(int true_m) const;
  int max_true() const { return max_true_; }
  int max_predicted() const { return max_predicted_; }
  // Rows true_m = 1..max_true, columns predicted 0..max_predicted, either
  // raw counts or row-normalized frequencies.
  std::string to_csv(bool normalized) const;

 private:
  int max_true_;
  int max_predicted_;
  std::vector<long long> counts_;
};

}  // namespace dafc
