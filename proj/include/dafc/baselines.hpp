// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "dafc/array_sim.hpp"
#include "dafc/dafc_net.hpp"

namespace dafc {

struct SampleCovariance {
  CMatrix R;  // L x L, Hermitian PSD
  Index K_used = 0;
};

// R = (1/K) X X^H.
SampleCovariance sample_covariance(const CMatrix& X);

// 1e-6 tr(R)/L when fewer snapshots than sensors (R is then singular), else 0.
double default_loading(const SampleCovariance& cov);

// P(phi) = 1 / (a^H (R + loading I)^-1 a) on every grid point.
std::vector<double> mvdr_spectrum(const SampleCovariance& cov, const AngularGrid& grid, double loading,
                                  const ArrayGeometry& geometry = {});

// Fraction of the spectrum maximum a peak must reach to be reported.
inline constexpr double kMvdrPeakFraction = 0.1;

// Peaks (same semantics as find_peaks) with value >= peak_fraction * max.
DoaEstimate mvdr_estimate(std::span<const double> spectrum, const AngularGrid& grid,
                          double peak_fraction = kMvdrPeakFraction);

// Straightforward fully connected comparison network.
inline NetworkSpec fc_baseline_spec(int K, int L, Index d) { return NetworkSpec::fc_baseline(K, L, d); }

SpatialSpectrum fc_forward(const CMatrix& X, const Network& fc_net, const AngularGrid& grid);

enum class InfoCriterion { kMdl, kAic };

// Criterion value for every candidate k = 0..L-1 given eigenvalues sorted in
// descending order.
std::vector<double> info_criterion_values(std::span<const double> eigenvalues_desc, Index K, InfoCriterion c);

// argmin_k of the criterion computed from the eigenvalues of R.
int enumerate_mdl_aic(const SampleCovariance& cov, Index K, InfoCriterion c);

}  // namespace dafc
