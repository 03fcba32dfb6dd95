// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dafc/error.hpp"

namespace dafc {

SampleCovariance sample_covariance(const CMatrix& X) {
  if (X.cols() < 1 || X.rows() < 1) throw InvalidArgument("sample covariance needs at least one snapshot");
  SampleCovariance out;
  out.K_used = X.cols();
  out.R = X * X.adjoint() / static_cast<double>(X.cols());
  // Exact Hermitian symmetry regardless of rounding in the product.
  out.R = (0.5 * (out.R + out.R.adjoint())).eval();
  return out;
}

double default_loading(const SampleCovariance& cov) {
  if (cov.K_used >= cov.R.rows()) return 0.0;
  return 1e-6 * cov.R.trace().real() / static_cast<double>(cov.R.rows());
}

std::vector<double> mvdr_spectrum(const SampleCovariance& cov, const AngularGrid& grid, double loading,
                                  const ArrayGeometry& geometry) {
  const Index L = cov.R.rows();
  if (L != geometry.num_sensors) throw DimensionError("covariance size does not match the array");
  if (loading < 0.0) throw InvalidArgument("diagonal loading must be non-negative");
  CMatrix R = cov.R;
  R.diagonal().array() += loading;
  Eigen::LLT<CMatrix> llt(R);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("MVDR: covariance is singular after loading " + std::to_string(loading));
  }
  const std::vector<double> thetas = grid.points();
  const CMatrix A = steering_matrix(thetas, geometry);
  const CMatrix RinvA = llt.solve(A);
  std::vector<double> p(thetas.size());
  for (Index i = 0; i < A.cols(); ++i) {
    const double q = A.col(i).dot(RinvA.col(i)).real();
    const double v = 1.0 / q;
    if (!(q > 0.0) || !std::isfinite(v)) throw NumericalError("MVDR: non-positive quadratic form");
    p[static_cast<std::size_t>(i)] = v;
  }
  return p;
}

DoaEstimate mvdr_estimate(std::span<const double> spectrum, const AngularGrid& grid, double peak_fraction) {
  if (static_cast<Index>(spectrum.size()) != grid.size()) throw DimensionError("spectrum length does not match grid");
  DoaEstimate est;
  if (spectrum.empty()) return est;
  const double top = *std::max_element(spectrum.begin(), spectrum.end());
  for (Index i : find_peaks(spectrum)) {
    const double v = spectrum[static_cast<std::size_t>(i)];
    if (v >= peak_fraction * top) {
      est.indices.push_back(i);
      est.angles.push_back(grid.point(i));
      est.values.push_back(v);
    }
  }
  return est;
}

SpatialSpectrum fc_forward(const CMatrix& X, const Network& fc_net, const AngularGrid& grid) {
  if (fc_net.spec().arch != Architecture::kFc) throw InvalidArgument("fc_forward needs an FC network");
  return fc_net.forward(X, grid);
}

std::vector<double> info_criterion_values(std::span<const double> eig, Index K, InfoCriterion c) {
  const auto L = static_cast<Index>(eig.size());
  if (L < 1 || K < 1) throw InvalidArgument("information criterion needs L >= 1 and K >= 1");
  const double top = eig.front();
  if (!(top > 0.0)) throw NumericalError("covariance has no positive eigenvalue");
  // Rank-deficient covariances (K < L) have exact zeros; floor them so the
  // logarithms stay finite.
  const double floor = 1e-12 * top;
  std::vector<double> out(static_cast<std::size_t>(L));
  for (Index k = 0; k < L; ++k) {
    const Index n = L - k;
    double log_sum = 0.0, sum = 0.0;
    for (Index i = k; i < L; ++i) {
      const double v = std::max(eig[static_cast<std::size_t>(i)], floor);
      log_sum += std::log(v);
      sum += v;
    }
    const double log_geo = log_sum / static_cast<double>(n);
    const double log_arith = std::log(sum / static_cast<double>(n));
    const double fit = -static_cast<double>(K) * static_cast<double>(n) * (log_geo - log_arith);
    const double dof = static_cast<double>(k) * static_cast<double>(2 * L - k);
    const double penalty = c == InfoCriterion::kMdl ? 0.5 * dof * std::log(static_cast<double>(K)) : dof;
    out[static_cast<std::size_t>(k)] = fit + penalty;
  }
  return out;
}

int enumerate_mdl_aic(const SampleCovariance& cov, Index K, InfoCriterion c) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(cov.R, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  std::vector<double> eig(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(eig.begin(), eig.end(), std::greater<>());
  const double tol = 1e-9 * std::max(std::abs(eig.front()), 1e-300);
  if (eig.back() < -tol) throw NumericalError("covariance is not positive semidefinite");
  const auto values = info_criterion_values(eig, K, c);
  // First minimum wins ties, which favours fewer sources.
  return static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
}

}  // namespace dafc
