#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cislunar/cr3bp.hpp"
#include "cislunar/measurement.hpp"
#include "cislunar/types.hpp"

namespace cislunar {

/// Left Cauchy-Green tensor Phi Phi^T and its eigen-decomposition, largest
/// first. Eigenvector signs make the first nonzero component positive.
struct CgtReport {
  Matrix6 cgt = Matrix6::Identity();
  double sigma_max = 1.0;
  Vector6 v_cgt = Vector6::Unit(0);
  Vector6 spectrum = Vector6::Ones();
  /// Columns are the unit eigenvectors matching `spectrum`.
  Matrix6 eigenvectors = Matrix6::Identity();
};

CgtReport left_cgt(const Matrix6& phi);

/// phi_back^T H^T R^-1 H phi_back with phi_back = phi(t_k, t_L).
InformationMatrix propagated_info(const Matrix6& H, const Matrix6& R, const Matrix6& phi_back);

/// Right-singular vectors of R^-1/2 H (columns, sign-normalized) and the
/// matching eigenvalues of H^T R^-1 H, largest first.
struct InfoSpectrum {
  Vector6 values = Vector6::Zero();
  Matrix6 vectors = Matrix6::Identity();
};

InfoSpectrum info_spectrum(const Matrix6& H, const Matrix6& R);

/// <v_i, v_cgt> for the six right-singular vectors of R^-1/2 H.
Vector6 alignment_coefficients(const Matrix6& H, const Matrix6& R, const Vector6& v_cgt);

struct BoundsReport {
  /// sigma_max(phi^T H^T R^-1 H phi)
  double actual = 0.0;
  /// sigma_max(phi phi^T) * sum_{i<=4} alpha_i^2 sigma_i(H^T R^-1 H)
  double lower = 0.0;
  /// sigma_max(phi phi^T) * sigma_max(H^T R^-1 H)
  double upper = 0.0;
  Vector6 alphas = Vector6::Zero();
  Vector6 info_values = Vector6::Zero();
  double sigma_max_cgt = 1.0;
};

BoundsReport theorem1_bounds(const Matrix6& H, const Matrix6& R, const Matrix6& phi);

struct PerturbationCloud {
  /// Deviation at t_back projected on the first two left-CGT eigenvectors;
  /// one row per sample.
  Eigen::MatrixX2d projections;
  Eigen::Vector2d sample_std = Eigen::Vector2d::Zero();
  /// scale * sqrt(lambda_i(phi phi^T)) for the same two directions.
  Eigen::Vector2d predicted_std = Eigen::Vector2d::Zero();
  CgtReport cgt;
};

/// Draws n isotropic Gaussian perturbations of size `scale` around the
/// nominal state at t_ref (mt19937_64 seeded with `seed`), propagates each
/// to t_back and projects the deviation from the nominal.
PerturbationCloud backward_perturbation_samples(const Trajectory& nominal, double t_ref, double t_back, int n,
                                                double scale, std::uint64_t seed = 0);

struct DeformationPoint {
  double t = 0.0;
  double sigma_max = 1.0;
};

/// sigma_max of the left CGT of phi(t, t_ref) on each grid time.
std::vector<DeformationPoint> deformation_timeseries(const Trajectory& nominal, double t_ref,
                                                     std::span<const double> grid);

struct AnalysisRow {
  double t = 0.0;
  double sigma_max_cgt = 1.0;
  double bound_lower = 0.0;
  double bound_actual = 0.0;
  double bound_upper = 0.0;
  std::array<double, 4> alphas{};
};

/// Bounds time series for one observer-target pair: at each grid time the
/// target-only Jacobian is paired with phi_target(t, t_ref).
std::vector<AnalysisRow> pair_analysis(const Trajectory& observer, const Trajectory& target, const NoiseModel& noise,
                                       double t_ref, std::span<const double> grid);

/// Header t,sigma_max_cgt,bound_lower,bound_actual,bound_upper,alpha1..alpha4
/// and one row per entry, 17 significant digits.
std::string analysis_csv(const std::vector<AnalysisRow>& rows);

}  // namespace cislunar
