#include "cislunar/info_analysis.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "cislunar/errors.hpp"
#include "cislunar/parallel.hpp"

namespace cislunar {

namespace {

// First component with magnitude above 1e-12 made positive.
void normalize_sign(Vector6& v) {
  for (int i = 0; i < 6; ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

Matrix6 inverse_sqrt(const Matrix6& R) {
  Eigen::SelfAdjointEigenSolver<Matrix6> eig(symmetrized(R));
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw NumericalError("noise covariance must be positive definite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

Matrix6 whitened(const Matrix6& H, const Matrix6& R) {
  // Diagonal R (the measurement model's) is inverted elementwise.
  if (R.isDiagonal(0.0)) {
    if (!(R.diagonal().minCoeff() > 0.0)) throw NumericalError("noise covariance must be positive definite");
    return R.diagonal().cwiseSqrt().cwiseInverse().asDiagonal() * H;
  }
  return inverse_sqrt(R) * H;
}

double sample_std(const Eigen::VectorXd& values) {
  const double mean = values.mean();
  return std::sqrt((values.array() - mean).square().sum() / static_cast<double>(values.size() - 1));
}

}  // namespace

CgtReport left_cgt(const Matrix6& phi) {
  CgtReport report;
  report.cgt = symmetrized(phi * phi.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix6> eig(report.cgt);
  if (eig.info() != Eigen::Success) throw NumericalError("Cauchy-Green eigen-decomposition failed");
  for (int i = 0; i < 6; ++i) {
    report.spectrum(i) = std::max(0.0, eig.eigenvalues()(5 - i));
    Vector6 v = eig.eigenvectors().col(5 - i);
    normalize_sign(v);
    report.eigenvectors.col(i) = v;
  }
  report.sigma_max = report.spectrum(0);
  report.v_cgt = report.eigenvectors.col(0);
  return report;
}

InformationMatrix propagated_info(const Matrix6& H, const Matrix6& R, const Matrix6& phi_back) {
  const Matrix6 S = whitened(H, R) * phi_back;
  return symmetrized(S.transpose() * S);
}

InfoSpectrum info_spectrum(const Matrix6& H, const Matrix6& R) {
  Eigen::JacobiSVD<Matrix6> svd(whitened(H, R), Eigen::ComputeFullV);
  InfoSpectrum out;
  out.values = svd.singularValues().cwiseAbs2();
  out.vectors = svd.matrixV();
  for (int i = 0; i < 6; ++i) {
    Vector6 v = out.vectors.col(i);
    normalize_sign(v);
    out.vectors.col(i) = v;
  }
  return out;
}

Vector6 alignment_coefficients(const Matrix6& H, const Matrix6& R, const Vector6& v_cgt) {
  return info_spectrum(H, R).vectors.transpose() * v_cgt;
}

BoundsReport theorem1_bounds(const Matrix6& H, const Matrix6& R, const Matrix6& phi) {
  const Matrix6 S = whitened(H, R);
  const CgtReport cgt = left_cgt(phi);
  const InfoSpectrum spectrum = info_spectrum(H, R);

  BoundsReport report;
  report.sigma_max_cgt = cgt.sigma_max;
  report.info_values = spectrum.values;
  report.alphas = spectrum.vectors.transpose() * cgt.v_cgt;
  double aligned = 0.0;
  for (int i = 0; i < 4; ++i) aligned += report.alphas(i) * report.alphas(i) * spectrum.values(i);
  report.lower = cgt.sigma_max * aligned;
  report.upper = cgt.sigma_max * spectrum.values(0);
  Eigen::JacobiSVD<Matrix6> svd(S * phi);
  report.actual = svd.singularValues()(0) * svd.singularValues()(0);
  return report;
}

PerturbationCloud backward_perturbation_samples(const Trajectory& nominal, double t_ref, double t_back, int n,
                                                double scale, std::uint64_t seed) {
  if (n < 2) throw ValidationError("need at least 2 perturbation samples");
  if (!(scale > 0.0)) throw ValidationError("perturbation scale must be positive");

  const StateVector reference = nominal.state_at(t_ref);
  const auto leg = propagate(reference, t_ref, t_back, nominal.params());
  PerturbationCloud cloud;
  cloud.cgt = left_cgt(leg.stm.phi);
  cloud.predicted_std << scale * std::sqrt(cloud.cgt.spectrum(0)), scale * std::sqrt(cloud.cgt.spectrum(1));

  // Draws happen up front so the cloud does not depend on thread scheduling.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector6> offsets(static_cast<std::size_t>(n));
  for (auto& offset : offsets) {
    for (int i = 0; i < 6; ++i) offset(i) = scale * normal(rng);
  }

  const Vector6 nominal_back = leg.state.stacked();
  cloud.projections.resize(n, 2);
  parallel_for(offsets.size(), [&](std::size_t s) {
    const StateVector start(reference.stacked() + offsets[s]);
    const Vector6 deviation = propagate_state(start, t_ref, t_back, nominal.params()).stacked() - nominal_back;
    const auto row = static_cast<Eigen::Index>(s);
    cloud.projections(row, 0) = cloud.cgt.eigenvectors.col(0).dot(deviation);
    cloud.projections(row, 1) = cloud.cgt.eigenvectors.col(1).dot(deviation);
  });
  cloud.sample_std << sample_std(cloud.projections.col(0)), sample_std(cloud.projections.col(1));
  return cloud;
}

std::vector<DeformationPoint> deformation_timeseries(const Trajectory& nominal, double t_ref,
                                                     std::span<const double> grid) {
  std::vector<DeformationPoint> series(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    series[i] = {grid[i], left_cgt(nominal.stm(grid[i], t_ref).phi).sigma_max};
  });
  return series;
}

std::vector<AnalysisRow> pair_analysis(const Trajectory& observer, const Trajectory& target, const NoiseModel& noise,
                                       double t_ref, std::span<const double> grid) {
  std::vector<AnalysisRow> rows(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const double t = grid[i];
    const Matrix6 H = jacobian_target(relative_state(observer.state_at(t), target.state_at(t)));
    const BoundsReport bounds = theorem1_bounds(H, noise.R, target.stm(t, t_ref).phi);
    AnalysisRow& row = rows[i];
    row.t = t;
    row.sigma_max_cgt = bounds.sigma_max_cgt;
    row.bound_lower = bounds.lower;
    row.bound_actual = bounds.actual;
    row.bound_upper = bounds.upper;
    for (int a = 0; a < 4; ++a) row.alphas[static_cast<std::size_t>(a)] = bounds.alphas(a);
  });
  return rows;
}

std::string analysis_csv(const std::vector<AnalysisRow>& rows) {
  std::ostringstream out;
  out << "t,sigma_max_cgt,bound_lower,bound_actual,bound_upper,alpha1,alpha2,alpha3,alpha4\n";
  out << std::setprecision(17);
  for (const auto& row : rows) {
    out << row.t << ',' << row.sigma_max_cgt << ',' << row.bound_lower << ',' << row.bound_actual << ','
        << row.bound_upper;
    for (double a : row.alphas) out << ',' << a;
    out << '\n';
  }
  return out.str();
}

}  // namespace cislunar
