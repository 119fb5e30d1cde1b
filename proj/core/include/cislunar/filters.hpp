#pragma once

#include <span>
#include <string>
#include <vector>

#include "cislunar/types.hpp"

namespace cislunar {

/// Warning channel for ill-conditioned solves. Conditioning above
/// kConditionWarning is recorded here rather than raised.
struct Diagnostics {
  std::vector<std::string> warnings;
  double worst_condition = 1.0;

  void note_condition(const char* where, double condition);
};

inline constexpr double kConditionWarning = 1e12;

/// Phi P Phi^T + Q
Covariance ekf_predict(const Covariance& P, const Matrix6& phi, const Matrix6& Q);

/// phi_back^T L phi_back, with phi_back = phi(t_{k-1}, t_k).
InformationMatrix eif_predict_noiseless(const InformationMatrix& info, const Matrix6& phi_back);

/// M - M (Q^-1 + M)^-1 M with M = phi_back^T L phi_back. Q must be SPD;
/// throws NumericalError otherwise.
InformationMatrix eif_predict_noisy(const InformationMatrix& info, const Matrix6& phi_back, const Matrix6& Q,
                                    Diagnostics* diagnostics = nullptr);

struct EkfUpdate {
  Covariance P;
  Eigen::MatrixXd gain;
};

/// Covariance-form update with gain K = P H^T (H P H^T + R)^-1 and
/// P = (I - K H) P. H is m x 6 and R is m x m. Throws NumericalError on a
/// singular innovation covariance.
EkfUpdate ekf_update(const Covariance& P_bar, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                     Diagnostics* diagnostics = nullptr);

/// x_bar + K (z - h(x_bar))
Vector6 ekf_mean_update(const Vector6& x_bar, const Eigen::MatrixXd& gain, const Eigen::VectorXd& innovation);

/// L_bar + H^T R^-1 H
InformationMatrix eif_update(const InformationMatrix& info_bar, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R);

/// (A + U C V)^-1 = A^-1 - A^-1 U (C^-1 + V A^-1 U)^-1 V A^-1
Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& A_inv, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C,
                                 const Eigen::MatrixXd& V, Diagnostics* diagnostics = nullptr);

/// One measurement for the closed-form information sum: phi_back maps the
/// evaluation epoch t_L back to the measurement epoch, phi(t_k, t_L).
struct InfoMeasurement {
  Matrix6 phi_back = Matrix6::Identity();
  Eigen::MatrixXd H;
  Eigen::MatrixXd R;
};

struct MultistepInfo {
  InformationMatrix total = InformationMatrix::Zero();
  /// phi(t_0, t_L)^T L_0 phi(t_0, t_L)
  InformationMatrix prior = InformationMatrix::Zero();
  /// phi_k^T H_k^T R_k^-1 H_k phi_k in input order.
  std::vector<InformationMatrix> contributions;
};

/// Noiseless information at t_L from a prior at t_0 and a batch of
/// measurements.
MultistepInfo propagate_info_multistep(const InformationMatrix& prior, std::span<const InfoMeasurement> measurements,
                                       const Matrix6& phi_back_initial);

}  // namespace cislunar
