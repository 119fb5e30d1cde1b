#include "cislunar/filters.hpp"

#include <sstream>

#include "cislunar/errors.hpp"

namespace cislunar {

void Diagnostics::note_condition(const char* where, double condition) {
  worst_condition = std::max(worst_condition, condition);
  if (condition > kConditionWarning) {
    std::ostringstream msg;
    msg << where << ": condition estimate " << condition;
    warnings.push_back(msg.str());
  }
}

namespace {

template <typename Factorization>
void report(Diagnostics* diagnostics, const char* where, const Factorization& f) {
  if (diagnostics == nullptr) return;
  const double rcond = f.rcond();
  diagnostics->note_condition(where, rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
}

// R^-1 H through a Cholesky solve.
Eigen::MatrixXd weighted(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R) {
  if (R.rows() != H.rows() || R.cols() != H.rows()) throw ValidationError("R must be m x m for an m-row H");
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) throw NumericalError("measurement covariance is not positive definite");
  return llt.solve(H);
}

}  // namespace

Covariance ekf_predict(const Covariance& P, const Matrix6& phi, const Matrix6& Q) {
  return symmetrized(phi * P * phi.transpose() + Q);
}

InformationMatrix eif_predict_noiseless(const InformationMatrix& info, const Matrix6& phi_back) {
  return symmetrized(phi_back.transpose() * info * phi_back);
}

InformationMatrix eif_predict_noisy(const InformationMatrix& info, const Matrix6& phi_back, const Matrix6& Q,
                                    Diagnostics* diagnostics) {
  const Matrix6 M = symmetrized(phi_back.transpose() * info * phi_back);
  Eigen::LLT<Matrix6> q_llt(Q);
  if (q_llt.info() != Eigen::Success) throw NumericalError("process noise Q must be positive definite");
  const Matrix6 Q_inv = q_llt.solve(Matrix6::Identity());
  const Matrix6 inner = symmetrized(Q_inv + M);
  Eigen::LDLT<Matrix6> ldlt(inner);
  if (ldlt.info() != Eigen::Success) throw NumericalError("Q^-1 + M factorization failed");
  report(diagnostics, "eif_predict_noisy", ldlt);
  return symmetrized(M - M * ldlt.solve(M));
}

EkfUpdate ekf_update(const Covariance& P_bar, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                     Diagnostics* diagnostics) {
  if (H.cols() != 6) throw ValidationError("H must have 6 columns");
  if (R.rows() != H.rows() || R.cols() != H.rows()) throw ValidationError("R must be m x m for an m-row H");
  const Eigen::MatrixXd PHt = P_bar * H.transpose();
  const Eigen::MatrixXd S = symmetrized(H * PHt + R);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() == 0.0) throw NumericalError("singular innovation covariance");
  report(diagnostics, "ekf_update", ldlt);
  EkfUpdate out;
  out.gain = ldlt.solve(PHt.transpose()).transpose();
  out.P = symmetrized((Matrix6::Identity() - out.gain * H) * P_bar);
  return out;
}

Vector6 ekf_mean_update(const Vector6& x_bar, const Eigen::MatrixXd& gain, const Eigen::VectorXd& innovation) {
  if (gain.rows() != 6 || gain.cols() != innovation.size()) throw ValidationError("gain/innovation size mismatch");
  return x_bar + gain * innovation;
}

InformationMatrix eif_update(const InformationMatrix& info_bar, const Eigen::MatrixXd& H, const Eigen::MatrixXd& R) {
  if (H.cols() != 6) throw ValidationError("H must have 6 columns");
  return symmetrized(info_bar + H.transpose() * weighted(H, R));
}

Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& A_inv, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C,
                                 const Eigen::MatrixXd& V, Diagnostics* diagnostics) {
  if (A_inv.rows() != A_inv.cols() || U.rows() != A_inv.rows() || C.rows() != U.cols() || C.cols() != V.rows() ||
      V.cols() != A_inv.cols()) {
    throw ValidationError("woodbury_inverse: incompatible shapes");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> c_lu(C);
  if (!c_lu.isInvertible()) throw NumericalError("woodbury_inverse: C is singular");
  const Eigen::MatrixXd AU = A_inv * U;
  const Eigen::MatrixXd inner = c_lu.inverse() + V * AU;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(inner);
  if (!(std::abs(lu.determinant()) > 0.0)) throw NumericalError("woodbury_inverse: singular inner matrix");
  report(diagnostics, "woodbury_inverse", lu);
  return A_inv - AU * lu.solve(V * A_inv);
}

MultistepInfo propagate_info_multistep(const InformationMatrix& prior, std::span<const InfoMeasurement> measurements,
                                       const Matrix6& phi_back_initial) {
  MultistepInfo out;
  out.prior = eif_predict_noiseless(prior, phi_back_initial);
  out.total = out.prior;
  out.contributions.reserve(measurements.size());
  for (const auto& m : measurements) {
    const Matrix6 gain = eif_update(InformationMatrix::Zero(), m.H, m.R);
    out.contributions.push_back(eif_predict_noiseless(gain, m.phi_back));
    out.total += out.contributions.back();
  }
  out.total = symmetrized(out.total);
  return out;
}

}  // namespace cislunar
