// Rigid transforms from Euler angles: R = Rx(phi) * Ry(theta) * Rz(psi),
// M = R * T(t) for the cycle branch and M_t = R * T(t_t) for the task branch.
// All matrices act on normalized coordinates and map target points to source
// points (pull warping).
#pragma once

#include "rigidda/volume.hpp"

#include <array>

namespace rigidda {

inline constexpr int kNumParams = 9;
using ParamVector = Eigen::Matrix<double, kNumParams, 1>;

enum ParamIndex : int { kPhi = 0, kTheta, kPsi, kTx, kTy, kTz, kTxTask, kTyTask, kTzTask };

struct RigidParams {
  double phi = 0.0;
  double theta = 0.0;
  double psi = 0.0;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d t_task = Eigen::Vector3d::Zero();

  ParamVector to_vector() const;
  static RigidParams from_vector(const ParamVector& v);
  bool all_finite() const { return to_vector().allFinite(); }
};

Eigen::Matrix3d rotation_x(double phi);
Eigen::Matrix3d rotation_y(double theta);
Eigen::Matrix3d rotation_z(double psi);
Eigen::Matrix3d euler_rotation(double phi, double theta, double psi);

// Homogeneous [R, R t; 0 1].
Affine rigid_affine(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);
// Closed-form inverse of R*T: T^-1 * R^T = [R^T, -t; 0 1].
Affine rigid_affine_inverse(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

struct AffineSet {
  Affine forward;       // M = R T
  Affine inverse;       // M^-1
  Affine task;          // M_t = R T_t
  Affine task_inverse;  // M_t^-1
};

AffineSet euler_to_affine(const RigidParams& p);

// d(matrix)/d(param k) for all nine parameters; entries for parameters a
// matrix does not depend on are zero.
struct AffineJacobian {
  std::array<Affine, kNumParams> forward;
  std::array<Affine, kNumParams> inverse;
  std::array<Affine, kNumParams> task;
  std::array<Affine, kNumParams> task_inverse;
};

AffineJacobian affine_jacobian(const RigidParams& p);

// Contract a 3x4 gradient dL/dM (top rows of the matrix) with a Jacobian.
ParamVector chain_matrix_gradient(const Eigen::Matrix<double, 3, 4>& grad,
                                  const std::array<Affine, kNumParams>& jac);

inline Affine compose(const Affine& a, const Affine& b) { return a * b; }

// Decompose a rigid matrix into (phi, theta, psi, t) with M = Rx Ry Rz T(t).
// t_task is set equal to t. theta is taken in [-pi/2, pi/2].
RigidParams params_from_affine(const Affine& m);

double rotation_determinant(const Affine& m);
bool is_rigid(const Affine& m, double tol = 1e-9);

}  // namespace rigidda
