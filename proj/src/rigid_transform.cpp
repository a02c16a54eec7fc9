#include "rigidda/rigid_transform.hpp"

#include <algorithm>
#include <cmath>

namespace rigidda {

ParamVector RigidParams::to_vector() const {
  ParamVector v;
  v << phi, theta, psi, t, t_task;
  return v;
}

RigidParams RigidParams::from_vector(const ParamVector& v) {
  RigidParams p;
  p.phi = v[kPhi];
  p.theta = v[kTheta];
  p.psi = v[kPsi];
  p.t = v.segment<3>(kTx);
  p.t_task = v.segment<3>(kTxTask);
  return p;
}

Eigen::Matrix3d rotation_x(double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  Eigen::Matrix3d r;
  r << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return r;
}

Eigen::Matrix3d rotation_y(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix3d r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

Eigen::Matrix3d rotation_z(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Eigen::Matrix3d r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

Eigen::Matrix3d euler_rotation(double phi, double theta, double psi) {
  return rotation_x(phi) * rotation_y(theta) * rotation_z(psi);
}

Affine rigid_affine(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Affine m = Affine::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = r * t;
  return m;
}

Affine rigid_affine_inverse(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Affine m = Affine::Identity();
  m.topLeftCorner<3, 3>() = r.transpose();
  m.topRightCorner<3, 1>() = -t;
  return m;
}

AffineSet euler_to_affine(const RigidParams& p) {
  const Eigen::Matrix3d r = euler_rotation(p.phi, p.theta, p.psi);
  return {rigid_affine(r, p.t), rigid_affine_inverse(r, p.t), rigid_affine(r, p.t_task),
          rigid_affine_inverse(r, p.t_task)};
}

namespace {

// Derivatives of the elementary rotations.
Eigen::Matrix3d d_rotation_x(double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  Eigen::Matrix3d r;
  r << 0, 0, 0,
       0, -s, -c,
       0, c, -s;
  return r;
}

Eigen::Matrix3d d_rotation_y(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix3d r;
  r << -s, 0, c,
       0, 0, 0,
       -c, 0, -s;
  return r;
}

Eigen::Matrix3d d_rotation_z(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Eigen::Matrix3d r;
  r << -s, -c, 0,
       c, -s, 0,
       0, 0, 0;
  return r;
}

}  // namespace

AffineJacobian affine_jacobian(const RigidParams& p) {
  const Eigen::Matrix3d rx = rotation_x(p.phi), ry = rotation_y(p.theta), rz = rotation_z(p.psi);
  const Eigen::Matrix3d r = rx * ry * rz;
  const std::array<Eigen::Matrix3d, 3> dr = {d_rotation_x(p.phi) * ry * rz,
                                             rx * d_rotation_y(p.theta) * rz,
                                             rx * ry * d_rotation_z(p.psi)};
  AffineJacobian j;
  for (int k = 0; k < kNumParams; ++k) {
    j.forward[k].setZero();
    j.inverse[k].setZero();
    j.task[k].setZero();
    j.task_inverse[k].setZero();
  }
  for (int a = 0; a < 3; ++a) {
    j.forward[a].topLeftCorner<3, 3>() = dr[a];
    j.forward[a].topRightCorner<3, 1>() = dr[a] * p.t;
    j.task[a].topLeftCorner<3, 3>() = dr[a];
    j.task[a].topRightCorner<3, 1>() = dr[a] * p.t_task;
    j.inverse[a].topLeftCorner<3, 3>() = dr[a].transpose();
    j.task_inverse[a].topLeftCorner<3, 3>() = dr[a].transpose();
  }
  for (int k = 0; k < 3; ++k) {
    j.forward[kTx + k].topRightCorner<3, 1>() = r.col(k);
    j.inverse[kTx + k](k, 3) = -1.0;
    j.task[kTxTask + k].topRightCorner<3, 1>() = r.col(k);
    j.task_inverse[kTxTask + k](k, 3) = -1.0;
  }
  return j;
}

ParamVector chain_matrix_gradient(const Eigen::Matrix<double, 3, 4>& grad,
                                  const std::array<Affine, kNumParams>& jac) {
  ParamVector g;
  for (int k = 0; k < kNumParams; ++k)
    g[k] = (grad.array() * jac[k].topRows<3>().array()).sum();
  return g;
}

RigidParams params_from_affine(const Affine& m) {
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  RigidParams p;
  p.theta = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  p.psi = std::atan2(-r(0, 1), r(0, 0));
  p.phi = std::atan2(-r(1, 2), r(2, 2));
  p.t = r.transpose() * m.topRightCorner<3, 1>();
  p.t_task = p.t;
  return p;
}

double rotation_determinant(const Affine& m) { return m.topLeftCorner<3, 3>().determinant(); }

bool is_rigid(const Affine& m, double tol) {
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  return (m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= tol &&
         (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace rigidda
