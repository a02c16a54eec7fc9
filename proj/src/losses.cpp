#include "rigidda/losses.hpp"

#include "rigidda/reduce.hpp"

#include <cmath>
#include <sstream>

namespace rigidda {

std::string LossWeights::check() const {
  if (!(alpha1 > 0.0)) return "alpha1 must be positive";
  if (!(alpha2 >= 0.0)) return "alpha2 must be non-negative";
  if (alpha2 > 0.0 && !(alpha1 > alpha2)) return "alpha1 must exceed alpha2";
  if (!(w_seg >= 0.0)) return "w_seg must be non-negative";
  if (!(r > 0.0 && r < 1.0)) return "focus threshold r must lie in (0, 1)";
  if (!(tau > 0.0)) return "tau must be positive";
  if (!(smooth > 0.0)) return "smooth must be positive";
  return {};
}

void LossWeights::validate() const {
  if (auto msg = check(); !msg.empty()) throw std::invalid_argument(msg);
}

namespace {

void require_same_shape(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, const char* what) {
  if (q.rows() != g.rows() || q.cols() != g.cols() || q.cols() != kNumClasses) {
    std::ostringstream os;
    os << what << ": shape mismatch (" << q.rows() << "x" << q.cols() << " vs " << g.rows() << "x"
       << g.cols() << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

double bce(const Eigen::Ref<const Eigen::ArrayXd>& q, const Eigen::Ref<const Eigen::ArrayXd>& g,
           double eps) {
  if (q.size() != g.size()) throw std::invalid_argument("bce: shape mismatch");
  if (q.size() == 0) return 0.0;
  const Eigen::ArrayXd qc = q.max(eps).min(1.0 - eps);
  const Eigen::ArrayXd terms = g * qc.log() + (1.0 - g) * (1.0 - qc).log();
  return -pairwise_mean(terms);
}

double ce(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, double eps) {
  require_same_shape(q, g, "ce");
  double sum = 0.0;
  for (int j = 1; j < kNumClasses; ++j) sum += bce(q.col(j), g.col(j), eps);
  return sum / kNumForeground;
}

double soft_dice(const Eigen::Ref<const Eigen::ArrayXd>& q,
                 const Eigen::Ref<const Eigen::ArrayXd>& g, double smooth) {
  if (q.size() != g.size()) throw std::invalid_argument("soft_dice: shape mismatch");
  const Eigen::ArrayXd gq = g * q;
  return (2.0 * pairwise_sum(gq) + smooth) / (pairwise_sum(g) + pairwise_sum(q) + smooth);
}

double sdl(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, double smooth) {
  require_same_shape(q, g, "sdl");
  double sum = 0.0;
  for (int j = 1; j < kNumClasses; ++j) sum += soft_dice(q.col(j), g.col(j), smooth);
  return 1.0 - sum / kNumForeground;
}

double seg_loss(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, double w_seg, double smooth) {
  return w_seg * ce(q, g) + sdl(q, g, smooth);
}

Volume in_plane_weight(const GridGeometry& g) {
  const Eigen::Array3Xd u = normalized_lattice(g);
  Volume w(g, 0.0);
  w.data() = (1.0 - u.row(0).abs()).transpose() * (1.0 - u.row(1).abs()).transpose();
  return w;
}

double masked_mse(const SampleResult& a, const SampleResult& b, const Volume* weight) {
  if (!a.image.geometry().same_grid(b.image.geometry()))
    throw std::invalid_argument("masked_mse: grid mismatch");
  Eigen::ArrayXd m = b.validity.data().cast<double>();
  if (weight) {
    if (!weight->geometry().same_grid(b.image.geometry()))
      throw std::invalid_argument("masked_mse: weight grid mismatch");
    m *= weight->data();
  }
  const Eigen::ArrayXd d = (a.image.data() - b.image.data()) * m;
  return 0.5 * pairwise_mean(d.square());
}

std::int64_t focus_count(const ProbabilityVolume& q, double r) {
  return (q.q.rightCols<kNumForeground>() > r).count();
}

double focus_smooth(const ProbabilityVolume& q, double r, double tau, Eigen::ArrayXXd* grad) {
  if (!(tau > 0.0)) throw std::invalid_argument("focus_loss: tau must be positive");
  const double denom = double(kNumForeground) * double(q.q.rows());
  if (grad) grad->setZero(q.q.rows(), kNumClasses);
  if (denom == 0.0) return 0.0;
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-(q.q.rightCols<kNumForeground>() - r) / tau).exp());
  if (grad) grad->rightCols<kNumForeground>() = -s * (1.0 - s) / (tau * denom);
  // column sums first, each pairwise
  double total = 0.0;
  for (int j = 0; j < kNumForeground; ++j) total += pairwise_sum(s.col(j));
  return 1.0 - total / denom;
}

double focus_loss(const ProbabilityVolume& q, double r, FocusMode mode, double tau) {
  if (mode == FocusMode::Smooth) return focus_smooth(q, r, tau, nullptr);
  const double denom = double(kNumForeground) * double(q.q.rows());
  if (denom == 0.0) return 0.0;
  return 1.0 - double(focus_count(q, r)) / denom;
}

Eigen::ArrayXXd focus_loss_gradient(const ProbabilityVolume& q, double r, double tau) {
  Eigen::ArrayXXd g;
  focus_smooth(q, r, tau, &g);
  return g;
}

GroundTruth GroundTruth::from_forward(const Affine& m) {
  GroundTruth gt;
  gt.forward = m;
  if (is_rigid(m)) {
    const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
    gt.inverse = rigid_affine_inverse(r, r.transpose() * m.topRightCorner<3, 1>());
  } else {
    gt.inverse = m.inverse();
  }
  return gt;
}

GroundTruth GroundTruth::from_params(const RigidParams& p) {
  const AffineSet s = euler_to_affine(p);
  return {s.forward, s.inverse};
}

LossMode LossMode::parse(const std::string& name) {
  if (name == "baseline") return baseline();
  if (name == "cycle") return cycle_only();
  if (name == "cycle+focus") return cycle_focus();
  if (name == "full") return full();
  throw std::invalid_argument("unknown loss mode '" + name + "'");
}

std::string LossMode::name() const {
  if (!cycle && !in_plane && !focus) return "baseline";
  if (cycle && in_plane && !focus) return "cycle";
  if (cycle && !in_plane && focus) return "cycle+focus";
  if (cycle && in_plane && focus) return "full";
  std::string s = cycle ? "cycle" : "mse";
  if (in_plane) s += "+ip";
  if (focus) s += "+focus";
  return s;
}

PairObjective::PairObjective(const Volume& ax, const Volume& sax, const GroundTruth& gt,
                             LossMode mode, const LossWeights& weights, const TaskModule* task)
    : ax_(ax), sax_(sax), gt_(gt), mode_(mode), weights_(weights), task_(task) {
  weights_.validate();
  require_finite(ax, "ax volume");
  require_finite(sax, "sax volume");
  if (mode_.focus && !task_) throw std::invalid_argument("focus loss requires a task module");
  gt_fwd_ = transform_volume(ax_, gt_.forward, sax_.geometry());
  gt_bwd_ = transform_volume(sax_, gt_.inverse, ax_.geometry());
  mask_fwd_ = gt_fwd_.validity.data().cast<double>();
  mask_bwd_ = gt_bwd_.validity.data().cast<double>();
  if (mode_.in_plane) {
    mask_fwd_ *= in_plane_weight(sax_.geometry()).data();
    mask_bwd_ *= in_plane_weight(ax_.geometry()).data();
  }
  mask_fwd_ = mask_fwd_.square();
  mask_bwd_ = mask_bwd_.square();
}

LossReport PairObjective::evaluate(const RigidParams& params, ParamVector* grad) const {
  RigidParams p = params;
  if (!mode_.focus) p.t_task = p.t;
  const AffineSet m = euler_to_affine(p);
  const bool want_grad = grad != nullptr;
  AffineJacobian jac;
  if (want_grad) {
    jac = affine_jacobian(p);
    grad->setZero();
  }

  LossReport rep;
  rep.alpha1 = weights_.alpha1;
  rep.alpha2 = mode_.focus ? weights_.alpha2 : 0.0;
  rep.mode = mode_.name();

  // forward: T(I, M) vs T(I, M_hat) on J's grid
  {
    const SampleWithGradient s = transform_volume_with_gradient(ax_, m.forward, sax_.geometry());
    const Eigen::ArrayXd diff = s.sample.image.data() - gt_fwd_.image.data();
    const double n = double(diff.size());
    rep.cycle_fwd = 0.5 * pairwise_mean(diff.square() * mask_fwd_);
    if (want_grad) {
      const Eigen::ArrayXd up = weights_.alpha1 * diff * mask_fwd_ / n;
      *grad += chain_matrix_gradient(backprop_matrix(s, up), jac.forward);
    }
  }
  // backward: T(J, M^-1) vs T(J, M_hat^-1) on I's grid
  if (mode_.cycle) {
    const SampleWithGradient s = transform_volume_with_gradient(sax_, m.inverse, ax_.geometry());
    const Eigen::ArrayXd diff = s.sample.image.data() - gt_bwd_.image.data();
    const double n = double(diff.size());
    rep.cycle_bwd = 0.5 * pairwise_mean(diff.square() * mask_bwd_);
    if (want_grad) {
      const Eigen::ArrayXd up = weights_.alpha1 * diff * mask_bwd_ / n;
      *grad += chain_matrix_gradient(backprop_matrix(s, up), jac.inverse);
    }
  }
  rep.cycle = rep.cycle_fwd + rep.cycle_bwd;

  // task branch: focus on task(T(I, M_t))
  if (task_) {
    const SampleWithGradient s = transform_volume_with_gradient(ax_, m.task, task_->grid());
    const ProbabilityVolume q = task_->evaluate(s.sample.image);
    const bool focus_grad = want_grad && mode_.focus && weights_.alpha2 > 0.0;
    Eigen::ArrayXXd dq;
    rep.focus_exact = focus_loss(q, weights_.r, FocusMode::Exact);
    rep.focus_smooth = focus_smooth(q, weights_.r, weights_.tau, focus_grad ? &dq : nullptr);
    if (focus_grad) {
      dq *= weights_.alpha2;
      const Eigen::ArrayXd up = task_->backward(s.sample.image, q, dq);
      *grad += chain_matrix_gradient(backprop_matrix(s, up), jac.task);
    }
  }
  rep.total = rep.alpha1 * rep.cycle + rep.alpha2 * rep.focus_smooth;
  return rep;
}

double cycle_loss(const Volume& ax, const Volume& sax, const RigidParams& p, const GroundTruth& gt,
                  bool in_plane) {
  LossMode mode{true, in_plane, false};
  LossWeights w;
  w.alpha2 = 0.0;
  return PairObjective(ax, sax, gt, mode, w).evaluate(p).cycle;
}

LossReport total_loss(const Volume& ax, const Volume& sax, const RigidParams& p,
                      const GroundTruth& gt, const TaskModule& task, const LossWeights& weights,
                      LossMode mode) {
  return PairObjective(ax, sax, gt, mode, weights, &task).evaluate(p);
}

}  // namespace rigidda
