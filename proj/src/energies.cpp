#include "cep/energies.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cep {

namespace {

void require_positive(double v, const char *what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be positive");
  }
}

double energy_of(BarrierCase c) { return c == BarrierCase::Violating ? kNegInf : 0.0; }

// State-dependent part of the obstacle barrier.
struct ObstacleFrame {
  bool colliding = false;
  bool active = false; // inside γ and approaching
  Vec direction;       // unit vector robot -> obstacle
  double bound = 0.0;  // admissible projected accelerations are <= bound
  BarrierCase idle = BarrierCase::Inactive;
};

ObstacleFrame obstacle_frame(const ObstacleParams &p, const Vec &x_r, const Vec &xd) {
  ObstacleFrame f;
  const Vec diff = p.center - x_r;
  const double dist = diff.norm();
  if (dist - p.radius <= 0.0) {
    f.colliding = true;
    return f;
  }
  if (dist - p.radius > p.gamma) {
    f.idle = BarrierCase::Inactive;
    return f;
  }
  f.direction = diff / dist;
  const double xd_p = xd.dot(f.direction);
  if (xd_p <= p.approach_tolerance * (dist - p.radius) / p.gamma) {
    f.idle = BarrierCase::Receding;
    return f;
  }
  f.active = true;
  f.bound = -p.alpha * xd_p - p.beta;
  return f;
}

// Direction towards the nearer limit, or 0 when the joint is farther than γ.
struct LimitFrame {
  BarrierCase idle = BarrierCase::Inactive;
  bool active = false;
  double sign = 0.0;
  double bound = 0.0; // admissible sign * q̈ <= bound
};

LimitFrame limit_frame(const JointLimitParams &p, std::size_t joint, double q, double qd) {
  LimitFrame f;
  const auto &lim = p.limits.at(joint);
  const double to_lower = q - lim.lower;
  const double to_upper = lim.upper - q;
  const bool lower_nearer = std::abs(to_lower) <= std::abs(to_upper);
  const double q_l = lower_nearer ? lim.lower : lim.upper;
  const double d = q_l - q;
  if (std::abs(d) > p.gamma) {
    f.idle = BarrierCase::Inactive;
    return f;
  }
  double s;
  if (d != 0.0) {
    s = d > 0.0 ? 1.0 : -1.0;
  } else {
    s = lower_nearer ? -1.0 : 1.0;
  }
  const double tolerance = p.approach_tolerance * std::abs(d) / p.gamma;
  if (s * qd < 0.0 || (tolerance > 0.0 && s * qd <= tolerance)) {
    f.idle = BarrierCase::Receding;
    return f;
  }
  f.active = true;
  f.sign = s;
  f.bound = -p.alpha * s * qd - p.beta;
  return f;
}

} // namespace

void GoToParams::validate() const {
  if (target.size() == 0 || !target.allFinite()) throw std::invalid_argument("go-to target must be finite");
  require_positive(kp, "go-to K_p");
  require_positive(kv, "go-to K_v");
  require_positive(alpha, "go-to alpha");
  require_positive(variance_floor, "go-to variance floor");
}

void ObstacleParams::validate() const {
  if (center.size() == 0 || !center.allFinite()) throw std::invalid_argument("obstacle centre must be finite");
  if (!(radius >= 0.0)) throw std::invalid_argument("obstacle radius must be non-negative");
  require_positive(gamma, "obstacle gamma");
  require_positive(alpha, "obstacle alpha");
  require_positive(beta, "obstacle beta");
  if (!(approach_tolerance >= 0.0)) {
    throw std::invalid_argument("obstacle approach tolerance must be >= 0");
  }
}

void JointLimitParams::validate() const {
  if (limits.empty()) throw std::invalid_argument("joint-limit energy needs limits");
  for (const auto &l : limits) {
    if (!(l.lower < l.upper)) throw std::invalid_argument("joint limit lower must be below upper");
  }
  require_positive(gamma, "joint-limit gamma");
  require_positive(alpha, "joint-limit alpha");
  require_positive(beta, "joint-limit beta");
  if (!(approach_tolerance >= 0.0)) {
    throw std::invalid_argument("joint-limit approach tolerance must be >= 0");
  }
}

Vec goto_mean(const GoToParams &p, const Vec &x, const Vec &xd) {
  return -p.kp * (x - p.target) - p.kv * xd;
}

double goto_variance(const GoToParams &p, const Vec &x) {
  return std::max(p.alpha * (x - p.target).squaredNorm(), p.variance_floor);
}

double goto_energy(const GoToParams &p, const Vec &x, const Vec &xd, const Vec &xdd) {
  return -(xdd - goto_mean(p, x, xd)).squaredNorm() / (2.0 * goto_variance(p, x));
}

BarrierCase obstacle_case(const ObstacleParams &p, const Vec &x_r, const Vec &xd,
                          const Vec &xdd) {
  const ObstacleFrame f = obstacle_frame(p, x_r, xd);
  if (f.colliding) return BarrierCase::Violating;
  if (!f.active) return f.idle;
  return xdd.dot(f.direction) > f.bound ? BarrierCase::Violating : BarrierCase::Admissible;
}

double obstacle_energy(const ObstacleParams &p, const Vec &x_r, const Vec &xd, const Vec &xdd) {
  return energy_of(obstacle_case(p, x_r, xd, xdd));
}

BarrierCase joint_limit_case(const JointLimitParams &p, std::size_t joint, double q, double qd,
                             double qdd) {
  const LimitFrame f = limit_frame(p, joint, q, qd);
  if (!f.active) return f.idle;
  return f.sign * qdd > f.bound ? BarrierCase::Violating : BarrierCase::Admissible;
}

double joint_limit_energy(const JointLimitParams &p, const Vec &q, const Vec &qd,
                          const Vec &qdd) {
  if (q.size() != static_cast<Eigen::Index>(p.limits.size()) || qd.size() != q.size() ||
      qdd.size() != q.size()) {
    throw std::invalid_argument("joint-limit energy dimension mismatch");
  }
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (joint_limit_case(p, static_cast<std::size_t>(j), q(j), qd(j), qdd(j)) ==
        BarrierCase::Violating) {
      return kNegInf;
    }
  }
  return 0.0;
}

double gaussian_energy(const Vec &mean, const Mat &covariance, const Vec &action) {
  return GaussianEnergy(mean, covariance).value(action);
}

GoToEnergy::GoToEnergy(GoToParams params) : params_(std::move(params)) { params_.validate(); }

void GoToEnergy::evaluate(const LatentState &state, const Mat &actions,
                          Eigen::Ref<Vec> out) const {
  if (state.position.size() != params_.target.size() || actions.rows() != params_.target.size()) {
    throw std::invalid_argument("go-to energy dimension mismatch");
  }
  const Vec mu = goto_mean(params_, state.position, state.velocity);
  const double inv_two_var = 1.0 / (2.0 * goto_variance(params_, state.position));
  out = -(actions.colwise() - mu).colwise().squaredNorm().transpose() * inv_two_var;
}

ObstacleEnergy::ObstacleEnergy(ObstacleParams params) : params_(std::move(params)) {
  params_.validate();
}

void ObstacleEnergy::evaluate(const LatentState &state, const Mat &actions,
                              Eigen::Ref<Vec> out) const {
  if (state.position.size() != params_.center.size() || actions.rows() != params_.center.size()) {
    throw std::invalid_argument("obstacle energy dimension mismatch");
  }
  const ObstacleFrame f = obstacle_frame(params_, state.position, state.velocity);
  if (f.colliding) {
    out.setConstant(kNegInf);
    return;
  }
  if (!f.active) {
    out.setZero();
    return;
  }
  const Eigen::RowVectorXd projected = f.direction.transpose() * actions;
  for (Eigen::Index i = 0; i < actions.cols(); ++i) {
    out(i) = projected(i) > f.bound ? kNegInf : 0.0;
  }
}

bool ObstacleEnergy::is_trivial(const LatentState &state) const {
  const ObstacleFrame f = obstacle_frame(params_, state.position, state.velocity);
  return !f.colliding && !f.active;
}

JointLimitEnergy::JointLimitEnergy(JointLimitParams params) : params_(std::move(params)) {
  params_.validate();
}

void JointLimitEnergy::evaluate(const LatentState &state, const Mat &actions,
                                Eigen::Ref<Vec> out) const {
  const auto n = static_cast<Eigen::Index>(params_.limits.size());
  if (state.position.size() != n || actions.rows() != n) {
    throw std::invalid_argument("joint-limit energy dimension mismatch");
  }
  out.setZero();
  for (Eigen::Index j = 0; j < n; ++j) {
    const LimitFrame f =
        limit_frame(params_, static_cast<std::size_t>(j), state.position(j), state.velocity(j));
    if (!f.active) continue;
    for (Eigen::Index i = 0; i < actions.cols(); ++i) {
      if (f.sign * actions(j, i) > f.bound) out(i) = kNegInf;
    }
  }
}

bool JointLimitEnergy::is_trivial(const LatentState &state) const {
  for (Eigen::Index j = 0; j < state.position.size(); ++j) {
    if (limit_frame(params_, static_cast<std::size_t>(j), state.position(j), state.velocity(j))
            .active) {
      return false;
    }
  }
  return true;
}

GaussianEnergy::GaussianEnergy(Vec mean, const Mat &covariance)
    : mean_(std::move(mean)), covariance_(covariance) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
    throw std::invalid_argument("gaussian covariance dimension does not match mean");
  }
  if (!covariance_.isApprox(covariance_.transpose(), 1e-10)) {
    throw std::invalid_argument("gaussian covariance must be symmetric");
  }
  llt_.compute(covariance_);
  if (llt_.info() != Eigen::Success) {
    throw std::invalid_argument("gaussian covariance must be positive definite");
  }
}

double GaussianEnergy::value(const Vec &action) const {
  if (action.size() != mean_.size()) throw std::invalid_argument("gaussian energy dimension mismatch");
  const Vec diff = action - mean_;
  return -0.5 * diff.dot(llt_.solve(diff));
}

void GaussianEnergy::evaluate(const LatentState &, const Mat &actions,
                              Eigen::Ref<Vec> out) const {
  if (actions.rows() != mean_.size()) throw std::invalid_argument("gaussian energy dimension mismatch");
  // ‖L⁻¹(a - μ)‖² = (a - μ)ᵀ Σ⁻¹ (a - μ)
  Mat centred = actions.colwise() - mean_;
  llt_.matrixL().solveInPlace(centred);
  out = -0.5 * centred.colwise().squaredNorm().transpose();
}

DampingEnergy::DampingEnergy(double gain, double variance) : gain_(gain), variance_(variance) {
  require_positive(gain, "damping gain");
  require_positive(variance, "damping variance");
}

void DampingEnergy::evaluate(const LatentState &state, const Mat &actions,
                             Eigen::Ref<Vec> out) const {
  if (actions.rows() != state.velocity.size()) {
    throw std::invalid_argument("damping energy dimension mismatch");
  }
  const Vec mu = -gain_ * state.velocity;
  out = -(actions.colwise() - mu).colwise().squaredNorm().transpose() / (2.0 * variance_);
}

} // namespace cep
