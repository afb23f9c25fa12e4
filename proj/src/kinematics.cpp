#include "cep/kinematics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cep {

ChainSpec::ChainSpec(std::vector<double> link_lengths, std::vector<JointLimit> joint_limits)
    : lengths_(std::move(link_lengths)), limits_(std::move(joint_limits)) {
  if (lengths_.empty()) {
    throw std::invalid_argument("chain needs at least one link");
  }
  if (limits_.size() != lengths_.size()) {
    throw std::invalid_argument("chain has " + std::to_string(lengths_.size()) +
                                " links but " + std::to_string(limits_.size()) +
                                " joint limits");
  }
  for (std::size_t i = 0; i < lengths_.size(); ++i) {
    if (!(lengths_[i] > 0.0) || !std::isfinite(lengths_[i])) {
      throw std::invalid_argument("link " + std::to_string(i) + " length must be positive");
    }
    if (!(limits_[i].lower < limits_[i].upper)) {
      throw std::invalid_argument("joint " + std::to_string(i) +
                                  " lower limit must be below upper limit");
    }
  }
}

double ChainSpec::reach() const {
  return std::accumulate(lengths_.begin(), lengths_.end(), 0.0);
}

Vec ChainSpec::lower_limits() const {
  Vec out(limits_.size());
  for (std::size_t i = 0; i < limits_.size(); ++i) out(i) = limits_[i].lower;
  return out;
}

Vec ChainSpec::upper_limits() const {
  Vec out(limits_.size());
  for (std::size_t i = 0; i < limits_.size(); ++i) out(i) = limits_[i].upper;
  return out;
}

void check_state(const ChainSpec &chain, const JointState &state) {
  const auto n = static_cast<Eigen::Index>(chain.num_joints());
  if (state.q.size() != n || state.qd.size() != n) {
    throw std::invalid_argument("joint state dimension does not match chain");
  }
  if (!state.q.allFinite() || !state.qd.allFinite()) {
    throw std::invalid_argument("joint state has non-finite entries");
  }
}

namespace {

void check_index(const ChainSpec &chain, const Vec &q, std::size_t link_index) {
  if (link_index >= chain.num_joints()) {
    throw std::out_of_range("link index " + std::to_string(link_index) +
                            " out of range for chain with " +
                            std::to_string(chain.num_joints()) + " links");
  }
  if (q.size() != static_cast<Eigen::Index>(chain.num_joints())) {
    throw std::invalid_argument("q dimension does not match chain");
  }
}

} // namespace

Vec2 forward_kinematics(const ChainSpec &chain, const Vec &q, std::size_t link_index,
                        double fraction) {
  check_index(chain, q, link_index);
  const auto &lengths = chain.link_lengths();
  Vec2 p = Vec2::Zero();
  double theta = 0.0;
  for (std::size_t i = 0; i <= link_index; ++i) {
    theta += q(static_cast<Eigen::Index>(i));
    const double l = (i == link_index) ? fraction * lengths[i] : lengths[i];
    p += l * Vec2(std::cos(theta), std::sin(theta));
  }
  return p;
}

Mat jacobian(const ChainSpec &chain, const Vec &q, std::size_t link_index, double fraction) {
  check_index(chain, q, link_index);
  const auto &lengths = chain.link_lengths();
  const auto n = static_cast<Eigen::Index>(chain.num_joints());
  const auto k = static_cast<Eigen::Index>(link_index);

  // Segment i contributes l_i (cos θ_i, sin θ_i); θ_i depends on joints 0..i.
  Mat segments(2, k + 1);
  double theta = 0.0;
  for (Eigen::Index i = 0; i <= k; ++i) {
    theta += q(i);
    const double l = (i == k) ? fraction * lengths[i] : lengths[i];
    segments(0, i) = -l * std::sin(theta);
    segments(1, i) = l * std::cos(theta);
  }

  Mat J = Mat::Zero(2, n);
  Vec2 tail = Vec2::Zero();
  for (Eigen::Index j = k; j >= 0; --j) {
    tail += segments.col(j);
    J.col(j) = tail;
  }
  return J;
}

TaskKinematics task_map(const ChainSpec &chain, const JointState &state, const Vec &qdd,
                        std::size_t link_index) {
  check_state(chain, state);
  if (qdd.size() != state.q.size()) {
    throw std::invalid_argument("joint acceleration dimension does not match chain");
  }
  const Mat J = jacobian(chain, state.q, link_index);
  return {forward_kinematics(chain, state.q, link_index), J * state.qd, J * qdd};
}

std::vector<Vec2> joint_positions(const ChainSpec &chain, const Vec &q) {
  if (q.size() != static_cast<Eigen::Index>(chain.num_joints())) {
    throw std::invalid_argument("q dimension does not match chain");
  }
  std::vector<Vec2> out;
  out.reserve(chain.num_joints() + 1);
  Vec2 p = Vec2::Zero();
  out.push_back(p);
  double theta = 0.0;
  for (std::size_t i = 0; i < chain.num_joints(); ++i) {
    theta += q(static_cast<Eigen::Index>(i));
    p += chain.link_lengths()[i] * Vec2(std::cos(theta), std::sin(theta));
    out.push_back(p);
  }
  return out;
}

} // namespace cep
