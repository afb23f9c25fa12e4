/**
 * @file kinematics.hpp
 * @brief Planar serial-link chains: forward kinematics, Jacobians and the
 *        configuration-to-task-space map used by the energy components.
 */

#ifndef CEP_KINEMATICS_HPP_
#define CEP_KINEMATICS_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace cep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

struct JointLimit {
  double lower;
  double upper;
};

/// Link lengths and joint limits of a planar revolute chain. Joint i rotates
/// link i relative to link i-1; link 0 is attached to the world origin.
class ChainSpec {
public:
  ChainSpec(std::vector<double> link_lengths, std::vector<JointLimit> joint_limits);

  std::size_t num_joints() const { return lengths_.size(); }
  const std::vector<double> &link_lengths() const { return lengths_; }
  const std::vector<JointLimit> &joint_limits() const { return limits_; }

  /// Sum of link lengths; no point of the chain is farther from the origin.
  double reach() const;

  Vec lower_limits() const;
  Vec upper_limits() const;

private:
  std::vector<double> lengths_;
  std::vector<JointLimit> limits_;
};

struct JointState {
  Vec q;
  Vec qd;

  static JointState at_rest(const Vec &q) { return {q, Vec::Zero(q.size())}; }
};

struct TaskState {
  Vec x;
  Vec xd;
};

/// Throws std::invalid_argument if the state does not fit the chain or has
/// non-finite entries.
void check_state(const ChainSpec &chain, const JointState &state);

/// World position of a point on link `link_index`. `fraction` = 1 is the link
/// tip, 0.5 its midpoint.
Vec2 forward_kinematics(const ChainSpec &chain, const Vec &q, std::size_t link_index,
                        double fraction = 1.0);

/// 2 x n analytic Jacobian of forward_kinematics. Columns past link_index are zero.
Mat jacobian(const ChainSpec &chain, const Vec &q, std::size_t link_index,
             double fraction = 1.0);

struct TaskKinematics {
  Vec x;
  Vec xd;
  Vec xdd;
};

/// (f(q), J q̇, J q̈). The J̇ q̇ term of the task acceleration is dropped.
TaskKinematics task_map(const ChainSpec &chain, const JointState &state, const Vec &qdd,
                        std::size_t link_index);

/// Positions of the base and every link tip, base first (n + 1 points).
std::vector<Vec2> joint_positions(const ChainSpec &chain, const Vec &q);

} // namespace cep

#endif // CEP_KINEMATICS_HPP_
