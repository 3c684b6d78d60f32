#pragma once

#include <array>
#include <string>

#include <Eigen/Core>

namespace odt {

enum class Action { Idle = 0, Tx = 1 };

const char* action_name(Action a);

/// Per-action ridge regression state: A = I + sum c c^T, b = sum r c.
struct ArmState {
  Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d A_inv = Eigen::Matrix2d::Identity();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  Eigen::Vector2d theta = Eigen::Vector2d::Zero();
  long long updates = 0;
};

struct ArmScore {
  double estimated_reward = 0.0;  // theta^T c
  double ucb_width = 0.0;         // alpha * sqrt(c^T A^-1 c)
  double total() const { return estimated_reward + ucb_width; }
};

/// LinUCB with disjoint linear arms over a 2-dimensional context.
class LinUcb {
 public:
  explicit LinUcb(double delta = 0.1);

  static double alpha_for(double delta);

  Action select(const Eigen::Vector2d& c) const;
  std::array<ArmScore, 2> scores(const Eigen::Vector2d& c) const;
  void update(Action a, const Eigen::Vector2d& c, double reward);

  const ArmState& arm(Action a) const { return arms_[static_cast<int>(a)]; }
  double alpha() const { return alpha_; }
  double delta() const { return delta_; }

  /// Versioned text snapshot of both arms (A and b); theta and A^-1 are
  /// recomputed on restore.
  std::string snapshot() const;
  static LinUcb restore(const std::string& text);

 private:
  static void refresh(ArmState& arm);

  double delta_;
  double alpha_;
  std::array<ArmState, 2> arms_;
};

}  // namespace odt
