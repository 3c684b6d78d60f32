#include "odt/bandit.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <Eigen/LU>

#include "odt/common.hpp"
#include "odt/kvfile.hpp"

namespace odt {

const char* action_name(Action a) { return a == Action::Tx ? "TX" : "IDLE"; }

LinUcb::LinUcb(double delta) : delta_(delta), alpha_(alpha_for(delta)) {}

double LinUcb::alpha_for(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error("bandit delta must be in (0, 1)");
  return 1.0 + std::sqrt(std::log(2.0 / delta) / 2.0);
}

std::array<ArmScore, 2> LinUcb::scores(const Eigen::Vector2d& c) const {
  std::array<ArmScore, 2> out;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& arm = arms_[i];
    const double q = c.dot(arm.A_inv * c);
    out[i].estimated_reward = arm.theta.dot(c);
    out[i].ucb_width = alpha_ * std::sqrt(std::max(0.0, q));
  }
  return out;
}

Action LinUcb::select(const Eigen::Vector2d& c) const {
  const auto s = scores(c);
  return s[1].total() > s[0].total() ? Action::Tx : Action::Idle;
}

void LinUcb::refresh(ArmState& arm) {
  const double det = arm.A.determinant();
  if (!std::isfinite(det) || det <= 0.0) throw Error("bandit arm matrix is singular (internal corruption)");
  arm.A_inv = arm.A.inverse();
  arm.theta = arm.A_inv * arm.b;
}

void LinUcb::update(Action a, const Eigen::Vector2d& c, double reward) {
  if (!std::isfinite(reward)) throw Error("bandit reward must be finite");
  if (!c.allFinite()) throw Error("bandit context must be finite");
  auto& arm = arms_[static_cast<int>(a)];
  arm.A += c * c.transpose();
  arm.b += reward * c;
  ++arm.updates;
  refresh(arm);
}

namespace {
std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
}  // namespace

std::string LinUcb::snapshot() const {
  std::ostringstream out;
  out << "odt-bandit 1\ndelta " << num(delta_) << "\n";
  for (int i = 0; i < 2; ++i) {
    const auto& arm = arms_[i];
    out << "arm " << action_name(static_cast<Action>(i)) << ' ' << arm.updates << "\nA " << num(arm.A(0, 0)) << ' '
        << num(arm.A(0, 1)) << ' ' << num(arm.A(1, 0)) << ' ' << num(arm.A(1, 1)) << "\nb " << num(arm.b(0)) << ' '
        << num(arm.b(1)) << "\n";
  }
  return out.str();
}

LinUcb LinUcb::restore(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  auto next = [&]() {
    if (!(in >> word)) throw Error("bandit snapshot truncated");
    return word;
  };
  auto expect = [&](const std::string& w) {
    if (next() != w) throw Error("bandit snapshot: expected '" + w + "', got '" + word + "'");
  };
  auto real = [&]() { return parse_double(next(), "bandit snapshot value"); };
  expect("odt-bandit");
  expect("1");
  expect("delta");
  LinUcb bandit(real());
  for (int i = 0; i < 2; ++i) {
    expect("arm");
    expect(action_name(static_cast<Action>(i)));
    auto& arm = bandit.arms_[i];
    arm.updates = static_cast<long long>(real());
    expect("A");
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) arm.A(r, c) = real();
    }
    expect("b");
    arm.b(0) = real();
    arm.b(1) = real();
    refresh(arm);
  }
  return bandit;
}

}  // namespace odt
