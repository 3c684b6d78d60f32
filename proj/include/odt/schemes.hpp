#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "odt/bandit.hpp"
#include "odt/blackspot.hpp"
#include "odt/common.hpp"

namespace odt {

class KeyValueFile;

struct SchemeConfig {
  double delta_t_max = 120.0;  // s
  double w = 0.9;
  double omega = -1.0;  // punishment for exceeding the deadline
  double delta = 0.1;   // LinUCB confidence
  double periodic_interval = 10.0;
  double delta_t_min = 10.0;
  double cat_exponent = 1.0;
  double cat_phi_min = -10.0;  // SINR bounds, dB
  double cat_phi_max = 30.0;
  double s_star = 15.0;  // MBit/s
  double s_max = 40.0;   // MBit/s
  double q_learning_rate = 0.1;
  double discount = 0.0;
  double epsilon = 0.1;
  int s_bins = 20;
  int dt_bins = 12;

  void validate() const;
  /// Reads `scheme.*`-style keys (without the prefix).
  static SchemeConfig from(const KeyValueFile& kv, SchemeConfig defaults);
  static SchemeConfig from(const KeyValueFile& kv);
};

struct CatParams {
  double phi_min = 0.0;
  double phi_max = 1.0;
  double delta_t_min = 10.0;
  double delta_t_max = 120.0;
  double exponent = 1.0;
};

CatParams cat_params(const SchemeConfig& c);     // SINR metric
CatParams ml_cat_params(const SchemeConfig& c);  // predicted-rate metric on [0, S_max]

Action periodic_decide(double now, double last_tx, const SchemeConfig& config);
double cat_probability(double phi, double delta_t, const CatParams& p);
Action cat_decide(Rng& rng, double phi, double delta_t, const CatParams& p);

double q_update(double q, double reward, double alpha_lr);
double tx_reward(double s, double delta_t, const SchemeConfig& config);
double idle_reward(double delta_t, const SchemeConfig& config);

struct Efficiency {
  double e_s = 0.0;
  double e_aoi = 0.0;
};
Efficiency efficiency_indicators(double mean_rate, double mean_aoi, const SchemeConfig& config);

/// Bandit context: ((s_tilde - S*) / S_max, delta_t / delta_t_max).
Eigen::Vector2d bandit_context(double s_tilde, double delta_t, const SchemeConfig& config);

class QTable {
 public:
  QTable(double s_max, double delta_t_max, int s_bins = 20, int dt_bins = 12);

  std::size_t cell(double s_tilde, double delta_t) const;
  std::size_t cells() const { return q_.size() / 2; }
  double q(std::size_t cell, Action a) const { return q_[2 * cell + static_cast<std::size_t>(a)]; }
  void set(std::size_t cell, Action a, double v) { q_[2 * cell + static_cast<std::size_t>(a)] = v; }

  /// Epsilon-greedy; ties go to IDLE.
  Action decide(double s_tilde, double delta_t, double epsilon, Rng& rng) const;
  void learn(double s_tilde, double delta_t, Action a, double reward, double alpha_lr);
  const std::vector<double>& values() const { return q_; }

 private:
  double s_max_;
  double dt_max_;
  int s_bins_;
  int dt_bins_;
  std::vector<double> q_;
};

struct BsCbDecision {
  Action action = Action::Idle;
  Action selected = Action::Idle;
  bool forced = false;      // deadline override
  bool suppressed = false;  // TX postponed inside a black spot
};

BsCbDecision bscb_decide(const LinUcb& bandit, const BlackSpotMap& blackspots, Vec2 position, double s_tilde,
                         double delta_t, const SchemeConfig& config);

// --- agents -----------------------------------------------------------------

/// Everything an agent may observe at a decision slot.
struct DecisionContext {
  double now = 0.0;
  Vec2 position;
  double sinr = 0.0;
  double s_tilde = 0.0;  // predicted rate for the current buffer, MBit/s
  double delta_t = 0.0;  // age of the oldest buffered packet, s
};

class SchemeAgent {
 public:
  explicit SchemeAgent(SchemeConfig config) : config_(config) { config_.validate(); }
  virtual ~SchemeAgent() = default;

  virtual std::string name() const = 0;
  virtual std::unique_ptr<SchemeAgent> clone() const = 0;

  /// Called before the first slot of every epoch.
  virtual void begin_epoch(double start_time, double sample_interval);
  virtual Action decide(const DecisionContext& ctx, Rng& rng) = 0;
  /// Feedback for the action executed at the last decision; `achieved_rate`
  /// is the sampled rate of a TX and unused for IDLE.
  virtual void learn(const DecisionContext& ctx, Action executed, double achieved_rate);

  void set_learning(bool on) { learning_ = on; }
  bool learning() const { return learning_; }
  const SchemeConfig& config() const { return config_; }

 protected:
  SchemeConfig config_;
  bool learning_ = true;
};

class PeriodicAgent : public SchemeAgent {
 public:
  using SchemeAgent::SchemeAgent;
  std::string name() const override { return "periodic"; }
  std::unique_ptr<SchemeAgent> clone() const override { return std::make_unique<PeriodicAgent>(*this); }
  void begin_epoch(double start_time, double sample_interval) override;
  Action decide(const DecisionContext& ctx, Rng& rng) override;
  void learn(const DecisionContext& ctx, Action executed, double achieved_rate) override;

 private:
  double last_tx_ = 0.0;
};

class CatAgent : public SchemeAgent {
 public:
  /// ml = false: CAT on SINR; ml = true: ML-CAT on the predicted rate.
  CatAgent(SchemeConfig config, bool ml);
  std::string name() const override { return ml_ ? "ml-cat" : "cat"; }
  std::unique_ptr<SchemeAgent> clone() const override { return std::make_unique<CatAgent>(*this); }
  Action decide(const DecisionContext& ctx, Rng& rng) override;

 private:
  bool ml_;
  CatParams params_;
};

class RlCatAgent : public SchemeAgent {
 public:
  explicit RlCatAgent(SchemeConfig config);
  std::string name() const override { return "rl-cat"; }
  std::unique_ptr<SchemeAgent> clone() const override { return std::make_unique<RlCatAgent>(*this); }
  Action decide(const DecisionContext& ctx, Rng& rng) override;
  void learn(const DecisionContext& ctx, Action executed, double achieved_rate) override;
  const QTable& table() const { return table_; }

 private:
  QTable table_;
};

class BsCbAgent : public SchemeAgent {
 public:
  BsCbAgent(SchemeConfig config, std::shared_ptr<const BlackSpotMap> blackspots);
  std::string name() const override { return "bs-cb"; }
  std::unique_ptr<SchemeAgent> clone() const override { return std::make_unique<BsCbAgent>(*this); }
  Action decide(const DecisionContext& ctx, Rng& rng) override;
  void learn(const DecisionContext& ctx, Action executed, double achieved_rate) override;
  const LinUcb& bandit() const { return bandit_; }
  const BsCbDecision& last_decision() const { return last_; }

 private:
  LinUcb bandit_;
  std::shared_ptr<const BlackSpotMap> blackspots_;
  BsCbDecision last_;
};

const std::vector<std::string>& scheme_names();

/// `blackspots` is only consulted by bs-cb (an empty map disables gating).
std::unique_ptr<SchemeAgent> make_agent(const std::string& name, const SchemeConfig& config,
                                        std::shared_ptr<const BlackSpotMap> blackspots = nullptr);

}  // namespace odt
