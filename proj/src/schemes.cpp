#include "odt/schemes.hpp"

#include <algorithm>
#include <cmath>

#include "odt/kvfile.hpp"

namespace odt {

void SchemeConfig::validate() const {
  if (!(delta_t_max > 0.0)) throw Error("scheme: delta_t_max must be positive");
  if (!(w >= 0.0 && w <= 1.0)) throw Error("scheme: w must be in [0, 1]");
  if (!(delta_t_min >= 0.0 && delta_t_min < delta_t_max)) throw Error("scheme: need 0 <= delta_t_min < delta_t_max");
  if (!(cat_phi_min < cat_phi_max)) throw Error("scheme: need cat_phi_min < cat_phi_max");
  if (!(cat_exponent > 0.0)) throw Error("scheme: cat_exponent must be positive");
  if (!(periodic_interval > 0.0)) throw Error("scheme: periodic_interval must be positive");
  if (!(s_max > 0.0)) throw Error("scheme: s_max must be positive");
  if (!(s_star >= 0.0)) throw Error("scheme: s_star must be non-negative");
  if (!(q_learning_rate > 0.0 && q_learning_rate <= 1.0)) throw Error("scheme: q_learning_rate must be in (0, 1]");
  if (discount != 0.0) throw Error("scheme: discount must be 0 (simplified Q-learning)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error("scheme: epsilon must be in [0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw Error("scheme: delta must be in (0, 1)");
  if (!std::isfinite(omega)) throw Error("scheme: omega must be finite");
  if (s_bins < 1 || dt_bins < 1) throw Error("scheme: Q-table bin counts must be >= 1");
}

SchemeConfig SchemeConfig::from(const KeyValueFile& kv) { return from(kv, SchemeConfig{}); }

SchemeConfig SchemeConfig::from(const KeyValueFile& kv, SchemeConfig c) {
  c.delta_t_max = kv.get_double("delta_t_max", c.delta_t_max);
  c.w = kv.get_double("w", c.w);
  c.omega = kv.get_double("omega", c.omega);
  c.delta = kv.get_double("delta", c.delta);
  c.periodic_interval = kv.get_double("periodic_interval", c.periodic_interval);
  c.delta_t_min = kv.get_double("delta_t_min", c.delta_t_min);
  c.cat_exponent = kv.get_double("cat_exponent", c.cat_exponent);
  c.cat_phi_min = kv.get_double("cat_phi_min", c.cat_phi_min);
  c.cat_phi_max = kv.get_double("cat_phi_max", c.cat_phi_max);
  c.s_star = kv.get_double("s_star", c.s_star);
  c.s_max = kv.get_double("s_max", c.s_max);
  c.q_learning_rate = kv.get_double("q_learning_rate", c.q_learning_rate);
  c.discount = kv.get_double("discount", c.discount);
  c.epsilon = kv.get_double("epsilon", c.epsilon);
  c.s_bins = static_cast<int>(kv.get_int("s_bins", c.s_bins));
  c.dt_bins = static_cast<int>(kv.get_int("dt_bins", c.dt_bins));
  return c;
}

CatParams cat_params(const SchemeConfig& c) {
  return {c.cat_phi_min, c.cat_phi_max, c.delta_t_min, c.delta_t_max, c.cat_exponent};
}

CatParams ml_cat_params(const SchemeConfig& c) {
  return {0.0, c.s_max, c.delta_t_min, c.delta_t_max, c.cat_exponent};
}

Action periodic_decide(double now, double last_tx, const SchemeConfig& config) {
  return now - last_tx >= config.periodic_interval ? Action::Tx : Action::Idle;
}

double cat_probability(double phi, double delta_t, const CatParams& p) {
  if (delta_t < p.delta_t_min) return 0.0;
  if (delta_t > p.delta_t_max) return 1.0;
  const double clamped = std::clamp(phi, p.phi_min, p.phi_max);
  return std::pow((clamped - p.phi_min) / (p.phi_max - p.phi_min), p.exponent);
}

Action cat_decide(Rng& rng, double phi, double delta_t, const CatParams& p) {
  return uniform01(rng) < cat_probability(phi, delta_t, p) ? Action::Tx : Action::Idle;
}

double q_update(double q, double reward, double alpha_lr) { return (1.0 - alpha_lr) * q + alpha_lr * reward; }

double tx_reward(double s, double delta_t, const SchemeConfig& c) {
  return c.w * (s - c.s_star) / c.s_max + delta_t * (1.0 - c.w) / c.delta_t_max;
}

double idle_reward(double delta_t, const SchemeConfig& c) { return delta_t >= c.delta_t_max ? c.omega : 0.0; }

Efficiency efficiency_indicators(double mean_rate, double mean_aoi, const SchemeConfig& c) {
  if (!(c.s_star > 0.0)) throw Error("efficiency indicators need S* > 0");
  return {mean_rate / c.s_star, 1.0 - mean_aoi / c.delta_t_max};
}

Eigen::Vector2d bandit_context(double s_tilde, double delta_t, const SchemeConfig& c) {
  return {(s_tilde - c.s_star) / c.s_max, delta_t / c.delta_t_max};
}

// --- Q-table ----------------------------------------------------------------

QTable::QTable(double s_max, double delta_t_max, int s_bins, int dt_bins)
    : s_max_(s_max), dt_max_(delta_t_max), s_bins_(s_bins), dt_bins_(dt_bins) {
  if (!(s_max > 0.0) || !(delta_t_max > 0.0)) throw Error("Q-table ranges must be positive");
  if (s_bins < 1 || dt_bins < 1) throw Error("Q-table needs at least one bin per axis");
  q_.assign(2 * static_cast<std::size_t>(s_bins) * static_cast<std::size_t>(dt_bins), 0.0);
}

std::size_t QTable::cell(double s_tilde, double delta_t) const {
  auto bin = [](double v, double hi, int n) {
    const double idx = std::floor(v / hi * n);
    return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(n - 1)));
  };
  return bin(s_tilde, s_max_, s_bins_) * static_cast<std::size_t>(dt_bins_) + bin(delta_t, dt_max_, dt_bins_);
}

Action QTable::decide(double s_tilde, double delta_t, double epsilon, Rng& rng) const {
  if (epsilon > 0.0 && uniform01(rng) < epsilon) {
    return uniform01(rng) < 0.5 ? Action::Idle : Action::Tx;
  }
  const auto c = cell(s_tilde, delta_t);
  return q(c, Action::Tx) > q(c, Action::Idle) ? Action::Tx : Action::Idle;
}

void QTable::learn(double s_tilde, double delta_t, Action a, double reward, double alpha_lr) {
  const auto c = cell(s_tilde, delta_t);
  set(c, a, q_update(q(c, a), reward, alpha_lr));
}

// --- BS-CB ------------------------------------------------------------------

BsCbDecision bscb_decide(const LinUcb& bandit, const BlackSpotMap& blackspots, Vec2 position, double s_tilde,
                         double delta_t, const SchemeConfig& config) {
  BsCbDecision d;
  if (delta_t >= config.delta_t_max) {
    d.action = d.selected = Action::Tx;
    d.forced = true;
    return d;
  }
  d.selected = bandit.select(bandit_context(s_tilde, delta_t, config));
  d.action = d.selected;
  if (d.selected == Action::Tx && in_any_black_spot(blackspots, position)) {
    d.action = Action::Idle;
    d.suppressed = true;
  }
  return d;
}

// --- agents -----------------------------------------------------------------

void SchemeAgent::begin_epoch(double, double) {}
void SchemeAgent::learn(const DecisionContext&, Action, double) {}

void PeriodicAgent::begin_epoch(double start_time, double sample_interval) {
  last_tx_ = start_time - sample_interval;
}

Action PeriodicAgent::decide(const DecisionContext& ctx, Rng&) {
  return periodic_decide(ctx.now, last_tx_, config_);
}

void PeriodicAgent::learn(const DecisionContext& ctx, Action executed, double) {
  if (executed == Action::Tx) last_tx_ = ctx.now;
}

CatAgent::CatAgent(SchemeConfig config, bool ml)
    : SchemeAgent(config), ml_(ml), params_(ml ? ml_cat_params(config_) : cat_params(config_)) {}

Action CatAgent::decide(const DecisionContext& ctx, Rng& rng) {
  return cat_decide(rng, ml_ ? ctx.s_tilde : ctx.sinr, ctx.delta_t, params_);
}

RlCatAgent::RlCatAgent(SchemeConfig config)
    : SchemeAgent(config), table_(config_.s_max, config_.delta_t_max, config_.s_bins, config_.dt_bins) {}

Action RlCatAgent::decide(const DecisionContext& ctx, Rng& rng) {
  if (ctx.delta_t >= config_.delta_t_max) return Action::Tx;
  return table_.decide(ctx.s_tilde, ctx.delta_t, learning_ ? config_.epsilon : 0.0, rng);
}

void RlCatAgent::learn(const DecisionContext& ctx, Action executed, double achieved_rate) {
  if (!learning_) return;
  const double r = executed == Action::Tx ? tx_reward(achieved_rate, ctx.delta_t, config_)
                                          : idle_reward(ctx.delta_t, config_);
  table_.learn(ctx.s_tilde, ctx.delta_t, executed, r, config_.q_learning_rate);
}

BsCbAgent::BsCbAgent(SchemeConfig config, std::shared_ptr<const BlackSpotMap> blackspots)
    : SchemeAgent(config),
      bandit_(config_.delta),
      blackspots_(blackspots ? std::move(blackspots) : std::make_shared<const BlackSpotMap>()) {}

Action BsCbAgent::decide(const DecisionContext& ctx, Rng&) {
  last_ = bscb_decide(bandit_, *blackspots_, ctx.position, ctx.s_tilde, ctx.delta_t, config_);
  return last_.action;
}

void BsCbAgent::learn(const DecisionContext& ctx, Action executed, double achieved_rate) {
  if (!learning_) return;
  if (last_.suppressed && executed == Action::Idle) return;
  const double r = executed == Action::Tx ? tx_reward(achieved_rate, ctx.delta_t, config_)
                                          : idle_reward(ctx.delta_t, config_);
  bandit_.update(executed, bandit_context(ctx.s_tilde, ctx.delta_t, config_), r);
}

const std::vector<std::string>& scheme_names() {
  static const std::vector<std::string> names{"periodic", "cat", "ml-cat", "rl-cat", "bs-cb"};
  return names;
}

std::unique_ptr<SchemeAgent> make_agent(const std::string& name, const SchemeConfig& config,
                                        std::shared_ptr<const BlackSpotMap> blackspots) {
  if (name == "periodic") return std::make_unique<PeriodicAgent>(config);
  if (name == "cat") return std::make_unique<CatAgent>(config, false);
  if (name == "ml-cat") return std::make_unique<CatAgent>(config, true);
  if (name == "rl-cat") return std::make_unique<RlCatAgent>(config);
  if (name == "bs-cb") return std::make_unique<BsCbAgent>(config, std::move(blackspots));
  std::string valid;
  for (const auto& n : scheme_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error("unknown scheme '" + name + "' (valid: " + valid + ")");
}

}  // namespace odt
