#include "boolnet/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace boolnet {

void OptimConfig::validate() const {
  if (!(eta0 > 0.0) || !std::isfinite(eta0))
    throw std::invalid_argument("optimizer: eta0 must be positive and finite");
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("optimizer: tau must be positive and finite");
  if (schedule.kind == EtaScheduleKind::Step) {
    if (!(schedule.factor > 0.0) || !std::isfinite(schedule.factor))
      throw std::invalid_argument("optimizer: schedule factor must be positive");
    if (schedule.period == 0)
      throw std::invalid_argument("optimizer: schedule period must be >= 1");
  }
  if (kappa) {
    if (!(*kappa > 0.0) || !std::isfinite(*kappa))
      throw std::invalid_argument("optimizer: kappa must be positive");
    if (eta0 * *kappa < tau)
      throw std::invalid_argument(
          "optimizer: eta0*kappa < tau clips the accumulator below the flip "
          "threshold; no flip could ever occur");
  }
  if (beta_mode == BetaMode::Constant &&
      !(beta_value >= 0.0 && beta_value <= 1.0))
    throw std::invalid_argument("optimizer: constant beta must be in [0,1]");
}

double eta_update(const OptimConfig& cfg, std::size_t t) {
  if (cfg.schedule.kind == EtaScheduleKind::Constant) return cfg.eta0;
  double k = static_cast<double>(t / cfg.schedule.period);
  return cfg.eta0 * std::pow(cfg.schedule.factor, k);
}

void accumulate(OptimState& state, std::span<const double> q,
                const OptimConfig& cfg) {
  if (q.size() != state.m.size())
    throw std::invalid_argument("accumulate: signal shape mismatch (" +
                                std::to_string(q.size()) + " vs " +
                                std::to_string(state.m.size()) + ")");
  const double eta = eta_update(cfg, state.t);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!std::isfinite(q[i]))
      throw std::invalid_argument("accumulate: non-finite signal entry");
    double v = state.beta * state.m[i] + eta * q[i];
    if (cfg.kappa) v = clip_abs(v, eta * *cfg.kappa);
    state.m[i] = v;
  }
}

bool flip_decision(bool w_bit, double m, const OptimConfig& cfg,
                   const StreamRng& rng, std::uint64_t counter) {
  // |m| > tau with sign(m) matching the weight, as one signed comparison.
  bool gate = (w_bit ? m : -m) > cfg.tau;
  if (cfg.flip_mode == FlipMode::Deterministic) return gate;
  double w = w_bit ? 1.0 : -1.0;
  double delta = gate ? m : 0.0;
  return stochastic_sign(w - delta, rng, counter) != w;
}

StepStats apply_step(BooleanTensor& w, OptimState& state,
                     std::span<const double> q, const OptimConfig& cfg,
                     const StreamRng& rng) {
  if (w.size() != state.m.size())
    throw std::invalid_argument("apply_step: weight/state size mismatch");
  accumulate(state, q, cfg);

  const std::size_t d = state.m.size();
  StepStats stats;
  stats.eta = eta_update(cfg, state.t);
  state.c_tot = 0;
  state.c_kept = 0;
  for (std::size_t i = 0; i < d; ++i) {
    ++state.c_tot;
    if (flip_decision(w.get(i), state.m[i], cfg, rng,
                      static_cast<std::uint64_t>(state.t) * d + i)) {
      w.flip_bit(i);
      state.m[i] = 0.0;
      ++stats.flips;
    } else {
      ++state.c_kept;
    }
  }
  state.beta = cfg.beta_mode == BetaMode::Adaptive
                   ? (state.c_tot == 0
                          ? 1.0
                          : static_cast<double>(state.c_kept) /
                                static_cast<double>(state.c_tot))
                   : cfg.beta_value;
  stats.beta_next = state.beta;
  ++state.t;
  return stats;
}

StepStats apply_step(BooleanTensor& w, OptimState& state,
                     std::span<const double> q, const OptimConfig& cfg) {
  return apply_step(w, state, q, cfg, StreamRng(cfg.seed, 0));
}

}  // namespace boolnet
