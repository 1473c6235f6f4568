#pragma once

// Accumulator-based flip optimizer for {-1,+1} weights. Each weight carries a
// real accumulator m that integrates optimization signals; a weight flips when
// |m| exceeds the threshold with sign matching the weight, and its
// accumulator resets to zero.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "boolnet/bitcore.hpp"
#include "boolnet/rng.hpp"

namespace boolnet {

enum class EtaScheduleKind { Constant, Step };

struct EtaSchedule {
  EtaScheduleKind kind = EtaScheduleKind::Constant;
  double factor = 1.0;
  std::size_t period = 1;

  static EtaSchedule constant() { return {}; }
  static EtaSchedule step(double factor, std::size_t period) {
    return {EtaScheduleKind::Step, factor, period};
  }
};

enum class BetaMode { Adaptive, Constant };
enum class FlipMode { Deterministic, Stochastic };

struct OptimConfig {
  double eta0 = 0.1;
  EtaSchedule schedule;
  double tau = 1.0;
  std::optional<double> kappa;  // accumulator clip bound eta*kappa
  BetaMode beta_mode = BetaMode::Adaptive;
  double beta_value = 1.0;  // used in constant mode
  FlipMode flip_mode = FlipMode::Deterministic;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on bad values, including a kappa so small
  // that eta0*kappa < tau (no flip could ever occur).
  void validate() const;
};

// Learning rate at step t: constant, or eta0*factor^floor(t/period).
double eta_update(const OptimConfig& cfg, std::size_t t);

struct OptimState {
  std::vector<double> m;  // per-weight accumulators
  double beta = 1.0;
  std::uint64_t c_tot = 0;   // counters of the most recent step
  std::uint64_t c_kept = 0;
  std::size_t t = 0;

  OptimState() = default;
  explicit OptimState(std::size_t d) : m(d, 0.0) {}
};

struct StepStats {
  std::size_t flips = 0;
  double beta_next = 1.0;
  double eta = 0.0;  // learning rate used for this step
};

inline double clip_abs(double x, double lim) {
  return x > lim ? lim : (x < -lim ? -lim : x);
}

// Stochastic rounding to {-1,+1}: +1 with probability (1+v)/2 after clamping
// v to [-1,1]; conditionally unbiased on that interval.
inline double stochastic_sign(double v, const StreamRng& rng,
                              std::uint64_t counter) {
  double c = clip_abs(v, 1.0);
  return rng.uniform(counter) < 0.5 * (1.0 + c) ? 1.0 : -1.0;
}

// m <- beta*m + eta*q, then clipped elementwise to [-eta*kappa, eta*kappa]
// when kappa is set. eta comes from the schedule at state.t.
void accumulate(OptimState& state, std::span<const double> q,
                const OptimConfig& cfg);

// Deterministic rule: flip iff |m| > tau and sign(m) matches the weight sign.
// Stochastic rule: the new weight is a stochastic rounding of w - delta
// (delta = m when the deterministic gate holds, else 0), making the
// post-update weight conditionally unbiased; flip iff the draw differs
// from w. rng/counter are only consumed in stochastic mode.
bool flip_decision(bool w_bit, double m, const OptimConfig& cfg,
                   const StreamRng& rng, std::uint64_t counter);

// One optimizer step: accumulate, per-weight flip test (flip negates the
// weight and zeroes its accumulator), counter bookkeeping over this step
// only, then beta and t updates. Stochastic draws use counter state.t*d + i.
StepStats apply_step(BooleanTensor& w, OptimState& state,
                     std::span<const double> q, const OptimConfig& cfg,
                     const StreamRng& rng);
// Convenience overload drawing from StreamRng(cfg.seed, 0).
StepStats apply_step(BooleanTensor& w, OptimState& state,
                     std::span<const double> q, const OptimConfig& cfg);

}  // namespace boolnet
