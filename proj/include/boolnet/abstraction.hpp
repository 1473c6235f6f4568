#pragma once

// Continuous reformulation of the flip optimizer: two quantizers, a residual
// error carried between steps, and a rounding deviation term. Runs in real
// arithmetic on {-1,+1}-valued weights and reproduces the optimizer's
// trajectories exactly (see equivalence_check).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boolnet/optim.hpp"
#include "boolnet/rng.hpp"

namespace boolnet {

// Update quantizer: w*(relu(w*m - 1) + sgn(w*m - 1)/2 + 1/2) with
// sgn(0) = -1. Dichotomy: returns m exactly when |m| > 1 with sign(m)
// matching w, else (+/-)0.
double q1(double m, double w);

// Weight quantizer, deterministic: sign with sign(0) = +1.
double q0_deterministic(double v);

// Weight quantizer, stochastic rounding: +1 with probability (1+v)/2 after
// clamping v to [-1,1]; E[q0(v)] = v on that interval.
double q0_stochastic(double v, const StreamRng& rng, std::uint64_t counter);

enum class Q0Mode { Deterministic, Stochastic };

struct AbstractState {
  std::vector<double> w;  // entries exactly +-1
  std::vector<double> e;  // residual error, init 0
  std::vector<double> last_delta;
  std::vector<double> last_h;  // rounding deviation of the last step
  std::size_t t = 0;

  AbstractState() = default;
  // Validates that every entry of w0 is exactly +-1.
  explicit AbstractState(std::vector<double> w0);

  std::size_t size() const { return w.size(); }
};

struct AbstractStepStats {
  std::size_t flips = 0;
  double m_norm_sq = 0.0;     // ||m||^2 before quantization
  double e_norm_sq = 0.0;     // ||e'||^2 = ||m - delta||^2
  double h_norm_sq = 0.0;
  double delta_hat = 0.0;     // e_norm_sq / m_norm_sq, 0 when ||m|| = 0
};

// One step: m = eta*grad + e (clipped to +-m_clip when set), delta = q1(m,w),
// w' = q0(w - delta), e' = m - delta, h = w' - (w - delta). Stochastic draws
// use counter t*d + i on the given rng.
AbstractStepStats abstract_step(AbstractState& state,
                                std::span<const double> grad, double eta,
                                Q0Mode mode, const StreamRng& rng,
                                std::optional<double> m_clip = std::nullopt);

// Error-feedback sign descent, the degenerate instance of the same step:
// delta = step_size*sign(m) with sign(0)=+1, w' = w - delta (no rounding),
// e' = m - delta.
void sign_ef_step(std::vector<double>& w, std::vector<double>& e,
                  std::span<const double> grad, double eta, double step_size);

struct DivergenceReport {
  bool diverged = false;
  std::size_t step = 0;
  std::size_t coord = 0;
  std::string field;  // "weight" or "residual"
  double optimizer_value = 0.0;
  double abstract_value = 0.0;
};

// Runs the optimizer and the reformulation side by side on the same gradient
// stream and compares weights plus residual-vs-accumulator after every step.
// Requires constant beta = 1 and deterministic flips. gradient_stream fills
// the signal for step t. tau_offset shifts the optimizer-side threshold only
// (fault injection for exercising the divergence path).
DivergenceReport equivalence_check(
    const std::function<void(std::size_t t, std::span<double> grad)>&
        gradient_stream,
    std::size_t steps, std::size_t d, const OptimConfig& cfg,
    double tau_offset = 0.0);

}  // namespace boolnet
