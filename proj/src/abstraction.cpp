#include "boolnet/abstraction.hpp"

#include <cmath>
#include <stdexcept>

namespace boolnet {

double q1(double m, double w) {
  double z = w * m - 1.0;
  double relu = z > 0.0 ? z : 0.0;
  double sgn = z > 0.0 ? 1.0 : -1.0;
  return w * (relu + 0.5 * sgn + 0.5);
}

double q0_deterministic(double v) { return v < 0.0 ? -1.0 : 1.0; }

double q0_stochastic(double v, const StreamRng& rng, std::uint64_t counter) {
  return stochastic_sign(v, rng, counter);
}

AbstractState::AbstractState(std::vector<double> w0) : w(std::move(w0)) {
  for (double v : w)
    if (v != 1.0 && v != -1.0)
      throw std::invalid_argument(
          "AbstractState: weight entries must be exactly +-1");
  e.assign(w.size(), 0.0);
  last_delta.assign(w.size(), 0.0);
  last_h.assign(w.size(), 0.0);
}

AbstractStepStats abstract_step(AbstractState& state,
                                std::span<const double> grad, double eta,
                                Q0Mode mode, const StreamRng& rng,
                                std::optional<double> m_clip) {
  const std::size_t d = state.w.size();
  if (grad.size() != d)
    throw std::invalid_argument("abstract_step: gradient shape mismatch");

  AbstractStepStats stats;
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(grad[i]))
      throw std::invalid_argument("abstract_step: non-finite gradient entry");
    double m = eta * grad[i] + state.e[i];
    if (m_clip) m = clip_abs(m, *m_clip);
    double delta = q1(m, state.w[i]);
    double u = state.w[i] - delta;
    double w_next =
        mode == Q0Mode::Deterministic
            ? q0_deterministic(u)
            : q0_stochastic(u, rng,
                            static_cast<std::uint64_t>(state.t) * d + i);
    double h = w_next - u;
    double e_next = m - delta;

    if (w_next != state.w[i]) ++stats.flips;
    stats.m_norm_sq += m * m;
    stats.e_norm_sq += e_next * e_next;
    stats.h_norm_sq += h * h;

    state.w[i] = w_next;
    state.e[i] = e_next;
    state.last_delta[i] = delta;
    state.last_h[i] = h;
  }
  stats.delta_hat =
      stats.m_norm_sq == 0.0 ? 0.0 : stats.e_norm_sq / stats.m_norm_sq;
  ++state.t;
  return stats;
}

void sign_ef_step(std::vector<double>& w, std::vector<double>& e,
                  std::span<const double> grad, double eta, double step_size) {
  if (grad.size() != w.size() || e.size() != w.size())
    throw std::invalid_argument("sign_ef_step: shape mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    double m = eta * grad[i] + e[i];
    double delta = step_size * q0_deterministic(m);
    w[i] -= delta;
    e[i] = m - delta;
  }
}

DivergenceReport equivalence_check(
    const std::function<void(std::size_t t, std::span<double> grad)>&
        gradient_stream,
    std::size_t steps, std::size_t d, const OptimConfig& cfg,
    double tau_offset) {
  cfg.validate();
  if (cfg.beta_mode != BetaMode::Constant || cfg.beta_value != 1.0 ||
      cfg.flip_mode != FlipMode::Deterministic)
    throw std::invalid_argument(
        "equivalence_check: requires constant beta = 1 and deterministic "
        "flips");
  OptimConfig opt_cfg = cfg;
  opt_cfg.tau = cfg.tau + tau_offset;

  auto w_opt = BooleanTensor::filled({d}, true);
  OptimState st(d);
  AbstractState ab(std::vector<double>(d, 1.0));
  StreamRng rng(cfg.seed, 0);
  std::vector<double> grad(d);

  DivergenceReport report;
  for (std::size_t t = 0; t < steps; ++t) {
    gradient_stream(t, grad);
    const double eta = eta_update(cfg, t);
    apply_step(w_opt, st, grad, opt_cfg, rng);
    std::optional<double> clip;
    if (cfg.kappa) clip = eta * *cfg.kappa;
    abstract_step(ab, grad, eta, Q0Mode::Deterministic, rng, clip);

    for (std::size_t i = 0; i < d; ++i) {
      double wv = w_opt.get(i) ? 1.0 : -1.0;
      if (wv != ab.w[i]) {
        report.diverged = true;
        report.step = t;
        report.coord = i;
        report.field = "weight";
        report.optimizer_value = wv;
        report.abstract_value = ab.w[i];
        return report;
      }
      if (st.m[i] != ab.e[i]) {
        report.diverged = true;
        report.step = t;
        report.coord = i;
        report.field = "residual";
        report.optimizer_value = st.m[i];
        report.abstract_value = ab.e[i];
        return report;
      }
    }
  }
  return report;
}

}  // namespace boolnet
