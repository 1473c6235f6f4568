#include "boolnet/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace boolnet {

namespace {

std::vector<double> start_point(const std::vector<double>& w0, std::size_t d) {
  if (w0.empty()) return std::vector<double>(d, 1.0);
  if (w0.size() != d)
    throw std::invalid_argument("start point dimension mismatch");
  return w0;
}

double sample_se(double sum, double sumsq, std::size_t n) {
  if (n < 2) return 0.0;
  double mean = sum / static_cast<double>(n);
  double var =
      (sumsq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
  if (var < 0.0) var = 0.0;
  return std::sqrt(var / static_cast<double>(n));
}

}  // namespace

QuadraticObjective QuadraticObjective::diagonal(std::vector<double> diag,
                                                std::vector<double> b) {
  if (diag.size() != b.size())
    throw std::invalid_argument("quadratic: diag/b size mismatch");
  for (double v : diag)
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument("quadratic: diagonal must be >= 0");
  QuadraticObjective q(Matrix(0, 0), std::move(b));
  q.diagonal_ = true;
  q.diag_ = std::move(diag);
  return q;
}

QuadraticObjective::QuadraticObjective(Matrix a, std::vector<double> b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows != a_.cols)
    throw std::invalid_argument("quadratic: matrix must be square");
  if (a_.rows != 0 && a_.rows != b_.size())
    throw std::invalid_argument("quadratic: matrix/b size mismatch");
}

double QuadraticObjective::value(std::span<const double> w) const {
  const std::size_t d = dim();
  double quad = 0.0, lin = 0.0;
  if (diagonal_) {
    for (std::size_t i = 0; i < d; ++i) quad += diag_[i] * w[i] * w[i];
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += a_.at(i, j) * w[j];
      quad += w[i] * row;
    }
  }
  for (std::size_t i = 0; i < d; ++i) lin += b_[i] * w[i];
  return 0.5 * quad - lin;
}

void QuadraticObjective::gradient(std::span<const double> w,
                                  std::span<double> out) const {
  const std::size_t d = dim();
  if (diagonal_) {
    for (std::size_t i = 0; i < d; ++i) out[i] = diag_[i] * w[i] - b_[i];
    return;
  }
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += a_.at(i, j) * w[j];
    out[i] = row - b_[i];
  }
}

double QuadraticObjective::smoothness() const {
  if (diagonal_) {
    double m = 0.0;
    for (double v : diag_) m = std::max(m, v);
    return m;
  }
  // Power iteration; adequate for the dense instances used in tests.
  const std::size_t d = dim();
  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d))), av(d);
  double lambda = 0.0;
  for (int it = 0; it < 300; ++it) {
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += a_.at(i, j) * v[j];
      av[i] = row;
    }
    double norm = 0.0;
    for (double x : av) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    lambda = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      lambda += v[i] * av[i];
      v[i] = av[i] / norm;
    }
  }
  return lambda;
}

std::optional<double> QuadraticObjective::min_value() const {
  const std::size_t d = dim();
  if (diagonal_) {
    double f = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      if (diag_[i] > 0.0) {
        f -= b_[i] * b_[i] / (2.0 * diag_[i]);
      } else if (b_[i] != 0.0) {
        return std::nullopt;  // unbounded below along this axis
      }
    }
    return f;
  }
  // Cholesky solve A w = b; f* = -0.5 b'w.
  Matrix l(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a_.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (s <= 0.0) return std::nullopt;  // not positive definite
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  std::vector<double> y(d), x(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = b_[i];
    for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
    y[i] = s / l.at(i, i);
  }
  for (std::size_t ii = d; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < d; ++k) s -= l.at(k, ii) * x[k];
    x[ii] = s / l.at(ii, ii);
  }
  double f = 0.0;
  for (std::size_t i = 0; i < d; ++i) f += b_[i] * x[i];
  return -0.5 * f;
}

QuarticObjective::QuarticObjective(double scale, std::vector<double> c)
    : scale_(scale), c_(std::move(c)) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_))
    throw std::invalid_argument("quartic: scale must be positive");
}

double QuarticObjective::value(std::span<const double> w) const {
  double f = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) {
    double s = w[i] * w[i] - 1.0;
    f += scale_ * s * s + c_[i] * w[i];
  }
  return f;
}

void QuarticObjective::gradient(std::span<const double> w,
                                std::span<double> out) const {
  for (std::size_t i = 0; i < c_.size(); ++i)
    out[i] = 4.0 * scale_ * w[i] * (w[i] * w[i] - 1.0) + c_[i];
}

std::optional<double> QuarticObjective::min_value() const {
  // Separable: minimize s(x^2-1)^2 + c x per coordinate by coarse scan plus
  // Newton polish.
  double total = 0.0;
  for (double c : c_) {
    double best_x = -1.0, best_v = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 4000; ++k) {
      double x = -2.0 + static_cast<double>(k) * 1e-3;
      double s = x * x - 1.0;
      double v = scale_ * s * s + c * x;
      if (v < best_v) {
        best_v = v;
        best_x = x;
      }
    }
    double x = best_x;
    for (int it = 0; it < 50; ++it) {
      double g = 4.0 * scale_ * x * (x * x - 1.0) + c;
      double h = 4.0 * scale_ * (3.0 * x * x - 1.0);
      if (h <= 0.0) break;
      double step = g / h;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    double s = x * x - 1.0;
    double v = scale_ * s * s + c * x;
    total += std::min(v, best_v);
  }
  return total;
}

double error_feedback_bound(double delta, double eta, double sigma) {
  if (!(delta >= 0.0) || delta >= 1.0)
    throw std::domain_error(
        "error_feedback_bound: requires 0 <= delta < 1 (residual unbounded "
        "otherwise)");
  double om = 1.0 - delta;
  return 2.0 * delta * (1.0 + delta) / (om * om) * (eta * eta) *
         (sigma * sigma);
}

double flip_deviation_bound(double eta, double d, double kappa) {
  return eta * d * kappa;
}

double ConvergenceConstants::c_headline() const {
  double om = 1.0 - delta;
  return 4.0 * smoothness * smoothness * sigma_sq * delta / (om * om);
}

double ConvergenceConstants::c_derived() const {
  double om = 1.0 - delta;
  return 2.0 * smoothness * smoothness * sigma_sq * delta * (1.0 + delta) /
         (om * om);
}

double convergence_bound(const ConvergenceConstants& c, std::size_t T,
                         double eta, BoundForm form) {
  if (T < 1 || !(eta > 0.0))
    throw std::invalid_argument("convergence_bound: requires T >= 1, eta > 0");
  double t = static_cast<double>(T);
  if (form == BoundForm::Headline)
    return c.a_star() / (t * eta) + c.b_star() * eta +
           c.c_headline() * eta * eta + c.floor_headline();
  return c.a_star() / (eta * (t + 1.0)) + c.b_star() * eta +
         c.c_derived() * eta * eta + c.floor_derived();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

void write_trace_csv(std::ostream& os, std::span<const TraceRecord> trace) {
  os << "t,loss,grad_norm_sq,run_avg,flips,beta,e_sq,h_sq,delta_hat,eta\n";
  for (const auto& r : trace) {
    os << r.t << ',' << format_double(r.loss) << ','
       << format_double(r.grad_norm_sq) << ',' << format_double(r.run_avg)
       << ',' << r.flips << ',' << format_double(r.beta) << ','
       << format_double(r.e_sq) << ',' << format_double(r.h_sq) << ','
       << format_double(r.delta_hat) << ',' << format_double(r.eta) << '\n';
  }
}

RunResult run_convergence_experiment(const Objective& obj,
                                     const RunConfig& cfg) {
  cfg.optim.validate();
  const std::size_t d = obj.dim();
  auto w0 = start_point(cfg.w0, d);

  StreamRng noise_rng(cfg.optim.seed, 2 * cfg.stream);
  StreamRng flip_rng(cfg.optim.seed, 2 * cfg.stream + 1);

  RunResult result;
  result.trace.reserve(cfg.steps);
  std::vector<double> grad(d), noisy(d);
  double run_sum = 0.0;

  auto record_iterate = [&](std::span<const double> w, std::size_t t,
                            TraceRecord& rec) {
    double loss = obj.value(w);
    obj.gradient(w, grad);
    double gsq = 0.0;
    bool finite = std::isfinite(loss);
    for (double g : grad) {
      gsq += g * g;
      finite = finite && std::isfinite(g);
    }
    if (!finite) return false;
    result.max_grad_sq = std::max(result.max_grad_sq, gsq);
    run_sum += gsq;
    rec.t = t;
    rec.loss = loss;
    rec.grad_norm_sq = gsq;
    rec.run_avg = run_sum / static_cast<double>(t + 1);
    return true;
  };

  auto add_noise = [&](std::size_t t) {
    for (std::size_t i = 0; i < d; ++i)
      noisy[i] = grad[i] + cfg.sigma_noise * noise_rng.normal(t * d + i);
  };

  if (cfg.driver == Driver::Abstraction) {
    AbstractState st(w0);
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      TraceRecord rec;
      if (!record_iterate(st.w, t, rec)) {
        result.aborted = true;
        break;
      }
      add_noise(t);
      double eta = eta_update(cfg.optim, t);
      std::optional<double> clip;
      if (cfg.optim.kappa) clip = eta * *cfg.optim.kappa;
      auto stats = abstract_step(st, noisy, eta, cfg.q0_mode, flip_rng, clip);
      rec.flips = stats.flips;
      rec.beta = 1.0;
      rec.e_sq = stats.e_norm_sq;
      rec.h_sq = stats.h_norm_sq;
      rec.delta_hat = stats.delta_hat;
      rec.eta = eta;
      result.trace.push_back(rec);
      if (stats.m_norm_sq > 0.0) {
        result.delta_hat_max = std::max(result.delta_hat_max, stats.delta_hat);
        if (stats.e_norm_sq == stats.m_norm_sq) result.delta_one_seen = true;
      }
    }
    result.w_final = st.w;
    return result;
  }

  std::vector<int> signs(d);
  for (std::size_t i = 0; i < d; ++i) signs[i] = w0[i] > 0.0 ? 1 : -1;
  auto wt = BooleanTensor::from_signs({d}, signs);
  OptimState st(d);
  std::vector<double> wv(d), m_hat(d);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    for (std::size_t i = 0; i < d; ++i) wv[i] = wt.sign(i);
    TraceRecord rec;
    if (!record_iterate(wv, t, rec)) {
      result.aborted = true;
      break;
    }
    add_noise(t);
    double eta = eta_update(cfg.optim, t);
    // Pre-image of the accumulator update, for the compression ratio.
    double m_hat_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double v = st.beta * st.m[i] + eta * noisy[i];
      if (cfg.optim.kappa) v = clip_abs(v, eta * *cfg.optim.kappa);
      m_hat[i] = v;
      m_hat_sq += v * v;
    }
    auto w_before = wt;
    auto stats = apply_step(wt, st, noisy, cfg.optim, flip_rng);
    double e_sq = 0.0, h_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      e_sq += st.m[i] * st.m[i];
      bool gate = (w_before.get(i) ? m_hat[i] : -m_hat[i]) > cfg.optim.tau;
      double delta = gate ? m_hat[i] : 0.0;
      double u = static_cast<double>(w_before.sign(i)) - delta;
      double h = static_cast<double>(wt.sign(i)) - u;
      h_sq += h * h;
    }
    rec.flips = stats.flips;
    rec.beta = stats.beta_next;
    rec.e_sq = e_sq;
    rec.h_sq = h_sq;
    rec.delta_hat = m_hat_sq == 0.0 ? 0.0 : e_sq / m_hat_sq;
    rec.eta = eta;
    result.trace.push_back(rec);
    if (m_hat_sq > 0.0) {
      result.delta_hat_max = std::max(result.delta_hat_max, rec.delta_hat);
      if (e_sq == m_hat_sq) result.delta_one_seen = true;
    }
  }
  result.w_final.resize(d);
  for (std::size_t i = 0; i < d; ++i) result.w_final[i] = wt.sign(i);
  return result;
}

ArgminResult boolean_argmin(const Objective& obj) {
  const std::size_t d = obj.dim();
  if (d > 20)
    throw std::invalid_argument(
        "boolean_argmin: enumeration limited to d <= 20");
  auto lex_less = [](const std::vector<double>& a,
                     const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] != b[i]) return a[i] < b[i];
    return false;
  };
  ArgminResult best;
  best.value = std::numeric_limits<double>::infinity();
  std::vector<double> w(d);
  for (std::uint64_t code = 0; code < (1ULL << d); ++code) {
    for (std::size_t i = 0; i < d; ++i)
      w[i] = (code >> i) & 1 ? 1.0 : -1.0;
    double v = obj.value(w);
    if (v < best.value) {
      best.value = v;
      best.w = w;
      best.tie = false;
    } else if (v == best.value) {
      best.tie = true;
      if (lex_less(w, best.w)) best.w = w;
    }
  }
  return best;
}

CheckReport validate_error_feedback(const Objective& obj,
                                    const ValidationConfig& cfg) {
  const std::size_t d = obj.dim();
  auto w0 = start_point(cfg.w0, d);
  std::vector<double> sum_e(cfg.steps, 0.0), sumsq_e(cfg.steps, 0.0);
  std::vector<double> grad(d), noisy(d);
  double delta_hat_max = 0.0, max_grad_sq = 0.0;
  bool delta_one = false;

  for (std::size_t r = 0; r < cfg.trials; ++r) {
    AbstractState st(w0);
    StreamRng noise_rng(cfg.seed, 2 * r);
    StreamRng flip_rng(cfg.seed, 2 * r + 1);
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      obj.gradient(st.w, grad);
      double gsq = 0.0;
      for (double g : grad) gsq += g * g;
      max_grad_sq = std::max(max_grad_sq, gsq);
      for (std::size_t i = 0; i < d; ++i)
        noisy[i] = grad[i] + cfg.sigma_noise * noise_rng.normal(t * d + i);
      std::optional<double> clip;
      if (cfg.kappa) clip = cfg.eta * *cfg.kappa;
      auto stats =
          abstract_step(st, noisy, cfg.eta, cfg.q0_mode, flip_rng, clip);
      sum_e[t] += stats.e_norm_sq;
      sumsq_e[t] += stats.e_norm_sq * stats.e_norm_sq;
      if (stats.m_norm_sq > 0.0) {
        delta_hat_max = std::max(delta_hat_max, stats.delta_hat);
        if (stats.e_norm_sq == stats.m_norm_sq) delta_one = true;
      }
    }
  }

  std::size_t arg_t = 0;
  double measured = 0.0;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    double mean = sum_e[t] / static_cast<double>(cfg.trials);
    if (mean >= measured) {
      measured = mean;
      arg_t = t;
    }
  }
  CheckReport rep;
  rep.check = "error_feedback";
  rep.measured = measured;
  rep.delta_hat = delta_hat_max;
  rep.se = sample_se(sum_e[arg_t], sumsq_e[arg_t], cfg.trials);
  double sigma_total = std::sqrt(max_grad_sq + static_cast<double>(d) *
                                                   cfg.sigma_noise *
                                                   cfg.sigma_noise);
  if (delta_one || delta_hat_max >= 1.0) {
    rep.status = "inconclusive";
    rep.bound = std::numeric_limits<double>::infinity();
    rep.margin = std::numeric_limits<double>::infinity();
    rep.note =
        "compressor assumption violated: some step kept all accumulator mass "
        "(delta_hat = 1)";
    return rep;
  }
  rep.bound = error_feedback_bound(delta_hat_max, cfg.eta, sigma_total);
  rep.margin = rep.bound - rep.measured;
  rep.status = rep.margin >= -3.0 * rep.se ? "pass" : "fail";
  return rep;
}

CheckReport validate_flip_deviation(const Objective& obj,
                                    const ValidationConfig& cfg) {
  if (!cfg.kappa)
    throw std::invalid_argument("flip_deviation: kappa must be set");
  if (cfg.q0_mode != Q0Mode::Stochastic)
    throw std::invalid_argument(
        "flip_deviation: requires stochastic rounding");
  const std::size_t d = obj.dim();
  auto w0 = start_point(cfg.w0, d);
  std::vector<double> sum_h(cfg.steps, 0.0), sumsq_h(cfg.steps, 0.0);
  std::vector<double> coord_sum(d, 0.0), coord_sumsq(d, 0.0);
  std::vector<double> grad(d), noisy(d);
  double delta_hat_max = 0.0;

  for (std::size_t r = 0; r < cfg.trials; ++r) {
    AbstractState st(w0);
    StreamRng noise_rng(cfg.seed, 2 * r);
    StreamRng flip_rng(cfg.seed, 2 * r + 1);
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      obj.gradient(st.w, grad);
      for (std::size_t i = 0; i < d; ++i)
        noisy[i] = grad[i] + cfg.sigma_noise * noise_rng.normal(t * d + i);
      auto stats = abstract_step(st, noisy, cfg.eta, Q0Mode::Stochastic,
                                 flip_rng, cfg.eta * *cfg.kappa);
      sum_h[t] += stats.h_norm_sq;
      sumsq_h[t] += stats.h_norm_sq * stats.h_norm_sq;
      for (std::size_t i = 0; i < d; ++i) {
        coord_sum[i] += st.last_h[i];
        coord_sumsq[i] += st.last_h[i] * st.last_h[i];
      }
      if (stats.m_norm_sq > 0.0)
        delta_hat_max = std::max(delta_hat_max, stats.delta_hat);
    }
  }

  std::size_t arg_t = 0;
  double measured = 0.0;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    double mean = sum_h[t] / static_cast<double>(cfg.trials);
    if (mean >= measured) {
      measured = mean;
      arg_t = t;
    }
  }
  CheckReport rep;
  rep.check = "flip_deviation";
  rep.measured = measured;
  rep.bound =
      flip_deviation_bound(cfg.eta, static_cast<double>(d), *cfg.kappa);
  rep.se = sample_se(sum_h[arg_t], sumsq_h[arg_t], cfg.trials);
  rep.margin = rep.bound - rep.measured;
  rep.delta_hat = delta_hat_max;

  const std::size_t n = cfg.trials * cfg.steps;
  double worst_ratio = 0.0;
  bool mean_ok = true;
  for (std::size_t i = 0; i < d; ++i) {
    double mean = coord_sum[i] / static_cast<double>(n);
    double se = sample_se(coord_sum[i], coord_sumsq[i], n);
    if (se == 0.0) {
      if (mean != 0.0) mean_ok = false;
      continue;
    }
    worst_ratio = std::max(worst_ratio, std::abs(mean) / se);
    if (std::abs(mean) > 3.0 * se) mean_ok = false;
  }
  bool bound_ok = rep.margin >= -3.0 * rep.se;
  rep.status = bound_ok && mean_ok ? "pass" : "fail";
  rep.note = "worst |mean h|/se = " + format_double(worst_ratio);
  return rep;
}

CheckReport validate_convergence(const Objective& obj,
                                 const ValidationConfig& cfg) {
  if (!cfg.kappa)
    throw std::invalid_argument("convergence: kappa must be set");
  auto fstar = obj.min_value();
  if (!fstar)
    throw std::invalid_argument(
        "convergence: objective needs a known minimum value");
  if (!(obj.smoothness() > 0.0))
    throw std::invalid_argument("convergence: smoothness constant must be > 0");

  const std::size_t d = obj.dim();
  CheckReport rep;
  rep.check = "convergence";
  rep.margin = std::numeric_limits<double>::infinity();
  bool any_delta_one = false;

  for (std::size_t r = 0; r < cfg.trials; ++r) {
    RunConfig rc;
    rc.optim.eta0 = cfg.eta;
    rc.optim.kappa = cfg.kappa;
    rc.optim.seed = cfg.seed;
    rc.steps = cfg.steps;
    rc.sigma_noise = cfg.sigma_noise;
    rc.driver = Driver::Abstraction;
    rc.q0_mode = cfg.q0_mode;
    rc.w0 = cfg.w0;
    rc.stream = r;
    auto run = run_convergence_experiment(obj, rc);
    if (run.aborted) {
      rep.status = "fail";
      rep.note = "run aborted on non-finite loss";
      return rep;
    }
    if (run.delta_one_seen) any_delta_one = true;
    rep.delta_hat = std::max(rep.delta_hat, run.delta_hat_max);
    if (any_delta_one) continue;

    ConvergenceConstants consts;
    consts.f0_minus_fstar =
        obj.value(start_point(cfg.w0, d)) - *fstar;
    consts.smoothness = obj.smoothness();
    consts.sigma_sq = run.max_grad_sq + static_cast<double>(d) *
                                            cfg.sigma_noise * cfg.sigma_noise;
    consts.delta = run.delta_hat_max;
    consts.dim = static_cast<double>(d);
    consts.kappa = *cfg.kappa;
    for (std::size_t t = 0; t < run.trace.size(); ++t) {
      double bound =
          convergence_bound(consts, t + 1, cfg.eta, BoundForm::Derived);
      double margin = bound - run.trace[t].run_avg;
      if (margin < rep.margin) {
        rep.margin = margin;
        rep.measured = run.trace[t].run_avg;
        rep.bound = bound;
      }
    }
  }
  if (any_delta_one) {
    rep.status = "inconclusive";
    rep.note =
        "compressor assumption violated: some step kept all accumulator mass "
        "(delta_hat = 1)";
    return rep;
  }
  rep.status = rep.margin >= 0.0 ? "pass" : "fail";
  return rep;
}

ClosedCaseResult flip_deviation_closed_case(double u, std::size_t draws,
                                            std::uint64_t seed) {
  StreamRng rng(seed, 0);
  double sum = 0.0, sumsq = 0.0;
  for (std::uint64_t c = 0; c < draws; ++c) {
    double h = q0_stochastic(u, rng, c) - u;
    sum += h * h;
    sumsq += h * h * h * h;
  }
  ClosedCaseResult res;
  res.draws = draws;
  res.mean_h_sq = sum / static_cast<double>(draws);
  res.expected = 1.0 - u * u;
  res.se = sample_se(sum, sumsq, draws);
  return res;
}

}  // namespace boolnet
