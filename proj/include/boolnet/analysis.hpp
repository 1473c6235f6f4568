#pragma once

// Synthetic smooth objectives with known constants, bound evaluators for the
// residual-error / rounding-deviation / convergence-rate inequalities, Monte
// Carlo validators for those bounds, and trace plumbing shared with the CLI.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boolnet/abstraction.hpp"
#include "boolnet/matrix.hpp"
#include "boolnet/optim.hpp"

namespace boolnet {

class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> w) const = 0;
  virtual void gradient(std::span<const double> w,
                        std::span<double> out) const = 0;
  // Smoothness constant L over the region visited by +-1 iterates.
  virtual double smoothness() const = 0;
  // Global minimum value over R^d, when available in closed form.
  virtual std::optional<double> min_value() const { return std::nullopt; }
};

// f(w) = 0.5*w'Aw - b'w; gradient A*w - b. Diagonal instances have exact
// smoothness (max diagonal entry) and exact minimum -sum b_i^2/(2 a_i);
// dense symmetric PSD instances estimate L by power iteration and solve
// A w = b by Cholesky for the minimum.
class QuadraticObjective : public Objective {
 public:
  static QuadraticObjective diagonal(std::vector<double> diag,
                                     std::vector<double> b);
  QuadraticObjective(Matrix a, std::vector<double> b);

  std::size_t dim() const override { return b_.size(); }
  double value(std::span<const double> w) const override;
  void gradient(std::span<const double> w, std::span<double> out) const override;
  double smoothness() const override;
  std::optional<double> min_value() const override;

 private:
  bool diagonal_ = false;
  std::vector<double> diag_;
  Matrix a_;
  std::vector<double> b_;
};

// f(w) = scale * sum_i (w_i^2 - 1)^2 + c'w: a separable double well with
// minima near +-1, tilted by the linear term. Over [-1,1]^d (the hull of
// +-1 iterates) |f''| <= 8*scale, used as L.
class QuarticObjective : public Objective {
 public:
  QuarticObjective(double scale, std::vector<double> c);

  std::size_t dim() const override { return c_.size(); }
  double value(std::span<const double> w) const override;
  void gradient(std::span<const double> w, std::span<double> out) const override;
  double smoothness() const override { return 8.0 * scale_; }
  std::optional<double> min_value() const override;

 private:
  double scale_;
  std::vector<double> c_;
};

// Residual-error bound 2*delta*(1+delta)/(1-delta)^2 * eta^2*sigma^2.
// Throws std::domain_error unless 0 <= delta < 1 (the compressed fraction
// must leave something behind for the residual to stay bounded).
double error_feedback_bound(double delta, double eta, double sigma);

// Rounding-deviation bound eta*d*kappa on E||h||^2.
double flip_deviation_bound(double eta, double d, double kappa);

// Constants of the convergence rate for the noisy quantized descent:
// a_star/(T*eta) + b_star*eta + c*eta^2 + floor. Two published constant
// sets exist for the same inputs; Derived is the stricter one actually used
// for pass/fail.
struct ConvergenceConstants {
  double f0_minus_fstar = 0.0;
  double smoothness = 0.0;  // L
  double sigma_sq = 0.0;    // second-moment bound on the noisy gradient
  double delta = 0.0;       // compression factor, in [0,1)
  double dim = 0.0;
  double kappa = 0.0;

  double a_star() const { return 2.0 * f0_minus_fstar; }
  double b_star() const { return 2.0 * smoothness * sigma_sq; }
  double c_headline() const;  // 4 L^2 sigma^2 delta / (1-delta)^2
  double c_derived() const;   // 2 L^2 sigma^2 delta (1+delta) / (1-delta)^2
  double floor_headline() const { return smoothness * dim * kappa / 2.0; }
  double floor_derived() const { return 2.0 * smoothness * dim * kappa; }
};

enum class BoundForm { Headline, Derived };

// Headline: a*/(T eta) + b* eta + c_headline eta^2 + floor_headline.
// Derived:  a*/(eta (T+1)) + b* eta + c_derived eta^2 + floor_derived.
double convergence_bound(const ConvergenceConstants& c, std::size_t T,
                         double eta, BoundForm form);

struct TraceRecord {
  std::size_t t = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double run_avg = 0.0;  // prefix mean of grad_norm_sq
  std::size_t flips = 0;
  double beta = 1.0;
  double e_sq = 0.0;
  double h_sq = 0.0;
  double delta_hat = 0.0;
  double eta = 0.0;
};

// Shortest round-trip decimal form, used for all CSV numbers.
std::string format_double(double v);
void write_trace_csv(std::ostream& os, std::span<const TraceRecord> trace);

enum class Driver { Abstraction, Optimizer };

struct RunConfig {
  OptimConfig optim;            // eta/schedule/tau/kappa/modes/seed
  std::size_t steps = 1000;
  double sigma_noise = 0.0;     // std of Gaussian gradient noise
  Driver driver = Driver::Abstraction;
  Q0Mode q0_mode = Q0Mode::Deterministic;
  std::vector<double> w0;       // entries +-1; empty means all +1
  std::uint64_t stream = 0;     // trial index; separates RNG streams
};

struct RunResult {
  std::vector<TraceRecord> trace;
  std::vector<double> w_final;
  double delta_hat_max = 0.0;  // max per-step delta_hat over the run
  bool delta_one_seen = false; // some step kept all accumulator mass
  double max_grad_sq = 0.0;    // max ||grad f(w_t)||^2 over iterates
  bool aborted = false;        // non-finite loss; trace holds prior steps
};

// Descends the objective over {-1,+1}^d with noisy gradients, one trace
// record per step (grad columns evaluated at the pre-step iterate).
RunResult run_convergence_experiment(const Objective& obj,
                                     const RunConfig& cfg);

struct ArgminResult {
  std::vector<double> w;
  double value = 0.0;
  bool tie = false;  // another point attains the same value
};

// Exact minimizer over {-1,+1}^d by enumeration; ties resolved to the
// lexicographically smallest point (-1 before +1). Refuses d > 20.
ArgminResult boolean_argmin(const Objective& obj);

struct ValidationConfig {
  std::size_t trials = 1000;     // Monte Carlo trials (seeds, for convergence)
  std::size_t steps = 200;
  double eta = 0.05;
  std::optional<double> kappa;   // accumulator clip at eta*kappa
  double sigma_noise = 0.0;
  Q0Mode q0_mode = Q0Mode::Stochastic;
  std::uint64_t seed = 0;
  std::vector<double> w0;        // empty means all +1
};

struct CheckReport {
  std::string check;    // "error_feedback" | "flip_deviation" | "convergence"
  std::string status;   // "pass" | "fail" | "inconclusive"
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound - measured
  double se = 0.0;      // standard error at the binding statistic
  double delta_hat = 0.0;
  std::string note;

  bool passed() const { return status == "pass"; }
};

// Estimates max_t E||e_t||^2 across trials and compares it against
// error_feedback_bound at the measured compression ratio. Steps that keep
// all accumulator mass (delta_hat = 1) void the premise: the report comes
// back "inconclusive" instead of pass/fail.
CheckReport validate_error_feedback(const Objective& obj,
                                    const ValidationConfig& cfg);

// Estimates max_t E||h_t||^2 against eta*d*kappa and checks the
// per-coordinate mean of h over trials x steps stays within 3 standard
// errors of zero. Requires kappa and stochastic rounding.
CheckReport validate_flip_deviation(const Objective& obj,
                                    const ValidationConfig& cfg);

// Runs `trials` seeds for `steps` steps and checks the running-average
// gradient norm stays below the Derived-form bound at every T, with
// per-seed measured delta_hat and sigma.
CheckReport validate_convergence(const Objective& obj,
                                 const ValidationConfig& cfg);

struct ClosedCaseResult {
  double mean_h_sq = 0.0;
  double expected = 0.0;  // 1 - u^2
  double se = 0.0;
  std::size_t draws = 0;
};

// Monte Carlo of the rounding deviation at a pinned pre-rounding value u:
// h = q0(u) - u has E[h^2] = 1 - u^2.
ClosedCaseResult flip_deviation_closed_case(double u, std::size_t draws,
                                            std::uint64_t seed);

}  // namespace boolnet
