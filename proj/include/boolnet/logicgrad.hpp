#pragma once

// Per-edge backprop and optimization signals in sign-magnitude form, and
// their aggregation into real-valued layer signals.
//
// Every signal is a (truth, magnitude) pair; aggregation adds magnitudes of
// True signals and subtracts magnitudes of False ones, in fixed index order,
// which makes the result bit-identical to the signed sum it encodes.

#include <span>

#include "boolnet/bitcore.hpp"
#include "boolnet/matrix.hpp"

namespace boolnet {

struct LogicSignal {
  bool truth = true;
  double magnitude = 0.0;  // >= 0; a zero-magnitude signal contributes nothing
};

// Truth is XNOR(weight bit, upstream >= 0); the sign of a zero upstream value
// counts as nonnegative, which is harmless because its magnitude is zero.
inline LogicSignal edge_backprop_signal(bool w_ij, double g_kj) {
  return {w_ij == (g_kj >= 0.0), g_kj < 0.0 ? -g_kj : g_kj};
}

// Same convention keyed on the buffered input bit.
inline LogicSignal edge_optim_signal(bool x_ki, double g_kj) {
  return {x_ki == (g_kj >= 0.0), g_kj < 0.0 ? -g_kj : g_kj};
}

inline double signed_value(const LogicSignal& s) {
  return s.truth ? s.magnitude : -s.magnitude;
}

// Sum of True magnitudes minus sum of False magnitudes, in the given order.
double aggregate_backprop(std::span<const LogicSignal> signals);
double aggregate_optim(std::span<const LogicSignal> signals);

struct BackwardResult {
  Matrix g_down;  // [K x m], the signal sent to the upstream layer
  Matrix q;       // [m x n], the per-weight optimization signal
};

// Backward pass of one layer: g_down[k][i] aggregates backprop signals over
// j, q[i][j] aggregates optimization signals over the batch. Results equal
// g_up * w^T and x^T * g_up with the Boolean operands cast to +-1.
BackwardResult backward_layer(const BooleanTensor& x, const BooleanTensor& w,
                              const Matrix& g_up);

// Optimization signal for the bias row: the bias input is constant True, so
// q0[j] aggregates edge_optim_signal(True, g_up[k][j]) over the batch.
void bias_optim_signal(const Matrix& g_up, std::span<double> out);

}  // namespace boolnet
