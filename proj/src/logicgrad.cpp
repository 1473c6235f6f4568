#include "boolnet/logicgrad.hpp"

#include <cmath>
#include <stdexcept>

namespace boolnet {

namespace {

double aggregate(std::span<const LogicSignal> signals) {
  double acc = 0.0;
  for (const LogicSignal& s : signals) acc += signed_value(s);
  return acc;
}

}  // namespace

double aggregate_backprop(std::span<const LogicSignal> signals) {
  return aggregate(signals);
}

double aggregate_optim(std::span<const LogicSignal> signals) {
  return aggregate(signals);
}

BackwardResult backward_layer(const BooleanTensor& x, const BooleanTensor& w,
                              const Matrix& g_up) {
  if (x.rank() != 2 || w.rank() != 2)
    throw std::invalid_argument("backward_layer: rank-2 tensors required");
  const std::size_t K = x.shape()[0], m = x.shape()[1];
  const std::size_t n = w.shape()[1];
  if (w.shape()[0] != m)
    throw std::invalid_argument("backward_layer: weight rows must equal input width");
  if (g_up.rows != K || g_up.cols != n)
    throw std::invalid_argument("backward_layer: upstream signal shape mismatch");
  for (double v : g_up.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("backward_layer: non-finite upstream signal");

  BackwardResult out{Matrix(K, m), Matrix(m, n)};
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        acc += signed_value(edge_backprop_signal(w.at(i, j), g_up.at(k, j)));
      out.g_down.at(k, i) = acc;
    }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k)
        acc += signed_value(edge_optim_signal(x.at(k, i), g_up.at(k, j)));
      out.q.at(i, j) = acc;
    }
  return out;
}

void bias_optim_signal(const Matrix& g_up, std::span<double> out) {
  if (out.size() != g_up.cols)
    throw std::invalid_argument("bias_optim_signal: output length mismatch");
  for (std::size_t j = 0; j < g_up.cols; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < g_up.rows; ++k)
      acc += signed_value(edge_optim_signal(true, g_up.at(k, j)));
    out[j] = acc;
  }
}

}  // namespace boolnet
