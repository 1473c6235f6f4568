#include "boolnet/nettrain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "boolnet/logicgrad.hpp"

namespace boolnet {

namespace {

void write_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("stream truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64le(std::ostream& os, double d) {
  auto u = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw DataError("stream truncated");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    cells.push_back(trimmed(line.substr(pos, comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& column) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    throw DataError("row " + std::to_string(row) + ", column \"" + column +
                    "\": cannot parse \"" + cell + "\" as a number");
  return out;
}

}  // namespace

void Dataset::validate(std::size_t out_width) const {
  if (inputs.rank() != 2) throw DataError("dataset inputs must be rank 2");
  std::size_t n = inputs.shape()[0];
  if (n == 0) throw DataError("dataset is empty");
  if (batch == 0 || batch > n)
    throw DataError("batch size must be in [1, " + std::to_string(n) + "]");
  bool has_t = targets.size() > 0;
  if (has_labels() == has_t)
    throw DataError("dataset needs exactly one of class labels or targets");
  if (has_labels()) {
    if (labels.size() != n)
      throw DataError("label count does not match input rows");
    for (int id : labels)
      if (id < 0 || static_cast<std::size_t>(id) >= out_width)
        throw DataError("class id " + std::to_string(id) +
                        " outside [0, " + std::to_string(out_width) + ")");
  } else {
    if (targets.rows != n || targets.cols != out_width)
      throw DataError("target matrix must be rows x output width");
    for (double v : targets.data)
      if (!std::isfinite(v)) throw DataError("non-finite target value");
  }
}

TabularData load_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty CSV file");
  auto header = split_csv_line(line);
  std::size_t label_col = header.size();
  TabularData out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label")
      label_col = c;
    else
      out.feature_names.push_back(header[c]);
  }
  if (label_col == header.size())
    throw DataError("dataset has no \"label\" column");

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (trimmed(line).empty()) continue;
    auto cells = split_csv_line(line);
    ++rows;
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(rows) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = parse_cell(cells[c], rows, header[c]);
      if (c == label_col) {
        if (v != std::floor(v))
          throw DataError("row " + std::to_string(rows) +
                          ": label must be an integer");
        out.labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  if (rows == 0) throw DataError("CSV has a header but no data rows");
  out.features = Matrix(rows, header.size() - 1);
  out.features.data = std::move(values);
  return out;
}

BinarizeResult binarize_input(const Matrix& features) {
  if (features.rows == 0 || features.cols == 0)
    throw DataError("cannot binarize an empty feature matrix");
  for (double v : features.data)
    if (!std::isfinite(v)) throw DataError("non-finite feature value");

  BinarizeResult out;
  out.thresholds.resize(features.cols);
  std::vector<double> col(features.rows);
  for (std::size_t c = 0; c < features.cols; ++c) {
    for (std::size_t r = 0; r < features.rows; ++r) col[r] = features.at(r, c);
    std::sort(col.begin(), col.end());
    double median = features.rows % 2 == 1
                        ? col[features.rows / 2]
                        : 0.5 * (col[features.rows / 2 - 1] +
                                 col[features.rows / 2]);
    out.thresholds[c] = median;
    if (col.front() == col.back()) out.constant_columns.push_back(c);
  }
  out.bits = apply_thresholds(features, out.thresholds);
  return out;
}

BooleanTensor apply_thresholds(const Matrix& features,
                               std::span<const double> thresholds) {
  if (thresholds.size() != features.cols)
    throw DataError("threshold count does not match feature width");
  BooleanTensor bits({features.rows, features.cols});
  for (std::size_t r = 0; r < features.rows; ++r)
    for (std::size_t c = 0; c < features.cols; ++c)
      bits.set(r * features.cols + c, features.at(r, c) >= thresholds[c]);
  return bits;
}

void save_dataset_binary(std::ostream& os, const Dataset& data) {
  if (data.inputs.rank() != 2) throw DataError("dataset inputs must be rank 2");
  os.write("BND1", 4);
  write_u32le(os, static_cast<std::uint32_t>(data.inputs.shape()[0]));
  write_u32le(os, static_cast<std::uint32_t>(data.inputs.shape()[1]));
  unsigned char flags = 0;
  if (data.has_labels()) flags |= 1;
  if (data.targets.size() > 0) flags |= 2;
  os.write(reinterpret_cast<const char*>(&flags), 1);
  data.inputs.serialize(os);
  if (flags & 1)
    for (int id : data.labels)
      write_u32le(os, static_cast<std::uint32_t>(id));
  if (flags & 2) {
    write_u32le(os, static_cast<std::uint32_t>(data.targets.cols));
    for (double v : data.targets.data) write_f64le(os, v);
  }
  if (!os) throw DataError("dataset write failed");
}

Dataset load_dataset_binary(std::istream& is, std::size_t batch) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "BND1")
    throw DataError("not a BND1 dataset file");
  std::size_t n = read_u32le(is);
  std::size_t m = read_u32le(is);
  unsigned char flags = 0;
  is.read(reinterpret_cast<char*>(&flags), 1);
  if (!is) throw DataError("stream truncated");

  Dataset data;
  data.batch = batch;
  try {
    data.inputs = BooleanTensor::deserialize(is);
  } catch (const std::exception& e) {
    throw DataError(std::string("bad input tensor: ") + e.what());
  }
  if (data.inputs.rank() != 2 || data.inputs.shape()[0] != n ||
      data.inputs.shape()[1] != m)
    throw DataError("input tensor shape disagrees with the dataset header");
  if (flags & 1) {
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      data.labels[i] = static_cast<int>(read_u32le(is));
  }
  if (flags & 2) {
    std::size_t w = read_u32le(is);
    data.targets = Matrix(n, w);
    for (double& v : data.targets.data) v = read_f64le(is);
  }
  return data;
}

Dataset make_xor_dataset(std::size_t copies, std::size_t batch) {
  if (copies == 0) throw DataError("need at least one copy of each pattern");
  std::size_t n = 4 * copies;
  Dataset data;
  data.inputs = BooleanTensor({n, 2});
  data.labels.resize(n);
  data.batch = batch;
  for (std::size_t i = 0; i < n; ++i) {
    bool a = (i % 4) & 1, b = (i % 4) >> 1;
    data.inputs.set(i * 2, a);
    data.inputs.set(i * 2 + 1, b);
    data.labels[i] = a != b ? 1 : 0;
  }
  return data;
}

BooleanTensor gather_rows(const BooleanTensor& x,
                          std::span<const std::size_t> idx) {
  std::size_t m = x.shape()[1];
  BooleanTensor out({idx.size(), m});
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < m; ++c)
      out.set(r * m + c, x.at(idx[r], c));
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, const StreamRng& rng,
                                          std::uint64_t counter_base) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i-- > 1;) {
    auto j = static_cast<std::size_t>(rng.uniform(counter_base + i) *
                                      static_cast<double>(i + 1));
    std::swap(idx[i], idx[std::min(j, i)]);
  }
  return idx;
}

BooleanMlp::BooleanMlp(std::vector<std::size_t> dims, LossKind loss,
                       OptimConfig cfg)
    : BooleanMlp(std::move(dims), loss, cfg, true) {}

BooleanMlp::BooleanMlp(std::vector<std::size_t> dims, LossKind loss,
                       OptimConfig cfg, bool random_init)
    : dims_(std::move(dims)), loss_(loss), cfg_(cfg) {
  if (dims_.size() < 2)
    throw std::invalid_argument("model needs at least one layer");
  for (std::size_t d : dims_)
    if (d == 0) throw std::invalid_argument("zero-width layer");
  if (loss_ == LossKind::CrossEntropy && dims_.back() < 2)
    throw std::invalid_argument("cross-entropy needs at least two outputs");
  cfg_.validate();
  layers_.reserve(layer_count());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    std::size_t m = dims_[l], n = dims_[l + 1];
    BooleanTensor p =
        random_init
            ? BooleanTensor::random({m + 1, n}, StreamRng(cfg_.seed, 101 + l))
            : BooleanTensor({m + 1, n});
    BitRows cols = pack_param_cols(p);
    layers_.push_back(Layer{std::move(p), std::move(cols),
                            OptimState((m + 1) * n),
                            StreamRng(cfg_.seed, 1 + l),
                            BooleanTensor(), false, {}});
  }
}

std::size_t BooleanMlp::param_count(std::size_t layer) const {
  return (dims_[layer] + 1) * dims_[layer + 1];
}

const BooleanTensor& BooleanMlp::params(std::size_t layer) const {
  return layers_.at(layer).params;
}

void BooleanMlp::set_params(std::size_t layer, BooleanTensor p) {
  Layer& ly = layers_.at(layer);
  if (p.shape() != ly.params.shape())
    throw std::invalid_argument("parameter tensor shape mismatch");
  ly.params = std::move(p);
  ly.cols = pack_param_cols(ly.params);
  ly.state = OptimState(param_count(layer));  // weights changed under it
}

BooleanTensor BooleanMlp::weight_rows(std::size_t layer) const {
  return layers_[layer].params.slice_rows(1, dims_[layer] + 1);
}

PreActivation BooleanMlp::forward(const BooleanTensor& x) {
  if (x.rank() != 2 || x.shape()[1] != dims_[0])
    throw std::invalid_argument("input must be [K x " +
                                std::to_string(dims_[0]) + "]");
  BooleanTensor cur = x;
  PreActivation pre;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Layer& ly = layers_[l];
    ly.input = std::move(cur);
    ly.buffered = true;
    BitRows xe = pack_input_rows(ly.input);
    pre = PreActivation(ly.input.shape()[0], dims_[l + 1]);
    forward_packed(xe, ly.cols, pre);
    if (l + 1 < layer_count()) cur = binarize(pre);
  }
  return pre;
}

namespace {

// +1 for the labelled class, -1 elsewhere.
double pm_one_hot(int label, std::size_t j) {
  return static_cast<std::size_t>(label) == j ? 1.0 : -1.0;
}

void softmax_row(std::span<const double> u, std::span<double> p) {
  double mx = u[0];
  for (double v : u) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    p[j] = std::exp(u[j] - mx);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
}

}  // namespace

double BooleanMlp::loss_value(const PreActivation& out,
                              std::span<const int> labels) const {
  if (labels.size() != out.rows)
    throw std::invalid_argument("label count does not match batch");
  double total = 0.0;
  if (loss_ == LossKind::Squared) {
    for (std::size_t k = 0; k < out.rows; ++k)
      for (std::size_t j = 0; j < out.cols; ++j) {
        double r = out.at(k, j) - pm_one_hot(labels[k], j);
        total += 0.5 * r * r;
      }
  } else {
    double s = 1.0 / std::sqrt(static_cast<double>(dims_[dims_.size() - 2]));
    std::vector<double> u(out.cols);
    for (std::size_t k = 0; k < out.rows; ++k) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < out.cols; ++j) {
        u[j] = s * out.at(k, j);
        mx = std::max(mx, u[j]);
      }
      double sum = 0.0;
      for (double v : u) sum += std::exp(v - mx);
      total += mx + std::log(sum) - u[static_cast<std::size_t>(labels[k])];
    }
  }
  return total / static_cast<double>(out.rows);
}

double BooleanMlp::loss_value(const PreActivation& out,
                              const Matrix& targets) const {
  if (loss_ != LossKind::Squared)
    throw std::invalid_argument("cross-entropy needs class labels");
  if (targets.rows != out.rows || targets.cols != out.cols)
    throw std::invalid_argument("target shape does not match batch");
  double total = 0.0;
  for (std::size_t k = 0; k < out.rows; ++k)
    for (std::size_t j = 0; j < out.cols; ++j) {
      double r = out.at(k, j) - targets.at(k, j);
      total += 0.5 * r * r;
    }
  return total / static_cast<double>(out.rows);
}

Matrix BooleanMlp::loss_gradient(const PreActivation& out,
                                 std::span<const int> labels,
                                 const Matrix* targets) const {
  Matrix g(out.rows, out.cols);
  double kd = static_cast<double>(out.rows);
  if (loss_ == LossKind::Squared) {
    for (std::size_t k = 0; k < out.rows; ++k)
      for (std::size_t j = 0; j < out.cols; ++j) {
        double y = targets ? targets->at(k, j) : pm_one_hot(labels[k], j);
        g.at(k, j) = (out.at(k, j) - y) / kd;
      }
  } else {
    if (targets) throw std::invalid_argument("cross-entropy needs class labels");
    double s = 1.0 / std::sqrt(static_cast<double>(dims_[dims_.size() - 2]));
    std::vector<double> u(out.cols), p(out.cols);
    for (std::size_t k = 0; k < out.rows; ++k) {
      for (std::size_t j = 0; j < out.cols; ++j) u[j] = s * out.at(k, j);
      softmax_row(u, p);
      for (std::size_t j = 0; j < out.cols; ++j) {
        double y = static_cast<std::size_t>(labels[k]) == j ? 1.0 : 0.0;
        g.at(k, j) = s * (p[j] - y) / kd;
      }
    }
  }
  return g;
}

BooleanMlp::StepResult BooleanMlp::backward_and_update(const Matrix& out_grad) {
  StepResult res;
  res.flips.resize(layer_count(), 0);
  Matrix g = out_grad;
  for (std::size_t l = layer_count(); l-- > 0;) {
    Layer& ly = layers_[l];
    if (!ly.buffered)
      throw std::logic_error("backward for layer " + std::to_string(l) +
                             " without a buffered forward input");
    if (g.rows != ly.input.shape()[0] || g.cols != dims_[l + 1])
      throw std::invalid_argument("upstream gradient shape mismatch");

    BackwardResult br = backward_layer(ly.input, weight_rows(l), g);
    std::size_t n = dims_[l + 1];
    ly.q.assign(param_count(l), 0.0);
    bias_optim_signal(g, std::span<double>(ly.q.data(), n));
    std::copy(br.q.data.begin(), br.q.data.end(), ly.q.begin() + n);

    ly.input = BooleanTensor();  // release the buffer
    ly.buffered = false;

    StepStats st = apply_step(ly.params, ly.state, ly.q, cfg_, ly.flip_rng);
    if (st.flips > 0) ly.cols = pack_param_cols(ly.params);
    res.flips[l] = st.flips;
    res.beta_min = std::min(res.beta_min, st.beta_next);
    res.beta_max = std::max(res.beta_max, st.beta_next);
    g = std::move(br.g_down);  // straight-through across the activation
  }
  return res;
}

std::span<const double> BooleanMlp::last_q(std::size_t layer) const {
  return layers_.at(layer).q;
}

EpochMetrics BooleanMlp::train_epoch(const Dataset& data,
                                     const StreamRng& shuffle_rng) {
  data.validate(output_width());
  if (data.inputs.shape()[1] != dims_[0])
    throw DataError("dataset width does not match the model input width");
  if (loss_ == LossKind::CrossEntropy && !data.has_labels())
    throw std::invalid_argument("cross-entropy needs class labels");

  std::size_t n = data.size();
  auto order = shuffled_indices(
      n, shuffle_rng, static_cast<std::uint64_t>(epochs_) * n);

  EpochMetrics met;
  met.flips.assign(layer_count(), 0);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t b0 = 0; b0 < n; b0 += data.batch) {
    std::size_t b1 = std::min(b0 + data.batch, n);
    std::span<const std::size_t> idx(order.data() + b0, b1 - b0);
    BooleanTensor x = gather_rows(data.inputs, idx);
    PreActivation out = forward(x);

    double loss;
    Matrix grad;
    if (data.has_labels()) {
      std::vector<int> lab(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r)
        lab[r] = data.labels[idx[r]];
      loss = loss_value(out, lab);
      grad = loss_gradient(out, lab, nullptr);
      for (std::size_t k = 0; k < out.rows; ++k) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < out.cols; ++j)
          if (out.at(k, j) > out.at(k, arg)) arg = j;
        if (arg == static_cast<std::size_t>(lab[k])) ++correct;
      }
    } else {
      Matrix tgt(idx.size(), data.targets.cols);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < tgt.cols; ++c)
          tgt.at(r, c) = data.targets.at(idx[r], c);
      loss = loss_value(out, tgt);
      grad = loss_gradient(out, {}, &tgt);
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("non-finite loss in epoch " +
                               std::to_string(epochs_) + ", batch " +
                               std::to_string(met.batches));
    loss_sum += loss * static_cast<double>(idx.size());

    StepResult sr = backward_and_update(grad);
    for (std::size_t l = 0; l < layer_count(); ++l) {
      met.flips[l] += sr.flips[l];
      for (double v : layers_[l].q) met.mean_q_norm_sq += v * v;
    }
    met.beta_min = std::min(met.beta_min, sr.beta_min);
    met.beta_max = std::max(met.beta_max, sr.beta_max);
    ++met.batches;
  }

  met.loss = loss_sum / static_cast<double>(n);
  met.accuracy = data.has_labels()
                     ? static_cast<double>(correct) / static_cast<double>(n)
                     : std::numeric_limits<double>::quiet_NaN();
  met.flip_rate.resize(layer_count());
  std::size_t flips_tot = 0, params_tot = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    met.flip_rate[l] = static_cast<double>(met.flips[l]) /
                       static_cast<double>(param_count(l) * met.batches);
    flips_tot += met.flips[l];
    params_tot += param_count(l);
  }
  met.total_flip_rate = static_cast<double>(flips_tot) /
                        static_cast<double>(params_tot * met.batches);
  met.mean_q_norm_sq /= static_cast<double>(met.batches);
  ++epochs_;
  return met;
}

BooleanMlp::Evaluation BooleanMlp::evaluate(const Dataset& data) {
  data.validate(output_width());
  if (data.inputs.shape()[1] != dims_[0])
    throw DataError("dataset width does not match the model input width");
  if (loss_ == LossKind::CrossEntropy && !data.has_labels())
    throw std::invalid_argument("cross-entropy needs class labels");

  PreActivation out = forward(data.inputs);
  for (Layer& ly : layers_) {  // evaluation consumes no buffers
    ly.input = BooleanTensor();
    ly.buffered = false;
  }
  Evaluation ev;
  if (data.has_labels()) {
    ev.loss = loss_value(out, data.labels);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < out.rows; ++k) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < out.cols; ++j)
        if (out.at(k, j) > out.at(k, arg)) arg = j;
      if (arg == static_cast<std::size_t>(data.labels[k])) ++correct;
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(out.rows);
  } else {
    ev.loss = loss_value(out, data.targets);
    ev.accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  return ev;
}

void BooleanMlp::serialize(std::ostream& os) const {
  os.write("BNM1", 4);
  write_u32le(os, static_cast<std::uint32_t>(dims_.size()));
  for (std::size_t d : dims_) write_u32le(os, static_cast<std::uint32_t>(d));
  unsigned char kind = loss_ == LossKind::Squared ? 0 : 1;
  os.write(reinterpret_cast<const char*>(&kind), 1);
  write_u32le(os, static_cast<std::uint32_t>(input_thresholds.size()));
  for (double t : input_thresholds) write_f64le(os, t);
  for (const Layer& ly : layers_) ly.params.serialize(os);
  if (!os) throw std::runtime_error("model write failed");
}

BooleanMlp BooleanMlp::deserialize(std::istream& is, OptimConfig cfg) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "BNM1")
    throw DataError("not a BNM1 model file");
  std::size_t ndims = read_u32le(is);
  if (ndims < 2 || ndims > 64) throw DataError("implausible layer count");
  std::vector<std::size_t> dims(ndims);
  for (auto& d : dims) d = read_u32le(is);
  unsigned char kind = 0;
  is.read(reinterpret_cast<char*>(&kind), 1);
  if (!is || kind > 1) throw DataError("bad loss kind byte");

  BooleanMlp model(std::move(dims),
                   kind == 0 ? LossKind::Squared : LossKind::CrossEntropy, cfg,
                   false);
  std::size_t nthresh = read_u32le(is);
  model.input_thresholds.resize(nthresh);
  for (double& t : model.input_thresholds) t = read_f64le(is);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    BooleanTensor p;
    try {
      p = BooleanTensor::deserialize(is);
    } catch (const std::exception& e) {
      throw DataError(std::string("bad parameter tensor: ") + e.what());
    }
    model.set_params(l, std::move(p));
  }
  return model;
}

}  // namespace boolnet
