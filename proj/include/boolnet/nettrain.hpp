#pragma once

// Boolean MLP assembly: stacked XNOR layers driven end to end by the flip
// optimizer. Forward buffers each layer's input; backward consumes the
// buffers (exactly once) to form per-weight optimization signals.
//
// Between layers the integer pre-activations pass through `binarize`; its
// backward uses the straight-through convention, so upstream magnitudes flow
// through the activation unchanged.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "boolnet/bitcore.hpp"
#include "boolnet/matrix.hpp"
#include "boolnet/optim.hpp"
#include "boolnet/rng.hpp"

namespace boolnet {

// Problems with dataset files or dataset/model mismatch. The CLI maps this
// to its data-error exit code.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LossKind { Squared, CrossEntropy };

// Boolean inputs plus either integer class ids or real-valued targets
// (exactly one of the two is populated).
struct Dataset {
  BooleanTensor inputs;     // [N x m0]
  std::vector<int> labels;  // class ids in [0, n_out)
  Matrix targets;           // [N x n_out] real targets for the squared loss
  std::size_t batch = 1;

  std::size_t size() const {
    return inputs.rank() == 2 ? inputs.shape()[0] : 0;
  }
  bool has_labels() const { return !labels.empty(); }

  // Shape/row-count consistency; out_width checks label range and target
  // width against the model's output layer.
  void validate(std::size_t out_width) const;
};

// Real-valued table read from CSV before thresholding.
struct TabularData {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
};

// CSV with a header row; the column named "label" holds integer class ids
// and every other column is a real feature. Throws DataError on a missing
// label column (naming it), ragged rows, or unparsable cells.
TabularData load_csv(std::istream& is);

struct BinarizeResult {
  BooleanTensor bits;
  std::vector<double> thresholds;           // per-feature medians
  std::vector<std::size_t> constant_columns;  // thresholded degenerately
};

// Thresholds each feature at its column median (True iff value >= median).
// A constant column becomes all True and is reported in constant_columns so
// callers can warn. Balanced +-1 columns map to themselves.
BinarizeResult binarize_input(const Matrix& features);

// Applies stored thresholds to new feature rows (True iff value >= t).
BooleanTensor apply_thresholds(const Matrix& features,
                               std::span<const double> thresholds);

// Raw dataset format, magic "BND1": u32 N, u32 m, u8 flags (bit 0: class
// labels present, bit 1: real targets present), the packed input tensor,
// then N i32 labels or N*n_out f64 targets (targets prefixed by u32 n_out).
void save_dataset_binary(std::ostream& os, const Dataset& data);
Dataset load_dataset_binary(std::istream& is, std::size_t batch);

// Four XOR patterns over two inputs, each repeated `copies` times. Label 1
// when the input bits differ.
Dataset make_xor_dataset(std::size_t copies, std::size_t batch);

struct EpochMetrics {
  double loss = 0.0;      // dataset-size-weighted mean over the epoch
  double accuracy = 0.0;  // NaN when the dataset has no class labels
  std::vector<std::size_t> flips;  // per layer, summed over the epoch
  std::vector<double> flip_rate;   // flips / (params * optimizer steps)
  double total_flip_rate = 0.0;
  double beta_min = 1.0;  // range of the adaptive retention factor seen
  double beta_max = 0.0;  // across all layers and steps this epoch
  double mean_q_norm_sq = 0.0;  // batch mean of sum_l ||q_l||^2
  std::size_t batches = 0;
};

class BooleanMlp {
 public:
  // dims = [m0, n1, ..., nL]; weights start at an unbiased random draw from
  // streams derived from cfg.seed.
  BooleanMlp(std::vector<std::size_t> dims, LossKind loss, OptimConfig cfg);

  const std::vector<std::size_t>& dims() const { return dims_; }
  LossKind loss_kind() const { return loss_; }
  const OptimConfig& optim_config() const { return cfg_; }
  std::size_t layer_count() const { return dims_.size() - 1; }
  std::size_t output_width() const { return dims_.back(); }
  std::size_t param_count(std::size_t layer) const;
  std::size_t epochs_trained() const { return epochs_; }

  // Assembled [(m+1) x n] parameter tensor of a layer; row 0 is the bias.
  const BooleanTensor& params(std::size_t layer) const;
  void set_params(std::size_t layer, BooleanTensor p);

  // Per-feature thresholds when the model was trained on thresholded real
  // features; empty for natively Boolean inputs. Persisted with the model.
  std::vector<double> input_thresholds;

  // Full forward pass, buffering every layer input for the next backward.
  PreActivation forward(const BooleanTensor& x);

  // Mean per-sample loss of output pre-activations against class ids or
  // real targets. The cross-entropy path scales logits by 1/sqrt(fan-in of
  // the output layer) before the softmax.
  double loss_value(const PreActivation& out,
                    std::span<const int> labels) const;
  double loss_value(const PreActivation& out, const Matrix& targets) const;

  // Gradient of the batch loss with respect to the output pre-activations.
  Matrix loss_gradient(const PreActivation& out, std::span<const int> labels,
                       const Matrix* targets) const;

  struct StepResult {
    std::vector<std::size_t> flips;  // per layer
    double beta_min = 1.0;
    double beta_max = 0.0;
  };

  // Backward through all layers (consuming and releasing each buffered
  // input) followed by one optimizer step per layer. Throws std::logic_error
  // if a buffer is absent, i.e. without a matching forward.
  StepResult backward_and_update(const Matrix& out_grad);

  // Most recent per-layer optimization signal, laid out like the parameter
  // tensor (row 0 = bias row). Kept for inspection.
  std::span<const double> last_q(std::size_t layer) const;

  // One pass over the dataset in shuffled minibatches: forward, loss,
  // backward, optimizer step. Shuffle draws come from shuffle_rng at
  // counters epochs_trained()*N + i. Throws std::runtime_error on a
  // non-finite batch loss.
  EpochMetrics train_epoch(const Dataset& data, const StreamRng& shuffle_rng);

  struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;  // NaN without class labels
  };
  // Whole-dataset loss/accuracy in one pass; leaves no buffered inputs.
  Evaluation evaluate(const Dataset& data);

  // Checkpoint format, magic "BNM1": u32 dim count, u32 dims, u8 loss kind,
  // u32 threshold count + f64 thresholds, then each layer's parameter
  // tensor. Optimizer state is not persisted; load starts it fresh.
  void serialize(std::ostream& os) const;
  static BooleanMlp deserialize(std::istream& is, OptimConfig cfg);

 private:
  struct Layer {
    BooleanTensor params;    // [(m+1) x n]
    BitRows cols;            // packed columns cache of params
    OptimState state;
    StreamRng flip_rng;
    BooleanTensor input;     // buffered x^l
    bool buffered = false;
    std::vector<double> q;   // last optimization signal
  };

  BooleanMlp(std::vector<std::size_t> dims, LossKind loss, OptimConfig cfg,
             bool random_init);
  BooleanTensor weight_rows(std::size_t layer) const;

  std::vector<std::size_t> dims_;
  LossKind loss_;
  OptimConfig cfg_;
  std::vector<Layer> layers_;
  std::size_t epochs_ = 0;
};

// Rows of x selected by idx, in order, as a new tensor.
BooleanTensor gather_rows(const BooleanTensor& x,
                          std::span<const std::size_t> idx);

// Deterministic Fisher-Yates permutation of 0..n-1 using rng counters
// counter_base..counter_base+n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n,
                                          const StreamRng& rng,
                                          std::uint64_t counter_base);

}  // namespace boolnet
