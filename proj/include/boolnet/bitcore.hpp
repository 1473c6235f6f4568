#pragma once

// Bit-packed {-1,+1} tensors and the XNOR-popcount forward kernel.
//
// Encoding: bit 1 = True = +1, bit 0 = False = -1. Storage is row-major with
// LSB-first bit order inside 64-bit words. Padding bits past the logical
// extent are kept at zero (canonical form), so tensor equality is plain
// word-wise comparison.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace boolnet {

class StreamRng;

class BooleanTensor {
 public:
  BooleanTensor() = default;

  // All-False tensor of the given shape.
  explicit BooleanTensor(std::vector<std::size_t> shape);

  static BooleanTensor filled(std::vector<std::size_t> shape, bool value);
  static BooleanTensor from_bits(std::vector<std::size_t> shape,
                                 const std::vector<bool>& bits);
  // signs holds +1/-1 entries.
  static BooleanTensor from_signs(std::vector<std::size_t> shape,
                                  std::span<const int> signs);
  static BooleanTensor random(std::vector<std::size_t> shape,
                              const StreamRng& rng);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return size_; }

  bool get(std::size_t flat) const {
    return (words_[flat >> 6] >> (flat & 63)) & 1u;
  }
  void set(std::size_t flat, bool value);
  void flip_bit(std::size_t flat) { words_[flat >> 6] ^= 1ULL << (flat & 63); }

  // Rank-2 access, row-major.
  bool at(std::size_t r, std::size_t c) const { return get(r * shape_[1] + c); }

  int sign(std::size_t flat) const { return get(flat) ? 1 : -1; }
  std::vector<int> unpack_signs() const;

  std::size_t count_true() const;

  // Rows [r0, r1) of a rank-2 tensor as a new tensor.
  BooleanTensor slice_rows(std::size_t r0, std::size_t r1) const;

  std::span<const std::uint64_t> words() const { return words_; }

  bool operator==(const BooleanTensor&) const = default;

  // Layout: magic "BNT1", rank u32le, dims u32le each, then the packed
  // words as u64le. Deserialization rejects nonzero padding bits.
  void serialize(std::ostream& os) const;
  static BooleanTensor deserialize(std::istream& is);

  static std::size_t word_count(std::size_t bits) { return (bits + 63) / 64; }
  // Mask selecting the valid bits of the last word covering `bits` bits.
  static std::uint64_t tail_mask(std::size_t bits) {
    std::size_t rem = bits & 63;
    return rem == 0 ? ~0ULL : (1ULL << rem) - 1;
  }

 private:
  friend BooleanTensor xnor(const BooleanTensor&, const BooleanTensor&);

  std::vector<std::size_t> shape_;
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

// Elementwise XNOR; in the +-1 encoding this is the elementwise product.
BooleanTensor xnor(const BooleanTensor& a, const BooleanTensor& b);

// Integer neuron outputs of one layer: values in [-(m+1), m+1] and congruent
// to m+1 mod 2, m being the layer input width.
struct PreActivation {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> values;

  PreActivation() = default;
  PreActivation(std::size_t r, std::size_t c)
      : rows(r), cols(c), values(r * c, 0) {}

  std::int32_t& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  std::int32_t at(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
};

// Word-aligned bit rows: each row starts on a word boundary so kernels can
// walk whole words. Padding bits are zero.
struct BitRows {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t words_per_row = 0;
  std::vector<std::uint64_t> words;

  std::span<const std::uint64_t> row(std::size_t r) const {
    return {words.data() + r * words_per_row, words_per_row};
  }
  bool get(std::size_t r, std::size_t c) const {
    return (words[r * words_per_row + (c >> 6)] >> (c & 63)) & 1u;
  }
  void set(std::size_t r, std::size_t c, bool value);
};

// Rows of a rank-2 tensor, each preceded by a constant True bit (the bias
// input), giving rows of m+1 bits.
BitRows pack_input_rows(const BooleanTensor& x);

// Columns of a [(m+1) x n] parameter tensor as n bit rows of m+1 bits.
BitRows pack_param_cols(const BooleanTensor& params);

// Stack bias and weights into the [(m+1) x n] parameter tensor; row 0 is the
// bias row, row i (i >= 1) is weight row i-1.
BooleanTensor assemble_params(const BooleanTensor& w0, const BooleanTensor& w);

// Signed dot product of two packed bit rows over `bits` bits:
//   sum_i a_i * b_i  =  2 * popcount(~(a ^ b) & valid) - bits.
std::int64_t dot_packed(std::span<const std::uint64_t> a,
                        std::span<const std::uint64_t> b, std::size_t bits);

// Worker threads used by forward_packed for large batches. Results are
// independent of the setting (threads write disjoint output rows); 1 keeps
// everything on the calling thread.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// out[k][j] = 2 * popcount(XNOR(x_ext row k, param col j)) - (m+1).
// Exactly equal to the bias term plus the signed sum of XNOR products.
void forward_packed(const BitRows& x_ext, const BitRows& param_cols,
                    PreActivation& out);

// Forward pass of one layer: out[k][j] = sign(w0[j]) + sum_i x[k][i]*w[i][j]
// in the +-1 encoding. x is [K x m], w is [m x n], w0 is [n].
PreActivation forward_layer(const BooleanTensor& x, const BooleanTensor& w,
                            const BooleanTensor& w0);

// Threshold at zero: value > 0 maps to True, value == 0 maps to True as the
// fixed tie-break, value < 0 maps to False. When m+1 is odd the value 0 is
// unreachable (the sum of an odd count of +-1 terms is odd), so the
// tie-break never fires there.
BooleanTensor binarize(const PreActivation& p);

}  // namespace boolnet
