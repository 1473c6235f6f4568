#include "boolnet/bitcore.hpp"

#include <algorithm>
#include <bit>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "boolnet/rng.hpp"

namespace boolnet {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void require_rank2(const BooleanTensor& t, const char* name) {
  if (t.rank() != 2)
    throw std::invalid_argument(std::string(name) + ": rank-2 tensor required");
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("tensor stream truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("tensor stream truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr char kTensorMagic[4] = {'B', 'N', 'T', '1'};

}  // namespace

BooleanTensor::BooleanTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)),
      size_(shape_product(shape_)),
      words_(word_count(size_), 0) {}

BooleanTensor BooleanTensor::filled(std::vector<std::size_t> shape, bool value) {
  BooleanTensor t(std::move(shape));
  if (value && t.size_ > 0) {
    for (auto& w : t.words_) w = ~0ULL;
    t.words_.back() &= tail_mask(t.size_);
  }
  return t;
}

BooleanTensor BooleanTensor::from_bits(std::vector<std::size_t> shape,
                                       const std::vector<bool>& bits) {
  BooleanTensor t(std::move(shape));
  if (bits.size() != t.size_)
    throw std::invalid_argument("from_bits: element count mismatch");
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) t.words_[i >> 6] |= 1ULL << (i & 63);
  return t;
}

BooleanTensor BooleanTensor::from_signs(std::vector<std::size_t> shape,
                                        std::span<const int> signs) {
  BooleanTensor t(std::move(shape));
  if (signs.size() != t.size_)
    throw std::invalid_argument("from_signs: element count mismatch");
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] != 1 && signs[i] != -1)
      throw std::invalid_argument("from_signs: entries must be +1 or -1");
    if (signs[i] > 0) t.words_[i >> 6] |= 1ULL << (i & 63);
  }
  return t;
}

BooleanTensor BooleanTensor::random(std::vector<std::size_t> shape,
                                    const StreamRng& rng) {
  BooleanTensor t(std::move(shape));
  for (std::size_t i = 0; i < t.words_.size(); ++i) t.words_[i] = rng.bits(i);
  if (!t.words_.empty()) t.words_.back() &= tail_mask(t.size_);
  return t;
}

void BooleanTensor::set(std::size_t flat, bool value) {
  if (value)
    words_[flat >> 6] |= 1ULL << (flat & 63);
  else
    words_[flat >> 6] &= ~(1ULL << (flat & 63));
}

std::vector<int> BooleanTensor::unpack_signs() const {
  std::vector<int> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = sign(i);
  return out;
}

std::size_t BooleanTensor::count_true() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += std::popcount(w);
  return n;
}

BooleanTensor BooleanTensor::slice_rows(std::size_t r0, std::size_t r1) const {
  require_rank2(*this, "slice_rows");
  if (r0 > r1 || r1 > shape_[0])
    throw std::invalid_argument("slice_rows: row range out of bounds");
  std::size_t cols = shape_[1];
  BooleanTensor out({r1 - r0, cols});
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (at(r, c)) out.set((r - r0) * cols + c, true);
  return out;
}

void BooleanTensor::serialize(std::ostream& os) const {
  os.write(kTensorMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(shape_.size()));
  for (std::size_t d : shape_) write_u32(os, static_cast<std::uint32_t>(d));
  for (std::uint64_t w : words_) write_u64(os, w);
  if (!os) throw std::runtime_error("tensor write failed");
}

BooleanTensor BooleanTensor::deserialize(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kTensorMagic, 4))
    throw std::runtime_error("bad tensor magic");
  std::uint32_t rank = read_u32(is);
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = read_u32(is);
  BooleanTensor t(std::move(shape));
  for (auto& w : t.words_) w = read_u64(is);
  if (!t.words_.empty() && (t.words_.back() & ~tail_mask(t.size_)) != 0)
    throw std::runtime_error("tensor has nonzero padding bits");
  return t;
}

BooleanTensor xnor(const BooleanTensor& a, const BooleanTensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("xnor: shape mismatch");
  BooleanTensor out(a.shape_);
  for (std::size_t i = 0; i < out.words_.size(); ++i)
    out.words_[i] = ~(a.words_[i] ^ b.words_[i]);
  if (!out.words_.empty()) out.words_.back() &= BooleanTensor::tail_mask(out.size_);
  return out;
}

void BitRows::set(std::size_t r, std::size_t c, bool value) {
  std::uint64_t& w = words[r * words_per_row + (c >> 6)];
  if (value)
    w |= 1ULL << (c & 63);
  else
    w &= ~(1ULL << (c & 63));
}

BitRows pack_input_rows(const BooleanTensor& x) {
  require_rank2(x, "pack_input_rows");
  std::size_t rows = x.shape()[0], m = x.shape()[1];
  BitRows out;
  out.rows = rows;
  out.cols = m + 1;
  out.words_per_row = BooleanTensor::word_count(out.cols);
  out.words.assign(rows * out.words_per_row, 0);
  for (std::size_t k = 0; k < rows; ++k) {
    out.set(k, 0, true);  // constant bias input
    for (std::size_t i = 0; i < m; ++i)
      if (x.at(k, i)) out.set(k, i + 1, true);
  }
  return out;
}

BitRows pack_param_cols(const BooleanTensor& params) {
  require_rank2(params, "pack_param_cols");
  std::size_t rows = params.shape()[0], n = params.shape()[1];
  BitRows out;
  out.rows = n;
  out.cols = rows;
  out.words_per_row = BooleanTensor::word_count(out.cols);
  out.words.assign(n * out.words_per_row, 0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (params.at(i, j)) out.set(j, i, true);
  return out;
}

BooleanTensor assemble_params(const BooleanTensor& w0, const BooleanTensor& w) {
  require_rank2(w, "assemble_params");
  if (w0.rank() != 1 || w0.size() != w.shape()[1])
    throw std::invalid_argument("assemble_params: bias length must equal output width");
  std::size_t m = w.shape()[0], n = w.shape()[1];
  BooleanTensor params({m + 1, n});
  for (std::size_t j = 0; j < n; ++j)
    if (w0.get(j)) params.set(j, true);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (w.at(i, j)) params.set((i + 1) * n + j, true);
  return params;
}

std::int64_t dot_packed(std::span<const std::uint64_t> a,
                        std::span<const std::uint64_t> b, std::size_t bits) {
  std::size_t nw = BooleanTensor::word_count(bits);
  std::int64_t agree = 0;
  for (std::size_t i = 0; i < nw; ++i) {
    std::uint64_t v = ~(a[i] ^ b[i]);
    if (i + 1 == nw) v &= BooleanTensor::tail_mask(bits);
    agree += std::popcount(v);
  }
  return 2 * agree - static_cast<std::int64_t>(bits);
}

namespace {
std::size_t g_threads = 1;
}

void set_thread_count(std::size_t n) { g_threads = n == 0 ? 1 : n; }
std::size_t thread_count() { return g_threads; }

void forward_packed(const BitRows& x_ext, const BitRows& param_cols,
                    PreActivation& out) {
  if (x_ext.cols != param_cols.cols)
    throw std::invalid_argument("forward_packed: inner widths differ");
  out = PreActivation(x_ext.rows, param_cols.rows);
  auto rows = [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k) {
      auto xr = x_ext.row(k);
      for (std::size_t j = 0; j < param_cols.rows; ++j)
        out.at(k, j) = static_cast<std::int32_t>(
            dot_packed(xr, param_cols.row(j), x_ext.cols));
    }
  };
  std::size_t nt = std::min(g_threads, x_ext.rows);
  if (nt <= 1 || x_ext.rows < 128) {
    rows(0, x_ext.rows);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::size_t chunk = (x_ext.rows + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    std::size_t k0 = t * chunk, k1 = std::min(k0 + chunk, x_ext.rows);
    if (k0 < k1) pool.emplace_back(rows, k0, k1);
  }
  for (auto& th : pool) th.join();
}

PreActivation forward_layer(const BooleanTensor& x, const BooleanTensor& w,
                            const BooleanTensor& w0) {
  require_rank2(x, "forward_layer");
  require_rank2(w, "forward_layer");
  if (x.shape()[1] != w.shape()[0])
    throw std::invalid_argument("forward_layer: input width must equal weight rows");
  BitRows xe = pack_input_rows(x);
  BitRows cols = pack_param_cols(assemble_params(w0, w));
  PreActivation out;
  forward_packed(xe, cols, out);
  return out;
}

BooleanTensor binarize(const PreActivation& p) {
  BooleanTensor out({p.rows, p.cols});
  for (std::size_t i = 0; i < p.values.size(); ++i)
    if (p.values[i] >= 0) out.set(i, true);
  return out;
}

}  // namespace boolnet
