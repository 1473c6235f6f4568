#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "boolnet/bitcore.hpp"
#include "boolnet/rng.hpp"
#include "oracles.hpp"

using namespace boolnet;

namespace {

bool padding_clean(const BooleanTensor& t) {
  if (t.words().empty()) return true;
  return (t.words().back() & ~BooleanTensor::tail_mask(t.size())) == 0;
}

}  // namespace

TEST_CASE("xnor truth table") {
  auto a = BooleanTensor::from_bits({3}, {true, false, true});
  auto b = BooleanTensor::from_bits({3}, {true, true, false});
  auto c = xnor(a, b);
  CHECK(c.get(0));
  CHECK_FALSE(c.get(1));
  CHECK_FALSE(c.get(2));

  auto d = xnor(BooleanTensor::from_bits({2}, {false, false}),
                BooleanTensor::from_bits({2}, {true, false}));
  CHECK_FALSE(d.get(0));
  CHECK(d.get(1));
}

TEST_CASE("xnor of a tensor with itself is all-True") {
  StreamRng rng(11);
  for (std::size_t n : {1u, 63u, 64u, 65u, 200u}) {
    auto a = BooleanTensor::random({n}, StreamRng(n, 3));
    auto c = xnor(a, a);
    CHECK(c.count_true() == n);
    CHECK(padding_clean(c));
  }
  (void)rng;
}

TEST_CASE("xnor rejects shape mismatch") {
  CHECK_THROWS_AS(xnor(BooleanTensor({3}), BooleanTensor({4})),
                  std::invalid_argument);
}

TEST_CASE("pack/unpack round trip") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    StreamRng rng(seed);
    std::size_t r = 1 + rng.bits(0) % 9, c = 1 + rng.bits(1) % 130;
    auto t = BooleanTensor::random({r, c}, StreamRng(seed, 1));
    auto signs = t.unpack_signs();
    CHECK(BooleanTensor::from_signs(t.shape(), signs) == t);
    CHECK(padding_clean(t));
  }
}

TEST_CASE("signed dot equals popcount identity on packed rows") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    StreamRng rng(seed, 7);
    std::size_t m = 1 + rng.bits(0) % 300;
    auto a = BooleanTensor::random({m}, StreamRng(seed, 8));
    auto b = BooleanTensor::random({m}, StreamRng(seed, 9));
    std::int64_t ref = 0;
    for (std::size_t i = 0; i < m; ++i) ref += a.sign(i) * b.sign(i);
    CHECK(dot_packed(a.words(), b.words(), m) == ref);
  }
}

TEST_CASE("forward_layer hand cases") {
  // x=(T,F,T) against column (T,T,F) with w0=T: +1 + (1 - 1 - 1) = 0.
  auto x = BooleanTensor::from_bits({1, 3}, {true, false, true});
  auto w = BooleanTensor::from_bits({3, 1}, {true, true, false});
  auto w0 = BooleanTensor::from_bits({1}, {true});
  auto p = forward_layer(x, w, w0);
  CHECK(p.at(0, 0) == 0);

  // x equal to the weight column gives the maximum m+1.
  auto w_eq = BooleanTensor::from_bits({3, 1}, {true, false, true});
  CHECK(forward_layer(x, w_eq, w0).at(0, 0) == 4);
}

TEST_CASE("forward_layer equals naive oracle on random cases") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    StreamRng shapes(seed, 20);
    std::size_t K = 1 + shapes.bits(0) % 6;
    std::size_t m = 1 + shapes.bits(1) % 200;
    std::size_t n = 1 + shapes.bits(2) % 6;
    auto x = BooleanTensor::random({K, m}, StreamRng(seed, 21));
    auto w = BooleanTensor::random({m, n}, StreamRng(seed, 22));
    auto w0 = BooleanTensor::random({n}, StreamRng(seed, 23));
    auto p = forward_layer(x, w, w0);
    auto ref = oracle::forward(x.unpack_signs(), w.unpack_signs(),
                               w0.unpack_signs(), K, m, n);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < n; ++j)
        REQUIRE(p.at(k, j) == ref[k * n + j]);
  }
}

TEST_CASE("forward_layer matches oracle on the K=4 m=64 n=8 case") {
  auto x = BooleanTensor::random({4, 64}, StreamRng(99, 0));
  auto w = BooleanTensor::random({64, 8}, StreamRng(99, 1));
  auto w0 = BooleanTensor::random({8}, StreamRng(99, 2));
  auto p = forward_layer(x, w, w0);
  auto ref = oracle::forward(x.unpack_signs(), w.unpack_signs(),
                             w0.unpack_signs(), 4, 64, 8);
  for (std::size_t i = 0; i < ref.size(); ++i)
    CHECK(p.values[i] == ref[i]);
}

TEST_CASE("pre-activation parity matches m+1") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::size_t m = 1 + StreamRng(seed, 30).bits(0) % 40;
    auto x = BooleanTensor::random({3, m}, StreamRng(seed, 31));
    auto w = BooleanTensor::random({m, 4}, StreamRng(seed, 32));
    auto w0 = BooleanTensor::random({4}, StreamRng(seed, 33));
    auto p = forward_layer(x, w, w0);
    for (std::int32_t v : p.values) {
      CHECK(std::abs(v) <= static_cast<std::int32_t>(m) + 1);
      CHECK(((v % 2 + 2) % 2) == static_cast<std::int32_t>((m + 1) % 2));
    }
  }
}

TEST_CASE("forward_layer rejects dimension mismatch") {
  auto x = BooleanTensor({2, 5});
  auto w = BooleanTensor({4, 3});
  auto w0 = BooleanTensor({3});
  CHECK_THROWS_AS(forward_layer(x, w, w0), std::invalid_argument);
  CHECK_THROWS_AS(assemble_params(BooleanTensor({2}), w), std::invalid_argument);
}

TEST_CASE("binarize thresholds at zero with zero mapping to True") {
  PreActivation p(1, 3);
  p.at(0, 0) = 3;
  p.at(0, 1) = -1;
  p.at(0, 2) = 0;
  auto b = binarize(p);
  CHECK(b.get(0));
  CHECK_FALSE(b.get(1));
  CHECK(b.get(2));

  PreActivation q(2, 2);
  q.values = {5, 1, 2, 7};
  CHECK(binarize(q).count_true() == 4);
}

TEST_CASE("binarize tie-break is unreachable for even input width") {
  // m even means m+1 terms, an odd count of +-1, so sums are odd and the
  // zero tie-break cannot fire. Exhaust m=2 to confirm.
  const std::size_t m = 2;
  for (unsigned mask = 0; mask < (1u << (2 * m + 1)); ++mask) {
    std::vector<bool> xb(m), wb(m);
    for (std::size_t i = 0; i < m; ++i) {
      xb[i] = (mask >> i) & 1;
      wb[i] = (mask >> (m + i)) & 1;
    }
    bool bias = (mask >> (2 * m)) & 1;
    auto p = forward_layer(BooleanTensor::from_bits({1, m}, xb),
                           BooleanTensor::from_bits({m, 1}, wb),
                           BooleanTensor::from_bits({1}, {bias}));
    CHECK(p.at(0, 0) % 2 != 0);
  }
}

TEST_CASE("padding bits stay zero after every operation") {
  auto a = BooleanTensor::random({5, 13}, StreamRng(1, 40));
  auto b = BooleanTensor::random({5, 13}, StreamRng(2, 40));
  CHECK(padding_clean(xnor(a, b)));
  auto f = BooleanTensor::filled({70}, true);
  CHECK(padding_clean(f));
  f.flip_bit(69);
  CHECK(padding_clean(f));
  auto s = a.slice_rows(1, 4);
  CHECK(padding_clean(s));
  CHECK(s.shape()[0] == 3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 13; ++c) CHECK(s.at(r, c) == a.at(r + 1, c));
}

TEST_CASE("serialization round trip") {
  auto t = BooleanTensor::random({3, 77}, StreamRng(5, 50));
  std::ostringstream os;
  t.serialize(os);
  std::istringstream is(os.str());
  CHECK(BooleanTensor::deserialize(is) == t);
}

TEST_CASE("deserialization rejects bad magic and dirty padding") {
  std::istringstream bad("XXXX????");
  CHECK_THROWS_AS(BooleanTensor::deserialize(bad), std::runtime_error);

  auto t = BooleanTensor::filled({3}, true);
  std::ostringstream os;
  t.serialize(os);
  std::string bytes = os.str();
  bytes[bytes.size() - 1] = static_cast<char>(0xff);  // corrupt padding
  std::istringstream dirty(bytes);
  CHECK_THROWS_AS(BooleanTensor::deserialize(dirty), std::runtime_error);
}

TEST_CASE("exhaustive packed-vs-oracle sweep for narrow layers") {
  // All (x row, w column, bias) combinations for m <= 6; the acceptance
  // suite extends this to m <= 9 plus large random cases.
  for (std::size_t m = 1; m <= 6; ++m) {
    const unsigned total = 1u << (2 * m + 1);
    for (unsigned mask = 0; mask < total; ++mask) {
      std::vector<bool> xb(m), wb(m);
      for (std::size_t i = 0; i < m; ++i) {
        xb[i] = (mask >> i) & 1;
        wb[i] = (mask >> (m + i)) & 1;
      }
      bool bias = (mask >> (2 * m)) & 1;
      auto x = BooleanTensor::from_bits({1, m}, xb);
      auto w = BooleanTensor::from_bits({m, 1}, wb);
      auto w0 = BooleanTensor::from_bits({1}, {bias});
      auto ref = oracle::forward(x.unpack_signs(), w.unpack_signs(),
                                 w0.unpack_signs(), 1, m, 1);
      REQUIRE(forward_layer(x, w, w0).at(0, 0) == ref[0]);
    }
  }
}
