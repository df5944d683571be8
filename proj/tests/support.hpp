#pragma once

// Hand-rolled generators for the property tests. Every case is reproducible from
// (seed, index), and the failing case index is reported through doctest's INFO.

#include <cstdint>
#include <random>

#include "hypokin/structure.hpp"
#include "hypokin/types.hpp"

namespace hypokin::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  Vec vec(int n, double lo, double hi) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  MatX matrix(int r, int c, double lo, double hi) {
    MatX m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int k = 0; k < c; ++k) m(i, k) = uniform(lo, hi);
    }
    return m;
  }

  /// Non-increasing block sizes d_0 >= d_1 >= ... summing to N, with d_0 = d.
  std::vector<int> blocks(int N) {
    std::vector<int> out;
    int left = N;
    int cap = integer(1, N);
    while (left > 0) {
      const int b = integer(1, std::min(cap, left));
      out.push_back(b);
      left -= b;
      cap = b;
    }
    return out;
  }

  /// Random B in canonical lower block form: full-rank sub-diagonal blocks, arbitrary
  /// entries on and above the diagonal blocks when `stars` is set.
  MatX canonical_B(const std::vector<int>& blocks, bool stars, bool deficient = false) {
    int N = 0;
    for (int b : blocks) N += b;
    MatX B = MatX::Zero(N, N);
    int row = blocks[0];
    int col = 0;
    for (std::size_t j = 1; j < blocks.size(); ++j) {
      const int r = blocks[j];
      const int c = blocks[j - 1];
      // [I_r 0] plus a small perturbation keeps full row rank r
      MatX sub = MatX::Zero(r, c);
      for (int i = 0; i < r; ++i) sub(i, i) = uniform(0.5, 2.0) * (coin() ? 1.0 : -1.0);
      for (int i = 0; i < r; ++i) {
        for (int k = 0; k < c; ++k) {
          if (i != k) sub(i, k) = uniform(-0.1, 0.1);
        }
      }
      B.block(row, col, r, c) = sub;
      row += r;
      col += c;
    }
    if (stars) {
      int r0 = 0;
      for (std::size_t j = 0; j < blocks.size(); ++j) {
        B.block(0, r0, r0 + blocks[j], blocks[j]) = matrix(r0 + blocks[j], blocks[j], -1.0, 1.0);
        r0 += blocks[j];
      }
    }
    // a zero last row makes e_N a left null vector orthogonal to the injection
    if (deficient) B.row(N - 1).setZero();
    return B;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace hypokin::testing

#include <doctest.h>

#include "hypokin/errors.hpp"

// Checks that `expr` throws hypokin::Error of the given kind.
#define CHECK_KIND(expr, expected_kind)                                   \
  do {                                                                    \
    bool thrown_ = false;                                                 \
    try {                                                                 \
      (void)(expr);                                                       \
    } catch (const ::hypokin::Error& e_) {                                \
      thrown_ = true;                                                     \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());             \
    }                                                                     \
    CHECK_MESSAGE(thrown_, "expected an exception from " #expr);          \
  } while (false)
