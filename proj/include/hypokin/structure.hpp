#pragma once

#include <vector>

#include <json.hpp>

#include "hypokin/types.hpp"

namespace hypokin {

struct KalmanResult {
  bool controllable = false;
  int rank = 0;
};

/// Kalman controllability test for the pair (B, first-d-coordinates injection).
/// Rank uses singular values with threshold 1e-10 times the largest one.
KalmanResult kalman_rank(const MatX& B, int d);

/// e^{tB} by scaling and squaring of a truncated Taylor series.
MatX matrix_exp(const MatX& B, double t);

/// Block geometry of the drift matrix B in canonical lower block-triangular form.
struct DriftStructure {
  int N = 0;
  int d = 0;
  MatX B;
  std::vector<int> blocks;      // d_0 >= d_1 >= ... >= d_q >= 1
  std::vector<int> cumulative;  // bar d_j = d_0 + ... + d_j
  std::vector<int> weights;     // 2j+1 for every coordinate of block j
  int Q = 0;                    // homogeneous dimension sum_j (2j+1) d_j

  /// e^{tB}; exact polynomial evaluation when B is nilpotent.
  Mat exp(double t) const;

  /// Dilation delta_lambda scaling block j by lambda^{2j+1}.
  Vec dilate(const Vec& x, double lambda) const;

  int block_of(int coordinate) const;

  bool nilpotent() const { return nilpotent_; }

  // Filled by block_structure.
  void prepare();

 private:
  bool nilpotent_ = false;
  std::vector<Mat> powers_;  // B^k / k!, k = 0..N-1 (nilpotent case)
};

/// Extracts the block sizes from the sub-diagonal rank pattern of B.
/// Throws NotCanonicalForm or HormanderViolation.
DriftStructure block_structure(const MatX& B, int d);

/// sum_j sum_{i in block j} |x_i|^{1/(2j+1)}
double anisotropic_norm(const Vec& x, const DriftStructure& S);

using MultiIndex = std::vector<int>;

/// [iota]_B = sum_j (2j+1) sum_{i in block j} iota_i
int b_length(const MultiIndex& iota, const DriftStructure& S);

/// Langevin drift [[0,0],[I_d,0]] in dimension 2d.
MatX langevin_drift(int d);

void to_json(nlohmann::json& j, const DriftStructure& S);
void from_json(const nlohmann::json& j, DriftStructure& S);

}  // namespace hypokin
