#include "hypokin/structure.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hypokin/errors.hpp"

namespace hypokin {

namespace {

int numerical_rank(const MatX& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatX> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double threshold = 1e-10 * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > threshold) ++rank;
  }
  return rank;
}

void require_square(const MatX& B) {
  if (B.rows() != B.cols() || B.rows() == 0) {
    fail(ErrorKind::Structural, "drift matrix must be square and non-empty, got " +
                                    std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  }
}

}  // namespace

KalmanResult kalman_rank(const MatX& B, int d) {
  require_square(B);
  const int n = static_cast<int>(B.rows());
  if (d < 1 || d > n) fail(ErrorKind::Structural, "diffusion rank d out of range");

  MatX krylov(n, n * d);
  MatX block = MatX::Identity(n, n).leftCols(d);
  for (int k = 0; k < n; ++k) {
    krylov.middleCols(k * d, d) = block;
    block = B * block;
  }
  KalmanResult out;
  out.rank = numerical_rank(krylov);
  out.controllable = out.rank == n;
  return out;
}

MatX matrix_exp(const MatX& B, double t) {
  require_square(B);
  const int n = static_cast<int>(B.rows());
  MatX A = t * B;
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  A /= std::ldexp(1.0, squarings);

  // ||A||_1 <= 1/2, so the order-18 remainder is below 1e-22.
  MatX result = MatX::Identity(n, n);
  MatX term = MatX::Identity(n, n);
  for (int k = 1; k <= 18; ++k) {
    term = (term * A) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() == 0.0) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

Mat DriftStructure::exp(double t) const {
  if (!nilpotent_) return matrix_exp(B, t);
  Mat out = powers_[0];
  double tk = 1.0;
  for (std::size_t k = 1; k < powers_.size(); ++k) {
    tk *= t;
    out.noalias() += tk * powers_[k];
  }
  return out;
}

Vec DriftStructure::dilate(const Vec& x, double lambda) const {
  Vec out = x;
  for (int i = 0; i < N; ++i) out(i) *= std::pow(lambda, weights[i]);
  return out;
}

int DriftStructure::block_of(int coordinate) const {
  for (std::size_t j = 0; j < cumulative.size(); ++j) {
    if (coordinate < cumulative[j]) return static_cast<int>(j);
  }
  fail(ErrorKind::Structural, "coordinate outside state space");
}

void DriftStructure::prepare() {
  cumulative.clear();
  weights.assign(N, 0);
  Q = 0;
  int acc = 0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    for (int i = 0; i < blocks[j]; ++i) weights[acc + i] = static_cast<int>(2 * j + 1);
    acc += blocks[j];
    cumulative.push_back(acc);
    Q += static_cast<int>(2 * j + 1) * blocks[j];
  }

  powers_.clear();
  MatX power = MatX::Identity(N, N);
  double factorial = 1.0;
  nilpotent_ = false;
  for (int k = 0; k <= N; ++k) {
    if (power.cwiseAbs().maxCoeff() == 0.0) {
      nilpotent_ = true;
      break;
    }
    if (k == N) break;
    if (k > 0) factorial *= k;
    powers_.push_back(Mat(power / factorial));
    power = power * B;
  }
  if (!nilpotent_) powers_.clear();
}

DriftStructure block_structure(const MatX& B, int d) {
  require_square(B);
  const int n = static_cast<int>(B.rows());
  if (d < 1 || d > n) fail(ErrorKind::Structural, "diffusion rank d out of range");

  const double scale = std::max(1.0, B.cwiseAbs().maxCoeff());
  const auto nonzero = [&](double v) { return std::abs(v) > 1e-14 * scale; };

  DriftStructure S;
  S.N = n;
  S.d = d;
  S.B = B;
  S.blocks.push_back(d);

  // block sizes are the rank increments of [E, BE, B^2 E, ...]; they depend only on B
  MatX krylov = MatX::Identity(n, d);
  MatX power = krylov;
  int rank = d;
  while (rank < n) {
    power = B * power;
    MatX grown(n, krylov.cols() + d);
    grown << krylov, power;
    const int r = numerical_rank(grown);
    if (r == rank) {
      fail(ErrorKind::HormanderViolation, "Kalman rank " + std::to_string(rank) + " < " +
                                              std::to_string(n) + "; the pair is not controllable");
    }
    S.blocks.push_back(r - rank);
    rank = r;
    krylov = std::move(grown);
  }

  int start = 0;  // first coordinate of block j
  for (std::size_t j = 0; j + 1 < S.blocks.size(); ++j) {
    const int size = S.blocks[j];
    const int next = start + size;
    const int below = next + S.blocks[j + 1];
    for (int r = below; r < n; ++r) {
      for (int c = 0; c < next; ++c) {
        if (nonzero(B(r, c))) {
          fail(ErrorKind::NotCanonicalForm, "nonzero entry below the sub-diagonal band at (" +
                                                std::to_string(r) + "," + std::to_string(c) + ")");
        }
      }
    }
    const int rk = numerical_rank(B.block(next, start, S.blocks[j + 1], size));
    if (rk != S.blocks[j + 1]) {
      fail(ErrorKind::NotCanonicalForm, "sub-diagonal block " + std::to_string(j + 1) + " has rank " +
                                            std::to_string(rk) + " < " + std::to_string(S.blocks[j + 1]));
    }
    start = next;
  }
  S.prepare();
  return S;
}

double anisotropic_norm(const Vec& x, const DriftStructure& S) {
  double out = 0.0;
  for (int i = 0; i < S.N; ++i) {
    const double a = std::abs(x(i));
    out += S.weights[i] == 1 ? a : std::pow(a, 1.0 / S.weights[i]);
  }
  return out;
}

int b_length(const MultiIndex& iota, const DriftStructure& S) {
  if (static_cast<int>(iota.size()) != S.N) {
    fail(ErrorKind::Structural, "multi-index length does not match the state dimension");
  }
  int out = 0;
  for (int i = 0; i < S.N; ++i) {
    if (iota[i] < 0) fail(ErrorKind::Structural, "multi-index entries must be non-negative");
    out += S.weights[i] * iota[i];
  }
  return out;
}

MatX langevin_drift(int d) {
  MatX B = MatX::Zero(2 * d, 2 * d);
  B.block(d, 0, d, d) = MatX::Identity(d, d);
  return B;
}

void to_json(nlohmann::json& j, const DriftStructure& S) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(S.N) * S.N);
  for (int r = 0; r < S.N; ++r)
    for (int c = 0; c < S.N; ++c) flat.push_back(S.B(r, c));
  j = nlohmann::json{{"N", S.N}, {"d", S.d}, {"B", flat}, {"blocks", S.blocks}};
}

void from_json(const nlohmann::json& j, DriftStructure& S) {
  const int n = j.at("N").get<int>();
  const int d = j.at("d").get<int>();
  const auto flat = j.at("B").get<std::vector<double>>();
  if (static_cast<int>(flat.size()) != n * n) {
    fail(ErrorKind::Structural, "B must hold N*N entries in row-major order");
  }
  MatX B(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) B(r, c) = flat[static_cast<std::size_t>(r) * n + c];
  S = block_structure(B, d);
  if (j.contains("blocks") && j.at("blocks").get<std::vector<int>>() != S.blocks) {
    fail(ErrorKind::InvalidConfig, "declared blocks do not match the drift matrix");
  }
}

}  // namespace hypokin
