#pragma once

// Quantum extractors as uniform mixtures of unitaries, their select-based
// dilations, and spectrum flattening by typical-subspace projection.
//
// An extractor here is data: 2^d unitaries on n qubits together with a
// min-entropy threshold k and an accuracy figure epsilon.  For the exact
// Pauli twirl epsilon is identically zero; for random mixtures it is
// *measured* on a battery of extremal high-min-entropy states (flat states
// on random subspaces), since the states with H_inf >= k form a convex set
// whose extreme points are flat, and the distance to the maximally mixed
// state is convex in the input.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lowent/core.hpp"
#include "lowent/random.hpp"

namespace lowent {

struct Extractor {
  int n = 0;                   // qubits acted on
  std::vector<Mat> unitaries;  // 2^d of them
  double k = 0.0;              // min-entropy threshold (bits)
  int d = 0;                   // regularity exponent
  double epsilon = 0.0;        // accuracy at threshold k (measured or exact)

  // T(rho) = 2^{-d} sum_i U_i rho U_i^dagger.
  DensityMatrix apply(const DensityMatrix& rho) const {
    if (rho.qubits() != n) throw format_error("extractor input size mismatch");
    Mat out = Mat::Zero(rho.dim(), rho.dim());
    for (const auto& u : unitaries) out += u * rho.matrix() * u.adjoint();
    out /= static_cast<double>(unitaries.size());
    return DensityMatrix::unchecked(rho.layout(), (out + out.adjoint()) / 2.0);
  }
};

inline DensityMatrix maximally_mixed(RegisterLayout layout) {
  const auto dim = layout.dim();
  return DensityMatrix::unchecked(
      std::move(layout),
      Mat::Identity(dim, dim) / static_cast<double>(dim));
}

// Worst measured ||T(rho) - I~||_1 over a battery of states with
// H_inf(rho) >= k: flat states on random ceil(2^k)-dimensional subspaces
// (the extreme points of the constraint set) plus a few generic states
// smoothed toward I~ until their largest eigenvalue meets 2^{-k}.
inline double measure_extractor_error(const Extractor& x, double k,
                                      int battery, Rng& rng) {
  if (k < 0.0 || k > x.n + 1e-12) throw format_error("threshold out of range");
  const std::size_t dim = std::size_t{1} << x.n;
  const auto sub = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(dim), std::ceil(std::exp2(k))));
  const auto layout = RegisterLayout::single("A", x.n);
  const auto mixed = maximally_mixed(layout);
  double worst = 0.0;
  for (int b = 0; b < battery; ++b) {
    Mat rho;
    if (b % 4 != 3) {
      const Mat u = haar_unitary(dim, rng);
      rho = u.leftCols(sub) * u.leftCols(sub).adjoint() /
            static_cast<double>(sub);
    } else {
      rho = random_density(layout, static_cast<int>(dim), rng).matrix();
      Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
      const double lam = es.eigenvalues().maxCoeff();
      const double target = std::exp2(-k);
      if (lam > target) {
        const double w = (lam - target) / (lam - 1.0 / dim);
        rho = (1.0 - w) * rho + w * mixed.matrix();
      }
    }
    const auto out = x.apply(DensityMatrix::unchecked(layout, std::move(rho)));
    worst = std::max(worst, trace_norm_distance(out, mixed));
  }
  return worst;
}

// Uniform mixture of 2^d Haar-random unitaries; epsilon is measured, not
// assumed.  At desk scale random mixtures extract with overwhelming
// probability, and only the (k, d, epsilon) interface matters downstream.
inline Extractor make_extractor(int n, int d, double k, Rng& rng,
                                int battery = 100) {
  if (n < 1 || n > 6) throw budget_error("extractor size out of range");
  if (d < 0 || d > 10) throw budget_error("regularity exponent out of range");
  Extractor x;
  x.n = n;
  x.d = d;
  x.k = k;
  const std::size_t dim = std::size_t{1} << n;
  x.unitaries.reserve(std::size_t{1} << d);
  for (std::size_t i = 0; i < (std::size_t{1} << d); ++i) {
    x.unitaries.push_back(haar_unitary(dim, rng));
  }
  x.epsilon = measure_extractor_error(x, k, battery, rng);
  return x;
}

// The full n-qubit Pauli twirl: 4^n unitaries, d = 2n, and T(rho) = I~ exactly
// for every input, so epsilon = 0 at every threshold.
inline Extractor make_pauli_twirl(int n) {
  if (n < 1 || n > 3) throw budget_error("twirl size out of range");
  Mat singles[4];
  singles[0] = Mat::Identity(2, 2);
  singles[1] = Mat::Zero(2, 2);
  singles[1](0, 1) = singles[1](1, 0) = 1.0;  // X
  singles[2] = Mat::Zero(2, 2);
  singles[2](0, 1) = cx(0.0, -1.0);
  singles[2](1, 0) = cx(0.0, 1.0);  // Y
  singles[3] = Mat::Identity(2, 2);
  singles[3](1, 1) = -1.0;  // Z
  Extractor x;
  x.n = n;
  x.d = 2 * n;
  x.k = 0.0;
  x.epsilon = 0.0;
  for (std::size_t code = 0; code < (std::size_t{1} << (2 * n)); ++code) {
    Mat u = Mat::Identity(1, 1);
    for (int q = 0; q < n; ++q) {
      u = kron(u, singles[(code >> (2 * (n - 1 - q))) & 3u]).eval();
    }
    x.unitaries.push_back(std::move(u));
  }
  return x;
}

// Select-based dilation U_T = SELECT . (I (x) H^{(x)d}) acting on the n data
// qubits followed by d selector qubits: tracing out the selectors after
// conjugating (rho (x) |0^d><0^d|) reproduces T(rho) exactly.  Padding the
// environment with extra idle qubits is an identity extension and is left to
// the caller.
inline Mat extractor_dilation(const Extractor& x) {
  if (x.n + x.d > 12) throw budget_error("dilation beyond 12 qubits");
  const std::size_t dim_a = std::size_t{1} << x.n;
  const std::size_t dim_s = std::size_t{1} << x.d;
  Mat h1(2, 2);
  h1 << 1, 1, 1, -1;
  h1 /= std::sqrt(2.0);
  Mat hd = Mat::Identity(1, 1);
  for (int i = 0; i < x.d; ++i) hd = kron(hd, h1).eval();
  Mat select = Mat::Zero(dim_a * dim_s, dim_a * dim_s);
  for (std::size_t i = 0; i < dim_s; ++i) {
    for (std::size_t r = 0; r < dim_a; ++r) {
      for (std::size_t c = 0; c < dim_a; ++c) {
        select(r * dim_s + i, c * dim_s + i) = x.unitaries[i](r, c);
      }
    }
  }
  return select * kron(Mat::Identity(dim_a, dim_a), hd);
}

struct FlattenResult {
  DensityMatrix sigma;        // flattened state on q*n qubits
  double trace_distance;      // ||rho^(x)q - sigma||_1, exact (= 2w)
  double min_entropy;         // H_inf(sigma) in bits
  double entropy_floor;       // q S(rho) - (n + log2(q/eps)) sqrt(q log2(1/eps))
  double discarded_mass;      // eigenvalue mass removed by the projection
  int discarded_count;        // number of eigenvalues removed
};

// Projects rho^(x)q onto an eigenvalue-typical subspace: among all cuts that
// discard the largest j product eigenvalues with total mass <= eps, pick the
// one maximizing the min-entropy of the renormalized remainder.  Discarding
// nothing is always feasible, so sigma = rho^(x)q when no cut helps (pure
// inputs, maximally mixed inputs).
inline FlattenResult flatten(const DensityMatrix& rho, int q, double eps) {
  if (q < 1) throw format_error("copy count must be positive");
  if (!(eps > 0.0) || eps >= 1.0) throw format_error("eps must be in (0, 1)");
  const int n = rho.qubits();
  if (q * n > 12) throw budget_error("flattening beyond 12 qubits");
  Eigen::SelfAdjointEigenSolver<Mat> es(
      (rho.matrix() + rho.matrix().adjoint()) / 2.0);
  const auto dim = static_cast<std::size_t>(rho.dim());
  const std::size_t dim_q = std::size_t{1} << (q * n);

  // Product eigenvalues of rho^(x)q, indexed in kron order.
  std::vector<double> prod(dim_q, 1.0);
  for (std::size_t idx = 0; idx < dim_q; ++idx) {
    for (int copy = 0; copy < q; ++copy) {
      const std::size_t digit = (idx >> ((q - 1 - copy) * n)) & (dim - 1);
      prod[idx] *= std::max(0.0, es.eigenvalues()[digit]);
    }
  }
  std::vector<std::size_t> order(dim_q);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return prod[a] > prod[b];
  });

  // Evaluate every feasible prefix cut and keep the best min-entropy.
  std::size_t best_j = 0;
  double best_h = -std::log2(std::max(prod[order[0]], 1e-300));
  double mass = 0.0, best_mass = 0.0;
  for (std::size_t j = 1; j < dim_q; ++j) {
    mass += prod[order[j - 1]];
    if (mass > eps + 1e-12) break;
    const double h =
        -std::log2(std::max(prod[order[j]], 1e-300) / (1.0 - mass));
    if (h > best_h + 1e-12) {
      best_h = h;
      best_j = j;
      best_mass = mass;
    }
  }

  const auto layout = RegisterLayout::single("A", q * n);
  FlattenResult out{maximally_mixed(layout), 2.0 * best_mass, best_h,
                    q * vn_entropy(rho) -
                        (n + std::log2(q / eps)) * std::sqrt(q * std::log2(1.0 / eps)),
                    best_mass, static_cast<int>(best_j)};
  Mat power = Mat::Identity(1, 1);
  if (best_j == 0) {
    for (int copy = 0; copy < q; ++copy) power = kron(power, rho.matrix()).eval();
  } else {
    Mat vecs = Mat::Identity(1, 1);
    for (int copy = 0; copy < q; ++copy) {
      vecs = kron(vecs, es.eigenvectors()).eval();
    }
    Vec diag = Vec::Zero(dim_q);
    for (std::size_t j = best_j; j < dim_q; ++j) {
      diag[order[j]] = prod[order[j]] / (1.0 - best_mass);
    }
    power = vecs * diag.asDiagonal() * vecs.adjoint();
  }
  out.sigma = DensityMatrix(layout, (power + power.adjoint()) / 2.0);
  return out;
}

}  // namespace lowent
