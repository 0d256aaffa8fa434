// random.hpp — seeded randomness: Haar unitaries, random states and densities.
// Every stochastic routine in the library takes an explicit Rng so that runs
// are bit-for-bit reproducible from a single seed.

#pragma once

#include <random>

#include "lowent/core.hpp"

namespace lowent {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::mt19937_64& engine() { return gen_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
  double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  std::uint64_t integer(std::uint64_t bound) {  // uniform in [0, bound)
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(gen_);
  }

  // Independent child stream for a named subsystem (splitmix64 over the label).
  Rng child(std::uint64_t label) {
    std::uint64_t z = gen_() ^ (0x9e3779b97f4a7c15ull * (label + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 gen_;
};

inline Mat ginibre(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = cx{rng.gaussian(), rng.gaussian()};
  return g;
}

/// Haar-random unitary via QR of a Ginibre matrix with phase-fixed R diagonal.
inline Mat haar_unitary(Eigen::Index d, Rng& rng) {
  const Mat g = ginibre(d, d, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < d; ++i) {
    const cx rd = r(i, i);
    q.col(i) *= std::abs(rd) > 0 ? rd / std::abs(rd) : cx{1.0, 0.0};
  }
  return q;
}

inline PureState random_pure(const RegisterLayout& layout, Rng& rng) {
  Vec v = ginibre(layout.dim(), 1, rng).col(0);
  v.normalize();
  return PureState::unchecked(layout, std::move(v));
}

/// Random density matrix of the given rank (Wishart-style G G^dagger / trace).
inline DensityMatrix random_density(const RegisterLayout& layout, int rank, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(layout.dim());
  const Mat g = ginibre(d, std::max<Eigen::Index>(1, rank), rng);
  Mat rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix::unchecked(layout, (rho + rho.adjoint()) / 2.0);
}

}  // namespace lowent
