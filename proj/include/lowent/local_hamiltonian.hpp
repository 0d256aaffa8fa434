#pragma once

// k-local Hamiltonians: H = sum_j H_j with each H_j supported on at most k
// qubits.  Provides matrix-free application, dense/sparse assembly, spectral
// summaries (dense eigensolve, or Lanczos with full reorthogonalization for
// larger dimensions), Gibbs states, partition functions and free energy.
//
// Thermodynamic quantities use natural logarithms (free energy in nats);
// entropies at the API boundary stay in bits, converted with ln 2 where the
// two meet (see free_energy_of).

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "lowent/core.hpp"
#include "lowent/random.hpp"

namespace lowent {

struct LocalTerm {
  std::vector<int> support;  // distinct qubit indices, order fixes bit order
  Mat matrix;                // Hermitian, dimension 2^|support|
};

enum class SpectrumMethod { kAuto, kDense, kLanczos };

struct SpectralSummary {
  double ground_energy = 0.0;
  // Difference between the two lowest *distinct* eigenvalues; eigenvalues
  // closer than 1e-9 count as one level.  0 when only one level is known.
  double spectral_gap = 0.0;
  std::vector<double> eigenvalues;  // ascending; all (dense) or converged few
  Mat low_energy_basis;  // columns: orthonormal span of levels <= cutoff
};

namespace detail {

// Reduced matrix of rho on `support` (in support order): the partial trace
// over every other qubit.
inline Mat reduced_on_support(const Mat& rho, const std::vector<int>& support,
                              int n) {
  const auto table = expand_table(support, n);
  const auto rest = complement_positions(support, n);
  const std::size_t d_sub = std::size_t{1} << support.size();
  const std::size_t d_rest = std::size_t{1} << rest.size();
  Mat out = Mat::Zero(d_sub, d_sub);
  for (std::size_t r = 0; r < d_rest; ++r) {
    std::size_t base = 0;
    for (std::size_t b = 0; b < rest.size(); ++b) {
      if ((r >> (rest.size() - 1 - b)) & 1u) {
        base |= std::size_t{1} << (n - 1 - rest[b]);
      }
    }
    for (std::size_t a = 0; a < d_sub; ++a) {
      for (std::size_t b = 0; b < d_sub; ++b) {
        out(a, b) += rho(base | table[a], base | table[b]);
      }
    }
  }
  return out;
}

}  // namespace detail

class LocalHamiltonian {
 public:
  LocalHamiltonian(RegisterLayout layout, std::vector<LocalTerm> terms,
                   int locality)
      : layout_(std::move(layout)),
        terms_(std::move(terms)),
        locality_(locality) {
    if (terms_.empty()) throw format_error("hamiltonian needs at least one term");
    if (locality_ < 1) throw format_error("locality must be positive");
    const int n = layout_.total_qubits();
    for (auto& t : terms_) {
      if (t.support.empty() ||
          static_cast<int>(t.support.size()) > locality_) {
        throw format_error("term support size out of range");
      }
      std::vector<int> sorted = t.support;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw format_error("term support has repeated qubit");
      }
      if (sorted.front() < 0 || sorted.back() >= n) {
        throw format_error("term support index out of range");
      }
      const auto dim = std::int64_t{1} << t.support.size();
      if (t.matrix.rows() != dim || t.matrix.cols() != dim) {
        throw format_error("term matrix dimension mismatch");
      }
      if ((t.matrix - t.matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-9) {
        throw format_error("term matrix not Hermitian");
      }
      t.matrix = ((t.matrix + t.matrix.adjoint()) / 2.0).eval();
    }
    // The sampling-based protocols assume sub-normalized terms for their
    // concentration bounds; violating that is legal but worth surfacing.
    terms_subnormalized_ = true;
    for (const auto& t : terms_) {
      Eigen::SelfAdjointEigenSolver<Mat> es(t.matrix,
                                            Eigen::EigenvaluesOnly);
      if (es.eigenvalues().cwiseAbs().maxCoeff() > 1.0 + 1e-9) {
        terms_subnormalized_ = false;
      }
    }
  }

  const RegisterLayout& layout() const { return layout_; }
  const std::vector<LocalTerm>& terms() const { return terms_; }
  int locality() const { return locality_; }
  bool terms_subnormalized() const { return terms_subnormalized_; }

  // H |v>, matrix-free.
  Vec apply(const Vec& v) const {
    const int n = layout_.total_qubits();
    Vec out = Vec::Zero(v.size());
    Vec tmp(v.size());
    for (const auto& t : terms_) {
      tmp = v;
      apply_on_support(tmp, t.matrix, t.support, n);
      out += tmp;
    }
    return out;
  }

  Mat assemble() const {
    const int n = layout_.total_qubits();
    if (n > 14) throw budget_error("dense assembly beyond 14 qubits");
    const std::size_t dim = layout_.dim();
    Mat h = Mat::Zero(dim, dim);
    for (const auto& t : terms_) {
      h += embed_on_support(t.matrix, t.support, n);
    }
    return h;
  }

  Eigen::SparseMatrix<cx> assemble_sparse() const {
    const int n = layout_.total_qubits();
    if (n > 22) throw budget_error("sparse assembly beyond 22 qubits");
    const std::size_t dim = layout_.dim();
    std::vector<Eigen::Triplet<cx>> trip;
    for (const auto& t : terms_) {
      const auto table = detail::expand_table(t.support, n);
      const auto rest = detail::complement_positions(t.support, n);
      const std::size_t d_sub = std::size_t{1} << t.support.size();
      const std::size_t d_rest = std::size_t{1} << rest.size();
      for (std::size_t r = 0; r < d_rest; ++r) {
        std::size_t base = 0;
        for (std::size_t b = 0; b < rest.size(); ++b) {
          if ((r >> (rest.size() - 1 - b)) & 1u) {
            base |= std::size_t{1} << (n - 1 - rest[b]);
          }
        }
        for (std::size_t a = 0; a < d_sub; ++a) {
          for (std::size_t c = 0; c < d_sub; ++c) {
            const cx val = t.matrix(a, c);
            if (std::abs(val) > 0.0) {
              trip.emplace_back(static_cast<int>(base | table[a]),
                                static_cast<int>(base | table[c]), val);
            }
          }
        }
      }
    }
    Eigen::SparseMatrix<cx> h(dim, dim);
    h.setFromTriplets(trip.begin(), trip.end());
    return h;
  }

  double energy(const PureState& psi) const {
    require_layout(psi.layout());
    const cx e = psi.amplitudes().dot(apply(psi.amplitudes()));
    return e.real();
  }

  double energy(const DensityMatrix& rho) const {
    require_layout(rho.layout());
    const int n = layout_.total_qubits();
    cx e = 0.0;
    for (const auto& t : terms_) {
      e += (t.matrix * detail::reduced_on_support(rho.matrix(), t.support, n))
               .trace();
    }
    return e.real();
  }

  // Largest singular value of H: exact for <= 2^10, else power iteration on
  // H^2 (tolerance 1e-6).
  double operator_norm() const {
    const std::size_t dim = layout_.dim();
    if (dim <= 1024) {
      Eigen::SelfAdjointEigenSolver<Mat> es(assemble(),
                                            Eigen::EigenvaluesOnly);
      return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Rng rng(0x9e3779b97f4a7c15ull);
    Vec v = Vec::Zero(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      v[i] = cx(rng.gaussian(), rng.gaussian());
    }
    v.normalize();
    double prev = 0.0;
    for (int it = 0; it < 2000; ++it) {
      Vec w = apply(apply(v));
      const double norm2 = w.norm();
      if (norm2 < 1e-300) return 0.0;
      v = w / norm2;
      const double est = std::sqrt(norm2);
      if (std::abs(est - prev) <= 1e-6 * std::max(1.0, est)) return est;
      prev = est;
    }
    return prev;
  }

  // Sum of the terms' spectral norms: cheap upper bound on operator_norm.
  double term_norm_sum() const {
    double s = 0.0;
    for (const auto& t : terms_) {
      Eigen::SelfAdjointEigenSolver<Mat> es(t.matrix,
                                            Eigen::EigenvaluesOnly);
      s += es.eigenvalues().cwiseAbs().maxCoeff();
    }
    return s;
  }

  SpectralSummary spectrum(double cutoff,
                           SpectrumMethod method = SpectrumMethod::kAuto) const {
    const std::size_t dim = layout_.dim();
    if (method == SpectrumMethod::kAuto) {
      method = dim <= 4096 ? SpectrumMethod::kDense : SpectrumMethod::kLanczos;
    }
    if (method == SpectrumMethod::kDense) return spectrum_dense(cutoff);
    return spectrum_lanczos();
  }

  double log_partition_function(double beta) const {
    if (beta < 0.0) throw format_error("inverse temperature must be >= 0");
    const auto evs = all_eigenvalues();
    const double lo = *std::min_element(evs.begin(), evs.end());
    double acc = 0.0;
    for (double ev : evs) acc += std::exp(-beta * (ev - lo));
    return -beta * lo + std::log(acc);
  }

  double partition_function(double beta) const {
    return std::exp(log_partition_function(beta));
  }

  double free_energy(double beta) const {
    if (beta <= 0.0) throw format_error("inverse temperature must be > 0");
    return -log_partition_function(beta) / beta;
  }

  DensityMatrix gibbs_state(double beta) const {
    if (beta < 0.0) throw format_error("inverse temperature must be >= 0");
    const std::size_t dim = layout_.dim();
    if (dim > 4096) throw budget_error("gibbs state beyond 4096 dimensions");
    Eigen::SelfAdjointEigenSolver<Mat> es(assemble());
    const Eigen::VectorXd evs = es.eigenvalues();
    const double lo = evs.minCoeff();
    Eigen::VectorXd w = (-beta * (evs.array() - lo)).exp();
    w /= w.sum();
    Mat rho = es.eigenvectors() * w.asDiagonal() *
              es.eigenvectors().adjoint();
    return DensityMatrix(layout_, (rho + rho.adjoint()) / 2.0);
  }

  // Variational free-energy functional f(rho) = Tr(H rho) - S_nats(rho)/beta.
  double free_energy_of(const DensityMatrix& rho, double beta) const {
    if (beta <= 0.0) throw format_error("inverse temperature must be > 0");
    return energy(rho) - vn_entropy(rho) * std::log(2.0) / beta;
  }

  // Unbiased estimator of Tr(H rho): each sample draws a term j uniformly,
  // measures it in its eigenbasis, and contributes m * eigenvalue.  The mean
  // over samples is returned; samples == 0 gives the exact expectation.
  double sampled_energy_estimate(const DensityMatrix& rho, int samples,
                                 Rng& rng) const {
    require_layout(rho.layout());
    if (samples < 0) throw format_error("sample count must be >= 0");
    if (samples == 0) return energy(rho);
    const int n = layout_.total_qubits();
    struct TermMeasure {
      Eigen::VectorXd eigenvalues;
      Eigen::VectorXd probabilities;
    };
    std::vector<TermMeasure> cache;
    cache.reserve(terms_.size());
    for (const auto& t : terms_) {
      Eigen::SelfAdjointEigenSolver<Mat> es(t.matrix);
      const Mat red = detail::reduced_on_support(rho.matrix(), t.support, n);
      Eigen::VectorXd probs =
          (es.eigenvectors().adjoint() * red * es.eigenvectors())
              .diagonal()
              .real()
              .cwiseMax(0.0);
      probs /= probs.sum();
      cache.push_back({es.eigenvalues(), probs});
    }
    const double m = static_cast<double>(terms_.size());
    double acc = 0.0;
    for (int s = 0; s < samples; ++s) {
      const auto& tm = cache[rng.integer(terms_.size())];
      double u = rng.uniform();
      Eigen::Index idx = tm.probabilities.size() - 1;
      for (Eigen::Index i = 0; i < tm.probabilities.size(); ++i) {
        u -= tm.probabilities[i];
        if (u <= 0.0) {
          idx = i;
          break;
        }
      }
      acc += m * tm.eigenvalues[idx];
    }
    return acc / samples;
  }

  double sampled_energy_estimate(const PureState& psi, int samples,
                                 Rng& rng) const {
    return sampled_energy_estimate(to_density(psi), samples, rng);
  }

 private:
  void require_layout(const RegisterLayout& other) const {
    if (!(other == layout_)) throw format_error("state layout mismatch");
  }

  std::vector<double> all_eigenvalues() const {
    const std::size_t dim = layout_.dim();
    if (dim > 4096) {
      throw budget_error("full spectrum beyond 4096 dimensions");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(assemble(), Eigen::EigenvaluesOnly);
    return {es.eigenvalues().data(), es.eigenvalues().data() + dim};
  }

  SpectralSummary spectrum_dense(double cutoff) const {
    const std::size_t dim = layout_.dim();
    if (dim > 4096) throw budget_error("dense spectrum beyond 4096 dimensions");
    Eigen::SelfAdjointEigenSolver<Mat> es(assemble());
    SpectralSummary out;
    out.eigenvalues.assign(es.eigenvalues().data(),
                           es.eigenvalues().data() + dim);
    out.ground_energy = out.eigenvalues.front();
    out.spectral_gap = 0.0;
    for (double ev : out.eigenvalues) {
      if (ev > out.ground_energy + 1e-9) {
        out.spectral_gap = ev - out.ground_energy;
        break;
      }
    }
    std::size_t keep = 0;
    while (keep < dim && out.eigenvalues[keep] <= cutoff + 1e-12) ++keep;
    out.low_energy_basis = es.eigenvectors().leftCols(keep);
    return out;
  }

  // Lanczos with full reorthogonalization; reports ground energy and the gap
  // to the next distinct level.  No low-energy basis on this path.
  SpectralSummary spectrum_lanczos() const {
    const std::size_t dim = layout_.dim();
    if (dim > (std::size_t{1} << 16)) {
      throw budget_error("lanczos beyond 2^16 dimensions");
    }
    const int m_max = static_cast<int>(std::min<std::size_t>(dim, 220));
    Rng rng(0x5bf0a8b14576953ull);
    Mat basis(dim, m_max);
    Vec v = Vec::Zero(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      v[i] = cx(rng.gaussian(), rng.gaussian());
    }
    v.normalize();
    std::vector<double> alpha, beta;  // beta[j] couples vector j and j+1
    int m = 0;
    bool exhausted = false;
    double last_beta = 0.0;
    for (; m < m_max; ++m) {
      basis.col(m) = v;
      Vec w = apply(v);
      const double a = w.dot(v).real();
      alpha.push_back(a);
      w -= a * v;
      if (m > 0) w -= last_beta * basis.col(m - 1);
      // Full reorthogonalization, twice for safety.
      for (int pass = 0; pass < 2; ++pass) {
        w -= basis.leftCols(m + 1) *
             (basis.leftCols(m + 1).adjoint() * w).eval();
      }
      const double b = w.norm();
      if (b < 1e-12) {
        exhausted = true;
        ++m;
        break;
      }
      if (m + 1 < m_max) {
        beta.push_back(b);
        last_beta = b;
        v = w / b;
        // Convergence test on the two lowest distinct Ritz values.
        if (m >= 12 && m % 8 == 0 && ritz_converged(alpha, beta, b)) {
          ++m;
          break;
        }
      }
    }
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      tri(i, i) = alpha[i];
      if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri,
                                                      Eigen::EigenvaluesOnly);
    SpectralSummary out;
    out.ground_energy = es.eigenvalues()[0];
    out.spectral_gap = 0.0;
    out.eigenvalues.push_back(out.ground_energy);
    for (int i = 1; i < m; ++i) {
      if (es.eigenvalues()[i] > out.ground_energy + 1e-9) {
        out.spectral_gap = es.eigenvalues()[i] - out.ground_energy;
        out.eigenvalues.push_back(es.eigenvalues()[i]);
        break;
      }
    }
    if (!exhausted && out.eigenvalues.size() < 2) {
      std::ostringstream msg;
      msg << "lanczos failed to separate two levels after " << m
          << " iterations";
      throw std::runtime_error(msg.str());
    }
    return out;
  }

  static bool ritz_converged(const std::vector<double>& alpha,
                             const std::vector<double>& beta,
                             double next_beta) {
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      tri(i, i) = alpha[i];
      if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    const auto& evs = es.eigenvalues();
    int second = -1;
    for (int i = 1; i < m; ++i) {
      if (evs[i] > evs[0] + 1e-9) {
        second = i;
        break;
      }
    }
    if (second < 0) return false;
    const double scale = std::max(1.0, std::abs(evs[0]));
    const double r0 = next_beta * std::abs(es.eigenvectors()(m - 1, 0));
    const double r1 = next_beta * std::abs(es.eigenvectors()(m - 1, second));
    return r0 <= 1e-10 * scale && r1 <= 1e-10 * scale;
  }

  RegisterLayout layout_;
  std::vector<LocalTerm> terms_;
  int locality_;
  bool terms_subnormalized_ = true;
};

}  // namespace lowent
