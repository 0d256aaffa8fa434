#pragma once

// Entropy verification on q state copies.  The verifier holds registers
// A (q * n_A qubits), optionally B (bystander copies, untouched), and E
// (the extractor's d selector qubits, always the last register).  A run
// applies the inverse extractor dilation to (A, E), measures E in the
// computational basis, and accepts on the all-zeros outcome.  Under the
// promise chi_A = I~ the post-measurement state obeys
//
//   S(sigma_A) >= q n_A - fannes(2 sqrt(1 - s)) - d
//
// whenever the acceptance probability reaches s — a floor that needs only
// 2^d-regularity of the channel and holds for every promise-respecting
// input, honest or adversarial.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lowent/core.hpp"
#include "lowent/extractor.hpp"
#include "lowent/local_hamiltonian.hpp"
#include "lowent/random.hpp"

namespace lowent {

struct ProtocolConfig {
  double tau = 0.0;          // per-copy entropy target (bits)
  int q = 1;                 // copies
  double epsilon = 0.0;      // extractor accuracy used by completeness
  double delta = 0.0;        // output closeness target
  double delta_prime = 0.0;  // entropy slack target
  double c = 1.0;            // completeness threshold, always 1 - 4 sqrt(3 eps)
  double s = 0.0;            // soundness threshold
};

inline void validate_config(const ProtocolConfig& cfg) {
  if (cfg.q < 1) throw format_error("copy count must be positive");
  if (!(cfg.s > 0.0) || !(cfg.s < cfg.c) || cfg.c > 1.0 + 1e-12) {
    throw format_error("thresholds must satisfy 0 < s < c <= 1");
  }
  if (std::abs(cfg.c - (1.0 - 4.0 * std::sqrt(3.0 * cfg.epsilon))) > 1e-9) {
    throw format_error("completeness must equal 1 - 4 sqrt(3 eps)");
  }
}

// Left side of the copy-count requirement: the certified entropy slack for a
// given configuration must not exceed delta_prime.  The big-O constants of
// the source inequality are taken as 1.
inline double entropy_slack_bound(const ProtocolConfig& cfg, int n_a) {
  const double r = 2.0 * std::sqrt(std::max(0.0, 1.0 - cfg.s));
  const double t1 = r > 0.0 ? r * (n_a - std::log2(r) / cfg.q) : 0.0;
  const double t2 = (n_a + std::log2(cfg.q / cfg.epsilon)) *
                    std::sqrt(std::log2(1.0 / cfg.epsilon) / cfg.q);
  return t1 + t2;
}

// Deterministic parameter cascade: s from 2 sqrt(1-s) n <= delta'/4, then
// epsilon from both c - s >= (1-s)/2 and 4 (3 eps)^{1/4} <= delta, then the
// smallest q making the slack bound <= delta'.
inline ProtocolConfig solve_protocol_parameters(int n_a, int n_total,
                                                double tau, double delta,
                                                double delta_prime) {
  if (n_a < 1 || n_total < n_a) throw format_error("register sizes invalid");
  if (!(delta > 0.0) || !(delta_prime > 0.0)) {
    throw format_error("delta and delta' must be positive");
  }
  ProtocolConfig cfg;
  cfg.tau = tau;
  cfg.delta = delta;
  cfg.delta_prime = delta_prime;
  const double root = delta_prime / (8.0 * n_total);
  if (root >= 1.0) throw format_error("delta' too large for the cascade");
  cfg.s = 1.0 - root * root;
  cfg.epsilon = std::min((1.0 - cfg.s) * (1.0 - cfg.s) / 192.0,
                         std::pow(delta / 4.0, 4) / 3.0);
  cfg.c = 1.0 - 4.0 * std::sqrt(3.0 * cfg.epsilon);
  std::int64_t lo = 1, hi = 1;
  cfg.q = 1;
  while (entropy_slack_bound(cfg, n_a) > delta_prime) {
    lo = hi;
    hi *= 2;
    if (hi > (std::int64_t{1} << 40)) {
      throw format_error("no feasible copy count below 2^40");
    }
    cfg.q = static_cast<int>(hi);
  }
  while (lo + 1 < hi) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    cfg.q = static_cast<int>(mid);
    (entropy_slack_bound(cfg, n_a) <= delta_prime ? hi : lo) = mid;
  }
  cfg.q = static_cast<int>(hi);
  return cfg;
}

namespace detail {

// Basis-index map gathering q interleaved (A, B) copies into A_1..A_q then
// B_1..B_q: map[target index] = source index.
inline std::vector<std::size_t> gather_copy_map(int q, int n_a, int n_b) {
  const int n = n_a + n_b;
  const int total = q * n;
  std::vector<int> src_of(total);
  for (int tb = 0; tb < total; ++tb) {
    if (tb < q * n_a) {
      src_of[tb] = (tb / n_a) * n + tb % n_a;
    } else {
      const int t = tb - q * n_a;
      src_of[tb] = (t / n_b) * n + n_a + t % n_b;
    }
  }
  std::vector<std::size_t> map(std::size_t{1} << total, 0);
  for (std::size_t x = 0; x < map.size(); ++x) {
    std::size_t src = 0;
    for (int tb = 0; tb < total; ++tb) {
      if ((x >> (total - 1 - tb)) & 1u) {
        src |= std::size_t{1} << (total - 1 - src_of[tb]);
      }
    }
    map[x] = src;
  }
  return map;
}

// Extends an orthonormal set to `want` vectors with a QR completion of the
// orthogonal complement.
inline void pad_orthonormal(std::vector<Vec>& set, std::size_t dim,
                            std::size_t want) {
  if (set.size() >= want) return;
  if (want > dim) throw format_error("cannot pad past the space dimension");
  if (set.empty()) {
    for (std::size_t i = 0; set.size() < want; ++i) {
      Vec v = Vec::Zero(dim);
      v[i] = 1.0;
      set.push_back(std::move(v));
    }
    return;
  }
  Mat m(dim, set.size());
  for (std::size_t i = 0; i < set.size(); ++i) m.col(i) = set[i];
  const Eigen::HouseholderQR<Mat> qr(m);
  const Mat q = qr.householderQ();
  for (Eigen::Index c = static_cast<Eigen::Index>(set.size());
       set.size() < want; ++c) {
    set.push_back(q.col(c));
  }
}

}  // namespace detail

struct AlignedState {
  DensityMatrix state;             // chi~ with chi~_A = I~ exactly
  double achieved_fidelity = 0.0;  // F(chi_A, I~), realized by the alignment
  double trace_residual = 0.0;     // || chi~ - chi ||_1
  double input_marginal_distance = 0.0;  // || chi_A - I~ ||_1 before aligning
};

// Closest state (in Uhlmann fidelity) to chi whose reduction on the leading
// "A" register is exactly maximally mixed: purify, take the Schmidt
// decomposition across A | rest, and replace the Schmidt spectrum by the
// uniform one, padding missing directions orthonormally.
inline AlignedState enforce_promise(const DensityMatrix& chi) {
  const auto& regs = chi.layout().registers();
  if (regs.size() < 2 || regs.front().name != "A") {
    throw format_error("promise alignment expects a leading A register");
  }
  if (chi.qubits() > 10) throw budget_error("promise alignment beyond 10 qubits");
  const int n_a = regs.front().qubits;
  const std::size_t m = std::size_t{1} << n_a;
  const PureState psi = purify(chi, "P");
  const auto sd = schmidt(psi, {"A"});
  const std::size_t rest_dim = psi.dim() >> n_a;
  std::vector<Vec> lefts = sd.left;
  std::vector<Vec> rights = sd.right;
  detail::pad_orthonormal(lefts, m, m);
  detail::pad_orthonormal(rights, rest_dim, m);
  Vec amp = Vec::Zero(psi.dim());
  const double w = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t a = 0; a < m; ++a) {
      const cx va = w * lefts[i][a];
      if (std::abs(va) < 1e-15) continue;
      amp.segment(a * rest_dim, rest_dim) += va * rights[i];
    }
  }
  const PureState phi = PureState::unchecked(psi.layout(), std::move(amp));
  std::vector<std::string> original;
  for (const auto& r : regs) original.push_back(r.name);
  AlignedState out{partial_trace(phi, original), 0.0, 0.0, 0.0};
  double overlap = 0.0;
  for (double ccoef : sd.coefficients) overlap += w * ccoef;
  out.achieved_fidelity = std::min(1.0, overlap * overlap);
  out.trace_residual = trace_norm_distance(out.state, chi);
  out.input_marginal_distance = trace_norm_distance(
      partial_trace(chi, {"A"}),
      maximally_mixed(RegisterLayout::single("A", n_a)));
  return out;
}

// Honest prover: arrange q copies of rho (registers A + optional bystanders,
// here lumped as B), append the selector register in |0^d>, conjugate by the
// extractor dilation on (A, E), and align the result onto the exact promise.
// For an exact twirl the marginal is already maximally mixed and both the
// residual and the marginal distance vanish.
inline AlignedState honest_prover_state(const DensityMatrix& rho,
                                        const Extractor& x, int q) {
  const auto& regs = rho.layout().registers();
  if (regs.empty() || regs.front().name != "A") {
    throw format_error("prover input needs a leading A register");
  }
  if (regs.size() > 2) throw format_error("prover input has too many registers");
  if (q < 1) throw format_error("copy count must be positive");
  const int n_a = regs.front().qubits;
  const int n_b = rho.qubits() - n_a;
  if (x.n != q * n_a) throw format_error("extractor size must be q * n_A");
  if (q * rho.qubits() + x.d > 10) {
    throw budget_error("prover state beyond 10 qubits");
  }
  Mat copies = Mat::Identity(1, 1);
  for (int i = 0; i < q; ++i) copies = kron(copies, rho.matrix()).eval();
  std::vector<Register> layout_regs = {{"A", q * n_a}};
  if (n_b > 0) {
    const auto map = detail::gather_copy_map(q, n_a, n_b);
    Mat gathered(copies.rows(), copies.cols());
    for (Eigen::Index r = 0; r < gathered.rows(); ++r) {
      for (Eigen::Index c = 0; c < gathered.cols(); ++c) {
        gathered(r, c) = copies(map[r], map[c]);
      }
    }
    copies = std::move(gathered);
    layout_regs.push_back({"B", q * n_b});
  }
  const std::size_t dim_e = std::size_t{1} << x.d;
  Mat e0 = Mat::Zero(dim_e, dim_e);
  e0(0, 0) = 1.0;
  Mat full = kron(copies, e0);
  layout_regs.push_back({"E", x.d});
  RegisterLayout layout{layout_regs};
  conjugate_on_support(full, extractor_dilation(x),
                       layout.qubits_of({"A", "E"}), layout.total_qubits());
  return enforce_promise(
      DensityMatrix(std::move(layout), (full + full.adjoint()) / 2.0));
}

struct ProtocolResult {
  double accept_probability = 0.0;
  std::optional<DensityMatrix> post_state;      // sigma on (A, B), E removed
  std::optional<DensityMatrix> average_output;  // per-copy average sigma~
  double sigma_entropy = 0.0;    // S(sigma_A) in bits (0 if no post state)
  double average_entropy = 0.0;  // S(sigma~_A)
  double entropy_floor = 0.0;    // q n_A - fannes(2 sqrt(1-s)) - d
  bool certificate_applies = false;  // accept_probability >= cfg.s
  double promise_defect = 0.0;   // measured || chi_A - I~ ||_1
};

inline ProtocolResult run_protocol(const DensityMatrix& chi,
                                   const Extractor& x,
                                   const ProtocolConfig& cfg) {
  validate_config(cfg);
  const auto& regs = chi.layout().registers();
  if (regs.size() < 2 || regs.size() > 3 || regs.front().name != "A" ||
      regs.back().name != "E" || (regs.size() == 3 && regs[1].name != "B")) {
    throw format_error("protocol input needs registers A[, B], E");
  }
  const bool has_b = regs.size() == 3;
  const int qn_a = regs.front().qubits;
  if (qn_a != x.n || regs.back().qubits != x.d) {
    throw format_error("state registers do not match the extractor");
  }
  if (qn_a % cfg.q != 0 || (has_b && regs[1].qubits % cfg.q != 0)) {
    throw format_error("register sizes are not multiples of the copy count");
  }
  const int n_a = qn_a / cfg.q;
  const int n_b = has_b ? regs[1].qubits / cfg.q : 0;

  ProtocolResult out;
  out.promise_defect = trace_norm_distance(
      partial_trace(chi, {"A"}),
      maximally_mixed(RegisterLayout::single("A", qn_a)));
  if (out.promise_defect > 1e-6) {
    throw promise_error("input marginal on A is not maximally mixed");
  }
  out.entropy_floor =
      qn_a -
      fannes_bound(2.0 * std::sqrt(std::max(0.0, 1.0 - cfg.s)),
                   std::size_t{1} << qn_a) -
      x.d;

  Mat evolved = chi.matrix();
  conjugate_on_support(evolved, extractor_dilation(x).adjoint(),
                       chi.layout().qubits_of({"A", "E"}), chi.qubits());
  const std::size_t dim = chi.dim();
  const std::size_t dim_e = std::size_t{1} << x.d;
  Mat projector = Mat::Zero(dim, dim);
  for (std::size_t i = 0; i < dim; i += dim_e) projector(i, i) = 1.0;
  const auto outcome = post_measure(
      DensityMatrix::unchecked(chi.layout(), std::move(evolved)), projector);
  out.accept_probability = outcome.probability;
  out.certificate_applies = out.accept_probability >= cfg.s;
  if (!outcome.post) return out;

  std::vector<std::string> keep = {"A"};
  if (has_b) keep.push_back("B");
  DensityMatrix sigma = partial_trace(*outcome.post, keep);
  out.sigma_entropy =
      has_b ? vn_entropy(partial_trace(sigma, {"A"})) : vn_entropy(sigma);

  // Average per-copy output: relabel the A (and B) blocks by copy and trace.
  std::vector<Register> copy_regs;
  for (int i = 0; i < cfg.q; ++i) copy_regs.push_back({"A" + std::to_string(i), n_a});
  if (has_b) {
    for (int i = 0; i < cfg.q; ++i) copy_regs.push_back({"B" + std::to_string(i), n_b});
  }
  const DensityMatrix relabeled =
      DensityMatrix::unchecked(RegisterLayout{copy_regs}, sigma.matrix());
  std::vector<Register> single_regs = {{"A", n_a}};
  if (has_b) single_regs.push_back({"B", n_b});
  const RegisterLayout single_layout{single_regs};
  Mat avg = Mat::Zero(single_layout.dim(), single_layout.dim());
  for (int i = 0; i < cfg.q; ++i) {
    std::vector<std::string> copy_keep = {"A" + std::to_string(i)};
    if (has_b) copy_keep.push_back("B" + std::to_string(i));
    avg += partial_trace(relabeled, copy_keep).matrix();
  }
  avg /= static_cast<double>(cfg.q);
  DensityMatrix average =
      DensityMatrix::unchecked(single_layout, (avg + avg.adjoint()) / 2.0);
  out.average_entropy = has_b ? vn_entropy(partial_trace(average, {"A"}))
                              : vn_entropy(average);
  out.post_state = std::move(sigma);
  out.average_output = std::move(average);
  return out;
}

struct FeaProtocolResult {
  bool accept = false;
  double accept_probability = 0.0;
  double energy_estimate = 0.0;       // nats-free scale: Tr(H sigma~) estimate
  double free_energy_estimate = 0.0;  // nats, energy - claimed entropy / beta
  ProtocolResult protocol;
};

// Free-energy verifier: run entropy verification with tau = the prover's
// claimed entropy (bits), estimate the energy of the average output by
// sampling local terms, convert the claim to nats, and accept when the
// resulting free-energy estimate clears the midpoint (a + b) / 2.
inline FeaProtocolResult run_fea_protocol(const LocalHamiltonian& h,
                                          double beta, double claimed_entropy,
                                          const DensityMatrix& chi,
                                          const Extractor& x,
                                          ProtocolConfig cfg, double a,
                                          double b, int samples, Rng& rng) {
  if (!(beta > 0.0)) throw format_error("inverse temperature must be positive");
  cfg.tau = claimed_entropy;
  FeaProtocolResult out;
  out.protocol = run_protocol(chi, x, cfg);
  out.accept_probability = out.protocol.accept_probability;
  if (!out.protocol.certificate_applies || !out.protocol.average_output) {
    return out;
  }
  if (out.protocol.average_output->dim() != h.layout().dim()) {
    throw format_error("per-copy output does not match the Hamiltonian");
  }
  const DensityMatrix sigma = DensityMatrix::unchecked(
      h.layout(), out.protocol.average_output->matrix());
  out.energy_estimate = h.sampled_energy_estimate(sigma, samples, rng);
  out.free_energy_estimate =
      out.energy_estimate - claimed_entropy * std::log(2.0) / beta;
  out.accept = out.free_energy_estimate < (a + b) / 2.0;
  return out;
}

}  // namespace lowent
