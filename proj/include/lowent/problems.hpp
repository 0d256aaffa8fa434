// problems.hpp — decision problems over low-energy subspaces.
//
// Instance types for entropy / product-closeness / free-energy questions, a
// small multi-restart simplex optimizer over the span of low-energy
// eigenstates, brute-force deciders with YES re-verification, and the
// circuit-to-Hamiltonian reductions that map channel problems onto them.
//
// A low-energy space is represented by a LowEnergyModel: an orthonormal
// eigenbasis (at most 64 states) together with all pairwise partial traces on
// the scored register cut.  Objectives therefore never touch the full state
// vector, which keeps instances with very long idle tails tractable through
// the clock structure.
//
// Conventions: entropies in bits, trace distances in [0, 2], and the product
// distance of a pure bipartite state is the closed form 2 sqrt(1 - l1) with
// l1 the largest eigenvalue of the reduced state on the cut.  Channel-problem
// quantifiers (PPIO, MaxOutQEA, CIMM) range over pure channel inputs, and
// product targets are pure; CIMM additionally optimizes over mixed inputs
// since its target is fixed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lowent/channel.hpp"
#include "lowent/clock.hpp"
#include "lowent/core.hpp"
#include "lowent/local_hamiltonian.hpp"
#include "lowent/random.hpp"

namespace lowent {

// ---------------------------------------------------------------------------
// Instance payloads
// ---------------------------------------------------------------------------

// Hamiltonian payload of a problem instance.  Hand-built instances carry a
// dense LocalHamiltonian; instances emitted by the circuit reductions carry
// the structured clock Hamiltonian so that the low-energy sector stays
// reachable when the idle tail is thousands of steps long.
struct InstanceHamiltonian {
  std::optional<LocalHamiltonian> dense;
  std::shared_ptr<const ClockHamiltonian> clock;

  static InstanceHamiltonian from_dense(LocalHamiltonian h) {
    InstanceHamiltonian out;
    out.dense = std::move(h);
    return out;
  }
  static InstanceHamiltonian from_clock(
      std::shared_ptr<const ClockHamiltonian> h) {
    InstanceHamiltonian out;
    out.clock = std::move(h);
    return out;
  }

  void validate() const {
    if (dense.has_value() == (clock != nullptr)) {
      throw format_error("instance needs exactly one hamiltonian payload");
    }
  }

  // Layout of the register cut available to objectives.  For clock payloads
  // this is the channel's system layout (the clock register is never kept).
  const RegisterLayout& cut_source_layout() const {
    validate();
    return dense ? dense->layout() : clock->channel().layout();
  }
};

namespace detail {

inline void validate_cut(const InstanceHamiltonian& h,
                         const std::vector<std::string>& cut) {
  if (cut.empty()) throw format_error("register cut must be non-empty");
  const auto& layout = h.cut_source_layout();
  (void)layout.qubits_of(cut);  // throws on unknown names
  if (layout.restricted(cut).total_qubits() >= layout.total_qubits() &&
      h.dense) {
    throw format_error("register cut must be a proper subset");
  }
  for (const auto& name : cut) {
    if (name == "C") throw format_error("clock register cannot be scored");
  }
}

}  // namespace detail

// High entropy at low energy: YES when some state of energy <= alpha has
// cut entropy >= s, NO when every state of energy < beta has entropy <= t.
struct HELESInstance {
  InstanceHamiltonian h;
  std::vector<std::string> cut;
  double alpha = 0.0;
  double beta = 0.0;
  double s = 0.0;
  double t = 0.0;

  void validate() const {
    h.validate();
    detail::validate_cut(h, cut);
    if (!(beta > alpha)) throw format_error("energy thresholds need beta > alpha");
    if (!(s > t)) throw format_error("entropy thresholds need s > t");
  }
};

// Low entropy at low energy: YES when some state of energy <= alpha has cut
// entropy <= t, NO when every state of energy < beta has entropy >= s.
struct LELESInstance {
  InstanceHamiltonian h;
  std::vector<std::string> cut;
  double alpha = 0.0;
  double beta = 0.0;
  double s = 0.0;
  double t = 0.0;

  void validate() const {
    h.validate();
    detail::validate_cut(h, cut);
    if (!(beta > alpha)) throw format_error("energy thresholds need beta > alpha");
    if (!(s > t)) throw format_error("entropy thresholds need s > t");
  }
};

// Low-energy almost-product states: YES when some state of energy <= alpha is
// within trace distance a of a pure product across the cut, NO when every
// state of energy < beta is at least b away from every pure product.
struct LEAPSInstance {
  InstanceHamiltonian h;
  std::vector<std::string> cut;
  double alpha = 0.0;
  double beta = 0.0;
  double a = 0.0;
  double b = 0.0;

  void validate() const {
    h.validate();
    detail::validate_cut(h, cut);
    if (!(beta > alpha)) throw format_error("energy thresholds need beta > alpha");
    if (!(b > a) || a < 0.0 || b >= 2.0) {
      throw format_error("distance thresholds need 0 <= a < b < 2");
    }
  }
};

// Free-energy approximation at inverse temperature beta_temp (free energy in
// nats): YES when F <= a, NO when F >= b.
struct FEAInstance {
  LocalHamiltonian h;
  double beta_temp = 1.0;
  double a = 0.0;
  double b = 0.0;

  void validate() const {
    if (!(beta_temp > 0.0)) throw format_error("inverse temperature must be positive");
    if (!(b > a)) throw format_error("free-energy thresholds need a < b");
  }
};

// Product-preserving isometry output.  The circuit acts on registers A and B
// (the environment register must stay untouched); the output is the pure
// state U(psi_A (x) |0..0>_B).  YES: some pure input lands within a of a pure
// product across A|B.  NO: every pure input stays at least b away from every
// pure product.
struct PPIOInstance {
  ChannelSpec u;
  double a = 0.0;
  double b = 0.0;

  void validate() const {
    if (!(b > a) || a < 0.0 || b >= 2.0) {
      throw format_error("distance thresholds need 0 <= a < b < 2");
    }
    const auto ab = u.layout().qubits_of({"A", "B"});
    for (const auto& step : u.steps()) {
      for (int q : step.support) {
        if (std::find(ab.begin(), ab.end(), q) == ab.end()) {
          throw format_error("isometry gates must stay on registers A and B");
        }
      }
    }
  }
};

// Maximum output entropy: YES when some pure input gives output entropy
// >= tau + 1, NO when every input gives output entropy <= tau.
struct MaxOutQEAInstance {
  ChannelSpec phi;
  double tau = 0.0;

  void validate() const {
    if (tau < 0.0) throw format_error("entropy threshold must be non-negative");
  }
};

// Closeness to the maximally mixed output: YES when some input maps within a
// of the maximally mixed state on the output registers, NO when every input
// stays at least b away.
struct CIMMInstance {
  ChannelSpec phi;
  double a = 0.0;
  double b = 0.0;

  void validate() const {
    if (!(b > a) || a < 0.0 || b >= 2.0) {
      throw format_error("distance thresholds need 0 <= a < b < 2");
    }
    const double lhs = (1.0 - a) * (1.0 - a);
    if (!(lhs > 1.0 - b * b)) {
      throw format_error("thresholds need (1-a)^2 > 1-b^2");
    }
  }
};

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

enum class Decision { kYes, kNo, kUndecided };

struct OptimizerReport {
  int restarts = 0;
  long iterations = 0;
  double best_objective = 0.0;
  double witness_energy = 0.0;
  bool reverified = false;
};

struct Verdict {
  Decision decision = Decision::kUndecided;
  std::optional<PureState> witness;        // state achieving the YES objective
  std::optional<DensityMatrix> state_witness;  // mixed-input witness (CIMM)
  OptimizerReport report;
};

struct DeciderOptions {
  int restarts = 32;
  std::uint64_t seed = 7;
  int max_iterations = 2000;
};

// ---------------------------------------------------------------------------
// Low-energy models
// ---------------------------------------------------------------------------

// Orthonormal eigenbasis of the space below an energy cutoff plus all cross
// partial traces on the scored cut.  reduced(theta) is the cut marginal of
// sum_i theta_i |v_i>, and exact_energy re-evaluates the Hamiltonian honestly
// rather than trusting the stored eigenvalues.
struct LowEnergyModel {
  std::vector<double> energies;  // ascending
  std::vector<Mat> blocks;       // row-major D*D: Tr_rest |v_i><v_j| on cut
  RegisterLayout cut_layout;
  std::vector<std::string> cut;

  std::optional<LocalHamiltonian> dense_h;
  Mat dense_basis;  // columns = eigenvectors (dense payload only)

  std::shared_ptr<const ClockHamiltonian> clock;
  std::vector<SectorState> sector_basis;

  int dimension() const { return static_cast<int>(energies.size()); }

  Eigen::VectorXcd normalized(Eigen::VectorXcd theta) const {
    if (theta.size() != dimension()) {
      throw format_error("coefficient vector dimension mismatch");
    }
    const double n = theta.norm();
    if (n < 1e-12) throw format_error("coefficient vector is numerically zero");
    return theta / n;
  }

  DensityMatrix reduced(const Eigen::VectorXcd& theta_in) const {
    const auto theta = normalized(theta_in);
    const int d = dimension();
    Mat acc = Mat::Zero(cut_layout.dim(), cut_layout.dim());
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const cx w = theta[i] * std::conj(theta[j]);
        if (std::abs(w) < 1e-16) continue;
        acc += w * blocks[static_cast<std::size_t>(i) * d + j];
      }
    }
    return DensityMatrix::unchecked(cut_layout, (acc + acc.adjoint()) / 2.0);
  }

  double basis_energy(const Eigen::VectorXcd& theta_in) const {
    const auto theta = normalized(theta_in);
    double e = 0.0;
    for (int i = 0; i < dimension(); ++i) {
      e += std::norm(theta[i]) * energies[i];
    }
    return e;
  }

  SectorState combined_sector(const Eigen::VectorXcd& theta_in) const {
    if (!clock) throw format_error("model has no clock payload");
    const auto theta = normalized(theta_in);
    Mat cols = Mat::Zero(sector_basis.front().columns.rows(),
                         sector_basis.front().columns.cols());
    for (int i = 0; i < dimension(); ++i) cols += theta[i] * sector_basis[i].columns;
    return SectorState{sector_basis.front().system_layout, std::move(cols)};
  }

  double exact_energy(const Eigen::VectorXcd& theta) const {
    if (clock) return clock->sector_energy(combined_sector(theta));
    const auto psi = *dense_witness(theta);
    return dense_h->energy(psi);
  }

  // Full state vector (dense payload, or clock payload within dense budget).
  std::optional<PureState> dense_witness(const Eigen::VectorXcd& theta_in) const {
    const auto theta = normalized(theta_in);
    if (dense_h) {
      Vec v = dense_basis * theta;
      v.normalize();
      return PureState::unchecked(dense_h->layout(), std::move(v));
    }
    if (clock->layout().total_qubits() <= 14) {
      return clock->sector_dense(combined_sector(theta));
    }
    return std::nullopt;
  }

  // When the whole model lives in the zero-energy history space, the state is
  // a history of a single channel input, which is small enough to return even
  // for very long clocks.
  std::optional<PureState> input_witness(const Eigen::VectorXcd& theta_in) const {
    if (!clock) return std::nullopt;
    for (double e : energies) {
      if (std::abs(e) > 1e-10) return std::nullopt;
    }
    const auto theta = normalized(theta_in);
    const auto state = combined_sector(theta);
    const int n_a = clock->channel().n_a();
    const int n_anc = clock->channel().layout().total_qubits() - n_a;
    const double scale =
        std::sqrt(static_cast<double>(clock->num_time_states()));
    Vec psi_a(std::size_t{1} << n_a);
    for (std::size_t a = 0; a < (std::size_t{1} << n_a); ++a) {
      psi_a[a] = state.columns(a << n_anc, 0) * scale;
    }
    const double n = psi_a.norm();
    if (n < 1e-9) return std::nullopt;
    psi_a /= n;
    return PureState::unchecked(RegisterLayout::single("A", n_a),
                                std::move(psi_a));
  }
};

inline LowEnergyModel low_energy_model(const LocalHamiltonian& h, double cutoff,
                                       const std::vector<std::string>& cut) {
  if (h.layout().dim() > 4096) {
    throw budget_error("dense low-energy model beyond 4096 dimensions");
  }
  const auto summary = h.spectrum(cutoff, SpectrumMethod::kDense);
  const int d = static_cast<int>(summary.low_energy_basis.cols());
  if (d == 0) throw format_error("no states below the energy cutoff");
  if (d > 64) throw budget_error("low-energy space larger than 64 dimensions");
  LowEnergyModel model;
  model.cut = cut;
  model.cut_layout = h.layout().restricted(cut);
  model.dense_h = h;
  model.dense_basis = summary.low_energy_basis;
  model.energies.assign(summary.eigenvalues.begin(),
                        summary.eigenvalues.begin() + d);
  model.blocks.resize(static_cast<std::size_t>(d) * d);
  std::vector<PureState> basis;
  basis.reserve(d);
  for (int i = 0; i < d; ++i) {
    basis.push_back(PureState::unchecked(h.layout(), summary.low_energy_basis.col(i)));
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      model.blocks[static_cast<std::size_t>(i) * d + j] =
          cross_partial_trace(basis[i], basis[j], cut);
    }
  }
  return model;
}

inline LowEnergyModel low_energy_model(
    std::shared_ptr<const ClockHamiltonian> h, double cutoff,
    const std::vector<std::string>& cut) {
  if (!h) throw format_error("clock payload is null");
  auto lows = h->low_energy_sector(cutoff);
  if (lows.empty()) throw format_error("no states below the energy cutoff");
  if (lows.size() > 64) {
    throw budget_error("low-energy space larger than 64 dimensions");
  }
  const int d = static_cast<int>(lows.size());
  LowEnergyModel model;
  model.cut = cut;
  model.cut_layout = h->channel().layout().restricted(cut);
  model.clock = h;
  model.energies.reserve(d);
  model.sector_basis.reserve(d);
  for (auto& [e, state] : lows) {
    model.energies.push_back(e);
    model.sector_basis.push_back(std::move(state));
  }
  model.blocks.resize(static_cast<std::size_t>(d) * d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      model.blocks[static_cast<std::size_t>(i) * d + j] =
          h->sector_cross_partial_trace(model.sector_basis[i],
                                        model.sector_basis[j], cut);
    }
  }
  return model;
}

inline LowEnergyModel low_energy_model(const InstanceHamiltonian& h,
                                       double cutoff,
                                       const std::vector<std::string>& cut) {
  h.validate();
  if (h.dense) return low_energy_model(*h.dense, cutoff, cut);
  return low_energy_model(h.clock, cutoff, cut);
}

// ---------------------------------------------------------------------------
// Objectives and the simplex optimizer
// ---------------------------------------------------------------------------

enum class Objective { kMaxEntropy, kMinEntropy, kMinProductDistance };

// Largest eigenvalue of a reduced state, clamped into [0, 1].
inline double top_eigenvalue(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es(rho.matrix(), Eigen::EigenvaluesOnly);
  return std::min(1.0, std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Trace distance from the closest pure product state, for a globally pure
// state whose cut marginal is `reduced`: 2 sqrt(1 - lambda_max).
inline double product_distance_bound(const DensityMatrix& reduced) {
  return 2.0 * std::sqrt(std::max(0.0, 1.0 - top_eigenvalue(reduced)));
}

inline double objective_value(Objective objective, const DensityMatrix& reduced) {
  switch (objective) {
    case Objective::kMaxEntropy:
    case Objective::kMinEntropy:
      return vn_entropy(reduced);
    case Objective::kMinProductDistance:
      return product_distance_bound(reduced);
  }
  throw format_error("unknown objective");
}

namespace detail {

// Nelder-Mead on R^n.  Returns the best value; x is replaced by the best
// point and `iterations` accumulates loop count.
inline double nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          Eigen::VectorXd& x, int max_iterations, double tol,
                          long& iterations) {
  const int n = static_cast<int>(x.size());
  std::vector<Eigen::VectorXd> pts(n + 1, x);
  std::vector<double> val(n + 1);
  for (int i = 1; i <= n; ++i) pts[i][i - 1] += 0.35;
  for (int i = 0; i <= n; ++i) val[i] = f(pts[i]);
  std::vector<int> order(n + 1);
  for (int it = 0; it < max_iterations; ++it) {
    ++iterations;
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return val[a] < val[b]; });
    const int best = order[0], worst = order[n], second = order[n - 1];
    if (val[worst] - val[best] < tol) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= n;
    const Eigen::VectorXd refl = centroid + (centroid - pts[worst]);
    const double f_refl = f(refl);
    if (f_refl < val[best]) {
      const Eigen::VectorXd expd = centroid + 2.0 * (centroid - pts[worst]);
      const double f_expd = f(expd);
      if (f_expd < f_refl) {
        pts[worst] = expd;
        val[worst] = f_expd;
      } else {
        pts[worst] = refl;
        val[worst] = f_refl;
      }
    } else if (f_refl < val[second]) {
      pts[worst] = refl;
      val[worst] = f_refl;
    } else {
      const bool outside = f_refl < val[worst];
      Eigen::VectorXd contr;
      if (outside) {
        contr = centroid + 0.5 * (refl - centroid);
      } else {
        contr = centroid - 0.5 * (centroid - pts[worst]);
      }
      const double f_contr = f(contr);
      if (f_contr < std::min(f_refl, val[worst])) {
        pts[worst] = contr;
        val[worst] = f_contr;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          val[i] = f(pts[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i) {
    if (val[i] < val[best]) best = i;
  }
  x = pts[best];
  return val[best];
}

inline Eigen::VectorXcd params_to_theta(const Eigen::VectorXd& x) {
  Eigen::VectorXcd theta(x.size() / 2);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    theta[i] = cx(x[2 * i], x[2 * i + 1]);
  }
  if (theta.norm() < 1e-9) theta[0] = 1.0;
  theta.normalize();
  return theta;
}

}  // namespace detail

struct OptimizeResult {
  Eigen::VectorXcd theta;  // normalized coefficients over the model basis
  double value = 0.0;      // objective at theta
  double energy = 0.0;     // honest Hamiltonian evaluation at theta
  OptimizerReport report;
};

inline OptimizeResult optimize_low_energy(const LowEnergyModel& model,
                                          Objective objective,
                                          int restarts = 32,
                                          std::uint64_t seed = 7,
                                          int max_iterations = 2000) {
  if (restarts < 1) throw format_error("optimizer needs at least one restart");
  const int d = model.dimension();
  const bool maximize = objective == Objective::kMaxEntropy;
  OptimizeResult out;
  out.report.restarts = restarts;
  if (d == 1) {
    out.theta = Eigen::VectorXcd::Ones(1);
    out.value = objective_value(objective, model.reduced(out.theta));
    out.energy = model.exact_energy(out.theta);
    out.report.best_objective = out.value;
    out.report.witness_energy = out.energy;
    return out;
  }
  const auto f = [&](const Eigen::VectorXd& x) {
    const double v =
        objective_value(objective, model.reduced(detail::params_to_theta(x)));
    return maximize ? -v : v;
  };
  Rng rng(seed);
  Eigen::VectorXd best_x;
  double best_f = std::numeric_limits<double>::infinity();
  long iterations = 0;
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2 * d);
    if (r < d) {
      x0[2 * r] = 1.0;  // start from a basis eigenstate
    } else if (r == d) {
      for (int i = 0; i < d; ++i) x0[2 * i] = 1.0;  // uniform superposition
    } else {
      for (int i = 0; i < 2 * d; ++i) x0[i] = rng.gaussian();
    }
    const double fx = detail::nelder_mead(f, x0, max_iterations, 1e-6, iterations);
    if (fx < best_f) {
      best_f = fx;
      best_x = x0;
    }
  }
  detail::nelder_mead(f, best_x, max_iterations, 1e-9, iterations);  // polish
  out.theta = detail::params_to_theta(best_x);
  out.value = objective_value(objective, model.reduced(out.theta));
  out.energy = model.exact_energy(out.theta);
  out.report.iterations = iterations;
  out.report.best_objective = out.value;
  out.report.witness_energy = out.energy;
  return out;
}

// Convenience overload: enumerate below `cutoff` and optimize in one call.
// The returned energy always satisfies energy <= cutoff + 1e-9.
inline OptimizeResult optimize_low_energy(const LocalHamiltonian& h,
                                          double cutoff,
                                          const std::vector<std::string>& cut,
                                          Objective objective,
                                          int restarts = 32,
                                          std::uint64_t seed = 7) {
  auto result =
      optimize_low_energy(low_energy_model(h, cutoff, cut), objective, restarts, seed);
  if (result.energy > cutoff + 1e-9) {
    throw format_error("optimized state escaped the energy cutoff");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Deciders
// ---------------------------------------------------------------------------

namespace detail {

constexpr double kCutoffSlack = 1e-12;   // numerical zero-width at the cutoff
constexpr double kEnergySlack = 1e-8;    // YES re-verification energy slack
constexpr double kDecisionSlack = 1e-6;  // objective comparison slack

// Cutoff sitting just below beta (the NO probe optimizes over energy < beta).
inline double strictly_below(double beta) {
  const double slack =
      beta > 0.0 ? std::min(kCutoffSlack, 0.5 * beta) : kCutoffSlack;
  return beta - slack;
}

inline std::optional<LowEnergyModel> try_model(const InstanceHamiltonian& h,
                                               double cutoff,
                                               const std::vector<std::string>& cut) {
  try {
    return low_energy_model(h, cutoff, cut);
  } catch (const format_error& e) {
    if (std::string(e.what()).find("no states below") == std::string::npos) throw;
    return std::nullopt;  // empty low-energy space
  }
}

struct ProbeOutcome {
  OptimizeResult result;
  LowEnergyModel model;
};

inline std::optional<ProbeOutcome> probe(const InstanceHamiltonian& h,
                                         double cutoff,
                                         const std::vector<std::string>& cut,
                                         Objective objective,
                                         const DeciderOptions& opt) {
  auto model = try_model(h, cutoff, cut);
  if (!model) return std::nullopt;
  auto result = optimize_low_energy(*model, objective, opt.restarts, opt.seed,
                                    opt.max_iterations);
  return ProbeOutcome{std::move(result), std::move(*model)};
}

// Shared YES/NO scaffolding: probe the alpha space with the objective, accept
// YES when `yes_ok(value)` holds and the witness re-verifies, otherwise try to
// certify NO over the beta space with `no_ok(value)`.
template <class YesOk, class NoOk>
Verdict decide_two_sided(const InstanceHamiltonian& h,
                         const std::vector<std::string>& cut, double alpha,
                         double beta, Objective objective, YesOk yes_ok,
                         NoOk no_ok, const DeciderOptions& opt) {
  Verdict verdict;
  auto yes_probe = probe(h, alpha + kCutoffSlack, cut, objective, opt);
  if (yes_probe) {
    verdict.report = yes_probe->result.report;
    if (yes_ok(yes_probe->result.value)) {
      const auto& model = yes_probe->model;
      const auto& theta = yes_probe->result.theta;
      const double energy = model.exact_energy(theta);
      const double value = objective_value(objective, model.reduced(theta));
      if (energy <= alpha + kEnergySlack && yes_ok(value)) {
        verdict.decision = Decision::kYes;
        verdict.report.witness_energy = energy;
        verdict.report.reverified = true;
        verdict.witness = model.dense_witness(theta);
        if (!verdict.witness) verdict.witness = model.input_witness(theta);
        return verdict;
      }
    }
  }
  auto no_probe = probe(h, strictly_below(beta), cut, objective, opt);
  if (!no_probe) {
    verdict.decision = Decision::kNo;  // nothing below beta at all
    return verdict;
  }
  if (no_ok(no_probe->result.value)) {
    verdict.decision = Decision::kNo;
    verdict.report = no_probe->result.report;
    return verdict;
  }
  if (!yes_probe) verdict.report = no_probe->result.report;
  return verdict;
}

}  // namespace detail

inline Verdict decide_heles(const HELESInstance& inst,
                            const DeciderOptions& opt = {}) {
  inst.validate();
  return detail::decide_two_sided(
      inst.h, inst.cut, inst.alpha, inst.beta, Objective::kMaxEntropy,
      [&](double v) { return v >= inst.s - detail::kDecisionSlack; },
      [&](double v) { return v <= inst.t + detail::kDecisionSlack; }, opt);
}

inline Verdict decide_leles(const LELESInstance& inst,
                            const DeciderOptions& opt = {}) {
  inst.validate();
  return detail::decide_two_sided(
      inst.h, inst.cut, inst.alpha, inst.beta, Objective::kMinEntropy,
      [&](double v) { return v <= inst.t + detail::kDecisionSlack; },
      [&](double v) { return v >= inst.s - detail::kDecisionSlack; }, opt);
}

inline Verdict decide_leaps(const LEAPSInstance& inst,
                            const DeciderOptions& opt = {}) {
  inst.validate();
  return detail::decide_two_sided(
      inst.h, inst.cut, inst.alpha, inst.beta, Objective::kMinProductDistance,
      [&](double v) { return v <= inst.a + detail::kDecisionSlack; },
      [&](double v) { return v >= inst.b - detail::kDecisionSlack; }, opt);
}

// Exact free-energy decision from the dense partition function.
inline Verdict decide_fea_exact(const FEAInstance& inst) {
  inst.validate();
  Verdict verdict;
  const double f = inst.h.free_energy(inst.beta_temp);
  verdict.report.best_objective = f;
  if (f <= inst.a) {
    verdict.decision = Decision::kYes;
    verdict.report.reverified = true;
  } else if (f >= inst.b) {
    verdict.decision = Decision::kNo;
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Channel-problem evaluators (PPIO, CIMM)
// ---------------------------------------------------------------------------

// Pure output of an isometry instance on registers A and B.
inline PureState ppio_output(const PPIOInstance& inst, const PureState& psi_a) {
  const auto full = inst.u.evolve(inst.u.embed_input(psi_a));
  const auto keep = std::vector<std::string>{"A", "B"};
  // Gates never touch E, so the output factorizes; project E onto |0..0>.
  const auto& layout = inst.u.layout();
  const int n_keep = layout.restricted(keep).total_qubits();
  const int n_e = layout.total_qubits() - n_keep;
  Vec amp(std::size_t{1} << n_keep);
  for (std::size_t i = 0; i < (std::size_t{1} << n_keep); ++i) {
    amp[i] = full.amplitudes()[i << n_e];
  }
  const double norm = amp.norm();
  if (norm < 1.0 - 1e-9) {
    throw format_error("isometry output leaked into the environment");
  }
  amp /= norm;
  return PureState::unchecked(layout.restricted(keep), std::move(amp));
}

// Distance of the instance's output from the closest pure product across A|B.
inline double ppio_product_distance(const PPIOInstance& inst,
                                    const PureState& psi_a) {
  return product_distance_bound(partial_trace(ppio_output(inst, psi_a), {"B"}));
}

struct ChannelOptimum {
  double value = 0.0;
  PureState input;
  OptimizerReport report;
};

namespace detail {

// Optimize val(psi_A) over pure channel inputs with the shared simplex core.
inline ChannelOptimum optimize_pure_input(
    const RegisterLayout& input_layout,
    const std::function<double(const PureState&)>& val, bool maximize,
    int restarts, std::uint64_t seed, int max_iterations = 2000) {
  const auto d = static_cast<int>(input_layout.dim());
  if (d > 64) throw budget_error("input space larger than 64 dimensions");
  const auto f = [&](const Eigen::VectorXd& x) {
    const auto theta = params_to_theta(x);
    const double v =
        val(PureState::unchecked(input_layout, theta));
    return maximize ? -v : v;
  };
  Rng rng(seed);
  Eigen::VectorXd best_x;
  double best_f = std::numeric_limits<double>::infinity();
  long iterations = 0;
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2 * d);
    if (r < d) {
      x0[2 * r] = 1.0;
    } else if (r == d) {
      for (int i = 0; i < d; ++i) x0[2 * i] = 1.0;
    } else {
      for (int i = 0; i < 2 * d; ++i) x0[i] = rng.gaussian();
    }
    const double fx = nelder_mead(f, x0, max_iterations, 1e-6, iterations);
    if (fx < best_f) {
      best_f = fx;
      best_x = x0;
    }
  }
  nelder_mead(f, best_x, max_iterations, 1e-9, iterations);
  ChannelOptimum out{0.0,
                     PureState::unchecked(input_layout, params_to_theta(best_x)),
                     {}};
  out.value = val(out.input);
  out.report.restarts = restarts;
  out.report.iterations = iterations;
  out.report.best_objective = out.value;
  return out;
}

}  // namespace detail

// Smallest pure-product distance any pure input can reach.
inline ChannelOptimum ppio_min_product_distance(const PPIOInstance& inst,
                                                int restarts = 32,
                                                std::uint64_t seed = 7) {
  inst.validate();
  const RegisterLayout in = RegisterLayout::single("A", inst.u.n_a());
  return detail::optimize_pure_input(
      in, [&](const PureState& psi) { return ppio_product_distance(inst, psi); },
      /*maximize=*/false, restarts, seed);
}

// Largest output entropy any pure input can reach.
inline ChannelOptimum max_output_entropy(const MaxOutQEAInstance& inst,
                                         int restarts = 32,
                                         std::uint64_t seed = 7) {
  inst.validate();
  const RegisterLayout in = RegisterLayout::single("A", inst.phi.n_a());
  return detail::optimize_pure_input(
      in, [&](const PureState& psi) { return vn_entropy(inst.phi.apply(psi)); },
      /*maximize=*/true, restarts, seed);
}

struct CIMMCheck {
  double distance = 0.0;
  bool certifies_yes = false;   // this input witnesses the YES condition
  bool consistent_no = false;   // this input does not contradict NO
};

inline CIMMCheck check_cimm(const CIMMInstance& inst, const DensityMatrix& rho_a) {
  inst.validate();
  const auto out = inst.phi.apply(rho_a);
  const auto dim = out.layout().dim();
  const auto mixed = DensityMatrix::unchecked(
      out.layout(), Mat::Identity(dim, dim) / static_cast<double>(dim));
  CIMMCheck check;
  check.distance = trace_norm_distance(out, mixed);
  check.certifies_yes = check.distance <= inst.a + detail::kDecisionSlack;
  check.consistent_no = check.distance >= inst.b - detail::kDecisionSlack;
  return check;
}

// Brute-force minimum of ||Phi(rho) - maximally mixed||_1 over mixed inputs
// (square-root parameterization), then threshold against (a, b).
inline Verdict decide_cimm(const CIMMInstance& inst,
                           const DeciderOptions& opt = {}) {
  inst.validate();
  const auto in_layout = RegisterLayout::single("A", inst.phi.n_a());
  const auto d = static_cast<int>(in_layout.dim());
  if (d > 16) throw budget_error("input space larger than 16 dimensions");
  const auto to_density = [&](const Eigen::VectorXd& x) {
    Mat m(d, d);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        m(r, c) = cx(x[2 * (r * d + c)], x[2 * (r * d + c) + 1]);
      }
    }
    Mat rho = m * m.adjoint();
    const double tr = rho.trace().real();
    if (tr < 1e-12) rho = Mat::Identity(d, d);
    rho /= rho.trace().real();
    return DensityMatrix::unchecked(in_layout, (rho + rho.adjoint()) / 2.0);
  };
  const auto f = [&](const Eigen::VectorXd& x) {
    return check_cimm(inst, to_density(x)).distance;
  };
  Rng rng(opt.seed);
  Eigen::VectorXd best_x;
  double best_f = std::numeric_limits<double>::infinity();
  long iterations = 0;
  for (int r = 0; r < opt.restarts; ++r) {
    Eigen::VectorXd x0(2 * d * d);
    if (r == 0) {  // identity start: the maximally mixed input
      x0.setZero();
      for (int i = 0; i < d; ++i) x0[2 * (i * d + i)] = 1.0;
    } else {
      for (int i = 0; i < 2 * d * d; ++i) x0[i] = rng.gaussian();
    }
    const double fx =
        detail::nelder_mead(f, x0, opt.max_iterations, 1e-6, iterations);
    if (fx < best_f) {
      best_f = fx;
      best_x = x0;
    }
  }
  detail::nelder_mead(f, best_x, opt.max_iterations, 1e-9, iterations);
  Verdict verdict;
  const auto rho = to_density(best_x);
  const auto check = check_cimm(inst, rho);
  verdict.report.restarts = opt.restarts;
  verdict.report.iterations = iterations;
  verdict.report.best_objective = check.distance;
  if (check.certifies_yes) {
    verdict.decision = Decision::kYes;
    verdict.state_witness = rho;
    verdict.report.reverified = true;
  } else if (check.consistent_no) {
    verdict.decision = Decision::kNo;
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

struct ReductionReport {
  int gate_steps = 0;   // T
  int idle_steps = 0;   // L
  int time_states = 0;  // N = T + L + 1
  double delta = 0.0;   // clock gap bound
  double beta = 0.0;    // emitted energy cutoff (delta / L)
  double completeness_distance = 0.0;  // history-marginal slack 2T/N (+a)
  double soundness_distance = 0.0;     // witness slack 2 sqrt(beta/delta) + 2T/N
  double kappa1 = 0.0;  // a * sqrt(L)
  double kappa2 = 0.0;  // beta * L^3
  double kappa3 = 0.0;  // beta / a^6
};

namespace detail {

constexpr int kMaxIdleSteps = 4096;

// Smallest L in [1, kMaxIdleSteps] satisfying a monotone predicate; throws
// with the exact requirement when the cap is not enough.
template <class Cond>
int smallest_idle_tail(Cond cond, const char* what) {
  if (!cond(kMaxIdleSteps)) {
    long required = -1;
    for (long l = 2L * kMaxIdleSteps; l <= (1L << 40); l *= 2) {
      if (cond(l)) {
        long lo = l / 2, hi = l;
        while (lo + 1 < hi) {
          const long mid = lo + (hi - lo) / 2;
          (cond(mid) ? hi : lo) = mid;
        }
        required = hi;
        break;
      }
    }
    std::ostringstream msg;
    msg << what << ": no feasible idle tail within budget (cap "
        << kMaxIdleSteps << ", required L = ";
    if (required > 0) {
      msg << required << ")";
    } else {
      msg << "> 2^40)";
    }
    throw budget_error(msg.str());
  }
  long lo = 0, hi = kMaxIdleSteps;  // cond(0) is false: no tail, no damping
  while (lo + 1 < hi) {
    const long mid = lo + (hi - lo) / 2;
    (cond(mid) ? hi : lo) = mid;
  }
  return static_cast<int>(hi);
}

inline double entropy_deviation(double distance, int qubits) {
  if (distance <= 0.0) return 0.0;
  return distance * (qubits - std::log2(distance));
}

}  // namespace detail

struct HELESReduction {
  HELESInstance instance;
  ReductionReport report;
};

// Map a maximum-output-entropy question to high entropy at low energy: purify
// the input, run the circuit-to-Hamiltonian construction with an idle tail
// long enough that both the history-marginal slack 2T/N and the witness slack
// 2 sqrt(beta/delta) + 2T/N = 2/sqrt(L) + 2T/N deviate the cut entropy by at
// most 1/4, and keep the entropy thresholds tau + 3/4 and tau + 1/4.
inline HELESReduction reduce_maxoutqea_to_heles(const MaxOutQEAInstance& src,
                                                int idle_override = -1) {
  src.validate();
  const ChannelSpec pure = with_purified_input(src.phi);
  const int t_steps = pure.num_steps();
  const int n_out =
      pure.layout().restricted(pure.output_registers()).total_qubits();
  const auto cond = [&](long l) {
    if (l < 1) return false;
    const double n = static_cast<double>(t_steps) + l + 1;
    const double x1 = 2.0 * t_steps / n;
    const double x2 = 2.0 / std::sqrt(static_cast<double>(l)) + x1;
    return detail::entropy_deviation(x1, n_out) <= 0.25 &&
           detail::entropy_deviation(x2, n_out) <= 0.25;
  };
  const int l = idle_override >= 0
                    ? idle_override
                    : detail::smallest_idle_tail(cond, "entropy reduction");
  ClockConfig cfg;
  cfg.gate_steps = t_steps;
  cfg.idle_steps = l;
  cfg.encoding = ClockEncoding::kKitaev3Local;
  auto clock = std::make_shared<const ClockHamiltonian>(pure, cfg);
  HELESReduction out;
  out.report.gate_steps = t_steps;
  out.report.idle_steps = l;
  out.report.time_states = clock->num_time_states();
  out.report.delta = clock->delta();
  out.report.beta = out.report.delta / std::max(1, l);
  const double n = clock->num_time_states();
  out.report.completeness_distance = 2.0 * t_steps / n;
  out.report.soundness_distance =
      2.0 * std::sqrt(out.report.beta / out.report.delta) + 2.0 * t_steps / n;
  out.instance.h = InstanceHamiltonian::from_clock(clock);
  out.instance.cut = pure.output_registers();
  out.instance.alpha = 0.0;
  out.instance.beta = out.report.beta;
  out.instance.s = src.tau + 0.75;
  out.instance.t = src.tau + 0.25;
  out.instance.validate();
  return out;
}

struct LELESReduction {
  LELESInstance instance;
  ReductionReport report;
};

// Map a product-preserving-isometry question to low entropy at low energy.
// Completeness: a history of an a-good input has cut entropy at most
// fannes(2T/N + a).  Soundness: a far-from-product output forces cut entropy
// at least -(1/2) log2(1 - b^2/4), minus the witness slack.  The idle tail is
// the smallest one separating the two by `margin`.
inline LELESReduction reduce_ppio_to_leles(const PPIOInstance& src,
                                           int idle_override = -1,
                                           double margin = 0.02) {
  src.validate();
  const int t_steps = src.u.num_steps();
  const int n_b = src.u.n_b();
  const double dim_b = std::pow(2.0, n_b);
  const double floor = -0.5 * std::log2(1.0 - src.b * src.b / 4.0);
  const auto thresholds = [&](long l) {
    const double n = static_cast<double>(t_steps) + l + 1;
    const double x1 = 2.0 * t_steps / n + src.a;
    const double x2 = 2.0 / std::sqrt(static_cast<double>(l)) + 2.0 * t_steps / n;
    const double t = fannes_bound(x1, static_cast<std::size_t>(dim_b));
    const double s = floor - fannes_bound(x2, static_cast<std::size_t>(dim_b));
    return std::make_pair(s, t);
  };
  const auto cond = [&](long l) {
    if (l < 1) return false;
    const auto [s, t] = thresholds(l);
    return s - t >= margin;
  };
  const int l = idle_override >= 0
                    ? idle_override
                    : detail::smallest_idle_tail(cond, "isometry entropy reduction");
  ClockConfig cfg;
  cfg.gate_steps = t_steps;
  cfg.idle_steps = l;
  cfg.encoding = ClockEncoding::kKitaev3Local;
  auto clock = std::make_shared<const ClockHamiltonian>(src.u, cfg);
  LELESReduction out;
  out.report.gate_steps = t_steps;
  out.report.idle_steps = l;
  out.report.time_states = clock->num_time_states();
  out.report.delta = clock->delta();
  out.report.beta = out.report.delta / std::max(1, l);
  const double n = clock->num_time_states();
  out.report.completeness_distance = 2.0 * t_steps / n + src.a;
  out.report.soundness_distance =
      2.0 * std::sqrt(out.report.beta / out.report.delta) + 2.0 * t_steps / n;
  const auto [s, t] = thresholds(l);
  out.instance.h = InstanceHamiltonian::from_clock(clock);
  out.instance.cut = {"B"};
  out.instance.alpha = 0.0;
  out.instance.beta = out.report.beta;
  out.instance.s = s;
  out.instance.t = t;
  out.instance.validate();
  return out;
}

struct LEAPSReduction {
  LEAPSInstance instance;
  ReductionReport report;
};

// Raw threshold map of the isometry-to-almost-product reduction at a given
// idle tail, usable even where the emitted instance would be invalid.
struct LEAPSParameters {
  double a = 0.0;
  double b = 0.0;
  double beta = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa3 = 0.0;
};

inline LEAPSParameters ppio_leaps_parameters(int t_steps, int idle_steps,
                                             double a0, double b0,
                                             double delta) {
  LEAPSParameters p;
  const double n = static_cast<double>(t_steps) + idle_steps + 1;
  const double drift = 2.0 * t_steps / n;
  p.a = 2.0 * std::sqrt(drift + a0);
  p.beta = delta / std::max(1, idle_steps);
  p.b = b0 - 2.0 * std::sqrt(p.beta / delta) - drift;
  p.kappa1 = p.a * std::sqrt(static_cast<double>(idle_steps));
  p.kappa2 = p.beta * std::pow(static_cast<double>(idle_steps), 3.0);
  p.kappa3 = p.beta / std::pow(p.a, 6.0);
  return p;
}

// Map a product-preserving-isometry question to low-energy almost-product
// states across the cut B | (A, E, clock).  Completeness: the history of an
// a0-good input is within 2 sqrt(2T/N + a0) of a product.  Soundness: a
// low-energy state close to a product would pull the isometry output within
// 2/sqrt(L) + 2T/N of one, contradicting b0.
inline LEAPSReduction reduce_ppio_to_leaps(const PPIOInstance& src,
                                           int idle_override = -1,
                                           double margin = 0.02) {
  src.validate();
  const int t_steps = src.u.num_steps();
  const auto cond = [&](long l) {
    if (l < 1) return false;
    const double n = static_cast<double>(t_steps) + l + 1;
    const double drift = 2.0 * t_steps / n;
    const double a = 2.0 * std::sqrt(drift + src.a);
    const double b = src.b - 2.0 / std::sqrt(static_cast<double>(l)) - drift;
    return b - a >= margin && b < 2.0;
  };
  const int l = idle_override >= 0
                    ? idle_override
                    : detail::smallest_idle_tail(cond, "isometry product reduction");
  ClockConfig cfg;
  cfg.gate_steps = t_steps;
  cfg.idle_steps = l;
  cfg.encoding = ClockEncoding::kKitaev3Local;
  auto clock = std::make_shared<const ClockHamiltonian>(src.u, cfg);
  const auto p =
      ppio_leaps_parameters(t_steps, l, src.a, src.b, clock->delta());
  LEAPSReduction out;
  out.report.gate_steps = t_steps;
  out.report.idle_steps = l;
  out.report.time_states = clock->num_time_states();
  out.report.delta = clock->delta();
  out.report.beta = p.beta;
  const double n = clock->num_time_states();
  out.report.completeness_distance = 2.0 * t_steps / n + src.a;
  out.report.soundness_distance =
      2.0 * std::sqrt(p.beta / out.report.delta) + 2.0 * t_steps / n;
  out.report.kappa1 = p.kappa1;
  out.report.kappa2 = p.kappa2;
  out.report.kappa3 = p.kappa3;
  out.instance.h = InstanceHamiltonian::from_clock(clock);
  out.instance.cut = {"B"};
  out.instance.alpha = 0.0;
  out.instance.beta = p.beta;
  out.instance.a = p.a;
  out.instance.b = p.b;
  out.instance.validate();
  return out;
}

// Map a separable-ground-state energy question (H, alpha, beta) on a register
// cut to almost-product states: b = (beta - alpha) / (2 ||H||), and the energy
// threshold tightens to beta' = beta - ||H|| b = (alpha + beta) / 2.
inline LEAPSReduction reduce_sepham_to_leaps(const LocalHamiltonian& h,
                                             const std::vector<std::string>& cut,
                                             double alpha, double beta) {
  if (!(beta > alpha)) throw format_error("energy thresholds need beta > alpha");
  const double norm = h.operator_norm();
  if (norm <= 0.0) throw format_error("hamiltonian norm must be positive");
  LEAPSReduction out;
  const double b = (beta - alpha) / (2.0 * norm);
  out.instance.h = InstanceHamiltonian::from_dense(h);
  out.instance.cut = cut;
  out.instance.alpha = alpha;
  out.instance.beta = beta - norm * b;
  out.instance.a = 0.0;
  out.instance.b = b;
  out.instance.validate();
  out.report.beta = out.instance.beta;
  return out;
}

// ---------------------------------------------------------------------------
// Two-prover style verifier for almost-product instances
// ---------------------------------------------------------------------------

// Acceptance probability of the product-state verifier: with probability 1/2
// check a sampled energy estimate against the midpoint (alpha + beta) / 2,
// with probability 1/2 run a SWAP test of the witness against the claimed
// product phi_l (x) phi_r.  The cut must be a prefix of the layout so the
// product witness lines up registerwise.
inline double leaps_qma_verifier(const LEAPSInstance& inst,
                                 const PureState& psi, const PureState& phi_l,
                                 const PureState& phi_r, int samples,
                                 int repetitions, Rng& rng) {
  inst.validate();
  if (!inst.h.dense) {
    throw format_error("verifier needs a dense hamiltonian payload");
  }
  if (repetitions < 1) throw format_error("verifier needs repetitions >= 1");
  const auto& h = *inst.h.dense;
  const auto& regs = h.layout().registers();
  for (std::size_t i = 0; i < inst.cut.size(); ++i) {
    if (i >= regs.size() || regs[i].name != inst.cut[i]) {
      throw format_error("verifier needs the cut as a layout prefix");
    }
  }
  const auto product = tensor(phi_l, phi_r);
  if (product.dim() != psi.dim()) {
    throw format_error("product witness dimension mismatch");
  }
  int passes = 0;
  for (int r = 0; r < repetitions; ++r) {
    const double estimate = h.sampled_energy_estimate(psi, samples, rng);
    if (estimate < 0.5 * (inst.alpha + inst.beta)) ++passes;
  }
  const double p_energy = static_cast<double>(passes) / repetitions;
  const double p_swap = swap_test_prob(psi, product);
  return 0.5 * p_energy + 0.5 * p_swap;
}

}  // namespace lowent
