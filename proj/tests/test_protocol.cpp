#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "lowent/core.hpp"
#include "lowent/extractor.hpp"
#include "lowent/local_hamiltonian.hpp"
#include "lowent/protocol.hpp"
#include "lowent/random.hpp"

namespace lowent {
namespace {

Extractor single_unitary_extractor(int n, Mat u) {
  Extractor x;
  x.n = n;
  x.d = 0;
  x.k = 0.0;
  x.epsilon = 0.0;
  x.unitaries.push_back(std::move(u));
  return x;
}

ProtocolConfig twirl_config(int q, double s, double tau = 0.5) {
  ProtocolConfig cfg;
  cfg.q = q;
  cfg.epsilon = 0.0;
  cfg.c = 1.0;
  cfg.s = s;
  cfg.tau = tau;
  return cfg;
}

DensityMatrix mix(const DensityMatrix& a, const DensityMatrix& b, double t) {
  return DensityMatrix::unchecked(a.layout(),
                                  (1.0 - t) * a.matrix() + t * b.matrix());
}

double marginal_defect(const DensityMatrix& chi) {
  const int n_a = chi.layout().size("A");
  return trace_norm_distance(partial_trace(chi, {"A"}),
                             maximally_mixed(RegisterLayout::single("A", n_a)));
}

TEST(Twirl, SendsEveryInputToMaximallyMixed) {
  Rng rng(11);
  for (int n = 1; n <= 2; ++n) {
    const auto x = make_pauli_twirl(n);
    EXPECT_EQ(x.d, 2 * n);
    EXPECT_EQ(static_cast<int>(x.unitaries.size()), 1 << (2 * n));
    EXPECT_EQ(x.epsilon, 0.0);
    const auto layout = RegisterLayout::single("A", n);
    for (int rep = 0; rep < 4; ++rep) {
      const auto rho = random_density(layout, 1 + rep % (1 << n), rng);
      const auto out = x.apply(rho);
      EXPECT_LT(trace_norm_distance(out, maximally_mixed(layout)), 1e-12);
    }
  }
}

TEST(Twirl, MeasuredErrorIsZero) {
  Rng rng(12);
  auto x = make_pauli_twirl(2);
  EXPECT_LT(measure_extractor_error(x, 0.0, 12, rng), 1e-12);
  EXPECT_LT(measure_extractor_error(x, 2.0, 12, rng), 1e-12);
}

TEST(RandomExtractor, MeasuredErrorShrinksWithThreshold) {
  Rng rng(13);
  const auto x = make_extractor(2, 6, 0.0, rng, 40);
  EXPECT_GE(x.epsilon, 0.0);
  EXPECT_LT(x.epsilon, 0.8);
  // At threshold k = n every admissible state is maximally mixed already, so
  // the measured distance collapses to rounding error.
  EXPECT_LT(measure_extractor_error(x, 2.0, 20, rng), 1e-9);
  EXPECT_THROW(measure_extractor_error(x, 3.0, 4, rng), format_error);
  EXPECT_THROW(make_extractor(7, 2, 0.0, rng, 4), budget_error);
  EXPECT_THROW(make_extractor(2, 11, 0.0, rng, 4), budget_error);
}

TEST(Dilation, ReproducesTheChannelOnTraceOut) {
  Rng rng(14);
  // d = 0 with one unitary: the dilation is that unitary.
  const Mat u = haar_unitary(4, rng);
  const auto single = single_unitary_extractor(2, u);
  EXPECT_LT((extractor_dilation(single) - u).cwiseAbs().maxCoeff(), 1e-12);

  const auto x = make_extractor(2, 3, 1.0, rng, 8);
  const auto layout =
      RegisterLayout({{"A", 2}, {"E", 3}});
  const auto rho = random_density(RegisterLayout::single("A", 2), 4, rng);
  Mat e0 = Mat::Zero(8, 8);
  e0(0, 0) = 1.0;
  Mat full = kron(rho.matrix(), e0);
  conjugate_on_support(full, extractor_dilation(x), layout.qubits_of({"A", "E"}),
                       5);
  const auto traced = partial_trace(
      DensityMatrix::unchecked(layout, std::move(full)), {"A"});
  EXPECT_LT(trace_norm_distance(traced, x.apply(rho)), 1e-9);

  const auto twirl = make_pauli_twirl(1);
  const auto tl = RegisterLayout({{"A", 1}, {"E", 2}});
  Mat te0 = Mat::Zero(4, 4);
  te0(0, 0) = 1.0;
  Mat tfull = kron(random_density(RegisterLayout::single("A", 1), 2, rng).matrix(),
                   te0);
  conjugate_on_support(tfull, extractor_dilation(twirl), tl.qubits_of({"A", "E"}),
                       3);
  EXPECT_LT(trace_norm_distance(
                partial_trace(DensityMatrix::unchecked(tl, std::move(tfull)),
                              {"A"}),
                maximally_mixed(RegisterLayout::single("A", 1))),
            1e-12);
}

TEST(Flatten, PureAndMaximallyMixedInputsAreFixedPoints) {
  Rng rng(15);
  const auto layout = RegisterLayout::single("A", 1);
  const auto pure = to_density(random_pure(layout, rng));
  const auto fp = flatten(pure, 3, 0.3);
  EXPECT_EQ(fp.discarded_count, 0);
  EXPECT_EQ(fp.trace_distance, 0.0);
  EXPECT_NEAR(fp.min_entropy, 0.0, 1e-9);

  const auto mixed = maximally_mixed(RegisterLayout::single("A", 2));
  const auto fm = flatten(mixed, 3, 0.25);
  EXPECT_EQ(fm.discarded_count, 0);
  EXPECT_EQ(fm.trace_distance, 0.0);
  EXPECT_NEAR(fm.min_entropy, 6.0, 1e-9);
  EXPECT_LT(trace_norm_distance(
                fm.sigma, maximally_mixed(RegisterLayout::single("A", 6))),
            1e-12);

  EXPECT_THROW(flatten(pure, 0, 0.1), format_error);
  EXPECT_THROW(flatten(pure, 2, 0.0), format_error);
  EXPECT_THROW(flatten(pure, 2, 1.0), format_error);
  EXPECT_THROW(flatten(mixed, 7, 0.1), budget_error);
}

TEST(Flatten, CutMatchesIndependentEnumeration) {
  // One qubit with eigenvalues (3/4, 1/4), eight copies, budget 0.2: the
  // product spectrum is binomial, so the optimal cut can be enumerated by
  // Hamming weight without touching the implementation under test.
  const auto layout = RegisterLayout::single("A", 1);
  Mat rho = Mat::Zero(2, 2);
  rho(0, 0) = 0.75;
  rho(1, 1) = 0.25;
  const int q = 8;
  const double eps = 0.2;
  const auto result = flatten(DensityMatrix(layout, rho), q, eps);

  std::vector<double> spectrum;
  for (std::size_t z = 0; z < (std::size_t{1} << q); ++z) {
    const int wt = __builtin_popcountll(z);
    spectrum.push_back(std::pow(0.75, q - wt) * std::pow(0.25, wt));
  }
  std::sort(spectrum.begin(), spectrum.end(), std::greater<>());
  double best_h = -std::log2(spectrum[0]);
  std::size_t best_j = 0;
  double mass = 0.0, best_mass = 0.0;
  for (std::size_t j = 1; j < spectrum.size(); ++j) {
    mass += spectrum[j - 1];
    if (mass > eps) break;
    const double h = -std::log2(spectrum[j] / (1.0 - mass));
    if (h > best_h + 1e-12) {
      best_h = h;
      best_j = j;
      best_mass = mass;
    }
  }
  EXPECT_EQ(result.discarded_count, static_cast<int>(best_j));
  EXPECT_NEAR(result.min_entropy, best_h, 1e-9);
  EXPECT_NEAR(result.trace_distance, 2.0 * best_mass, 1e-12);

  // Closed forms for this spectrum: discard exactly the top eigenvalue.
  EXPECT_EQ(result.discarded_count, 1);
  const double top = std::pow(0.75, 8);
  EXPECT_NEAR(result.trace_distance, 2.0 * top, 1e-12);
  EXPECT_NEAR(result.min_entropy,
              -std::log2(std::pow(0.75, 7) * 0.25 / (1.0 - top)), 1e-9);
  // Flattening beats the unprojected min-entropy by more than a bit here.
  EXPECT_GT(result.min_entropy, -std::log2(top) + 1.0);
}

TEST(Flatten, DistanceBudgetAndEntropyGainOnRandomStates) {
  Rng rng(16);
  const auto layout = RegisterLayout::single("A", 2);
  for (int rep = 0; rep < 5; ++rep) {
    const auto rho = random_density(layout, 4, rng);
    const int q = 3;
    const double eps = 0.1;
    const auto result = flatten(rho, q, eps);
    EXPECT_LE(result.trace_distance, 2.0 * eps + 1e-12);
    EXPECT_GE(result.discarded_mass, 0.0);
    EXPECT_LE(result.discarded_mass, eps + 1e-12);

    Eigen::SelfAdjointEigenSolver<Mat> es(rho.matrix(), Eigen::EigenvaluesOnly);
    const double hmin = -std::log2(es.eigenvalues().maxCoeff());
    EXPECT_GE(result.min_entropy, q * hmin - 1e-9);
    EXPECT_GE(result.min_entropy, result.entropy_floor);
    EXPECT_NEAR(result.entropy_floor,
                q * vn_entropy(rho) -
                    (2 + std::log2(q / eps)) * std::sqrt(q * std::log2(1.0 / eps)),
                1e-12);

    // Dense cross-check of the reported distance.
    Mat power = Mat::Identity(1, 1);
    for (int c = 0; c < q; ++c) power = kron(power, rho.matrix()).eval();
    const auto dense = DensityMatrix::unchecked(
        RegisterLayout::single("A", 2 * q), std::move(power));
    EXPECT_NEAR(trace_norm_distance(result.sigma, dense), result.trace_distance,
                1e-9);
    result.sigma.validate_psd();
  }
}

TEST(EnforcePromise, ExactMarginalAtOptimalFidelity) {
  Rng rng(17);
  const auto layout = RegisterLayout({{"A", 2}, {"E", 1}});
  for (int rep = 0; rep < 6; ++rep) {
    const auto chi = random_density(layout, 1 + rep, rng);
    const auto aligned = enforce_promise(chi);
    EXPECT_LT(marginal_defect(aligned.state), 1e-9);
    const double defect = marginal_defect(chi);
    EXPECT_NEAR(aligned.input_marginal_distance, defect, 1e-12);
    EXPECT_NEAR(aligned.trace_residual,
                trace_norm_distance(aligned.state, chi), 1e-12);
    // The uniformized purification realizes the Uhlmann fidelity against the
    // maximally mixed marginal, and the residual obeys the induced bound.
    const double target = fidelity(
        partial_trace(chi, {"A"}),
        maximally_mixed(RegisterLayout::single("A", 2)));
    EXPECT_NEAR(aligned.achieved_fidelity, target, 1e-9);
    EXPECT_LE(aligned.trace_residual,
              2.0 * std::sqrt(1.0 - aligned.achieved_fidelity) + 1e-9);
    EXPECT_LE(aligned.trace_residual, 2.0 * std::sqrt(defect) + 1e-9);

    // Idempotent on states that already satisfy the promise.
    const auto again = enforce_promise(aligned.state);
    EXPECT_LT(again.trace_residual, 1e-7);
  }
  EXPECT_THROW(
      enforce_promise(random_density(RegisterLayout({{"E", 1}, {"A", 2}}), 2, rng)),
      format_error);
}

TEST(HonestProver, TwirlAlignsWithZeroResidual) {
  Rng rng(18);
  const auto twirl = make_pauli_twirl(2);
  const auto rho = random_density(RegisterLayout::single("A", 1), 2, rng);
  const auto aligned = honest_prover_state(rho, twirl, 2);
  EXPECT_LT(aligned.input_marginal_distance, 1e-12);
  EXPECT_LT(aligned.trace_residual, 1e-12);
  EXPECT_GT(aligned.achieved_fidelity, 1.0 - 1e-12);
  const auto& regs = aligned.state.layout().registers();
  ASSERT_EQ(regs.size(), 2u);
  EXPECT_EQ(regs[0].name, "A");
  EXPECT_EQ(regs[0].qubits, 2);
  EXPECT_EQ(regs[1].name, "E");
  EXPECT_EQ(regs[1].qubits, 4);

  // With a bystander register the promise still lands exactly.
  const auto pair = random_density(RegisterLayout({{"A", 1}, {"B", 1}}), 2, rng);
  const auto aligned2 = honest_prover_state(pair, twirl, 2);
  EXPECT_LT(aligned2.trace_residual, 1e-12);
  EXPECT_EQ(aligned2.state.layout().registers()[1].name, "B");
  EXPECT_EQ(aligned2.state.layout().registers()[1].qubits, 2);

  EXPECT_THROW(honest_prover_state(rho, twirl, 1), format_error);
  EXPECT_THROW(honest_prover_state(rho, twirl, 0), format_error);
}

TEST(HonestProver, IdentityChannelLeavesPureInputsFarFromPromise) {
  const auto rho = to_density(
      PureState::basis(RegisterLayout::single("A", 1), 0));
  const auto x = single_unitary_extractor(2, Mat::Identity(4, 4));
  const auto aligned = honest_prover_state(rho, x, 2);
  // |00><00| sits at fidelity 1/4 from the promise set; the alignment pays
  // the full trace-norm gap 3/2 and reports it honestly.
  EXPECT_NEAR(aligned.achieved_fidelity, 0.25, 1e-9);
  EXPECT_NEAR(aligned.input_marginal_distance, 1.5, 1e-9);
  EXPECT_NEAR(aligned.trace_residual, 1.5, 1e-9);
  EXPECT_LT(marginal_defect(aligned.state), 1e-9);
}

TEST(HonestProver, ResidualObeysFidelityBoundForMeasuredExtractors) {
  Rng rng(19);
  const auto x = make_extractor(2, 3, 1.0, rng, 8);
  for (int rep = 0; rep < 4; ++rep) {
    const auto rho = random_density(RegisterLayout::single("A", 1), 2, rng);
    const auto aligned = honest_prover_state(rho, x, 2);
    EXPECT_LT(marginal_defect(aligned.state), 1e-9);
    EXPECT_LE(aligned.trace_residual,
              2.0 * std::sqrt(aligned.input_marginal_distance) + 1e-9);
    EXPECT_LE(aligned.trace_residual, 2.0 + 1e-12);
  }
}

TEST(RunProtocol, HonestTwirlAcceptsAndReturnsTheInput) {
  Rng rng(20);
  const auto twirl = make_pauli_twirl(2);
  const auto cfg = twirl_config(2, 0.9);
  const auto rho = random_density(RegisterLayout::single("A", 1), 2, rng);
  const auto aligned = honest_prover_state(rho, twirl, 2);
  const auto result = run_protocol(aligned.state, twirl, cfg);
  EXPECT_NEAR(result.accept_probability, 1.0, 1e-9);
  EXPECT_TRUE(result.certificate_applies);
  EXPECT_LT(result.promise_defect, 1e-9);
  ASSERT_TRUE(result.post_state.has_value());
  ASSERT_TRUE(result.average_output.has_value());
  EXPECT_LT(trace_norm_distance(*result.average_output, rho), 1e-9);
  EXPECT_NEAR(result.sigma_entropy, 2.0 * vn_entropy(rho), 1e-9);
  EXPECT_NEAR(result.average_entropy, vn_entropy(rho), 1e-9);
  EXPECT_NEAR(result.entropy_floor,
              2.0 - fannes_bound(2.0 * std::sqrt(0.1), 4) - 4.0, 1e-12);

  // Bystander copies ride along untouched and come back in the average.
  const auto pair =
      random_density(RegisterLayout({{"A", 1}, {"B", 1}}), 3, rng);
  const auto aligned2 = honest_prover_state(pair, twirl, 2);
  const auto result2 = run_protocol(aligned2.state, twirl, cfg);
  EXPECT_NEAR(result2.accept_probability, 1.0, 1e-9);
  ASSERT_TRUE(result2.average_output.has_value());
  EXPECT_LT(trace_norm_distance(*result2.average_output, pair), 1e-9);
  EXPECT_NEAR(result2.average_entropy, vn_entropy(partial_trace(pair, {"A"})),
              1e-9);
  EXPECT_NEAR(result2.sigma_entropy,
              2.0 * vn_entropy(partial_trace(pair, {"A"})), 1e-9);
}

TEST(RunProtocol, RejectsBrokenPromisesAndBadConfigs) {
  Rng rng(21);
  const auto twirl = make_pauli_twirl(2);
  const auto layout = RegisterLayout({{"A", 2}, {"E", 4}});
  const auto chi = to_density(PureState::basis(layout, 0));
  EXPECT_THROW(run_protocol(chi, twirl, twirl_config(2, 0.9)), promise_error);

  const auto ok = enforce_promise(random_density(layout, 4, rng)).state;
  auto bad = twirl_config(2, 0.9);
  bad.c = 0.5;  // inconsistent with epsilon = 0
  EXPECT_THROW(run_protocol(ok, twirl, bad), format_error);
  auto bad2 = twirl_config(2, 1.5);
  EXPECT_THROW(run_protocol(ok, twirl, bad2), format_error);
  auto bad3 = twirl_config(0, 0.9);
  EXPECT_THROW(run_protocol(ok, twirl, bad3), format_error);
  auto odd = twirl_config(3, 0.9);  // does not divide the register
  EXPECT_THROW(run_protocol(ok, twirl, odd), format_error);
  const auto wrong_regs = random_density(RegisterLayout({{"E", 4}, {"A", 2}}), 2, rng);
  EXPECT_THROW(run_protocol(wrong_regs, twirl, twirl_config(2, 0.9)),
               format_error);
}

TEST(RunProtocol, AcceptanceMatchesDenseConjugation) {
  Rng rng(22);
  const auto x = make_extractor(2, 2, 1.0, rng, 8);
  const auto layout = RegisterLayout({{"A", 2}, {"B", 2}, {"E", 2}});
  ProtocolConfig cfg;
  cfg.q = 2;
  cfg.epsilon = 1e-10;
  cfg.c = 1.0 - 4.0 * std::sqrt(3.0 * cfg.epsilon);
  cfg.s = 0.5;
  for (int rep = 0; rep < 4; ++rep) {
    const auto chi = enforce_promise(random_density(layout, 6, rng)).state;
    const auto result = run_protocol(chi, x, cfg);

    const Mat embedded = embed_on_support(extractor_dilation(x).adjoint(),
                                          layout.qubits_of({"A", "E"}), 6);
    const Mat evolved = embedded * chi.matrix() * embedded.adjoint();
    double p = 0.0;
    Mat projected = Mat::Zero(64, 64);
    for (int r = 0; r < 64; ++r) {
      for (int c = 0; c < 64; ++c) {
        if ((r & 3) == 0 && (c & 3) == 0) projected(r, c) = evolved(r, c);
      }
    }
    p = projected.trace().real();
    EXPECT_NEAR(result.accept_probability, p, 1e-10);
    if (result.post_state) {
      const auto oracle_post = partial_trace(
          DensityMatrix::unchecked(layout, projected / p), {"A", "B"});
      EXPECT_LT(trace_norm_distance(*result.post_state, oracle_post), 1e-9);
    }
  }
}

TEST(RunProtocol, EntropyFloorHoldsForEveryAcceptedAdversary) {
  Rng rng(23);
  const auto x = make_extractor(4, 2, 2.0, rng, 12);
  ProtocolConfig cfg;
  cfg.q = 4;
  cfg.tau = 0.5;
  cfg.delta_prime = 0.2;
  cfg.s = 0.999375;  // 1 - (delta' / 8)^2 for one-qubit copies
  cfg.epsilon = 1e-10;
  cfg.c = 1.0 - 4.0 * std::sqrt(3.0 * cfg.epsilon);
  validate_config(cfg);

  const auto layout = RegisterLayout({{"A", 4}, {"E", 2}});
  // The floor is far from vacuous here: it certifies more than the per-copy
  // target tau - delta'.
  const double floor =
      4.0 - fannes_bound(2.0 * std::sqrt(1.0 - cfg.s), 16) - 2.0;
  EXPECT_GT(floor / cfg.q, cfg.tau - cfg.delta_prime);

  // A reference input that accepts with certainty: the dilation applied to
  // the maximally mixed system with a reset selector.
  Mat e0 = Mat::Zero(4, 4);
  e0(0, 0) = 1.0;
  Mat honest = kron(Mat::Identity(16, 16) / 16.0, e0);
  conjugate_on_support(honest, extractor_dilation(x), layout.qubits_of({"A", "E"}),
                       6);
  const auto chi_pass = DensityMatrix::unchecked(layout, std::move(honest));

  int applied = 0, violations = 0;
  auto check = [&](const DensityMatrix& chi) {
    const auto result = run_protocol(chi, x, cfg);
    EXPECT_NEAR(result.entropy_floor, floor, 1e-12);
    if (!result.certificate_applies) return;
    ++applied;
    if (result.sigma_entropy < result.entropy_floor - 1e-6) ++violations;
    // Per-copy average entropy inherits at least a 1/q share.
    EXPECT_GE(result.average_entropy, result.sigma_entropy / cfg.q - 1e-9);
  };

  check(chi_pass);
  for (int rep = 0; rep < 20; ++rep) {
    const auto adv = enforce_promise(random_density(layout, 8, rng)).state;
    check(adv);
    if (rep < 5) {
      for (double t : {2e-4, 5e-4, 1e-3, 4e-3}) {
        check(mix(chi_pass, adv, t));
      }
    }
  }
  EXPECT_GE(applied, 10);
  EXPECT_EQ(violations, 0);
}

TEST(RunProtocol, MeasuredWrongSelectorAcceptsAtExactlyTwoToMinusD) {
  Rng rng(24);
  for (int d : {1, 2, 3}) {
    Extractor x;
    x.n = 2;
    x.d = d;
    x.k = 0.0;
    x.epsilon = 0.0;
    for (int i = 0; i < (1 << d); ++i) x.unitaries.push_back(haar_unitary(4, rng));
    const auto layout = RegisterLayout({{"A", 2}, {"E", d}});
    const std::size_t dim_e = std::size_t{1} << d;
    Mat e1 = Mat::Zero(dim_e, dim_e);
    e1(dim_e - 1, dim_e - 1) = 1.0;
    const auto chi = DensityMatrix::unchecked(
        layout, kron(Mat::Identity(4, 4) / 4.0, e1));
    ProtocolConfig cfg;
    cfg.q = 2;
    cfg.epsilon = 0.0;
    cfg.c = 1.0;
    cfg.s = 0.9;
    const auto result = run_protocol(chi, x, cfg);
    EXPECT_NEAR(result.accept_probability, std::exp2(-d), 1e-9);
    EXPECT_FALSE(result.certificate_applies);
  }
}

TEST(Solver, CascadeSatisfiesEveryRelation) {
  const auto cfg = solve_protocol_parameters(1, 2, 0.5, 0.2, 0.2);
  EXPECT_NO_THROW(validate_config(cfg));
  EXPECT_NEAR(cfg.s, 1.0 - std::pow(0.2 / 16.0, 2), 1e-15);
  const double eps_expected = std::min(
      std::pow(1.0 - cfg.s, 2) / 192.0, std::pow(0.2 / 4.0, 4) / 3.0);
  EXPECT_NEAR(cfg.epsilon, eps_expected, 1e-18);
  EXPECT_NEAR(cfg.c, 1.0 - 4.0 * std::sqrt(3.0 * cfg.epsilon), 1e-15);
  EXPECT_GE(cfg.c - cfg.s, (1.0 - cfg.s) / 2.0 - 1e-12);
  EXPECT_LE(4.0 * std::pow(3.0 * cfg.epsilon, 0.25), cfg.delta + 1e-12);
  EXPECT_LE(entropy_slack_bound(cfg, 1), cfg.delta_prime);
  ASSERT_GT(cfg.q, 1);
  auto smaller = cfg;
  smaller.q = cfg.q - 1;
  EXPECT_GT(entropy_slack_bound(smaller, 1), cfg.delta_prime);

  EXPECT_THROW(solve_protocol_parameters(1, 1, 0.5, 0.2, 8.0), format_error);
  EXPECT_THROW(solve_protocol_parameters(1, 1, 0.5, 0.0, 0.2), format_error);
  EXPECT_THROW(solve_protocol_parameters(0, 1, 0.5, 0.2, 0.2), format_error);
}

TEST(Fea, HonestGibbsProverLandsOnTheExactFreeEnergy) {
  Rng rng(25);
  const auto layout = RegisterLayout::single("A", 1);
  Mat z = Mat::Identity(2, 2);
  z(1, 1) = -1.0;
  const LocalHamiltonian h(layout, {{{0}, z}}, 1);
  const double beta = 1.0;
  const auto gibbs = h.gibbs_state(beta);
  const double entropy = vn_entropy(gibbs);
  const double f_exact = h.free_energy(beta);
  EXPECT_NEAR(f_exact, -1.1269280110429727, 1e-12);
  EXPECT_NEAR(h.free_energy_of(gibbs, beta), f_exact, 1e-12);

  const auto twirl = make_pauli_twirl(2);
  const auto cfg = twirl_config(2, 0.9);
  const auto aligned = honest_prover_state(gibbs, twirl, 2);

  // Accepting window: the exact value sits below the midpoint.
  auto yes = run_fea_protocol(h, beta, entropy, aligned.state, twirl, cfg,
                              f_exact - 0.05, f_exact + 0.3, 0, rng);
  EXPECT_TRUE(yes.accept);
  EXPECT_NEAR(yes.accept_probability, 1.0, 1e-9);
  EXPECT_NEAR(yes.free_energy_estimate, f_exact, 1e-9);
  EXPECT_NEAR(yes.energy_estimate, h.energy(gibbs), 1e-9);

  // Rejecting window: the claim cannot clear a midpoint below the truth.
  auto no = run_fea_protocol(h, beta, entropy, aligned.state, twirl, cfg,
                             f_exact - 0.3, f_exact - 0.1, 0, rng);
  EXPECT_FALSE(no.accept);
  EXPECT_TRUE(no.protocol.certificate_applies);

  // Sampling keeps the estimator in a loose but honest window.
  auto sampled = run_fea_protocol(h, beta, entropy, aligned.state, twirl, cfg,
                                  f_exact - 0.5, f_exact + 0.5, 4000, rng);
  EXPECT_NEAR(sampled.energy_estimate, h.energy(gibbs), 0.1);

  // A prover that fails the selector measurement is dismissed early.
  const auto bad_layout = RegisterLayout({{"A", 2}, {"E", 4}});
  Mat e1 = Mat::Zero(16, 16);
  e1(15, 15) = 1.0;
  const auto bad_chi = DensityMatrix::unchecked(
      bad_layout, kron(Mat::Identity(4, 4) / 4.0, e1));
  auto rejected = run_fea_protocol(h, beta, entropy, bad_chi, twirl, cfg,
                                   f_exact - 0.05, f_exact + 0.3, 0, rng);
  EXPECT_FALSE(rejected.accept);
  EXPECT_FALSE(rejected.protocol.certificate_applies);

  // The trivial Hamiltonian pins the free energy at -ln 2 per qubit.
  const LocalHamiltonian zero(layout, {{{0}, Mat::Zero(2, 2)}}, 1);
  const auto zero_gibbs = zero.gibbs_state(beta);
  const auto zero_aligned = honest_prover_state(zero_gibbs, twirl, 2);
  auto flat = run_fea_protocol(zero, beta, vn_entropy(zero_gibbs),
                               zero_aligned.state, twirl, cfg, -0.9, -0.4, 0,
                               rng);
  EXPECT_TRUE(flat.accept);
  EXPECT_NEAR(flat.free_energy_estimate, -std::log(2.0), 1e-9);
}

}  // namespace
}  // namespace lowent
