#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "lowent/channel.hpp"
#include "lowent/clock.hpp"
#include "lowent/core.hpp"
#include "lowent/local_hamiltonian.hpp"
#include "lowent/problems.hpp"
#include "lowent/random.hpp"

namespace {

using lowent::cx;
using lowent::Mat;
using lowent::Vec;

Mat hadamard() { return lowent::gates::hadamard(); }
Mat pauli_z() { return lowent::gates::pauli_z(); }
Mat pauli_x() { return lowent::gates::pauli_x(); }
Mat swap_gate() { return lowent::gates::swap(); }
Mat cnot_gate() { return lowent::gates::cnot(); }

lowent::RegisterLayout two_qubit_layout() {
  return lowent::RegisterLayout({{"A", 1}, {"B", 1}});
}

// I - (|00><00| + |11><11|): two zero modes spanned by the Bell pair basis.
lowent::LocalHamiltonian repulsion_off_diagonal() {
  Mat m = Mat::Zero(4, 4);
  m(1, 1) = 1.0;
  m(2, 2) = 1.0;
  return lowent::LocalHamiltonian(two_qubit_layout(), {{{0, 1}, m}}, 2);
}

// I - |Phi+><Phi+|: unique zero mode at the Bell state.
lowent::LocalHamiltonian repulsion_off_bell() {
  Vec bell = Vec::Zero(4);
  bell[0] = bell[3] = 1.0 / std::sqrt(2.0);
  const Mat m = Mat::Identity(4, 4) - bell * bell.adjoint();
  return lowent::LocalHamiltonian(two_qubit_layout(), {{{0, 1}, m}}, 2);
}

// |1><1| (x) I + I (x) |1><1|: product spectrum {0, 1, 1, 2}.
lowent::LocalHamiltonian counting_ones() {
  Mat one = Mat::Zero(2, 2);
  one(1, 1) = 1.0;
  return lowent::LocalHamiltonian(two_qubit_layout(),
                                  {{{0}, one}, {{1}, one}}, 1);
}

lowent::LocalHamiltonian zero_hamiltonian() {
  return lowent::LocalHamiltonian(two_qubit_layout(),
                                  {{{0}, Mat::Zero(2, 2)}}, 1);
}

// Every input becomes Bell(A, B1) (x) psi(B2): far from product across A|B.
lowent::ChannelSpec bell_spreader(bool flip_b1 = false, bool phase_a = false) {
  std::vector<lowent::GateStep> steps;
  steps.push_back({swap_gate(), {0, 2}});
  if (phase_a) steps.push_back({pauli_z(), {0}});
  steps.push_back({hadamard(), {0}});
  steps.push_back({cnot_gate(), {0, 1}});
  if (flip_b1) steps.push_back({pauli_x(), {1}});
  return lowent::ChannelSpec(1, 2, std::move(steps));
}

double entropy_deviation(double x, int qubits) {
  return x <= 0.0 ? 0.0 : x * (qubits - std::log2(x));
}

}  // namespace

TEST(Model, DenseModelReproducesEigenstructure) {
  const auto h = repulsion_off_diagonal();
  const auto model = lowent::low_energy_model(h, 0.5, {"A"});
  ASSERT_EQ(model.dimension(), 2);
  EXPECT_LE(std::abs(model.energies[0]), 1e-10);
  EXPECT_LE(std::abs(model.energies[1]), 1e-10);
  lowent::Rng rng(11);
  for (int rep = 0; rep < 3; ++rep) {
    Eigen::VectorXcd theta(2);
    theta << cx(rng.gaussian(), rng.gaussian()), cx(rng.gaussian(), rng.gaussian());
    const auto psi = model.dense_witness(theta);
    ASSERT_TRUE(psi.has_value());
    const auto direct = lowent::partial_trace(*psi, {"A"});
    const auto reduced = model.reduced(theta);
    EXPECT_LE((direct.matrix() - reduced.matrix()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(std::abs(model.exact_energy(theta) - h.energy(*psi)), 1e-12);
    EXPECT_LE(std::abs(model.exact_energy(theta) - model.basis_energy(theta)), 1e-9);
  }
}

TEST(Model, ClockAndDenseModelsAgreeOnASmallInstance) {
  const lowent::ChannelSpec channel(1, 1, {{hadamard(), {1}}});
  lowent::ClockConfig cfg;
  cfg.idle_steps = 2;
  cfg.encoding = lowent::ClockEncoding::kKitaev3Local;
  auto clock = std::make_shared<const lowent::ClockHamiltonian>(channel, cfg);

  const auto sector_model = lowent::low_energy_model(clock, 0.05, {"B"});
  const auto dense_model = lowent::low_energy_model(clock->base(), 0.05, {"B"});
  ASSERT_EQ(sector_model.dimension(), 2);
  ASSERT_EQ(dense_model.dimension(), 2);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LE(std::abs(sector_model.energies[i]), 1e-12);
    EXPECT_LE(std::abs(dense_model.energies[i]), 1e-9);
  }
  // Same subspace: every sector basis state lies in the dense span.
  const Mat span = dense_model.dense_basis;
  for (const auto& state : sector_model.sector_basis) {
    const Vec v = clock->sector_dense(state).amplitudes();
    EXPECT_LE((v - span * (span.adjoint() * v)).norm(), 1e-8);
  }
  const auto a = lowent::optimize_low_energy(sector_model,
                                             lowent::Objective::kMaxEntropy, 8, 5);
  const auto b = lowent::optimize_low_energy(dense_model,
                                             lowent::Objective::kMaxEntropy, 8, 5);
  EXPECT_LE(std::abs(a.value - b.value), 1e-6);
  EXPECT_LE(std::abs(a.energy), 1e-9);
  EXPECT_LE(std::abs(b.energy), 1e-9);
}

TEST(Optimize, MaxEntropyFindsTheBellState) {
  // Unique zero mode: the optimizer has no freedom and reports exactly 1 bit.
  const auto bell_only = lowent::optimize_low_energy(
      repulsion_off_bell(), 0.5, {"A"}, lowent::Objective::kMaxEntropy, 4, 3);
  EXPECT_NEAR(bell_only.value, 1.0, 1e-9);
  EXPECT_LE(bell_only.energy, 0.5 + 1e-9);

  // Two-dimensional zero space: the best combination is again a Bell pair.
  const auto pair_space = lowent::optimize_low_energy(
      repulsion_off_diagonal(), 0.5, {"A"}, lowent::Objective::kMaxEntropy, 16, 3);
  EXPECT_GE(pair_space.value, 1.0 - 1e-4);
  EXPECT_LE(pair_space.value, 1.0 + 1e-9);

  // Free Hamiltonian: all sixteen dimensions... four here, still one full bit.
  const auto free_space = lowent::optimize_low_energy(
      zero_hamiltonian(), 0.5, {"A"}, lowent::Objective::kMaxEntropy, 24, 3);
  EXPECT_GE(free_space.value, 1.0 - 1e-3);
  EXPECT_LE(free_space.value, 1.0 + 1e-9);
}

TEST(Optimize, MinEntropyFindsTheProductGround) {
  const auto unique = lowent::optimize_low_energy(
      counting_ones(), 0.5, {"A"}, lowent::Objective::kMinEntropy, 4, 3);
  EXPECT_NEAR(unique.value, 0.0, 1e-9);

  const auto excited = lowent::optimize_low_energy(
      counting_ones(), 1.5, {"A"}, lowent::Objective::kMinEntropy, 16, 3);
  EXPECT_LE(excited.value, 1e-6);
  EXPECT_LE(excited.energy, 1.5 + 1e-9);

  EXPECT_THROW(lowent::optimize_low_energy(counting_ones(), -0.5, {"A"},
                                           lowent::Objective::kMinEntropy),
               lowent::format_error);
  EXPECT_THROW(lowent::optimize_low_energy(
                   lowent::low_energy_model(counting_ones(), 0.5, {"A"}),
                   lowent::Objective::kMinEntropy, 0),
               lowent::format_error);
  const lowent::LocalHamiltonian wide(
      lowent::RegisterLayout({{"A", 4}, {"B", 3}}),
      {{{0}, Mat::Zero(2, 2)}}, 1);
  EXPECT_THROW(lowent::low_energy_model(wide, 0.5, {"A"}), lowent::budget_error);
}

TEST(Optimize, GridCrossCheckAtDimensionTwo) {
  const auto model = lowent::low_energy_model(repulsion_off_diagonal(), 0.5, {"A"});
  ASSERT_EQ(model.dimension(), 2);
  const double pi = std::acos(-1.0);
  for (const auto objective : {lowent::Objective::kMaxEntropy,
                               lowent::Objective::kMinProductDistance}) {
    const bool maximize = objective == lowent::Objective::kMaxEntropy;
    double grid_best = maximize ? -1.0 : 10.0;
    for (int i = 0; i < 50; ++i) {
      const double phi = i * (pi / 2.0) / 49.0;
      for (int j = 0; j < 40; ++j) {
        const double gamma = j * 2.0 * pi / 40.0;
        Eigen::VectorXcd theta(2);
        theta << cx(std::cos(phi), 0.0),
            std::sin(phi) * std::exp(cx(0.0, gamma));
        const double v = lowent::objective_value(objective, model.reduced(theta));
        grid_best = maximize ? std::max(grid_best, v) : std::min(grid_best, v);
      }
    }
    const auto opt = lowent::optimize_low_energy(model, objective, 16, 9);
    EXPECT_LE(std::abs(opt.value - grid_best), 0.01);
  }
}

TEST(Optimize, ProductDistanceMatchesNestedOptimization) {
  lowent::Rng rng(23);
  const auto layout = two_qubit_layout();
  for (int rep = 0; rep < 5; ++rep) {
    const auto psi = lowent::random_pure(layout, rng);
    const double closed =
        lowent::product_distance_bound(lowent::partial_trace(psi, {"A"}));

    // Nested search over pure product states phi_L (x) phi_R.
    const auto dense = lowent::to_density(psi);
    const auto f = [&](const Eigen::VectorXd& x) {
      const auto left = lowent::detail::params_to_theta(x.head(4));
      const auto right = lowent::detail::params_to_theta(x.tail(4));
      const auto product = lowent::tensor(
          lowent::PureState::unchecked(lowent::RegisterLayout::single("A", 1), left),
          lowent::PureState::unchecked(lowent::RegisterLayout::single("B", 1), right));
      return lowent::trace_norm_distance(dense, lowent::to_density(product));
    };
    double best = 10.0;
    long iterations = 0;
    for (int r = 0; r < 8; ++r) {
      Eigen::VectorXd x0(8);
      for (int i = 0; i < 8; ++i) x0[i] = rng.gaussian();
      best = std::min(best, lowent::detail::nelder_mead(f, x0, 3000, 1e-10, iterations));
    }
    EXPECT_LE(std::abs(closed - best), 1e-4);
  }

  Vec bell = Vec::Zero(4);
  bell[0] = bell[3] = 1.0 / std::sqrt(2.0);
  const auto bell_state = lowent::PureState::unchecked(layout, bell);
  EXPECT_NEAR(
      lowent::product_distance_bound(lowent::partial_trace(bell_state, {"A"})),
      std::sqrt(2.0), 1e-9);
}

TEST(Decide, FeaExactThresholds) {
  lowent::FEAInstance flat{zero_hamiltonian(), 1.0, -1.32, -1.2};
  const auto yes = lowent::decide_fea_exact(flat);
  EXPECT_EQ(yes.decision, lowent::Decision::kYes);
  EXPECT_NEAR(yes.report.best_objective, -2.0 * std::log(2.0), 1e-12);

  flat.a = -1.5;
  flat.b = -1.45;
  EXPECT_EQ(lowent::decide_fea_exact(flat).decision, lowent::Decision::kNo);

  flat.a = -1.40;
  flat.b = -1.38;
  EXPECT_EQ(lowent::decide_fea_exact(flat).decision, lowent::Decision::kUndecided);

  const lowent::LocalHamiltonian hz(lowent::RegisterLayout::single("A", 1),
                                    {{{0}, pauli_z()}}, 1);
  lowent::FEAInstance spin{hz, 1.0, -1.12, -1.0};
  const auto v = lowent::decide_fea_exact(spin);
  EXPECT_EQ(v.decision, lowent::Decision::kYes);
  EXPECT_NEAR(v.report.best_objective, -1.1269280110429727, 1e-12);

  spin.beta_temp = 0.0;
  EXPECT_THROW(lowent::decide_fea_exact(spin), lowent::format_error);
  spin.beta_temp = 1.0;
  spin.a = spin.b = 0.0;
  EXPECT_THROW(lowent::decide_fea_exact(spin), lowent::format_error);
}

TEST(Decide, HelesOnHandBuiltInstances) {
  lowent::HELESInstance yes;
  yes.h = lowent::InstanceHamiltonian::from_dense(repulsion_off_diagonal());
  yes.cut = {"A"};
  yes.alpha = 0.0;
  yes.beta = 0.9;
  yes.s = 0.9;
  yes.t = 0.2;
  const auto vy = lowent::decide_heles(yes);
  EXPECT_EQ(vy.decision, lowent::Decision::kYes);
  EXPECT_TRUE(vy.report.reverified);
  EXPECT_LE(vy.report.witness_energy, yes.alpha + 1e-8);
  ASSERT_TRUE(vy.witness.has_value());
  EXPECT_GE(lowent::vn_entropy(lowent::partial_trace(*vy.witness, {"A"})),
            yes.s - 1e-6);
  EXPECT_LE(repulsion_off_diagonal().energy(*vy.witness), yes.alpha + 1e-8);

  lowent::HELESInstance no = yes;
  no.h = lowent::InstanceHamiltonian::from_dense(counting_ones());
  EXPECT_EQ(lowent::decide_heles(no).decision, lowent::Decision::kNo);

  lowent::HELESInstance open = yes;
  open.s = 1.2;  // unreachable: the cut has one qubit
  EXPECT_EQ(lowent::decide_heles(open).decision, lowent::Decision::kUndecided);

  lowent::HELESInstance bad = yes;
  bad.beta = bad.alpha;
  EXPECT_THROW(lowent::decide_heles(bad), lowent::format_error);
  bad = yes;
  bad.t = bad.s;
  EXPECT_THROW(lowent::decide_heles(bad), lowent::format_error);
  bad = yes;
  bad.cut = {"A", "B"};
  EXPECT_THROW(lowent::decide_heles(bad), lowent::format_error);
}

TEST(Decide, LelesOnHandBuiltInstances) {
  lowent::LELESInstance yes;
  yes.h = lowent::InstanceHamiltonian::from_dense(counting_ones());
  yes.cut = {"A"};
  yes.alpha = 0.0;
  yes.beta = 0.9;
  yes.s = 0.8;
  yes.t = 0.1;
  const auto vy = lowent::decide_leles(yes);
  EXPECT_EQ(vy.decision, lowent::Decision::kYes);
  EXPECT_TRUE(vy.report.reverified);
  ASSERT_TRUE(vy.witness.has_value());
  EXPECT_LE(lowent::vn_entropy(lowent::partial_trace(*vy.witness, {"A"})),
            yes.t + 1e-6);

  lowent::LELESInstance no = yes;
  no.h = lowent::InstanceHamiltonian::from_dense(repulsion_off_bell());
  EXPECT_EQ(lowent::decide_leles(no).decision, lowent::Decision::kNo);
}

TEST(Decide, LeapsOnHandBuiltInstances) {
  lowent::LEAPSInstance yes;
  yes.h = lowent::InstanceHamiltonian::from_dense(counting_ones());
  yes.cut = {"A"};
  yes.alpha = 0.0;
  yes.beta = 0.9;
  yes.a = 0.05;
  yes.b = 1.3;
  const auto vy = lowent::decide_leaps(yes);
  EXPECT_EQ(vy.decision, lowent::Decision::kYes);
  EXPECT_TRUE(vy.report.reverified);
  EXPECT_LE(vy.report.best_objective, yes.a + 1e-6);

  lowent::LEAPSInstance no = yes;
  no.h = lowent::InstanceHamiltonian::from_dense(repulsion_off_bell());
  EXPECT_EQ(lowent::decide_leaps(no).decision, lowent::Decision::kNo);

  lowent::LEAPSInstance bad = yes;
  bad.b = bad.a;
  EXPECT_THROW(lowent::decide_leaps(bad), lowent::format_error);
  bad = yes;
  bad.b = 2.0;
  EXPECT_THROW(lowent::decide_leaps(bad), lowent::format_error);
}

TEST(Reduction, EntropyChannelToHelesYes) {
  lowent::MaxOutQEAInstance src{lowent::depolarizing_channel(), 0.0};
  const auto red = lowent::reduce_maxoutqea_to_heles(src);
  EXPECT_EQ(red.instance.alpha, 0.0);
  EXPECT_NEAR(red.instance.s, 0.75, 1e-12);
  EXPECT_NEAR(red.instance.t, 0.25, 1e-12);
  EXPECT_EQ(red.instance.cut, std::vector<std::string>{"B"});
  EXPECT_NEAR(red.instance.beta, red.report.delta / red.report.idle_steps, 1e-18);

  // The idle tail is the smallest one keeping both deviations under 1/4.
  const int t_steps = red.report.gate_steps;
  const auto deviations = [&](int l) {
    const double n = t_steps + l + 1.0;
    const double x1 = 2.0 * t_steps / n;
    const double x2 = 2.0 / std::sqrt(static_cast<double>(l)) + x1;
    return std::make_pair(entropy_deviation(x1, 1), entropy_deviation(x2, 1));
  };
  const auto [d1, d2] = deviations(red.report.idle_steps);
  EXPECT_LE(d1, 0.25 + 1e-12);
  EXPECT_LE(d2, 0.25 + 1e-12);
  const auto [p1, p2] = deviations(red.report.idle_steps - 1);
  EXPECT_GT(std::max(p1, p2), 0.25);

  lowent::DeciderOptions opt;
  opt.restarts = 6;
  opt.seed = 3;
  const auto verdict = lowent::decide_heles(red.instance, opt);
  EXPECT_EQ(verdict.decision, lowent::Decision::kYes);
  EXPECT_TRUE(verdict.report.reverified);
  EXPECT_LE(verdict.report.witness_energy, 1e-8);
  ASSERT_TRUE(verdict.witness.has_value());

  // Re-verify the witness against the clock construction from scratch.
  const auto& clock = *red.instance.h.clock;
  const auto history = clock.history_sector(*verdict.witness);
  EXPECT_LE(clock.sector_energy(history), 1e-8);
  EXPECT_GE(lowent::vn_entropy(clock.sector_partial_trace(history, {"B"})),
            red.instance.s - 1e-6);
}

TEST(Reduction, EntropyChannelToHelesNo) {
  // Output register carries |+> regardless of the input: entropy stays low.
  const lowent::ChannelSpec constant(1, 1, {{hadamard(), {1}}});
  lowent::MaxOutQEAInstance src{constant, 1.0};
  const auto red = lowent::reduce_maxoutqea_to_heles(src);
  EXPECT_NEAR(red.instance.s, 1.75, 1e-12);
  EXPECT_NEAR(red.instance.t, 1.25, 1e-12);

  lowent::DeciderOptions opt;
  opt.restarts = 6;
  opt.seed = 3;
  EXPECT_EQ(lowent::decide_heles(red.instance, opt).decision,
            lowent::Decision::kNo);
}

TEST(Reduction, HelesInfeasibleTailReportsRequirement) {
  const lowent::ChannelSpec wide(1, 11, {});
  lowent::MaxOutQEAInstance src{wide, 0.0};
  bool thrown = false;
  try {
    lowent::reduce_maxoutqea_to_heles(src);
  } catch (const lowent::budget_error& e) {
    thrown = true;
    EXPECT_NE(std::string(e.what()).find("required L"), std::string::npos);
  }
  EXPECT_TRUE(thrown);
}

TEST(Ppio, InstanceSuiteValidity) {
  const double root2 = std::sqrt(2.0);
  // YES suite: product outputs exist.
  const lowent::PPIOInstance pass_through{
      lowent::ChannelSpec(1, 1, {{Mat::Identity(2, 2), {0}}}), 0.01, root2};
  const lowent::PPIOInstance swap_out{
      lowent::ChannelSpec(1, 1, {{swap_gate(), {0, 1}}}), 0.01, root2};
  const lowent::PPIOInstance copy_like{
      lowent::ChannelSpec(1, 1, {{cnot_gate(), {0, 1}}}), 0.01, root2};
  for (const auto& inst : {pass_through, swap_out, copy_like}) {
    const auto best = lowent::ppio_min_product_distance(inst, 8, 5);
    EXPECT_LE(best.value, 1e-9);
  }

  // NO suite: every pure input lands exactly sqrt(2) from every pure product.
  for (const auto& inst :
       {lowent::PPIOInstance{bell_spreader(), 0.01, root2},
        lowent::PPIOInstance{bell_spreader(true), 0.01, root2},
        lowent::PPIOInstance{bell_spreader(false, true), 0.01, root2}}) {
    const auto best = lowent::ppio_min_product_distance(inst, 8, 5);
    EXPECT_NEAR(best.value, root2, 1e-6);
    lowent::Rng rng(77);
    for (int rep = 0; rep < 10; ++rep) {
      const auto psi =
          lowent::random_pure(lowent::RegisterLayout::single("A", 1), rng);
      EXPECT_NEAR(lowent::ppio_product_distance(inst, psi), root2, 1e-9);
    }
  }

  // Gates may not touch the environment register.
  lowent::PPIOInstance leaky{
      lowent::ChannelSpec(1, 1, {{hadamard(), {2}}}), 0.01, root2};
  EXPECT_THROW(leaky.validate(), lowent::format_error);
}

TEST(Reduction, IsometryToLelesEndToEnd) {
  const double root2 = std::sqrt(2.0);
  lowent::DeciderOptions opt;
  opt.restarts = 6;
  opt.seed = 3;

  const lowent::PPIOInstance yes_src{
      lowent::ChannelSpec(1, 1, {{swap_gate(), {0, 1}}}), 0.01, root2};
  const auto yes_red = lowent::reduce_ppio_to_leles(yes_src);
  EXPECT_EQ(yes_red.instance.cut, std::vector<std::string>{"B"});
  EXPECT_GE(yes_red.instance.s - yes_red.instance.t, 0.02 - 1e-12);
  const auto vy = lowent::decide_leles(yes_red.instance, opt);
  EXPECT_EQ(vy.decision, lowent::Decision::kYes);
  EXPECT_TRUE(vy.report.reverified);

  const lowent::PPIOInstance no_src{bell_spreader(), 0.01, root2};
  const auto no_red = lowent::reduce_ppio_to_leles(no_src);
  // Soundness floor: -(1/2) log2(1 - b^2/4) = 1/2 for b = sqrt(2).
  const double floor = 0.5;
  const std::size_t dim_b = 4;
  const double x2 =
      2.0 * std::sqrt(no_red.instance.beta / no_red.report.delta) +
      2.0 * no_red.report.gate_steps / no_red.report.time_states;
  EXPECT_NEAR(no_red.instance.s, floor - lowent::fannes_bound(x2, dim_b), 1e-12);
  const auto vn = lowent::decide_leles(no_red.instance, opt);
  EXPECT_EQ(vn.decision, lowent::Decision::kNo);
}

TEST(Reduction, IsometryToLeapsEndToEnd) {
  const double root2 = std::sqrt(2.0);
  lowent::DeciderOptions opt;
  opt.restarts = 6;
  opt.seed = 3;

  const lowent::PPIOInstance yes_src{
      lowent::ChannelSpec(1, 1, {{swap_gate(), {0, 1}}}), 0.01, root2};
  const auto yes_red = lowent::reduce_ppio_to_leaps(yes_src);
  EXPECT_EQ(lowent::decide_leaps(yes_red.instance, opt).decision,
            lowent::Decision::kYes);

  const lowent::PPIOInstance no_src{bell_spreader(), 0.01, root2};
  const auto no_red = lowent::reduce_ppio_to_leaps(no_src);
  EXPECT_GE(no_red.instance.b - no_red.instance.a, 0.02 - 1e-12);

  // Auto-chosen idle tail is minimal for the separation margin.
  const int t_steps = no_red.report.gate_steps;
  const auto separation = [&](int l) {
    const double n = t_steps + l + 1.0;
    const double drift = 2.0 * t_steps / n;
    const double a = 2.0 * std::sqrt(drift + no_src.a);
    const double b = no_src.b - 2.0 / std::sqrt(static_cast<double>(l)) - drift;
    return b - a;
  };
  EXPECT_GE(separation(no_red.report.idle_steps), 0.02);
  EXPECT_LT(separation(no_red.report.idle_steps - 1), 0.02);

  EXPECT_EQ(lowent::decide_leaps(no_red.instance, opt).decision,
            lowent::Decision::kNo);
}

TEST(Reduction, LeapsParameterSweepTracksKappa) {
  const double root2 = std::sqrt(2.0);
  const lowent::PPIOInstance src{bell_spreader(), 0.01, root2};
  std::vector<lowent::LEAPSParameters> swept;
  for (const int l : {8, 16, 32}) {
    lowent::ClockConfig cfg;
    cfg.idle_steps = l;
    cfg.encoding = lowent::ClockEncoding::kKitaev3Local;
    const lowent::ClockHamiltonian clock(src.u, cfg);
    swept.push_back(lowent::ppio_leaps_parameters(src.u.num_steps(), l, src.a,
                                                  src.b, clock.delta()));
  }
  for (std::size_t i = 0; i < swept.size(); ++i) {
    const auto& p = swept[i];
    EXPECT_LE(p.beta, p.kappa3 * std::pow(p.a, 6.0) * (1.0 + 1e-12));
    EXPECT_NEAR(p.kappa1, p.a * std::sqrt(8.0 * (1 << i)), 1e-12);
    EXPECT_NEAR(p.kappa2, p.beta * std::pow(8.0 * (1 << i), 3.0), 1e-9);
    EXPECT_LE(p.kappa3, 1e-3);
    if (i > 0) {
      EXPECT_LE(p.kappa3, swept[i - 1].kappa3);
    }
  }

  // Reported constants on a full reduction match the parameter map.
  const auto red = lowent::reduce_ppio_to_leaps(src, 32);
  EXPECT_NEAR(red.report.kappa3, swept[2].kappa3, 1e-15);
  EXPECT_NEAR(red.instance.a, swept[2].a, 1e-15);
  EXPECT_NEAR(red.instance.b, swept[2].b, 1e-15);
}

TEST(Reduction, SepHamToLeaps) {
  // Frozen map: ||H|| = 1, alpha = 0, beta = 0.4.
  const lowent::LocalHamiltonian hz(two_qubit_layout(), {{{0}, pauli_z()}}, 1);
  const auto red = lowent::reduce_sepham_to_leaps(hz, {"A"}, 0.0, 0.4);
  EXPECT_NEAR(red.instance.b, 0.2, 1e-12);
  EXPECT_LE(red.instance.b, 0.2 + 1e-12);
  EXPECT_NEAR(red.instance.beta, 0.2, 1e-12);
  EXPECT_NEAR(red.instance.beta - red.instance.alpha, 0.2, 1e-12);
  EXPECT_EQ(red.instance.a, 0.0);

  // Product ground state: the reduction preserves YES.
  Mat half_z = pauli_z() / 2.0;
  const lowent::LocalHamiltonian field(two_qubit_layout(),
                                       {{{0}, half_z}, {{1}, half_z}}, 1);
  const auto yes_red = lowent::reduce_sepham_to_leaps(field, {"A"}, -0.9, -0.1);
  EXPECT_NEAR(yes_red.instance.b, 0.4, 1e-12);
  EXPECT_NEAR(yes_red.instance.beta, -0.5, 1e-12);
  EXPECT_EQ(lowent::decide_leaps(yes_red.instance).decision,
            lowent::Decision::kYes);

  // Entangled ground: every product sits at energy >= 1/2, so NO at beta=0.45.
  const auto no_red =
      lowent::reduce_sepham_to_leaps(repulsion_off_bell(), {"A"}, 0.1, 0.45);
  EXPECT_EQ(lowent::decide_leaps(no_red.instance).decision,
            lowent::Decision::kNo);

  // Random instances: the emitted gap is half the original.
  lowent::Rng rng(31);
  for (int rep = 0; rep < 4; ++rep) {
    Mat g = lowent::ginibre(4, 4, rng);
    Mat herm = (g + g.adjoint()) / 2.0;
    herm /= herm.cwiseAbs().maxCoeff() * 4.0;
    const lowent::LocalHamiltonian h(two_qubit_layout(), {{{0, 1}, herm}}, 2);
    const double alpha = -0.1, beta = 0.3;
    const auto r = lowent::reduce_sepham_to_leaps(h, {"A"}, alpha, beta);
    const double norm = h.operator_norm();
    EXPECT_NEAR(r.instance.b, (beta - alpha) / (2.0 * norm), 1e-12);
    EXPECT_NEAR(r.instance.beta, beta - norm * r.instance.b, 1e-12);
    EXPECT_GE(r.instance.beta - alpha, (beta - alpha) / 2.0 - 1e-12);
  }

  EXPECT_THROW(lowent::reduce_sepham_to_leaps(hz, {"A"}, 0.4, 0.4),
               lowent::format_error);
}

TEST(Verifier, AcceptsHonestAndRejectsHighEnergy) {
  lowent::Rng rng(41);

  // Honest witness slightly off product: acceptance beats 1 - a^2/8.
  lowent::LEAPSInstance near_product;
  near_product.h = lowent::InstanceHamiltonian::from_dense(zero_hamiltonian());
  near_product.cut = {"A"};
  near_product.alpha = -0.1;
  near_product.beta = 0.5;
  near_product.a = 0.3;
  near_product.b = 1.0;
  const double phi = std::asin(0.125);
  Vec amp = Vec::Zero(4);
  amp[0] = std::cos(phi);
  amp[3] = std::sin(phi);
  const auto psi = lowent::PureState::unchecked(two_qubit_layout(), amp);
  const auto ket0 = lowent::PureState::basis(lowent::RegisterLayout::single("A", 1), 0);
  const auto ket0b = lowent::PureState::basis(lowent::RegisterLayout::single("B", 1), 0);
  const double distance = 2.0 * std::sin(phi);
  const double acc =
      lowent::leaps_qma_verifier(near_product, psi, ket0, ket0b, 0, 1, rng);
  EXPECT_GE(acc, 1.0 - distance * distance / 8.0 - 1e-9);
  EXPECT_LE(acc, 1.0 + 1e-12);

  // High-energy state: the energy arm always fails, acceptance <= 1/2.
  lowent::LEAPSInstance spin;
  spin.h = lowent::InstanceHamiltonian::from_dense(
      lowent::LocalHamiltonian(two_qubit_layout(), {{{0}, pauli_z()}}, 1));
  spin.cut = {"A"};
  spin.alpha = -0.5;
  spin.beta = 0.5;
  spin.a = 0.1;
  spin.b = 1.0;
  const auto adversary =
      lowent::PureState::basis(two_qubit_layout(), 0);  // |00>: energy +1
  const double rejected =
      lowent::leaps_qma_verifier(spin, adversary, ket0, ket0b, 0, 4, rng);
  EXPECT_LE(rejected, 0.5 + 1e-9);

  // Honest ground with the exact product witness accepts with certainty.
  const auto ket1 = lowent::PureState::basis(lowent::RegisterLayout::single("A", 1), 1);
  const auto ket1b = lowent::PureState::basis(lowent::RegisterLayout::single("B", 1), 1);
  const auto ground = lowent::PureState::basis(two_qubit_layout(), 3);  // |11>
  EXPECT_NEAR(lowent::leaps_qma_verifier(spin, ground, ket1, ket1b, 0, 1, rng),
              1.0, 1e-12);

  // Sampled energy arm stays consistent on an eigenstate.
  EXPECT_NEAR(lowent::leaps_qma_verifier(spin, ground, ket1, ket1b, 64, 50, rng),
              1.0, 1e-12);

  lowent::LEAPSInstance bad_cut = spin;
  bad_cut.cut = {"B"};
  EXPECT_THROW(lowent::leaps_qma_verifier(bad_cut, ground, ket1, ket1b, 0, 1, rng),
               lowent::format_error);
  EXPECT_THROW(lowent::leaps_qma_verifier(spin, ground, ket1, ket1b, 0, 0, rng),
               lowent::format_error);
}

TEST(Cimm, DepolarizingAndConstantChannels) {
  // Depolarizing: every input already sits on the maximally mixed output.
  lowent::CIMMInstance depol{lowent::depolarizing_channel(), 0.1, 0.9};
  const auto in_layout = lowent::RegisterLayout::single("A", 1);
  const auto probe = lowent::check_cimm(
      depol, lowent::to_density(lowent::PureState::basis(in_layout, 0)));
  EXPECT_LE(probe.distance, 1e-9);
  EXPECT_TRUE(probe.certifies_yes);
  EXPECT_FALSE(probe.consistent_no);
  lowent::DeciderOptions opt;
  opt.restarts = 6;
  opt.seed = 3;
  const auto vy = lowent::decide_cimm(depol, opt);
  EXPECT_EQ(vy.decision, lowent::Decision::kYes);
  ASSERT_TRUE(vy.state_witness.has_value());
  EXPECT_LE(vy.report.best_objective, 1e-9);

  // Identity channel: only the maximally mixed *input* reaches distance zero.
  lowent::CIMMInstance ident{
      lowent::ChannelSpec(1, 1, {{Mat::Identity(2, 2), {0}}}, {"A"}), 0.05, 0.9};
  const auto vm = lowent::decide_cimm(ident, opt);
  EXPECT_EQ(vm.decision, lowent::Decision::kYes);
  ASSERT_TRUE(vm.state_witness.has_value());
  EXPECT_LE(vm.report.best_objective, 1e-6);
  EXPECT_LE((vm.state_witness->matrix() - Mat::Identity(2, 2) / 2.0)
                .cwiseAbs()
                .maxCoeff(),
            0.05);

  // Constant |+> output: distance is exactly 1 for every input.
  const lowent::ChannelSpec constant(1, 1, {{hadamard(), {1}}});
  lowent::CIMMInstance far{constant, 0.2, 0.99};
  const auto vn = lowent::decide_cimm(far, opt);
  EXPECT_EQ(vn.decision, lowent::Decision::kNo);
  EXPECT_NEAR(vn.report.best_objective, 1.0, 1e-9);

  lowent::CIMMInstance open{constant, 0.2, 1.5};
  EXPECT_EQ(lowent::decide_cimm(open, opt).decision,
            lowent::Decision::kUndecided);

  lowent::CIMMInstance bad{constant, 0.5, 0.6};  // (1-a)^2 <= 1-b^2
  EXPECT_THROW(bad.validate(), lowent::format_error);
}

TEST(MaxOut, EntropyOptimizerBrackets) {
  const auto depol = lowent::max_output_entropy(
      lowent::MaxOutQEAInstance{lowent::depolarizing_channel(), 0.0}, 6, 5);
  EXPECT_NEAR(depol.value, 1.0, 1e-9);

  const auto constant = lowent::max_output_entropy(
      lowent::MaxOutQEAInstance{lowent::ChannelSpec(1, 1, {{hadamard(), {1}}}),
                                1.0},
      6, 5);
  EXPECT_LE(constant.value, 1e-6);
}
