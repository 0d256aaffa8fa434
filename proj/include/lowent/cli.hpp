// Command-line dispatcher.  Subcommands build clock Hamiltonians, analyze
// spectra and thermal states, run the entropy-verification protocol, decide
// instances, and apply the reductions.  Every run prints a single JSON
// report to standard output: command echo, input hashes, seed, version,
// wall clock, and the subcommand's result.  Identical seeds reproduce every
// float in the report bit for bit.
//
// Exit codes: 0 = success (or YES), 1 = NO, 2 = UNDECIDED,
// 64 = malformed input, 65 = budget exceeded, 66 = promise violation;
// other values >2 signal usage errors.
#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "lowent/channel.hpp"
#include "lowent/clock.hpp"
#include "lowent/core.hpp"
#include "lowent/extractor.hpp"
#include "lowent/json_io.hpp"
#include "lowent/local_hamiltonian.hpp"
#include "lowent/problems.hpp"
#include "lowent/protocol.hpp"
#include "lowent/random.hpp"

namespace lowent {

inline constexpr const char* kVersion = "1.0.0";

namespace cli_detail {

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open input file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw format_error("malformed JSON in " + what + ": " + e.what());
  }
}

// Loads a JSON input file and records its content hash in the report.
inline Json load_input(const std::string& path, Json& input_hashes) {
  const auto bytes = slurp(path);
  input_hashes[path] = "fnv1a:" + fnv1a_hex(bytes);
  return parse_json(bytes, path);
}

struct Options {
  std::uint64_t seed = 7;
  int threads = 1;
  // build-ch2ham / certify-gap / verify-history
  std::string circuit_path;
  int idle = 0;
  std::string encoding = "kitaev";
  std::vector<int> sweep = {0, 2, 4, 8, 16};
  // spectrum / gibbs / free-energy / verify-history
  std::string hamiltonian_path;
  std::string state_spec;
  double cutoff = 0.5;
  double beta = 1.0;
  // entropy-protocol
  std::uint64_t extractor_seed = 1;
  int q = 2;
  double eps = 0.0;
  std::string input_path;
  double tau = 0.0;
  double soundness = 0.5;
  bool raw_message = false;
  // decide / reduce
  std::string mode;
  std::string instance_path;
  int restarts = 32;
  int max_iterations = 2000;
  int idle_override = -1;
  double margin = 0.02;
};

inline Json run_build_ch2ham(const Options& opt, Json& hashes) {
  const auto spec = read_circuit(load_input(opt.circuit_path, hashes));
  ClockConfig cfg;
  cfg.idle_steps = opt.idle;
  cfg.encoding = encoding_from_name(opt.encoding);
  const ClockHamiltonian hc(spec, cfg);
  Json out = write_hamiltonian(hc.base());
  Json meta;
  meta["T"] = hc.num_time_states() - 1 - cfg.idle_steps;
  meta["L"] = cfg.idle_steps;
  meta["encoding"] = opt.encoding;
  meta["locality"] = hc.locality();
  meta["delta"] = hc.delta();
  out["metadata"] = std::move(meta);
  return out;
}

inline Json run_spectrum(const Options& opt, Json& hashes) {
  const auto h = read_hamiltonian(load_input(opt.hamiltonian_path, hashes));
  const auto summary = h.spectrum(opt.cutoff);
  Json out;
  out["cutoff"] = opt.cutoff;
  out["ground_energy"] = summary.ground_energy;
  out["spectral_gap"] = summary.spectral_gap;
  out["eigenvalues"] = summary.eigenvalues;
  out["low_energy_dimension"] = summary.low_energy_basis.cols();
  return out;
}

inline Json run_gibbs(const Options& opt, Json& hashes) {
  const auto h = read_hamiltonian(load_input(opt.hamiltonian_path, hashes));
  const auto rho = h.gibbs_state(opt.beta);
  Json out;
  out["beta"] = opt.beta;
  out["free_energy"] = h.free_energy(opt.beta);
  out["free_energy_of_state"] = h.free_energy_of(rho, opt.beta);
  out["energy"] = h.energy(rho);
  out["entropy_bits"] = vn_entropy(rho);
  if (rho.dim() <= 64) out["state"] = write_density(rho);
  return out;
}

inline Json run_free_energy(const Options& opt, Json& hashes) {
  const auto h = read_hamiltonian(load_input(opt.hamiltonian_path, hashes));
  Json out;
  out["beta"] = opt.beta;
  out["free_energy"] = h.free_energy(opt.beta);
  return out;
}

// State specs: a JSON file path (amplitudes or matrix), or
// "history:<circuit.json>[:<basis index>]" to rebuild a history state from
// the metadata block of the Hamiltonian file.
inline Json run_verify_history(const Options& opt, Json& hashes) {
  const Json hj = load_input(opt.hamiltonian_path, hashes);
  const auto h = read_hamiltonian(hj);
  Json out;
  double energy = 0.0;
  if (opt.state_spec.rfind("history:", 0) == 0) {
    if (!hj.contains("metadata")) {
      throw format_error("history specs need clock metadata in the "
                         "hamiltonian file");
    }
    auto rest = opt.state_spec.substr(8);
    std::size_t index = 0;
    if (const auto colon = rest.rfind(':'); colon != std::string::npos) {
      index = static_cast<std::size_t>(std::stoull(rest.substr(colon + 1)));
      rest = rest.substr(0, colon);
    }
    const auto spec = read_circuit(load_input(rest, hashes));
    ClockConfig cfg;
    cfg.idle_steps = hj["metadata"]["L"].get<int>();
    cfg.encoding =
        encoding_from_name(hj["metadata"]["encoding"].get<std::string>());
    const ClockHamiltonian hc(spec, cfg);
    const auto psi = hc.history_state(PureState::basis(
        RegisterLayout::single("A", spec.n_a()), index));
    energy = h.energy(psi);
    out["state"] = "history(" + rest + ", " + std::to_string(index) + ")";
  } else {
    const Json sj = load_input(opt.state_spec, hashes);
    if (sj.contains("amplitudes")) {
      energy = h.energy(read_pure(sj));
    } else {
      energy = h.energy(read_density(sj));
    }
    out["state"] = opt.state_spec;
  }
  out["energy"] = energy;
  out["tolerance"] = 1e-9;
  out["zero_energy"] = energy <= 1e-9;
  return out;
}

inline Json run_certify_gap(const Options& opt, Json& hashes) {
  const auto spec = read_circuit(load_input(opt.circuit_path, hashes));
  ClockConfig cfg;
  cfg.idle_steps = opt.idle;
  cfg.encoding = encoding_from_name(opt.encoding);
  const ClockHamiltonian hc(spec, cfg);
  return write_gap_certificate(hc.certify_gap(opt.sweep));
}

inline Json run_entropy_protocol(const Options& opt, Json& hashes) {
  const auto sigma = read_state_as_density(load_input(opt.input_path, hashes));
  const auto& regs = sigma.layout().registers();
  if (regs.empty() || regs.front().name != "A") {
    throw format_error("protocol input needs a leading A register");
  }
  // Honest mode wraps a per-copy source state into a prover message; raw
  // mode hands the file straight to the verifier (adversarial transcripts).
  const int n = opt.raw_message ? regs.front().qubits
                                : opt.q * regs.front().qubits;
  Rng rng(opt.extractor_seed);
  Extractor x;
  if (opt.eps <= 0.0) {
    x = make_pauli_twirl(n);
  } else {
    x = make_extractor(n, std::min(2 * n, 10), n - 1.0, rng);
  }
  ProtocolConfig cfg;
  cfg.tau = opt.tau;
  cfg.q = opt.q;
  cfg.epsilon = opt.eps > 0.0 ? opt.eps : 0.0;
  cfg.c = 1.0 - 4.0 * std::sqrt(3.0 * cfg.epsilon);
  cfg.s = opt.soundness;
  Json out;
  if (opt.raw_message) {
    out = write_transcript(cfg, run_protocol(sigma, x, cfg));
  } else {
    const auto aligned = honest_prover_state(sigma, x, opt.q);
    out = write_transcript(cfg, run_protocol(aligned.state, x, cfg));
    out["alignment_fidelity"] = aligned.achieved_fidelity;
  }
  Json ext;
  ext["n"] = x.n;
  ext["d"] = x.d;
  ext["k"] = x.k;
  ext["epsilon_measured"] = x.epsilon;
  ext["seed"] = opt.extractor_seed;
  out["extractor"] = std::move(ext);
  return out;
}

inline Json run_decide(const Options& opt, std::uint64_t seed, Json& hashes,
                       int& exit_code) {
  const Json j = load_input(opt.instance_path, hashes);
  DeciderOptions dopt;
  dopt.restarts = opt.restarts;
  dopt.seed = seed;
  dopt.max_iterations = opt.max_iterations;
  Verdict verdict;
  if (opt.mode == "heles") {
    verdict = decide_heles(read_heles(j), dopt);
  } else if (opt.mode == "leles") {
    verdict = decide_leles(read_leles(j), dopt);
  } else if (opt.mode == "leaps") {
    verdict = decide_leaps(read_leaps(j), dopt);
  } else {
    verdict = decide_fea_exact(read_fea(j));
  }
  exit_code = verdict.decision == Decision::kYes
                  ? 0
                  : (verdict.decision == Decision::kNo ? 1 : 2);
  return write_verdict(verdict);
}

inline Json run_reduce(const Options& opt, Json& hashes) {
  const Json j = load_input(opt.instance_path, hashes);
  Json out;
  if (opt.mode == "maxoutqea-heles") {
    const auto red =
        reduce_maxoutqea_to_heles(read_maxoutqea(j), opt.idle_override);
    out["instance"] = write_heles(red.instance);
    out["report"] = write_reduction_report(red.report);
  } else if (opt.mode == "ppio-leles") {
    const auto red =
        reduce_ppio_to_leles(read_ppio(j), opt.idle_override, opt.margin);
    out["instance"] = write_leles(red.instance);
    out["report"] = write_reduction_report(red.report);
  } else if (opt.mode == "ppio-leaps") {
    const auto red =
        reduce_ppio_to_leaps(read_ppio(j), opt.idle_override, opt.margin);
    out["instance"] = write_leaps(red.instance);
    out["report"] = write_reduction_report(red.report);
  } else {
    const auto in = read_sepham(j);
    const auto red = reduce_sepham_to_leaps(in.h, in.cut, in.alpha, in.beta);
    out["instance"] = write_leaps(red.instance);
    out["report"] = write_reduction_report(red.report);
  }
  return out;
}

}  // namespace cli_detail

inline int cli_dispatch(const std::vector<std::string>& args,
                        std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  using cli_detail::Options;
  Options opt;

  CLI::App app{"Numerical laboratory for low-energy entropy problems"};
  app.require_subcommand(1);
  app.add_option("--seed", opt.seed, "Global random seed");
  app.add_option("--threads", opt.threads, "Eigen thread budget");

  auto* build = app.add_subcommand(
      "build-ch2ham", "Compile a circuit into a clock Hamiltonian");
  build->add_option("circuit", opt.circuit_path, "Circuit JSON")->required();
  build->add_option("--idle", opt.idle, "Idle tail length L");
  build->add_option("--encoding", opt.encoding, "Clock encoding")
      ->check(CLI::IsMember({"unary", "kitaev"}));

  auto* spectrum =
      app.add_subcommand("spectrum", "Low-lying spectrum of a Hamiltonian");
  spectrum->add_option("hamiltonian", opt.hamiltonian_path, "Hamiltonian JSON")
      ->required();
  spectrum->add_option("--cutoff", opt.cutoff, "Energy cutoff");

  auto* gibbs = app.add_subcommand("gibbs", "Gibbs state summary");
  gibbs->add_option("hamiltonian", opt.hamiltonian_path, "Hamiltonian JSON")
      ->required();
  gibbs->add_option("--beta", opt.beta, "Inverse temperature");

  auto* free_energy =
      app.add_subcommand("free-energy", "Equilibrium free energy (nats)");
  free_energy
      ->add_option("hamiltonian", opt.hamiltonian_path, "Hamiltonian JSON")
      ->required();
  free_energy->add_option("--beta", opt.beta, "Inverse temperature");

  auto* verify = app.add_subcommand(
      "verify-history", "Evaluate a state's energy under a Hamiltonian");
  verify->add_option("hamiltonian", opt.hamiltonian_path, "Hamiltonian JSON")
      ->required();
  verify
      ->add_option("state", opt.state_spec,
                   "State JSON path or history:<circuit.json>[:index]")
      ->required();

  auto* certify = app.add_subcommand(
      "certify-gap", "Fit the spectral-gap scaling over an idle sweep");
  certify->add_option("circuit", opt.circuit_path, "Circuit JSON")->required();
  certify->add_option("--sweep", opt.sweep, "Idle lengths")->delimiter(',');
  certify->add_option("--encoding", opt.encoding, "Clock encoding")
      ->check(CLI::IsMember({"unary", "kitaev"}));

  auto* protocol = app.add_subcommand(
      "entropy-protocol", "Run the entropy-verification protocol");
  protocol->add_option("--extractor-seed", opt.extractor_seed,
                       "Extractor construction seed");
  protocol->add_option("--q", opt.q, "Number of copies");
  protocol->add_option("--eps", opt.eps,
                       "Extractor accuracy (0 = exact Pauli twirl)");
  protocol->add_option("--input", opt.input_path, "Per-copy state JSON")
      ->required();
  protocol->add_option("--tau", opt.tau, "Claimed per-copy entropy (bits)");
  protocol->add_option("--soundness", opt.soundness, "Soundness threshold s");
  protocol->add_flag("--prover-message", opt.raw_message,
                     "Treat the input as a full prover message on A[,B],E");

  auto* decide = app.add_subcommand("decide", "Decide a problem instance");
  decide->add_option("problem", opt.mode, "Problem family")
      ->required()
      ->check(CLI::IsMember({"heles", "leles", "leaps", "fea"}));
  decide->add_option("instance", opt.instance_path, "Instance JSON")
      ->required();
  decide->add_option("--restarts", opt.restarts, "Optimizer restarts");
  decide->add_option("--max-iterations", opt.max_iterations,
                     "Iteration cap per restart");

  auto* reduce = app.add_subcommand("reduce", "Apply a reduction");
  reduce->add_option("reduction", opt.mode, "Reduction name")
      ->required()
      ->check(CLI::IsMember(
          {"maxoutqea-heles", "ppio-leles", "ppio-leaps", "sepham-leaps"}));
  reduce->add_option("instance", opt.instance_path, "Instance JSON")
      ->required();
  reduce->add_option("--idle", opt.idle_override,
                     "Idle tail override (-1 = auto)");
  reduce->add_option("--margin", opt.margin, "Required promise separation");

  // Global flags remain valid after the subcommand name.
  for (auto* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  std::vector<const char*> argv;
  argv.push_back("lowent");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  Json report;
  report["command"] = args;
  report["version"] = kVersion;
  report["seed"] = opt.seed;
  report["threads"] = opt.threads;
  Json hashes = Json::object();
  int exit_code = 0;
  const auto started = std::chrono::steady_clock::now();
  try {
    Json result;
    if (build->parsed()) {
      result = cli_detail::run_build_ch2ham(opt, hashes);
    } else if (spectrum->parsed()) {
      result = cli_detail::run_spectrum(opt, hashes);
    } else if (gibbs->parsed()) {
      result = cli_detail::run_gibbs(opt, hashes);
    } else if (free_energy->parsed()) {
      result = cli_detail::run_free_energy(opt, hashes);
    } else if (verify->parsed()) {
      result = cli_detail::run_verify_history(opt, hashes);
    } else if (certify->parsed()) {
      result = cli_detail::run_certify_gap(opt, hashes);
    } else if (protocol->parsed()) {
      result = cli_detail::run_entropy_protocol(opt, hashes);
    } else if (decide->parsed()) {
      result = cli_detail::run_decide(opt, opt.seed, hashes, exit_code);
    } else {
      result = cli_detail::run_reduce(opt, hashes);
    }
    report["inputs"] = std::move(hashes);
    report["wall_clock_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - started)
                                  .count();
    report["result"] = std::move(result);
  } catch (const budget_error& e) {
    err << "budget error: " << e.what() << "\n";
    return 65;
  } catch (const promise_error& e) {
    err << "promise violation: " << e.what() << "\n";
    return 66;
  } catch (const format_error& e) {
    err << "input error: " << e.what() << "\n";
    return 64;
  }
  out << report.dump(2) << "\n";
  return exit_code;
}

}  // namespace lowent
