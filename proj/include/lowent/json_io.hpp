// JSON serialization for every on-disk format: Hamiltonians, circuits,
// states, problem instances, verdicts, reduction reports, protocol
// transcripts, and gap certificates.  All complex data is written as
// [re, im] pairs in row-major order; doubles round-trip bit-exactly
// (shortest-representation printing on write, strtod on read).
#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "lowent/channel.hpp"
#include "lowent/clock.hpp"
#include "lowent/core.hpp"
#include "lowent/local_hamiltonian.hpp"
#include "lowent/problems.hpp"
#include "lowent/protocol.hpp"

namespace lowent {

using Json = nlohmann::ordered_json;

// --- primitives -----------------------------------------------------------

inline Json write_complex_matrix(const Mat& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out.push_back({m(r, c).real(), m(r, c).imag()});
    }
  }
  return out;
}

inline Mat read_complex_matrix(const Json& j, Eigen::Index rows,
                               Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols) {
    throw format_error("matrix entry count does not match its dimensions");
  }
  Mat m(rows, cols);
  Eigen::Index i = 0;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) {
      throw format_error("matrix entries must be [re, im] pairs");
    }
    m(i / cols, i % cols) = cx(e[0].get<double>(), e[1].get<double>());
    ++i;
  }
  return m;
}

inline Json write_complex_vector(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back({v[i].real(), v[i].imag()});
  }
  return out;
}

inline Vec read_complex_vector(const Json& j) {
  if (!j.is_array()) throw format_error("amplitude list must be an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) {
      throw format_error("amplitudes must be [re, im] pairs");
    }
    v[i++] = cx(e[0].get<double>(), e[1].get<double>());
  }
  return v;
}

inline Json write_registers(const RegisterLayout& layout) {
  Json out = Json::array();
  for (const auto& reg : layout.registers()) {
    out.push_back({reg.name, reg.qubits});
  }
  return out;
}

inline RegisterLayout read_registers(const Json& j) {
  if (!j.is_array() || j.empty()) {
    throw format_error("register list must be a nonempty array");
  }
  std::vector<Register> regs;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) {
      throw format_error("registers must be [name, qubits] pairs");
    }
    regs.push_back({e[0].get<std::string>(), e[1].get<int>()});
  }
  return RegisterLayout(std::move(regs));
}

// --- Hamiltonians ---------------------------------------------------------

inline Json write_hamiltonian(const LocalHamiltonian& h) {
  Json out;
  out["qubits"] = h.layout().total_qubits();
  out["registers"] = write_registers(h.layout());
  Json terms = Json::array();
  for (const auto& term : h.terms()) {
    Json t;
    t["support"] = term.support;
    t["matrix"] = write_complex_matrix(term.matrix);
    terms.push_back(std::move(t));
  }
  out["terms"] = std::move(terms);
  return out;
}

inline LocalHamiltonian read_hamiltonian(const Json& j) {
  if (!j.is_object() || !j.contains("qubits") || !j.contains("registers") ||
      !j.contains("terms")) {
    throw format_error("hamiltonian needs qubits, registers, and terms");
  }
  const auto layout = read_registers(j["registers"]);
  if (layout.total_qubits() != j["qubits"].get<int>()) {
    throw format_error("qubit count disagrees with the register list");
  }
  std::vector<LocalTerm> terms;
  int locality = 1;
  for (const auto& t : j["terms"]) {
    if (!t.contains("support") || !t.contains("matrix")) {
      throw format_error("each term needs a support and a matrix");
    }
    const auto support = t["support"].get<std::vector<int>>();
    locality = std::max(locality, static_cast<int>(support.size()));
    const auto dim = static_cast<Eigen::Index>(1)
                     << static_cast<Eigen::Index>(support.size());
    terms.push_back({support, read_complex_matrix(t["matrix"], dim, dim)});
  }
  return LocalHamiltonian(layout, std::move(terms), locality);
}

// --- circuits -------------------------------------------------------------

inline Json write_circuit(const ChannelSpec& spec) {
  Json out;
  out["nA"] = spec.n_a();
  out["nB"] = spec.n_b();
  Json steps = Json::array();
  for (const auto& step : spec.steps()) {
    Json s;
    s["support"] = step.support;
    s["matrix"] = write_complex_matrix(step.unitary);
    steps.push_back(std::move(s));
  }
  out["steps"] = std::move(steps);
  out["output"] = spec.output_registers();
  return out;
}

inline ChannelSpec read_circuit(const Json& j) {
  if (!j.is_object() || !j.contains("nA") || !j.contains("nB") ||
      !j.contains("steps")) {
    throw format_error("circuit needs nA, nB, and steps");
  }
  std::vector<GateStep> steps;
  for (const auto& s : j["steps"]) {
    if (!s.contains("support") || !s.contains("matrix")) {
      throw format_error("each step needs a support and a matrix");
    }
    const auto support = s["support"].get<std::vector<int>>();
    const auto dim = static_cast<Eigen::Index>(1)
                     << static_cast<Eigen::Index>(support.size());
    steps.push_back({read_complex_matrix(s["matrix"], dim, dim), support});
  }
  std::vector<std::string> output = {"B"};
  if (j.contains("output")) output = j["output"].get<std::vector<std::string>>();
  return ChannelSpec(j["nA"].get<int>(), j["nB"].get<int>(), std::move(steps),
                     std::move(output));
}

// --- states ---------------------------------------------------------------

inline Json write_pure(const PureState& psi) {
  Json out;
  out["registers"] = write_registers(psi.layout());
  out["amplitudes"] = write_complex_vector(psi.amplitudes());
  return out;
}

inline PureState read_pure(const Json& j) {
  if (!j.contains("registers") || !j.contains("amplitudes")) {
    throw format_error("pure state needs registers and amplitudes");
  }
  return PureState(read_registers(j["registers"]),
                   read_complex_vector(j["amplitudes"]));
}

inline Json write_density(const DensityMatrix& rho) {
  Json out;
  out["registers"] = write_registers(rho.layout());
  out["matrix"] = write_complex_matrix(rho.matrix());
  return out;
}

inline DensityMatrix read_density(const Json& j) {
  if (!j.contains("registers") || !j.contains("matrix")) {
    throw format_error("density matrix needs registers and a matrix");
  }
  const auto layout = read_registers(j["registers"]);
  const auto dim = static_cast<Eigen::Index>(layout.dim());
  DensityMatrix rho(layout, read_complex_matrix(j["matrix"], dim, dim));
  rho.validate_psd(1e-8);
  return rho;
}

// A state file holds either "amplitudes" (pure) or "matrix" (density).
inline DensityMatrix read_state_as_density(const Json& j) {
  if (j.contains("amplitudes")) return to_density(read_pure(j));
  return read_density(j);
}

// --- clock configs --------------------------------------------------------

inline std::string encoding_name(ClockEncoding e) {
  return e == ClockEncoding::kAsWrittenUnary ? "unary" : "kitaev";
}

inline ClockEncoding encoding_from_name(const std::string& name) {
  if (name == "unary") return ClockEncoding::kAsWrittenUnary;
  if (name == "kitaev") return ClockEncoding::kKitaev3Local;
  throw format_error("unknown clock encoding: " + name);
}

inline Json write_instance_hamiltonian(const InstanceHamiltonian& h) {
  h.validate();
  Json out;
  if (h.dense.has_value()) {
    out["hamiltonian"] = write_hamiltonian(*h.dense);
  } else {
    Json clock;
    clock["circuit"] = write_circuit(h.clock->channel());
    clock["idle_steps"] = h.clock->config().idle_steps;
    clock["encoding"] = encoding_name(h.clock->config().encoding);
    out["clock"] = std::move(clock);
  }
  return out;
}

inline InstanceHamiltonian read_instance_hamiltonian(const Json& j) {
  if (j.contains("hamiltonian")) {
    return InstanceHamiltonian::from_dense(read_hamiltonian(j["hamiltonian"]));
  }
  if (!j.contains("clock")) {
    throw format_error("instance needs a hamiltonian or a clock block");
  }
  const auto& c = j["clock"];
  if (!c.contains("circuit")) throw format_error("clock block needs a circuit");
  ClockConfig cfg;
  if (c.contains("idle_steps")) cfg.idle_steps = c["idle_steps"].get<int>();
  if (c.contains("encoding")) {
    cfg.encoding = encoding_from_name(c["encoding"].get<std::string>());
  }
  return InstanceHamiltonian::from_clock(std::make_shared<ClockHamiltonian>(
      read_circuit(c["circuit"]), cfg));
}

// --- instances ------------------------------------------------------------

inline Json write_heles(const HELESInstance& inst) {
  Json out = write_instance_hamiltonian(inst.h);
  Json head;
  head["problem"] = "heles";
  head.update(out);
  head["cut"] = inst.cut;
  head["alpha"] = inst.alpha;
  head["beta"] = inst.beta;
  head["s"] = inst.s;
  head["t"] = inst.t;
  return head;
}

inline Json write_leles(const LELESInstance& inst) {
  Json out = write_instance_hamiltonian(inst.h);
  Json head;
  head["problem"] = "leles";
  head.update(out);
  head["cut"] = inst.cut;
  head["alpha"] = inst.alpha;
  head["beta"] = inst.beta;
  head["s"] = inst.s;
  head["t"] = inst.t;
  return head;
}

inline Json write_leaps(const LEAPSInstance& inst) {
  Json out = write_instance_hamiltonian(inst.h);
  Json head;
  head["problem"] = "leaps";
  head.update(out);
  head["cut"] = inst.cut;
  head["alpha"] = inst.alpha;
  head["beta"] = inst.beta;
  head["a"] = inst.a;
  head["b"] = inst.b;
  return head;
}

inline Json write_fea(const FEAInstance& inst) {
  Json out;
  out["problem"] = "fea";
  out["hamiltonian"] = write_hamiltonian(inst.h);
  out["beta_temp"] = inst.beta_temp;
  out["a"] = inst.a;
  out["b"] = inst.b;
  return out;
}

inline Json write_ppio(const PPIOInstance& inst) {
  Json out;
  out["problem"] = "ppio";
  out["circuit"] = write_circuit(inst.u);
  out["a"] = inst.a;
  out["b"] = inst.b;
  return out;
}

inline Json write_maxoutqea(const MaxOutQEAInstance& inst) {
  Json out;
  out["problem"] = "maxoutqea";
  out["circuit"] = write_circuit(inst.phi);
  out["tau"] = inst.tau;
  return out;
}

inline Json write_cimm(const CIMMInstance& inst) {
  Json out;
  out["problem"] = "cimm";
  out["circuit"] = write_circuit(inst.phi);
  out["a"] = inst.a;
  out["b"] = inst.b;
  return out;
}

inline std::string instance_problem(const Json& j) {
  if (!j.is_object() || !j.contains("problem")) {
    throw format_error("instance needs a problem tag");
  }
  return j["problem"].get<std::string>();
}

inline void expect_problem(const Json& j, const std::string& want) {
  if (const auto got = instance_problem(j); got != want) {
    throw format_error("expected a " + want + " instance, found " + got);
  }
}

inline HELESInstance read_heles(const Json& j) {
  expect_problem(j, "heles");
  HELESInstance inst;
  inst.h = read_instance_hamiltonian(j);
  inst.cut = j.at("cut").get<std::vector<std::string>>();
  inst.alpha = j.at("alpha").get<double>();
  inst.beta = j.at("beta").get<double>();
  inst.s = j.at("s").get<double>();
  inst.t = j.at("t").get<double>();
  inst.validate();
  return inst;
}

inline LELESInstance read_leles(const Json& j) {
  expect_problem(j, "leles");
  LELESInstance inst;
  inst.h = read_instance_hamiltonian(j);
  inst.cut = j.at("cut").get<std::vector<std::string>>();
  inst.alpha = j.at("alpha").get<double>();
  inst.beta = j.at("beta").get<double>();
  inst.s = j.at("s").get<double>();
  inst.t = j.at("t").get<double>();
  inst.validate();
  return inst;
}

inline LEAPSInstance read_leaps(const Json& j) {
  expect_problem(j, "leaps");
  LEAPSInstance inst;
  inst.h = read_instance_hamiltonian(j);
  inst.cut = j.at("cut").get<std::vector<std::string>>();
  inst.alpha = j.at("alpha").get<double>();
  inst.beta = j.at("beta").get<double>();
  inst.a = j.at("a").get<double>();
  inst.b = j.at("b").get<double>();
  inst.validate();
  return inst;
}

inline FEAInstance read_fea(const Json& j) {
  expect_problem(j, "fea");
  FEAInstance inst{read_hamiltonian(j.at("hamiltonian")),
                   j.at("beta_temp").get<double>(), j.at("a").get<double>(),
                   j.at("b").get<double>()};
  inst.validate();
  return inst;
}

inline PPIOInstance read_ppio(const Json& j) {
  expect_problem(j, "ppio");
  PPIOInstance inst{read_circuit(j.at("circuit")), j.at("a").get<double>(),
                    j.at("b").get<double>()};
  inst.validate();
  return inst;
}

inline MaxOutQEAInstance read_maxoutqea(const Json& j) {
  expect_problem(j, "maxoutqea");
  MaxOutQEAInstance inst{read_circuit(j.at("circuit")),
                         j.at("tau").get<double>()};
  inst.validate();
  return inst;
}

inline CIMMInstance read_cimm(const Json& j) {
  expect_problem(j, "cimm");
  CIMMInstance inst{read_circuit(j.at("circuit")), j.at("a").get<double>(),
                    j.at("b").get<double>()};
  inst.validate();
  return inst;
}

// Input format of the separable-Hamiltonian-to-LEAPS reduction.
struct SepHamInput {
  LocalHamiltonian h;
  std::vector<std::string> cut;
  double alpha = 0.0;
  double beta = 0.0;
};

inline Json write_sepham(const SepHamInput& in) {
  Json out;
  out["problem"] = "sepham";
  out["hamiltonian"] = write_hamiltonian(in.h);
  out["cut"] = in.cut;
  out["alpha"] = in.alpha;
  out["beta"] = in.beta;
  return out;
}

inline SepHamInput read_sepham(const Json& j) {
  expect_problem(j, "sepham");
  return SepHamInput{read_hamiltonian(j.at("hamiltonian")),
                     j.at("cut").get<std::vector<std::string>>(),
                     j.at("alpha").get<double>(), j.at("beta").get<double>()};
}

// --- verdicts and reports -------------------------------------------------

inline std::string decision_name(Decision d) {
  switch (d) {
    case Decision::kYes: return "YES";
    case Decision::kNo: return "NO";
    default: return "UNDECIDED";
  }
}

inline Json write_optimizer_report(const OptimizerReport& r) {
  Json out;
  out["restarts"] = r.restarts;
  out["iterations"] = r.iterations;
  out["best_objective"] = r.best_objective;
  out["witness_energy"] = r.witness_energy;
  out["reverified"] = r.reverified;
  return out;
}

inline Json write_verdict(const Verdict& v) {
  Json out;
  out["decision"] = decision_name(v.decision);
  if (v.witness.has_value()) out["witness"] = write_pure(*v.witness);
  if (v.state_witness.has_value()) {
    out["state_witness"] = write_density(*v.state_witness);
  }
  out["optimizer_report"] = write_optimizer_report(v.report);
  return out;
}

inline Json write_reduction_report(const ReductionReport& r) {
  Json out;
  out["gate_steps"] = r.gate_steps;
  out["idle_steps"] = r.idle_steps;
  out["time_states"] = r.time_states;
  out["delta"] = r.delta;
  out["beta"] = r.beta;
  out["completeness_distance"] = r.completeness_distance;
  out["soundness_distance"] = r.soundness_distance;
  out["kappa1"] = r.kappa1;
  out["kappa2"] = r.kappa2;
  out["kappa3"] = r.kappa3;
  return out;
}

inline Json write_gap_certificate(const GapCertificate& cert) {
  Json out;
  out["delta"] = cert.delta;
  out["fitted_exponent"] = cert.fitted_exponent;
  out["fitted_log_constant"] = cert.fitted_log_constant;
  out["fits_scaling"] = cert.fits_scaling;
  Json sweep = Json::array();
  for (const auto& [l, d] : cert.sweep) sweep.push_back({Json(l), Json(d)});
  out["sweep"] = std::move(sweep);
  return out;
}

inline Json write_protocol_config(const ProtocolConfig& cfg) {
  Json out;
  out["tau"] = cfg.tau;
  out["q"] = cfg.q;
  out["epsilon"] = cfg.epsilon;
  out["delta"] = cfg.delta;
  out["delta_prime"] = cfg.delta_prime;
  out["c"] = cfg.c;
  out["s"] = cfg.s;
  return out;
}

// Transcript of one protocol run: configuration, measured acceptance, and
// the entropy certificate (entropy of the post-accept state plus the
// unconditional floor it is guaranteed to clear).
inline Json write_transcript(const ProtocolConfig& cfg,
                             const ProtocolResult& result) {
  Json out;
  out["config"] = write_protocol_config(cfg);
  out["accept_probability"] = result.accept_probability;
  Json cert;
  cert["S_sigma"] = result.sigma_entropy;
  cert["S_sigma_average"] = result.average_entropy;
  cert["bound"] = result.entropy_floor;
  cert["applies"] = result.certificate_applies;
  out["entropy_certificate"] = std::move(cert);
  out["promise_defect"] = result.promise_defect;
  return out;
}

// --- hashing --------------------------------------------------------------

// FNV-1a over raw bytes; used to stamp input files into run reports.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace lowent
