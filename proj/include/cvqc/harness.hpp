// harness.hpp -- experiment drivers that turn the protocol's lemmas and claims
// into pass/fail checks with declared tolerances and measured statistics.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvqc/hamiltonian.hpp"

namespace cvqc {

struct Tolerances {
    double exact = 1e-9;       // equalities of exactly computed quantities
    double tv = 1e-6;          // completeness TV at e = 0
    double projection = 1e-12;
    double sigma = 3.0;        // statistical checks, in standard deviations
    double hardcore_min = 0.45;

    nlohmann::json to_json() const;
};
// Throws ConfigError on unknown keys or non-positive / non-numeric values.
Tolerances tolerances_from_json(const nlohmann::json& j);
Tolerances load_tolerances(const std::string& path);

struct CheckResult {
    std::string name;
    double value = 0;
    double tolerance = 0;
    std::string relation;        // "<=" or ">="
    bool holds = false;          // the relation holds
    bool expected_fail = false;  // negative control
    bool ok() const { return holds != expected_fail; }
};

struct ExperimentReport {
    std::string name;
    std::optional<Params> params;
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;
    std::vector<CheckResult> checks;
    double wall_seconds = 0;

    void metric(const std::string& key, double v) { metrics[key] = v; }
    bool check_le(const std::string& check, double value, double tol, bool expected_fail = false);
    bool check_ge(const std::string& check, double value, double tol, bool expected_fail = false);
    bool passed() const;
    // Deterministic part only; wall time is reported separately.
    nlohmann::json to_json(bool with_time = true) const;
};

// Header line (version, params hash, seed) followed by the report.
void write_report(const std::string& dir, const ExperimentReport& r);
std::string summary_table(const std::vector<ExperimentReport>& reports);

// Claw-free keys with s = 1…1 (non-degenerate claws) and injective keys where h_i = 0.
std::vector<KeyPair> exact_keys(const Bits& h, const Params& p, Rng& rng, bool all_claw_free = false);

// ---- Experiments --------------------------------------------------------------

// Trapdoor inversion of A·s + e at `p`, and the gadget inverter against the
// brute-force oracle on every input of Z_q^m at `small`.
ExperimentReport trapdoor_roundtrip_experiment(const Params& p, const Params& small, int trials, std::uint64_t seed,
                                               const Tolerances& tol = {});

// Commitments under claw-free keys at `p`, and exhaustive disjointness of the
// injective supports at `small`.
ExperimentReport claw_structure_experiment(const Params& p, const Params& small, int commitments, std::uint64_t seed,
                                           const Tolerances& tol = {});

// J(d̂)·(J(x) ⊕ J(x − (−1)^b s)) = d̂·s, exhaustively over b, d̂, s and
// non-wraparound x; wraparound inputs are counted and, as a negative
// control, checked to fail.
ExperimentReport dependence_on_secret_experiment(const std::vector<i64>& qs, int n_max, bool negative_control,
                                                 const Tolerances& tol = {});

// Honest-prover completeness: test-round acceptance at `p` and exact TV of
// D^C against D_{ρ,h} at `exact`. `state` is a named state.
ExperimentReport completeness_experiment(const std::string& state, const Bits& h, int trials, const Params& p,
                                         const Params& exact, std::uint64_t seed, const Tolerances& tol = {});

// Hybrid equalities of the soundness argument for a library attack on
// `state`, all computed exactly at `exact`.
ExperimentReport soundness_hybrid_experiment(const std::string& attack, const std::string& state, const Bits& h,
                                             const Params& exact, std::uint64_t seed, const Tolerances& tol = {});

// Commitments of √a0|0⟩ + √a1|1⟩ under injective keys; frequency of the
// decoded b against |α_b|².
ExperimentReport injective_collapse_experiment(double p1, int trials, const Params& p, std::uint64_t seed,
                                               const Tolerances& tol = {});

struct HardcoreSample {
    PublicKey pk;
    Bits dhat;
    int bit = 0;
    const Trapdoor* td = nullptr;  // only the calibration distinguisher reads it
};
// Returns 0 for "D0" (bit = d̂·s) and 1 for "D1" (bit uniform).
using Distinguisher = std::function<int(const HardcoreSample&, Rng&)>;
Distinguisher random_guess_distinguisher();
Distinguisher trapdoor_distinguisher();
Distinguisher brute_force_distinguisher();
Distinguisher distinguisher_by_name(const std::string& name);

// Advantage |Pr[A = 0 | D0] − Pr[A = 0 | D1]| over `trials` samples of each.
// `expect`: "zero" asserts a 3σ bound, "calibrated" asserts ≥ hardcore_min,
// anything else only reports.
ExperimentReport hardcore_experiment(const std::string& distinguisher, const std::string& expect, int trials,
                                     const Params& p, std::uint64_t seed, const Tolerances& tol = {});

// Z twirl on random CPTP maps of 1–3 qubits (4 Kraus operators each).
ExperimentReport twirl_experiment(int maps, std::uint64_t seed, bool negative_control, const Tolerances& tol = {});
// Hellinger-to-trace, shifted-Gaussian and projection-probability checks.
ExperimentReport distance_lemmas_experiment(int cases, std::uint64_t seed, bool negative_control,
                                            const Tolerances& tol = {});
// p_acc against exact single-term acceptance, and the energy bounds. The
// protocol-level check runs at `exact`.
ExperimentReport p_acc_experiment(int cases, const Params& exact, std::uint64_t seed, bool negative_control,
                                  const Tolerances& tol = {});
// QPIP with honest copies of `psi` on H.
ExperimentReport qpip_experiment(const std::string& label, const XZHamiltonian& H, const QState& psi, int kprime,
                                 int trials, const Params& p, std::uint64_t seed, const Tolerances& tol = {});

std::vector<ExperimentReport> lemma_suite(std::uint64_t seed, bool negative_controls, const Tolerances& tol = {});

// Binomial standard deviation of a frequency.
double binomial_sigma(double p, int n);

}  // namespace cvqc
