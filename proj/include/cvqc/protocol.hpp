// protocol.hpp -- the measurement protocol between a classical verifier and a
// simulated prover: keys, sessions, exact output distributions, provers and
// attacks, underlying-state extraction, transcripts and replay.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvqc/quantum.hpp"

namespace cvqc {

enum class RoundType { Test, Hadamard, RandomCoin };
enum class ProverVariant { Honest, Characterized, Trivial };

const char* round_name(RoundType r);
RoundType round_from_name(const std::string& s);

// Basis choice: h[i] = 0 standard, 1 Hadamard. Printed with qubit 0 first.
Bits parse_bits(const std::string& s);
std::string bits_string(const Bits& b);

// One independent product factor of the prover's state. The committed qubits
// and aux qubits form the block's layout in that order; the attack acts on
// all of them.
struct ProverBlock {
    std::vector<std::string> committed;
    std::vector<std::string> aux;
    QState initial;
    std::optional<CPTPMap> attack;  // empty means identity
};

struct ProverSpec {
    ProverVariant variant = ProverVariant::Honest;
    std::vector<ProverBlock> blocks;
    std::string label;

    int n_qubits() const;
    std::vector<std::string> committed_names() const;
};

// Committed registers are named q0, q1, ... in order; aux registers a<i>.
ProverSpec honest_prover(const QState& psi, const std::string& label = "honest");
// Mixed input, purified into aux qubits.
ProverSpec honest_prover_mixed(const DensityOp& rho, const std::string& label = "honest_mixed");
// Independent copies of an n-qubit state, one block each.
ProverSpec honest_copies(const QState& psi, int copies, const std::string& label = "honest_copies");
// Named states: zero, one, plus, minus, bell, basis:<bits>.
QState named_state(const std::string& name);

// U0 is the honest commitment of `psi` (with `n_aux` extra |0⟩ qubits); U is the attack.
ProverSpec characterized_prover(const QState& psi, const CPTPMap& attack, int n_aux = 0,
                                const std::string& label = "characterized");
// As above, but the attack must commute with standard-basis measurement of
// every committed qubit (checked on Choi matrices to 1e-9).
ProverSpec trivial_prover(const QState& psi, const CPTPMap& attack, int n_aux = 0,
                          const std::string& label = "trivial");
bool is_x_trivial(const CPTPMap& map, const std::vector<u64>& dims, const std::vector<std::size_t>& positions,
                  double tol = 1e-9);

// Replaces the attack of every block by its X-trivialization on committed
// qubit `global_index`.
ProverSpec x_trivialize_prover(const ProverSpec& p, int global_index);
ProverSpec x_trivialize_all(const ProverSpec& p);
ProverSpec z_twirl_prover(const ProverSpec& p, int global_index);

// Attack library. Each entry builds a characterized prover from an n-qubit
// input state; `target` is the committed qubit the attack addresses.
struct NamedAttack {
    std::string name;
    std::string description;
};
std::vector<NamedAttack> attack_library();
ProverSpec attacked_prover(const QState& psi, const std::string& attack, int target = 0, std::uint64_t seed = 7);

// ---- Verifier and sessions -------------------------------------------------

struct SessionConfig {
    Params params;
    KeyOptions key_opt;
    std::string gset = "all_true";
    CommitMode commit_mode = CommitMode::Auto;
    u64 budget = kDefaultBudget;
};

// gen_g where h_i = 0, gen_f where h_i = 1.
std::vector<KeyPair> verifier_keygen(const Bits& h, const Params& p, Rng& rng, const KeyOptions& opt = {});
std::vector<KeyPair> claw_free_keys(int n, const Params& p, Rng& rng, const KeyOptions& opt = {});

struct Answer {
    int b = 0;
    ZqVector x;  // test round
    u64 d = 0;   // Hadamard round, bit i is position i of the w-bit string
};

struct Transcript {
    std::string session_id;
    Params params;
    Bits h;
    KeyOptions key_opt;
    std::string gset = "all_true";
    std::uint64_t seed = 0;
    std::uint64_t verifier_seed = 0;
    std::uint64_t prover_seed = 0;
    RoundType requested = RoundType::RandomCoin;
    RoundType round = RoundType::Test;
    std::vector<PublicKey> keys;
    std::vector<ZqVector> y;
    std::vector<Answer> answers;
    std::vector<int> qubit_ok;
    bool accept = false;
    std::vector<int> m;  // decoded bits, Hadamard rounds only
};

struct Verdict {
    std::vector<int> qubit_ok;
    std::vector<int> m;
    bool accept = false;
};

// Verifier decisions for test and Hadamard rounds. Failures draw the stored
// random bit from `rng`, in qubit order.
Verdict verify_answers(const std::vector<KeyPair>& keys, const Bits& h, RoundType round,
                       const std::vector<ZqVector>& y, const std::vector<Answer>& answers, const GSetPredicate& gset,
                       Rng& rng);

Transcript run_session(const ProverSpec& prover, const Bits& h, RoundType round, const SessionConfig& cfg,
                       std::uint64_t seed);

// ---- Exact distributions ---------------------------------------------------

struct ExactDistribution {
    Distribution D;   // includes the verifier's random bits on failures
    Distribution DC;  // conditioned on acceptance
    double accept_probability = 0;
};

// Hadamard-round distribution of the decoded bits m for fixed keys, computed by
// enumerating every commitment string, Kraus operator and outcome.
ExactDistribution exact_distribution(const ProverSpec& prover, const Bits& h, const std::vector<KeyPair>& keys,
                                     const SessionConfig& cfg);

// D_{ρ,h}: measuring ρ in the bases h.
Distribution ideal_distribution(const DensityOp& rho, const Bits& h);
Distribution ideal_distribution(const QState& psi, const Bits& h);

struct EmpiricalDistribution {
    Distribution D;
    Distribution DC;
    int trials = 0;
    int accepted = 0;
};
EmpiricalDistribution estimate_distribution(const ProverSpec& prover, const Bits& h, const SessionConfig& cfg,
                                            int trials, std::uint64_t seed);

// ---- Underlying state ------------------------------------------------------

enum class HybridVariant { Full, H1, H2 };

// Decodes Z^{d_i·(J(x0)⊕J(x1))} on committed qubit i (all i for Full, only
// h_i = 1 otherwise) after a Hadamard measurement of the preimage registers,
// and traces out everything but the committed qubits. Keys are supplied by
// the caller: all claw-free for Full and H1; injective where h_i = 0 for H2.
DensityOp construct_underlying_state(const ProverSpec& prover, const Bits& h, const std::vector<KeyPair>& keys,
                                     HybridVariant variant, const SessionConfig& cfg);

// ---- Transcripts -----------------------------------------------------------

std::vector<nlohmann::json> transcript_records(const Transcript& t, std::uint64_t& seq);
void write_transcripts(const std::string& path, const std::vector<Transcript>& ts, const Params& p, std::uint64_t seed);
std::vector<Transcript> read_transcripts(const std::string& path);

struct ReplayResult {
    bool keys_match = false;
    bool round_match = false;
    bool verdict_match = false;
    std::string detail;
    bool ok() const { return keys_match && round_match && verdict_match; }
};
// Regenerates the keys from the verifier seed and recomputes the verdicts
// from the recorded answers; the prover is not re-run.
ReplayResult replay(const Transcript& t);

}  // namespace cvqc
