// hamiltonian.hpp -- 2-local XZ Hamiltonians, the rescaled form, exact ground
// energies, the energy-test acceptance rule, and the full QPIP wiring.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cvqc/protocol.hpp"

namespace cvqc {

// (qubit index, 'X' or 'Z')
using PauliFactor = std::pair<int, char>;

struct PauliTerm {
    double coeff = 0;
    std::vector<PauliFactor> paulis;
};

struct XZHamiltonian {
    int n_qubits = 0;
    std::vector<PauliTerm> terms;

    void validate() const;  // throws InputError
    double abs_sum() const;
    Eigen::MatrixXd matrix() const;
};

struct RescaledTerm {
    double pi = 0;
    int sign = 1;
    std::vector<PauliFactor> paulis;
};

struct RescaledHamiltonian {
    int n_qubits = 0;
    std::vector<RescaledTerm> terms;

    // P_S = (I + sign·S)/2
    Eigen::MatrixXd projector(std::size_t i) const;
    Eigen::MatrixXd matrix() const;  // Σ π_S P_S
};

Eigen::MatrixXd pauli_string_matrix(int n_qubits, const std::vector<PauliFactor>& paulis);

RescaledHamiltonian rescale(const XZHamiltonian& H);

XZHamiltonian hamiltonian_from_json(const nlohmann::json& j);
nlohmann::json hamiltonian_to_json(const XZHamiltonian& H);
XZHamiltonian load_hamiltonian(const std::string& path);  // InputError with the path

struct GroundState {
    double energy = 0;
    QState state;  // qubits t0..t{n-1}
};
// Dense diagonalization up to 8 qubits, Lanczos up to 12.
GroundState ground_energy(const XZHamiltonian& H);
double max_energy(const XZHamiltonian& H);

// 1 − (Tr(Hρ) + Σ|d_S|)/(2Σ|d_S|)
double p_acc(const XZHamiltonian& H, const CMat& rho);
// Σ_S π_S · Pr[the product of the term's outcomes equals −sign(d_S)], from
// the measurement distribution of ρ in each term's basis.
double single_term_acceptance(const XZHamiltonian& H, const DensityOp& rho);
// Single-term acceptance of the measurement protocol run exactly on an
// honest prover holding ρ, with keys drawn for each term's basis choice.
double protocol_single_term_acceptance(const XZHamiltonian& H, const DensityOp& rho, const SessionConfig& cfg,
                                       Rng& rng);

std::vector<int> sample_terms(const RescaledHamiltonian& Hr, int kprime, Rng& rng);

struct BasisChoice {
    Bits h;
    std::vector<std::string> conflicts;  // only without expansion
};
// Expanded: term i is measured on qubits [i·n, (i+1)·n). Otherwise the
// basis lives on n qubits and conflicting demands are reported (X wins).
BasisChoice basis_from_terms(const XZHamiltonian& H, const std::vector<int>& terms, bool expand = true);

struct MfTally {
    int satisfied = 0;
    int total = 0;
    bool accept = false;
};
// Per term, the product of (−1)^{m} over its factors; accept iff a strict
// majority of terms give −sign(d_S). `m` is indexed over the expanded layout.
MfTally mf_accept(const XZHamiltonian& H, const std::vector<int>& terms, const std::vector<int>& m);

struct QpipResult {
    bool accept = false;
    RoundType round = RoundType::Test;
    std::vector<int> terms;
    MfTally tally;
    Transcript transcript;
};
// `prover` must hold kprime·n qubits (one n-qubit block per sampled term).
QpipResult run_qpip(const XZHamiltonian& H, const ProverSpec& prover, int kprime, const SessionConfig& cfg,
                    std::uint64_t seed, RoundType round = RoundType::RandomCoin);

struct QpipStats {
    int trials = 0;
    int accepted = 0;
    int test_rounds = 0;
    int test_accepted = 0;
    int hadamard_rounds = 0;
    int hadamard_accepted = 0;
    long term_total = 0;
    long term_satisfied = 0;
    double analytic_p_acc = 0;
    double analytic_majority = 0;  // Pr[Bin(k′, p_acc) > k′/2]
    double analytic_rate = 0;      // expected overall rate for a random-coin round
    double ground_energy = 0;

    nlohmann::json to_json() const;
};
QpipStats run_qpip_trials(const XZHamiltonian& H, const QState& psi, int kprime, int trials, const SessionConfig& cfg,
                          std::uint64_t seed, RoundType round = RoundType::RandomCoin);

// Pr[Bin(k, p) > k/2]
double majority_probability(int k, double p);

}  // namespace cvqc
