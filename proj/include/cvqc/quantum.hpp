// quantum.hpp -- dense state-vector and density-matrix simulation over named
// registers, the commitment subroutine, distances, and Z-twirl checks.
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvqc/trapdoor_functions.hpp"

namespace cvqc {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using u64 = std::uint64_t;

inline constexpr u64 kDefaultBudget = u64{1} << 22;

struct Register {
    std::string name;
    u64 dim = 0;
};

// Ordered registers; register 0 is the most significant digit of the index.
class RegisterLayout {
public:
    RegisterLayout() = default;
    explicit RegisterLayout(std::vector<Register> regs);

    void add(const std::string& name, u64 dim);
    std::size_t size() const { return regs_.size(); }
    const Register& operator[](std::size_t i) const { return regs_[i]; }
    const std::vector<Register>& registers() const { return regs_; }
    int index_of(const std::string& name) const;  // throws InputError
    bool contains(const std::string& name) const;
    u64 total() const;
    u64 stride(std::size_t i) const;
    u64 dim_of(const std::vector<std::string>& names) const;
    bool operator==(const RegisterLayout& o) const;

private:
    std::vector<Register> regs_;
};

struct QState {
    RegisterLayout layout;
    CVec amp;
    bool normalized = true;  // false for explicitly unnormalized terms

    static QState basis(const RegisterLayout& layout, const std::vector<u64>& values);
    static QState from_amplitudes(const RegisterLayout& layout, const std::vector<cplx>& amps);
    double norm2() const { return amp.squaredNorm(); }
    void renormalize();
};

QState tensor(const QState& a, const QState& b);

// Applies M to the joint index of `regs` (first listed register most
// significant). M need not be unitary.
void apply_matrix(QState& st, const std::vector<std::string>& regs, const CMat& M);
// Hadamard on every bit of a power-of-two register.
void apply_wht(QState& st, const std::string& reg);
// Injective relabel of a register into a new dimension: |v⟩ ↦ |map(v)⟩.
void apply_relabel(QState& st, const std::string& reg, u64 new_dim, const std::function<u64(u64)>& map);
// Inverse of apply_relabel given the same map; amplitude outside the image must be zero.
void apply_relabel_inverse(QState& st, const std::string& reg, u64 old_dim, const std::function<u64(u64)>& map);

// Exact joint distribution of the listed registers' values.
std::vector<double> marginal(const QState& st, const std::vector<std::string>& regs);
// Projects `reg` onto `value` and removes the register; no renormalization.
QState fix_register(const QState& st, const std::string& reg, u64 value);
// Projects the listed registers onto `values` keeping them in the layout.
QState project(const QState& st, const std::vector<std::string>& regs, const std::vector<u64>& values);

struct MeasureResult {
    std::vector<u64> values;
    double probability = 0;
};
// Samples the listed registers from their exact marginal and collapses (renormalized).
MeasureResult measure(QState& st, const std::vector<std::string>& regs, Rng& rng);

// ---- Density operators and channels ---------------------------------------

struct DensityOp {
    RegisterLayout layout;
    CMat rho;
    bool hermitian = true;
    double trace = 1.0;
    bool unnormalized = false;  // explicitly marked hybrid terms

    static DensityOp from_state(const QState& st);
    void check(double tol = 1e-10) const;
};

// Reduced density matrix of a pure state on `keep` (in layout order).
DensityOp reduced_density(const QState& st, const std::vector<std::string>& keep);
DensityOp partial_trace(const DensityOp& op, const std::vector<std::string>& keep);
DensityOp tensor(const DensityOp& a, const DensityOp& b);

struct CPTPMap {
    std::vector<CMat> kraus;

    u64 dim() const { return kraus.empty() ? 0 : static_cast<u64>(kraus.front().cols()); }
    // max |Σ K†K − I|
    double completeness_error() const;
    void check(double tol = 1e-10) const;
    static CPTPMap identity(u64 dim);
    static CPTPMap unitary(const CMat& U);
};

CMat apply_channel(const CPTPMap& map, const CMat& rho);
// Kraus operators of `map` acting on `regs` of the density operator.
DensityOp apply_channel(const CPTPMap& map, const DensityOp& op, const std::vector<std::string>& regs);
// Choi matrix Σ_{ij} |i⟩⟨j| ⊗ Φ(|i⟩⟨j|).
CMat choi(const CPTPMap& map);
CPTPMap compose(const CPTPMap& second, const CPTPMap& first);

// ---- Measurement distributions ---------------------------------------------

enum class Basis { Standard, Hadamard };

// Distribution over bitstrings of the selected qubits; bit i of the key is
// the outcome of qubits[i].
using Distribution = std::map<u64, double>;

Distribution exact_measurement_distribution(const QState& st, const std::vector<std::string>& qubits,
                                            const std::vector<Basis>& bases);
Distribution exact_measurement_distribution(const DensityOp& op, const std::vector<std::string>& qubits,
                                            const std::vector<Basis>& bases);

double tv_distance(const std::vector<double>& p, const std::vector<double>& q);
double tv_distance(const Distribution& p, const Distribution& q);
// 1 − Σ sqrt(p q)
double hellinger2(const std::vector<double>& p, const std::vector<double>& q);
double trace_distance(const CMat& a, const CMat& b);
double trace_distance(const DensityOp& a, const DensityOp& b);
std::string bitstring(u64 key, int nbits);

// ---- Standard gates and random objects ---------------------------------------

CMat gate_i();
CMat gate_x();
CMat gate_z();
CMat gate_h();
CMat kron(const CMat& a, const CMat& b);
CMat kron_all(const std::vector<CMat>& ops);

CMat random_unitary(int dim, Rng& rng);
CPTPMap random_cptp(int dim, int n_kraus, Rng& rng);
CMat random_density(int dim, Rng& rng, int rank = 0);

// ---- Pauli decomposition and Z twirl ---------------------------------------

// K = Σ_{x,z} X^x Z^z ⊗ B_{xz} with the Pauli acting on the most significant
// qubit. Returned in the order B00, B01, B10, B11 (index 2x + z).
std::array<CMat, 4> pauli_decompose(const CMat& K);
CMat pauli_recompose(const std::array<CMat, 4>& B);

// Reorders the tensor factors so factor `pos` becomes the most significant.
CMat move_factor_to_front(const CMat& K, const std::vector<u64>& dims, std::size_t pos);
CMat move_front_factor_to(const CMat& K, const std::vector<u64>& dims, std::size_t pos);

// {Z^r B Z^r / √2} on factor `pos`.
CPTPMap z_twirl(const CPTPMap& map, const std::vector<u64>& dims, std::size_t pos);
// {B'_{x,τ} = Σ_z Z^z ⊗ B_{xzτ}} on factor `pos`.
CPTPMap x_trivialize(const CPTPMap& map, const std::vector<u64>& dims, std::size_t pos);

struct TwirlReport {
    double lemma_deviation = 0;      // Lemma maps: {Z^r B Z^r/√2} vs {X^x B'_x}
    double corollary_deviation = 0;  // with |b⟩⟨b|H on the first qubit
    double recompose_error = 0;      // Σ X^x Z^z ⊗ B_xz vs B
    double max() const;
};

// Compares both sides on `trials` random density inputs. `sign_error` flips
// the Z component of the first decomposed Kraus operator on the right-hand
// side; the check must then fail.
TwirlReport z_twirl_check(const CPTPMap& map, int trials, Rng& rng, bool sign_error = false);

// ---- Commitment ------------------------------------------------------------

enum class CommitMode { Auto, Dense, Lazy };

struct CommitResult {
    QState state;
    ZqVector y;
    double probability = 0;  // P(y)
    bool dense = false;
};

struct CommitSpec {
    const PublicKey* pk = nullptr;
    double B_P = 0;
    std::string committed;  // name of the committed qubit register
    std::string preimage;   // name of the new preimage register (dim q^n)
};

// Appends the preimage register, samples y from the exact marginal of the
// commitment register, and returns the collapsed, renormalized state.
CommitResult samp_commit(const QState& st, const CommitSpec& spec, Rng& rng, CommitMode mode = CommitMode::Auto,
                         u64 budget = kDefaultBudget);

// Post-measurement state for a given y (unnormalized: its squared norm is P(y)).
QState commit_post_state(const QState& st, const CommitSpec& spec, const ZqVector& y);

struct CommitBranch {
    ZqVector y;
    double probability = 0;
    QState state;  // renormalized
};
// Every y with P(y) > 0, enumerated exactly over (b, x, noise box).
std::vector<CommitBranch> commit_branches(const QState& st, const CommitSpec& spec, u64 max_branches = 1u << 20);

// Exact marginal Σ_b |α_b|²·(1/q^n)·Σ_x f'_b(x)(y) of the commitment string.
double commit_marginal(const QState& st, const CommitSpec& spec, const ZqVector& y);

// U_J on a preimage register: Z_q^n index ↦ J(x) in 2^w.
void apply_u_j(QState& st, const std::string& preimage, int n, i64 q);
void apply_u_j_inverse(QState& st, const std::string& preimage, int n, i64 q);

struct HadamardOutcome {
    int bprime = 0;
    std::uint64_t d = 0;
};
// H on the committed qubit and every bit of the (U_J-relabelled) preimage
// register, then a joint measurement.
HadamardOutcome hadamard_round_measure(QState& st, const std::string& committed, const std::string& preimage,
                                       Rng& rng);

}  // namespace cvqc
