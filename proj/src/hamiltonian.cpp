#include "cvqc/hamiltonian.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>

namespace cvqc {

namespace {

u64 bit_of(int n, int qubit) { return u64{1} << (n - 1 - qubit); }

// H·v applied term by term; X flips the qubit, Z contributes a sign.
Eigen::VectorXd apply_h(const XZHamiltonian& H, const Eigen::VectorXd& v) {
    const int n = H.n_qubits;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (auto& t : H.terms) {
        u64 flip = 0, zmask = 0;
        for (auto [q, p] : t.paulis) (p == 'X' ? flip : zmask) ^= bit_of(n, q);
        for (u64 i = 0; i < static_cast<u64>(v.size()); ++i) {
            const double s = std::popcount(i & zmask) & 1 ? -1.0 : 1.0;
            out[static_cast<Eigen::Index>(i ^ flip)] += t.coeff * s * v[static_cast<Eigen::Index>(i)];
        }
    }
    return out;
}

QState to_state(int n, const Eigen::VectorXd& v) {
    RegisterLayout L;
    for (int i = 0; i < n; ++i) L.add("t" + std::to_string(i), 2);
    QState st;
    st.layout = L;
    st.amp = v.cast<cplx>();
    st.renormalize();
    return st;
}

// Lowest eigenpair by Lanczos with full reorthogonalization.
std::pair<double, Eigen::VectorXd> lanczos_min(const XZHamiltonian& H, double sign) {
    const Eigen::Index D = static_cast<Eigen::Index>(u64{1} << H.n_qubits);
    const int kmax = static_cast<int>(std::min<Eigen::Index>(D, 300));
    Rng rng(12345);
    Eigen::VectorXd v(D);
    for (Eigen::Index i = 0; i < D; ++i) v[i] = rng.normal();
    v.normalize();
    Eigen::MatrixXd V(D, kmax);
    std::vector<double> alpha, beta;
    V.col(0) = v;
    double prev = 0;
    Eigen::VectorXd best;
    double best_val = 0;
    for (int k = 0; k < kmax; ++k) {
        Eigen::VectorXd wv = sign * apply_h(H, V.col(k));
        alpha.push_back(V.col(k).dot(wv));
        for (int j = 0; j <= k; ++j) wv -= V.col(j).dot(wv) * V.col(j);
        for (int j = 0; j <= k; ++j) wv -= V.col(j).dot(wv) * V.col(j);
        const double b = wv.norm();
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k + 1, k + 1);
        for (int j = 0; j <= k; ++j) {
            T(j, j) = alpha[j];
            if (j < k) T(j, j + 1) = T(j + 1, j) = beta[j];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        best_val = es.eigenvalues()[0];
        best = V.leftCols(k + 1) * es.eigenvectors().col(0);
        if ((k > 0 && std::abs(best_val - prev) < 1e-13) || b < 1e-12 || k + 1 == kmax) break;
        prev = best_val;
        beta.push_back(b);
        V.col(k + 1) = wv / b;
    }
    return {sign * best_val, best};
}

std::pair<double, Eigen::VectorXd> extreme(const XZHamiltonian& H, double sign) {
    H.validate();
    if (H.n_qubits > 12) throw ResourceError("ground_energy supports at most 12 qubits");
    if (H.n_qubits <= 8) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sign * H.matrix());
        return {sign * es.eigenvalues()[0], es.eigenvectors().col(0)};
    }
    return lanczos_min(H, sign);
}

}  // namespace

void XZHamiltonian::validate() const {
    if (n_qubits < 1) throw InputError("Hamiltonian needs at least one qubit");
    if (terms.empty()) throw InputError("Hamiltonian has no terms");
    bool nonzero = false;
    for (auto& t : terms) {
        if (t.paulis.empty() || t.paulis.size() > 2) throw InputError("each term must have one or two Pauli factors");
        if (!std::isfinite(t.coeff)) throw InputError("term coefficient is not finite");
        for (auto [q, p] : t.paulis) {
            if (q < 0 || q >= n_qubits) throw InputError("Pauli factor index out of range");
            if (p != 'X' && p != 'Z') throw InputError("Pauli factors must be X or Z");
        }
        if (t.paulis.size() == 2 && t.paulis[0].first == t.paulis[1].first)
            throw InputError("a term acts twice on the same qubit");
        nonzero = nonzero || t.coeff != 0;
    }
    if (!nonzero) throw InputError("every coefficient is zero");
}

double XZHamiltonian::abs_sum() const {
    double s = 0;
    for (auto& t : terms) s += std::abs(t.coeff);
    return s;
}

Eigen::MatrixXd pauli_string_matrix(int n_qubits, const std::vector<PauliFactor>& paulis) {
    const Eigen::Index D = static_cast<Eigen::Index>(u64{1} << n_qubits);
    u64 flip = 0, zmask = 0;
    for (auto [q, p] : paulis) {
        if (q < 0 || q >= n_qubits) throw InputError("Pauli factor index out of range");
        if (p != 'X' && p != 'Z') throw InputError("Pauli factors must be X or Z");
        (p == 'X' ? flip : zmask) ^= bit_of(n_qubits, q);
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(D, D);
    for (u64 i = 0; i < static_cast<u64>(D); ++i)
        M(static_cast<Eigen::Index>(i ^ flip), static_cast<Eigen::Index>(i)) = std::popcount(i & zmask) & 1 ? -1.0 : 1.0;
    return M;
}

Eigen::MatrixXd XZHamiltonian::matrix() const {
    const Eigen::Index D = static_cast<Eigen::Index>(u64{1} << n_qubits);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(D, D);
    for (auto& t : terms) M += t.coeff * pauli_string_matrix(n_qubits, t.paulis);
    return M;
}

Eigen::MatrixXd RescaledHamiltonian::projector(std::size_t i) const {
    const auto& t = terms.at(i);
    const Eigen::Index D = static_cast<Eigen::Index>(u64{1} << n_qubits);
    return 0.5 * (Eigen::MatrixXd::Identity(D, D) + t.sign * pauli_string_matrix(n_qubits, t.paulis));
}

Eigen::MatrixXd RescaledHamiltonian::matrix() const {
    const Eigen::Index D = static_cast<Eigen::Index>(u64{1} << n_qubits);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(D, D);
    for (std::size_t i = 0; i < terms.size(); ++i) M += terms[i].pi * projector(i);
    return M;
}

RescaledHamiltonian rescale(const XZHamiltonian& H) {
    H.validate();
    RescaledHamiltonian r;
    r.n_qubits = H.n_qubits;
    const double total = H.abs_sum();
    for (auto& t : H.terms) r.terms.push_back({std::abs(t.coeff) / total, t.coeff < 0 ? -1 : 1, t.paulis});
    return r;
}

XZHamiltonian hamiltonian_from_json(const nlohmann::json& j) {
    XZHamiltonian H;
    try {
        H.n_qubits = j.at("n").get<int>();
        for (auto& t : j.at("terms")) {
            PauliTerm term;
            term.coeff = t.at("coeff").get<double>();
            for (auto& f : t.at("paulis")) {
                const std::string p = f.at(1).get<std::string>();
                if (p.size() != 1) throw InputError("Pauli factor must be \"X\" or \"Z\"");
                term.paulis.push_back({f.at(0).get<int>(), p[0]});
            }
            H.terms.push_back(term);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed Hamiltonian: ") + e.what());
    }
    H.validate();
    return H;
}

nlohmann::json hamiltonian_to_json(const XZHamiltonian& H) {
    nlohmann::json terms = nlohmann::json::array();
    for (auto& t : H.terms) {
        nlohmann::json ps = nlohmann::json::array();
        for (auto [q, p] : t.paulis) ps.push_back({q, std::string(1, p)});
        terms.push_back({{"coeff", t.coeff}, {"paulis", ps}});
    }
    return {{"n", H.n_qubits}, {"terms", terms}};
}

XZHamiltonian load_hamiltonian(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open Hamiltonian file: " + path);
    try {
        return hamiltonian_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed Hamiltonian file " + path + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

GroundState ground_energy(const XZHamiltonian& H) {
    auto [e, v] = extreme(H, 1.0);
    return {e, to_state(H.n_qubits, v)};
}

double max_energy(const XZHamiltonian& H) { return extreme(H, -1.0).first; }

double p_acc(const XZHamiltonian& H, const CMat& rho) {
    H.validate();
    if (rho.rows() != static_cast<Eigen::Index>(u64{1} << H.n_qubits) || rho.cols() != rho.rows())
        throw InputError("p_acc: density dimension does not match the Hamiltonian");
    const double e = (H.matrix().cast<cplx>() * rho).trace().real();
    const double s = H.abs_sum();
    const double p = 1.0 - (e + s) / (2.0 * s);
    if (p < -1e-9 || p > 1 + 1e-9) throw InputError("p_acc outside [0, 1]; is rho a density operator?");
    return p;
}

namespace {

// Pr[(−1)^{Σ bits on the term's qubits} = −sign] for a distribution whose
// bit positions are the term's qubits in `pos` order.
double term_rule_probability(const Distribution& D, const std::vector<int>& bitpos, int sign) {
    double p = 0;
    for (auto& [k, v] : D) {
        int par = 0;
        for (int b : bitpos) par ^= static_cast<int>((k >> b) & 1);
        if ((par ? -1 : 1) == -sign) p += v;
    }
    return p;
}

}  // namespace

double single_term_acceptance(const XZHamiltonian& H, const DensityOp& rho) {
    RescaledHamiltonian r = rescale(H);
    if (rho.layout.size() != static_cast<std::size_t>(H.n_qubits))
        throw InputError("single_term_acceptance: density has the wrong number of qubits");
    double acc = 0;
    for (auto& t : r.terms) {
        std::vector<std::string> qs;
        std::vector<Basis> bs;
        std::vector<int> pos;
        for (auto [q, p] : t.paulis) {
            pos.push_back(static_cast<int>(qs.size()));
            qs.push_back(rho.layout[q].name);
            bs.push_back(p == 'X' ? Basis::Hadamard : Basis::Standard);
        }
        acc += t.pi * term_rule_probability(exact_measurement_distribution(rho, qs, bs), pos, t.sign);
    }
    return acc;
}

double protocol_single_term_acceptance(const XZHamiltonian& H, const DensityOp& rho, const SessionConfig& cfg,
                                       Rng& rng) {
    RescaledHamiltonian r = rescale(H);
    ProverSpec P = honest_prover_mixed(rho);
    double acc = 0;
    for (std::size_t i = 0; i < r.terms.size(); ++i) {
        BasisChoice bc = basis_from_terms(H, {static_cast<int>(i)}, true);
        auto keys = verifier_keygen(bc.h, cfg.params, rng, cfg.key_opt);
        ExactDistribution ed = exact_distribution(P, bc.h, keys, cfg);
        std::vector<int> pos;
        for (auto [q, p] : r.terms[i].paulis) pos.push_back(q);
        // rejected sessions count as failures of the energy test
        acc += r.terms[i].pi * ed.accept_probability * term_rule_probability(ed.DC, pos, r.terms[i].sign);
    }
    return acc;
}

std::vector<int> sample_terms(const RescaledHamiltonian& Hr, int kprime, Rng& rng) {
    if (kprime < 1) throw InputError("k' must be at least 1");
    std::vector<double> w;
    for (auto& t : Hr.terms) w.push_back(t.pi);
    std::vector<int> out;
    for (int i = 0; i < kprime; ++i) out.push_back(static_cast<int>(rng.discrete(w)));
    return out;
}

BasisChoice basis_from_terms(const XZHamiltonian& H, const std::vector<int>& terms, bool expand) {
    const int n = H.n_qubits;
    BasisChoice bc;
    if (expand) {
        bc.h.assign(static_cast<std::size_t>(n) * terms.size(), 0);
        for (std::size_t i = 0; i < terms.size(); ++i)
            for (auto [q, p] : H.terms.at(terms[i]).paulis)
                if (p == 'X') bc.h[i * n + q] = 1;
        return bc;
    }
    bc.h.assign(n, 0);
    std::vector<char> seen(n, 0);
    for (int ti : terms)
        for (auto [q, p] : H.terms.at(ti).paulis) {
            if (seen[q] && seen[q] != p)
                bc.conflicts.push_back("qubit " + std::to_string(q) + " needs both X and Z");
            if (p == 'X') bc.h[q] = 1;
            if (!seen[q]) seen[q] = p;
        }
    return bc;
}

MfTally mf_accept(const XZHamiltonian& H, const std::vector<int>& terms, const std::vector<int>& m) {
    const std::size_t n = H.n_qubits;
    if (m.size() < n * terms.size()) throw InputError("decoded bits do not cover every sampled term");
    MfTally t;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const PauliTerm& term = H.terms.at(terms[i]);
        int par = 0;
        for (auto [q, p] : term.paulis) par ^= m[i * n + q];
        const int sign = term.coeff < 0 ? -1 : 1;
        if ((par ? -1 : 1) == -sign) ++t.satisfied;
        ++t.total;
    }
    t.accept = 2 * t.satisfied > t.total;
    return t;
}

QpipResult run_qpip(const XZHamiltonian& H, const ProverSpec& prover, int kprime, const SessionConfig& cfg,
                    std::uint64_t seed, RoundType round) {
    RescaledHamiltonian r = rescale(H);
    if (prover.n_qubits() != kprime * H.n_qubits) throw InputError("prover must hold k' copies of the n-qubit state");
    Rng master(seed);
    Rng term_rng(master.derive_seed());
    QpipResult res;
    res.terms = sample_terms(r, kprime, term_rng);
    BasisChoice bc = basis_from_terms(H, res.terms, true);
    res.transcript = run_session(prover, bc.h, round, cfg, master.derive_seed());
    res.round = res.transcript.round;
    if (res.round == RoundType::Test) {
        res.accept = res.transcript.accept;
    } else {
        res.tally = mf_accept(H, res.terms, res.transcript.m);
        res.accept = res.transcript.accept && res.tally.accept;
    }
    return res;
}

double majority_probability(int k, double p) {
    double total = 0;
    for (int j = k / 2 + 1; j <= k; ++j)
        total += std::exp(std::lgamma(k + 1.0) - std::lgamma(j + 1.0) - std::lgamma(k - j + 1.0)) * std::pow(p, j) *
                 std::pow(1 - p, k - j);
    return total;
}

QpipStats run_qpip_trials(const XZHamiltonian& H, const QState& psi, int kprime, int trials, const SessionConfig& cfg,
                          std::uint64_t seed, RoundType round) {
    if (trials < 1) throw InputError("trials must be at least 1");
    if (static_cast<int>(psi.layout.size()) != H.n_qubits)
        throw InputError("prover state has the wrong number of qubits for the Hamiltonian");
    QpipStats s;
    s.trials = trials;
    s.ground_energy = ground_energy(H).energy;
    s.analytic_p_acc = p_acc(H, DensityOp::from_state(psi).rho);
    s.analytic_majority = majority_probability(kprime, s.analytic_p_acc);
    const double ph = round == RoundType::Test ? 0.0 : round == RoundType::Hadamard ? 1.0 : 0.5;
    s.analytic_rate = (1 - ph) + ph * s.analytic_majority;
    ProverSpec P = honest_copies(psi, kprime);
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        QpipResult r = run_qpip(H, P, kprime, cfg, rng.derive_seed(), round);
        s.accepted += r.accept;
        if (r.round == RoundType::Test) {
            ++s.test_rounds;
            s.test_accepted += r.accept;
        } else {
            ++s.hadamard_rounds;
            s.hadamard_accepted += r.accept;
            s.term_total += r.tally.total;
            s.term_satisfied += r.tally.satisfied;
        }
    }
    return s;
}

nlohmann::json QpipStats::to_json() const {
    return {{"trials", trials},
            {"accepted", accepted},
            {"test_rounds", test_rounds},
            {"test_accepted", test_accepted},
            {"hadamard_rounds", hadamard_rounds},
            {"hadamard_accepted", hadamard_accepted},
            {"empirical_p_acc", term_total ? static_cast<double>(term_satisfied) / term_total : 0.0},
            {"analytic_p_acc", analytic_p_acc},
            {"analytic_majority", analytic_majority},
            {"analytic_rate", analytic_rate},
            {"ground_energy", ground_energy}};
}

}  // namespace cvqc
