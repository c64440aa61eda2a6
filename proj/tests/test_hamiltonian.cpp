#include <cmath>

#include <Eigen/Eigenvalues>

#include "cvqc/hamiltonian.hpp"
#include "doctest.h"

using namespace cvqc;

namespace {

std::string src(const std::string& rel) { return std::string(CVQC_SOURCE_DIR) + "/" + rel; }

XZHamiltonian zz() { return load_hamiltonian(src("hamiltonians/zz.json")); }

XZHamiltonian random_xz(int n, int terms, Rng& rng) {
    XZHamiltonian H;
    H.n_qubits = n;
    for (int t = 0; t < terms; ++t) {
        PauliTerm term;
        term.coeff = 2 * rng.uniform01() - 1;
        int a = static_cast<int>(rng.uniform_int(0, n - 1));
        int b = static_cast<int>(rng.uniform_int(0, n - 2));
        if (b >= a) ++b;
        const char p = rng.bit() ? 'X' : 'Z';
        term.paulis = {{a, p}, {b, p}};
        H.terms.push_back(term);
    }
    return H;
}

double dense_min(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    return es.eigenvalues()(0);
}

}  // namespace

TEST_CASE("Pauli strings put qubit 0 in the most significant position") {
    auto M = pauli_string_matrix(3, {{0, 'X'}, {2, 'Z'}});
    CMat expect = kron_all({gate_x(), gate_i(), gate_z()});
    CHECK((M.cast<cplx>() - expect).norm() < 1e-14);
    CHECK_THROWS_AS(pauli_string_matrix(2, {{2, 'X'}}), InputError);
    CHECK_THROWS_AS(pauli_string_matrix(2, {{0, 'Y'}}), InputError);
}

TEST_CASE("Hamiltonian JSON and validation") {
    XZHamiltonian H = zz();
    CHECK(H.n_qubits == 2);
    CHECK(H.abs_sum() == doctest::Approx(1.0));
    XZHamiltonian back = hamiltonian_from_json(hamiltonian_to_json(H));
    CHECK((back.matrix() - H.matrix()).norm() < 1e-15);
    CHECK_THROWS_AS(load_hamiltonian("/nonexistent/h.json"), InputError);
    CHECK_THROWS_AS(hamiltonian_from_json(nlohmann::json{{"n", 2}}), InputError);
    XZHamiltonian bad = H;
    bad.terms[0].paulis.push_back({0, 'X'});
    CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("rescaled form is affine in H with slope 1/(2Σ|d|)") {
    Rng rng(1);
    XZHamiltonian H = random_xz(3, 5, rng);
    RescaledHamiltonian R = rescale(H);
    double pi_total = 0;
    for (auto& t : R.terms) pi_total += t.pi;
    CHECK(pi_total == doctest::Approx(1.0));
    for (std::size_t i = 0; i < R.terms.size(); ++i) {
        auto P = R.projector(i);
        CHECK((P * P - P).norm() < 1e-12);
    }
    const double S = H.abs_sum();
    for (int k = 0; k < 10; ++k) {
        CMat rho = random_density(8, rng);
        const double e = (H.matrix().cast<cplx>() * rho).trace().real();
        const double r = (R.matrix().cast<cplx>() * rho).trace().real();
        CHECK(r == doctest::Approx(0.5 + e / (2 * S)).epsilon(1e-12));
        CHECK(p_acc(H, rho) == doctest::Approx(1 - r).epsilon(1e-12));
    }
}

TEST_CASE("ground energy: dense and Lanczos agree with a direct eigensolver") {
    CHECK(ground_energy(zz()).energy == doctest::Approx(-1.0));
    CHECK(max_energy(zz()) == doctest::Approx(1.0));
    Rng rng(2);
    for (int n : {3, 9}) {
        XZHamiltonian H = random_xz(n, 2 * n, rng);
        GroundState g = ground_energy(H);
        CHECK(g.energy == doctest::Approx(dense_min(H.matrix())).epsilon(1e-8));
        // the returned state attains the energy
        const Eigen::VectorXcd v = g.state.amp;
        CHECK((v.adjoint() * H.matrix().cast<cplx>() * v)(0, 0).real() == doctest::Approx(g.energy).epsilon(1e-8));
    }
    XZHamiltonian big;
    big.n_qubits = 13;
    big.terms = {{1.0, {{0, 'Z'}, {12, 'Z'}}}};
    CHECK_THROWS_AS(ground_energy(big), ResourceError);
}

TEST_CASE("single-term acceptance equals p_acc exactly") {
    Rng rng(3);
    for (int k = 0; k < 5; ++k) {
        XZHamiltonian H = random_xz(2 + k % 2, 3, rng);
        const int dim = 1 << H.n_qubits;
        DensityOp rho;
        RegisterLayout L;
        for (int i = 0; i < H.n_qubits; ++i) L.add("t" + std::to_string(i), 2);
        rho.layout = L;
        rho.rho = random_density(dim, rng);
        CHECK(single_term_acceptance(H, rho) == doctest::Approx(p_acc(H, rho.rho)).epsilon(1e-9));
    }
}

TEST_CASE("protocol-level single-term acceptance equals p_acc") {
    SessionConfig cfg;
    cfg.params = builtin_preset("sim5");
    cfg.key_opt.zero_noise = true;
    Rng rng(4);
    XZHamiltonian H = random_xz(2, 3, rng);
    DensityOp rho;
    rho.layout = RegisterLayout({{"t0", 2}, {"t1", 2}});
    rho.rho = random_density(4, rng, 2);
    CHECK(protocol_single_term_acceptance(H, rho, cfg, rng) == doctest::Approx(p_acc(H, rho.rho)).epsilon(1e-9));
}

TEST_CASE("basis choice and majority rule") {
    XZHamiltonian H;
    H.n_qubits = 2;
    H.terms = {{1.0, {{0, 'Z'}, {1, 'Z'}}}, {1.0, {{0, 'X'}, {1, 'X'}}}};
    CHECK(basis_from_terms(H, {0}, false).h == Bits{0, 0});
    CHECK(basis_from_terms(H, {1}, false).h == Bits{1, 1});
    BasisChoice conflict = basis_from_terms(H, {0, 1}, false);
    CHECK(conflict.h == Bits{1, 1});
    CHECK(conflict.conflicts.size() == 2);
    BasisChoice expanded = basis_from_terms(H, {0, 1});
    CHECK(expanded.h == Bits{0, 0, 1, 1});
    CHECK(expanded.conflicts.empty());

    CHECK(mf_accept(H, {0}, {0, 1}).accept);
    CHECK_FALSE(mf_accept(H, {0}, {0, 0}).accept);
    MfTally t = mf_accept(H, {0, 0, 0}, {0, 1, 1, 0, 0, 0});
    CHECK(t.satisfied == 2);
    CHECK(t.accept);
    CHECK_THROWS_AS(mf_accept(H, {0, 0}, {0, 1}), InputError);
}

TEST_CASE("majority probability against a direct binomial sum") {
    CHECK(majority_probability(1, 0.3) == doctest::Approx(0.3));
    CHECK(majority_probability(3, 0.5) == doctest::Approx(0.5));
    // Bin(4, p) > 2: p^4 + 4 p^3 (1 − p)
    const double p = 0.7;
    CHECK(majority_probability(4, p) == doctest::Approx(std::pow(p, 4) + 4 * std::pow(p, 3) * (1 - p)));
}

TEST_CASE("QPIP on Z1Z2: ground state always accepted, |00> never in Hadamard rounds") {
    SessionConfig cfg;
    cfg.params = builtin_preset("sim5");
    cfg.key_opt.zero_noise = true;
    XZHamiltonian H = zz();
    GroundState g = ground_energy(H);
    QpipStats s = run_qpip_trials(H, g.state, 1, 100, cfg, 5, RoundType::Hadamard);
    CHECK(s.hadamard_rounds == 100);
    CHECK(s.hadamard_accepted == 100);
    QpipStats z = run_qpip_trials(H, named_state("basis:00"), 1, 100, cfg, 6, RoundType::Hadamard);
    CHECK(z.hadamard_accepted == 0);
    QpipStats t = run_qpip_trials(H, named_state("basis:00"), 3, 50, cfg, 7, RoundType::Test);
    CHECK(t.test_accepted == t.test_rounds);
    CHECK(z.to_json().contains("analytic_p_acc"));
    QpipResult r = run_qpip(H, honest_copies(g.state, 3), 3, cfg, 8);
    CHECK(r.terms.size() == 3);
    CHECK(r.accept);
}
