#include <cmath>

#include "cvqc/quantum.hpp"
#include "doctest.h"

using namespace cvqc;

namespace {

RegisterLayout qubits(int n) {
    RegisterLayout L;
    for (int i = 0; i < n; ++i) L.add("t" + std::to_string(i), 2);
    return L;
}

QState random_state(const RegisterLayout& L, Rng& rng) {
    CMat U = random_unitary(static_cast<int>(L.total()), rng);
    std::vector<cplx> a(L.total());
    for (u64 i = 0; i < L.total(); ++i) a[i] = U(i, 0);
    return QState::from_amplitudes(L, a);
}

KeyPair sim5_key(Rng& rng) {
    KeyOptions zero;
    zero.zero_noise = true;
    return gen_f_with(builtin_preset("sim5"), rng, {1}, ZqVector(4, 0), zero);
}

}  // namespace

TEST_CASE("register layout indexing") {
    RegisterLayout L;
    L.add("a", 3);
    L.add("b", 2);
    L.add("c", 5);
    CHECK(L.total() == 30);
    CHECK(L.stride(0) == 10);
    CHECK(L.stride(2) == 1);
    CHECK(L.index_of("b") == 1);
    CHECK(L.dim_of({"a", "c"}) == 15);
    CHECK_THROWS_AS(L.index_of("z"), InputError);
    QState s = QState::basis(L, {2, 1, 4});
    CHECK(std::abs(s.amp[2 * 10 + 1 * 5 + 4] - cplx(1)) < 1e-15);
}

TEST_CASE("apply_matrix and apply_wht agree with explicit Kronecker products") {
    Rng rng(1);
    RegisterLayout L = qubits(3);
    QState s = random_state(L, rng);
    QState a = s;
    apply_matrix(a, {"t1"}, gate_h());
    CVec expect = kron_all({gate_i(), gate_h(), gate_i()}) * s.amp;
    CHECK((a.amp - expect).norm() < 1e-12);

    RegisterLayout R;
    R.add("r", 8);
    QState w = QState::from_amplitudes(R, std::vector<cplx>(s.amp.data(), s.amp.data() + 8));
    apply_wht(w, "r");
    CVec hhh = kron_all({gate_h(), gate_h(), gate_h()}) * s.amp;
    CHECK((w.amp - hhh).norm() < 1e-12);

    // two registers in reversed order: the first listed is most significant
    QState b = s;
    CMat cx = CMat::Zero(4, 4);
    cx(0, 0) = cx(1, 1) = cx(2, 3) = cx(3, 2) = 1;
    apply_matrix(b, {"t2", "t0"}, cx);
    for (u64 i = 0; i < 8; ++i) {
        u64 j = (i & 1) ? (i ^ 4) : i;
        CHECK(std::abs(b.amp[j] - s.amp[i]) < 1e-12);
    }
}

TEST_CASE("relabel round trip and marginals") {
    RegisterLayout L;
    L.add("x", 5);
    QState s = QState::from_amplitudes(L, {0.1, 0.2, 0.3, 0.4, std::sqrt(1 - 0.3)});
    QState r = s;
    apply_relabel(r, "x", 8, [](u64 v) { return 7 - v; });
    auto m = marginal(r, {"x"});
    CHECK(m[7] == doctest::Approx(0.01));
    CHECK(m[0] == 0.0);
    apply_relabel_inverse(r, "x", 5, [](u64 v) { return 7 - v; });
    CHECK((r.amp - s.amp).norm() < 1e-14);
}

TEST_CASE("fix_register, project and measure") {
    const double h = 1 / std::sqrt(2.0);
    QState bell = QState::from_amplitudes(qubits(2), {h, 0, 0, h});
    QState f = fix_register(bell, "t0", 1);
    CHECK(f.layout.size() == 1);
    CHECK(f.norm2() == doctest::Approx(0.5));
    QState p = project(bell, {"t1"}, {0});
    CHECK(p.layout.size() == 2);
    CHECK(std::abs(p.amp[0] - cplx(h)) < 1e-15);
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        QState s = bell;
        auto r = measure(s, {"t0"}, rng);
        CHECK(r.probability == doctest::Approx(0.5));
        CHECK(marginal(s, {"t1"})[r.values[0]] == doctest::Approx(1.0));
    }
}

TEST_CASE("reduced density and partial trace") {
    Rng rng(4);
    QState s = random_state(qubits(3), rng);
    DensityOp full = DensityOp::from_state(s);
    DensityOp a = reduced_density(s, {"t0", "t2"});
    DensityOp b = partial_trace(full, {"t0", "t2"});
    CHECK((a.rho - b.rho).norm() < 1e-12);
    CHECK(a.rho.trace().real() == doctest::Approx(1.0));
    // oracle: explicit sum over the traced qubit
    CMat oracle = CMat::Zero(4, 4);
    for (u64 i = 0; i < 8; ++i)
        for (u64 j = 0; j < 8; ++j) {
            if ((i >> 1 & 1) != (j >> 1 & 1)) continue;
            u64 ri = (i >> 2) * 2 + (i & 1), rj = (j >> 2) * 2 + (j & 1);
            oracle(ri, rj) += s.amp[i] * std::conj(s.amp[j]);
        }
    CHECK((a.rho - oracle).norm() < 1e-12);
}

TEST_CASE("channels: completeness, Choi and composition") {
    Rng rng(5);
    CPTPMap m = random_cptp(4, 3, rng);
    CHECK(m.completeness_error() < 1e-12);
    CMat c = choi(m);
    // trace over the output factor of the Choi matrix is the identity
    CMat tr_out = CMat::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) tr_out(i, j) += c(i * 4 + k, j * 4 + k);
    CHECK((tr_out - CMat::Identity(4, 4)).norm() < 1e-12);
    CPTPMap u = CPTPMap::unitary(random_unitary(4, rng));
    CMat rho = random_density(4, rng);
    CHECK((apply_channel(compose(u, m), rho) - apply_channel(u, apply_channel(m, rho))).norm() < 1e-12);
    CPTPMap bad;
    bad.kraus = {2 * CMat::Identity(2, 2)};
    CHECK_THROWS(bad.check());
}

TEST_CASE("distances against closed forms") {
    CHECK(tv_distance(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}) == doctest::Approx(0.5));
    CHECK(hellinger2({1, 0}, {0.5, 0.5}) == doctest::Approx(1 - std::sqrt(0.5)));
    Distribution a{{0, 0.25}, {3, 0.75}}, b{{3, 0.75}, {1, 0.25}};
    CHECK(tv_distance(a, b) == doctest::Approx(0.25));
    // pure states: trace distance = sqrt(1 − |⟨ψ|φ⟩|²)
    CMat r0 = CMat::Zero(2, 2), rp = CMat::Constant(2, 2, 0.5);
    r0(0, 0) = 1;
    CHECK(trace_distance(r0, rp) == doctest::Approx(std::sqrt(0.5)));
    CHECK(bitstring(0b011, 3) == "110");
}

TEST_CASE("measurement distributions in mixed bases") {
    const double h = 1 / std::sqrt(2.0);
    QState bell = QState::from_amplitudes(qubits(2), {h, 0, 0, h});
    auto zz = exact_measurement_distribution(bell, {"t0", "t1"}, {Basis::Standard, Basis::Standard});
    CHECK(zz[0] == doctest::Approx(0.5));
    CHECK(zz[3] == doctest::Approx(0.5));
    auto xx = exact_measurement_distribution(bell, {"t0", "t1"}, {Basis::Hadamard, Basis::Hadamard});
    CHECK(xx[0] == doctest::Approx(0.5));
    CHECK(xx[3] == doctest::Approx(0.5));
    auto zx = exact_measurement_distribution(bell, {"t0", "t1"}, {Basis::Standard, Basis::Hadamard});
    for (u64 k = 0; k < 4; ++k) CHECK(zx[k] == doctest::Approx(0.25));
    auto d = exact_measurement_distribution(DensityOp::from_state(bell), {"t1"}, {Basis::Standard});
    CHECK(d[1] == doctest::Approx(0.5));
}

TEST_CASE("Pauli decomposition recomposes and factor moves invert") {
    Rng rng(6);
    CMat K = random_unitary(8, rng);
    CHECK((pauli_recompose(pauli_decompose(K)) - K).norm() < 1e-12);
    std::vector<u64> dims{2, 2, 2};
    CMat moved = move_factor_to_front(K, dims, 2);
    CHECK((move_front_factor_to(moved, dims, 2) - K).norm() < 1e-12);
    // oracle: X on factor 2 moved to the front is X on factor 0
    CMat x2 = kron_all({gate_i(), gate_i(), gate_x()});
    CMat x0 = kron_all({gate_x(), gate_i(), gate_i()});
    CHECK((move_factor_to_front(x2, dims, 2) - x0).norm() < 1e-12);
}

TEST_CASE("Z twirl identities hold and the sign-error control breaks them") {
    Rng rng(7);
    for (int dim : {2, 4, 8}) {
        CPTPMap m = random_cptp(dim, 4, rng);
        CHECK(z_twirl_check(m, 5, rng).max() < 1e-10);
        CHECK(z_twirl_check(m, 5, rng, true).max() > 1e-6);
    }
    // oracle: {H, ZHZ}/√2 sends |0⟩⟨0| to the even mixture of |+⟩ and |−⟩
    CMat rho = CMat::Zero(2, 2);
    rho(0, 0) = 1;
    CMat out = apply_channel(z_twirl(CPTPMap::unitary(gate_h()), {2}, 0), rho);
    CHECK((out - 0.5 * CMat::Identity(2, 2)).norm() < 1e-15);
    CHECK(z_twirl(CPTPMap::identity(4), {2, 2}, 1).completeness_error() < 1e-12);
    CHECK(x_trivialize(random_cptp(4, 2, rng), {2, 2}, 0).completeness_error() < 1e-12);
}

TEST_CASE("commitment marginal sums to one over every y") {
    Rng rng(8);
    KeyPair kp = sim5_key(rng);
    RegisterLayout L = qubits(1);
    QState psi = QState::from_amplitudes(L, {std::sqrt(0.3), std::sqrt(0.7)});
    CommitSpec spec{&kp.pk, 0.5, "t0", "x0"};
    double total = 0;
    for (u64 i = 0; i < 625; ++i) total += commit_marginal(psi, spec, vec_from_index(i, 4, 5));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    auto branches = commit_branches(psi, spec);
    double bt = 0;
    for (auto& b : branches) {
        bt += b.probability;
        CHECK(b.probability == doctest::Approx(commit_marginal(psi, spec, b.y)));
        CHECK(commit_post_state(psi, spec, b.y).norm2() == doctest::Approx(b.probability));
    }
    CHECK(bt == doctest::Approx(1.0));
}

TEST_CASE("commitment collapses onto a claw") {
    Rng rng(9);
    KeyPair kp = sim5_key(rng);
    const double h = 1 / std::sqrt(2.0);
    QState plus = QState::from_amplitudes(qubits(1), {h, h});
    CommitSpec spec{&kp.pk, 0.5, "t0", "x0"};
    for (CommitMode mode : {CommitMode::Dense, CommitMode::Lazy}) {
        CommitResult r = samp_commit(plus, spec, rng, mode);
        CHECK(r.state.norm2() == doctest::Approx(1.0));
        auto claw = claw_of(kp.td, r.y);
        REQUIRE(claw.has_value());
        auto m = marginal(r.state, {"t0", "x0"});
        CHECK(m[0 * 5 + claw->first[0]] == doctest::Approx(0.5));
        CHECK(m[1 * 5 + claw->second[0]] == doctest::Approx(0.5));
    }
}

TEST_CASE("U_J relabel and Hadamard-round measurement") {
    Rng rng(10);
    RegisterLayout L;
    L.add("t0", 2);
    L.add("x0", 5);
    QState s = QState::basis(L, {0, 3});
    apply_u_j(s, "x0", 1, 5);
    CHECK(s.layout.dim_of({"x0"}) == 8);
    CHECK(marginal(s, {"x0"})[j_index({3}, 5)] == doctest::Approx(1.0));
    QState back = s;
    apply_u_j_inverse(back, "x0", 1, 5);
    CHECK(marginal(back, {"x0"})[3] == doctest::Approx(1.0));
    int ones = 0;
    for (int i = 0; i < 200; ++i) {
        QState c = s;
        ones += hadamard_round_measure(c, "t0", "x0", rng).bprime;
    }
    CHECK(std::abs(ones / 200.0 - 0.5) < 3 * std::sqrt(0.25 / 200));
}
