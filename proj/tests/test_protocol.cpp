#include <cmath>
#include <cstdio>

#include "cvqc/harness.hpp"
#include "cvqc/protocol.hpp"
#include "doctest.h"

using namespace cvqc;

namespace {

SessionConfig exact_cfg() {
    SessionConfig cfg;
    cfg.params = builtin_preset("sim5");
    cfg.key_opt.zero_noise = true;
    return cfg;
}

SessionConfig proto_cfg() {
    SessionConfig cfg;
    cfg.params = builtin_preset("proto");
    return cfg;
}

double prob(const Distribution& d, u64 k) {
    auto it = d.find(k);
    return it == d.end() ? 0.0 : it->second;
}

}  // namespace

TEST_CASE("bit strings and round names") {
    CHECK(parse_bits("101") == Bits{1, 0, 1});
    CHECK(bits_string({0, 1, 1}) == "011");
    CHECK_THROWS_AS(parse_bits("12"), InputError);
    CHECK(round_from_name("test") == RoundType::Test);
    CHECK(round_from_name("hadamard") == RoundType::Hadamard);
    CHECK(round_from_name("coin") == RoundType::RandomCoin);
    CHECK(std::string(round_name(RoundType::Hadamard)) == "hadamard");
    CHECK_THROWS_AS(round_from_name("sideways"), InputError);
}

TEST_CASE("prover construction") {
    ProverSpec p = honest_prover(named_state("bell"));
    CHECK(p.n_qubits() == 2);
    CHECK(p.committed_names() == std::vector<std::string>{"q0", "q1"});
    ProverSpec c = honest_copies(named_state("bell"), 3);
    CHECK(c.blocks.size() == 3);
    CHECK(c.n_qubits() == 6);
    CHECK_THROWS_AS(named_state("sideways"), InputError);
    CHECK(attack_library().size() >= 5);
    CHECK_THROWS_AS(attacked_prover(named_state("zero"), "nope"), InputError);
    CHECK_THROWS(trivial_prover(named_state("zero"), CPTPMap::unitary(gate_h())));
}

TEST_CASE("X-triviality is commuting with standard-basis measurement") {
    CHECK(is_x_trivial(CPTPMap::unitary(gate_z()), {2}, {0}));
    CHECK_FALSE(is_x_trivial(CPTPMap::unitary(gate_x()), {2}, {0}));
    CHECK_FALSE(is_x_trivial(CPTPMap::unitary(gate_h()), {2}, {0}));
    CMat cz = CMat::Identity(4, 4);
    cz(3, 3) = -1;
    CHECK(is_x_trivial(CPTPMap::unitary(cz), {2, 2}, {0, 1}));
    Rng rng(1);
    CPTPMap any = random_cptp(4, 2, rng);
    CHECK(is_x_trivial(x_trivialize(any, {2, 2}, 0), {2, 2}, {0}));
}

TEST_CASE("honest prover: exact Hadamard-round distribution equals measuring ρ in the bases h") {
    SessionConfig cfg = exact_cfg();
    Rng rng(2);
    for (std::string st : {"zero", "one", "plus", "minus", "bell"}) {
        QState psi = named_state(st);
        const int n = static_cast<int>(psi.layout.size());
        for (u64 hm = 0; hm < (u64{1} << n); ++hm) {
            Bits h = mask_to_bits(hm, n);
            auto keys = exact_keys(h, cfg.params, rng);
            ExactDistribution ed = exact_distribution(honest_prover(psi), h, keys, cfg);
            CHECK(ed.accept_probability == doctest::Approx(1.0));
            CHECK(tv_distance(ed.DC, ideal_distribution(psi, h)) < 1e-9);
        }
    }
}

TEST_CASE("ideal distribution oracle") {
    auto d = ideal_distribution(named_state("bell"), Bits{0, 1});
    for (u64 k = 0; k < 4; ++k) CHECK(prob(d, k) == doctest::Approx(0.25));
    auto m = ideal_distribution(named_state("minus"), Bits{1});
    CHECK(prob(m, 1) == doctest::Approx(1.0));
}

TEST_CASE("attacks act as expected on the decoded output") {
    SessionConfig cfg = exact_cfg();
    Rng rng(3);
    QState plus = named_state("plus");
    auto keys = exact_keys({1}, cfg.params, rng);
    // a phase flip before the Hadamard measurement flips the decoded bit
    auto z = exact_distribution(attacked_prover(plus, "Z"), {1}, keys, cfg);
    CHECK(prob(z.DC, 1) == doctest::Approx(1.0));
    // X on the committed qubit only changes a global phase of the Hadamard outcome
    auto x = exact_distribution(attacked_prover(plus, "X"), {1}, keys, cfg);
    CHECK(prob(x.DC, 0) == doctest::Approx(1.0));
    // standard-basis output comes from the injective commitment and ignores the attack
    auto keys0 = exact_keys({0}, cfg.params, rng);
    auto x0 = exact_distribution(attacked_prover(named_state("zero"), "X"), {0}, keys0, cfg);
    CHECK(prob(x0.DC, 0) == doctest::Approx(1.0));
}

TEST_CASE("X-trivializing a standard-basis qubit leaves the distribution unchanged") {
    SessionConfig cfg = exact_cfg();
    Rng rng(4);
    QState bell = named_state("bell");
    for (std::string a : {"H", "U2", "CZ_aux"}) {
        ProverSpec p = attacked_prover(bell, a);
        Bits h{0, 1};
        auto keys = exact_keys(h, cfg.params, rng);
        auto d = exact_distribution(p, h, keys, cfg);
        auto t = exact_distribution(x_trivialize_prover(p, 0), h, keys, cfg);
        CHECK(tv_distance(d.D, t.D) < 1e-9);
    }
}

TEST_CASE("Z-twirling a Hadamard-basis qubit leaves the distribution unchanged") {
    SessionConfig cfg = exact_cfg();
    Rng rng(5);
    ProverSpec p = attacked_prover(named_state("plus"), "U2");
    Bits h{1};
    auto keys = exact_keys(h, cfg.params, rng);
    auto d = exact_distribution(p, h, keys, cfg);
    auto t = exact_distribution(z_twirl_prover(p, 0), h, keys, cfg);
    CHECK(tv_distance(d.D, t.D) < 1e-9);
}

TEST_CASE("underlying state of an honest prover is its input") {
    SessionConfig cfg = exact_cfg();
    Rng rng(6);
    for (std::string st : {"plus", "bell"}) {
        QState psi = named_state(st);
        const int n = static_cast<int>(psi.layout.size());
        Bits h(n, 1);
        auto keys = exact_keys(h, cfg.params, rng, true);
        DensityOp rho = construct_underlying_state(honest_prover(psi), h, keys, HybridVariant::Full, cfg);
        CHECK(trace_distance(rho.rho, DensityOp::from_state(psi).rho) < 1e-9);
    }
}

TEST_CASE("verifier accepts honest answers and rejects a wrong preimage") {
    SessionConfig cfg = proto_cfg();
    Rng rng(7);
    Bits h{0, 1};
    auto keys = verifier_keygen(h, cfg.params, rng);
    CHECK(keys[0].td.kind == KeyKind::Injective);
    CHECK(keys[1].td.kind == KeyKind::ClawFree);
    Transcript t = run_session(honest_prover(named_state("bell")), h, RoundType::Test, cfg, 11);
    CHECK(t.accept);
    Rng kr(t.verifier_seed);
    auto tkeys = verifier_keygen(h, cfg.params, kr);
    Rng vr(1);
    Verdict v = verify_answers(tkeys, h, RoundType::Test, t.y, t.answers, g_set_all_true(), vr);
    CHECK(v.accept);
    auto bad = t.answers;
    bad[1].x[0] = mod_q(bad[1].x[0] + 1, cfg.params.q);
    Verdict w = verify_answers(tkeys, h, RoundType::Test, t.y, bad, g_set_all_true(), vr);
    CHECK_FALSE(w.accept);
    CHECK(w.qubit_ok[0] == 1);
    CHECK(w.qubit_ok[1] == 0);
}

TEST_CASE("sessions are deterministic in the seed and replay") {
    SessionConfig cfg = proto_cfg();
    ProverSpec p = honest_prover(named_state("plus"));
    Transcript a = run_session(p, {1}, RoundType::RandomCoin, cfg, 99);
    Transcript b = run_session(p, {1}, RoundType::RandomCoin, cfg, 99);
    CHECK(a.round == b.round);
    CHECK(a.y == b.y);
    CHECK(a.accept == b.accept);
    CHECK(replay(a).ok());

    Transcript h = run_session(p, {1}, RoundType::Hadamard, cfg, 5);
    CHECK(h.accept);
    CHECK(replay(h).ok());
    Transcript tampered = h;
    tampered.m[0] ^= 1;
    CHECK_FALSE(replay(tampered).verdict_match);
    Transcript swapped = h;
    swapped.verifier_seed ^= 1;
    CHECK_FALSE(replay(swapped).keys_match);
}

TEST_CASE("transcript file round trip") {
    SessionConfig cfg = proto_cfg();
    ProverSpec p = honest_prover(named_state("bell"));
    std::vector<Transcript> ts;
    for (std::uint64_t s = 1; s <= 4; ++s) ts.push_back(run_session(p, {1, 0}, RoundType::RandomCoin, cfg, s));
    const std::string path = "test_protocol_transcripts.jsonl";
    write_transcripts(path, ts, cfg.params, 1);
    auto back = read_transcripts(path);
    REQUIRE(back.size() == ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        CHECK(back[i].session_id == ts[i].session_id);
        CHECK(back[i].round == ts[i].round);
        CHECK(back[i].y == ts[i].y);
        CHECK(back[i].accept == ts[i].accept);
        CHECK(replay(back[i]).ok());
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_transcripts("/nonexistent/t.jsonl"), InputError);
}

TEST_CASE("empirical distribution matches the ideal one within 3 sigma") {
    SessionConfig cfg = proto_cfg();
    const int trials = 400;
    auto e = estimate_distribution(honest_prover(named_state("plus")), {0}, cfg, trials, 13);
    CHECK(e.accepted == e.trials);
    const double f = prob(e.DC, 1);
    CHECK(std::abs(f - 0.5) <= 3 * std::sqrt(0.25 / e.accepted));
}
