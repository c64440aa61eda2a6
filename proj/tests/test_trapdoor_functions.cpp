#include "cvqc/trapdoor_functions.hpp"
#include "doctest.h"

using namespace cvqc;

namespace {

ZqVector shift(const PublicKey& pk, const ZqVector& x, int b, const ZqVector& eta) {
    ZqVector y = vec_add(mat_vec(pk.A, x, pk.q), eta, pk.q);
    return b ? vec_add(y, pk.t, pk.q) : y;
}

}  // namespace

TEST_CASE("claw-free keys: t = A·s + e with binary s") {
    Params p = builtin_preset("proto");
    Rng rng(2);
    for (int i = 0; i < 10; ++i) {
        KeyPair kp = gen_f(p, rng);
        CHECK(kp.td.kind == KeyKind::ClawFree);
        CHECK((kp.td.s[0] == 0 || kp.td.s[0] == 1));
        CHECK(vec_add(mat_vec(kp.pk.A, kp.td.s, p.q), kp.td.e, p.q) == kp.pk.t);
        for (i64 v : kp.td.e) CHECK(abs_q(v, p.q) <= 4);
    }
    KeyOptions zero;
    zero.zero_noise = true;
    KeyPair kz = gen_f(p, rng, zero);
    CHECK(kz.pk.t == mat_vec(kz.pk.A, kz.td.s, p.q));
}

TEST_CASE("claws decode to x0 − x1 = s and both preimages pass chk") {
    Params p = builtin_preset("proto");
    Rng rng(3);
    KeyOptions zero;
    zero.zero_noise = true;
    for (int i = 0; i < 20; ++i) {
        KeyPair kp = gen_f_with(p, rng, {1}, ZqVector(p.m, 0), zero);
        ZqVector x1 = uniform_vector(1, p.q, rng);
        ZqVector eta = sample_gaussian_vec(p.m, p.B_P, p.q, rng);
        ZqVector y = shift(kp.pk, x1, 1, eta);
        auto claw = claw_of(kp.td, y);
        REQUIRE(claw.has_value());
        CHECK(claw->second == x1);
        CHECK(vec_sub(claw->first, claw->second, p.q) == kp.td.s);
        CHECK(chk(kp.pk, p.B_P, 0, claw->first, y));
        CHECK(chk(kp.pk, p.B_P, 1, claw->second, y));
        CHECK_FALSE(chk(kp.pk, p.B_P, 0, claw->second, y));
    }
}

TEST_CASE("chk is a box test on y − A·x − b·t") {
    Params p = builtin_preset("proto");
    Rng rng(4);
    KeyPair kp = gen_f(p, rng);
    ZqVector x = {5};
    ZqVector eta(p.m, 0);
    eta[0] = 8;
    CHECK(chk(kp.pk, p.B_P, 0, x, shift(kp.pk, x, 0, eta)));
    eta[0] = 9;
    CHECK_FALSE(chk(kp.pk, p.B_P, 0, x, shift(kp.pk, x, 0, eta)));
    CHECK_FALSE(chk(kp.pk, p.B_P, 0, {1, 2}, shift(kp.pk, x, 0, eta)));
}

TEST_CASE("injective keys decode (b, x) from y") {
    Params p = builtin_preset("proto");
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        KeyPair kp = gen_g(p, rng);
        CHECK(kp.td.kind == KeyKind::Injective);
        CHECK_FALSE(invert(kp.td.mt, kp.pk.t).has_value());
        for (int b = 0; b < 2; ++b) {
            ZqVector x = uniform_vector(1, p.q, rng);
            ZqVector y = shift(kp.pk, x, b, sample_gaussian_vec(p.m, p.B_P, p.q, rng));
            auto r = inv_g(kp.td, y);
            REQUIRE(r.has_value());
            CHECK(r->first == b);
            CHECK(r->second == x);
        }
    }
}

TEST_CASE("toy preset cannot host injective keys") {
    Rng rng(1);
    CHECK_THROWS_AS(gen_g(builtin_preset("toy"), rng), GenerationError);
}

TEST_CASE("J map is LSB-first per coordinate") {
    const i64 q = 5;
    CHECK(j_map({3}, q) == Bits{1, 1, 0});
    CHECK(j_map({4, 1}, q) == Bits{0, 0, 1, 1, 0, 0});
    CHECK(j_inv({0, 0, 1, 1, 0, 0}, 2, q) == ZqVector{4, 1});
    CHECK(j_index({4, 1}, q) == 0b001100);
    CHECK(j_index_inv(0b001100, 2, q) == ZqVector{4, 1});
    CHECK_THROWS_AS(j_inv({1, 0, 1}, 1, q), DecodeError);  // 5 is not below q
    CHECK_THROWS_AS(j_inv({1, 0}, 1, q), DecodeError);
    CHECK_THROWS_AS(j_index_inv(7, 1, q), DecodeError);
    for (i64 x = 0; x < 17; ++x) CHECK(j_inv(j_map({x}, 17), 1, 17) == ZqVector{x});
    CHECK(bits_to_mask({1, 0, 1}) == 5);
    CHECK(mask_to_bits(5, 4) == Bits{1, 0, 1, 0});
    CHECK(embed_dhat({1, 1}, 5) == Bits{1, 0, 0, 1, 0, 0});
}

TEST_CASE("Hadamard decode bit equals d·(J(x0) ⊕ J(x1))") {
    Params p = builtin_preset("proto");
    Rng rng(6);
    KeyOptions zero;
    zero.zero_noise = true;
    KeyPair kp = gen_f_with(p, rng, {1}, ZqVector(p.m, 0), zero);
    for (int t = 0; t < 20; ++t) {
        ZqVector x0 = uniform_vector(1, p.q, rng);
        ZqVector y = shift(kp.pk, x0, 0, ZqVector(p.m, 0));
        Bits d(p.w);
        for (auto& v : d) v = rng.bit();
        ZqVector x1 = vec_sub(x0, kp.td.s, p.q);
        Bits j0 = j_map(x0, p.q), j1 = j_map(x1, p.q);
        int expect = 0;
        for (int i = 0; i < p.w; ++i) expect ^= d[i] & (j0[i] ^ j1[i]);
        auto bit = hadamard_decode_bit(kp.td, y, d);
        REQUIRE(bit.has_value());
        CHECK(*bit == expect);
    }
    CHECK_THROWS_AS(hadamard_decode_bit(kp.td, ZqVector(p.m, 0), Bits(3, 0)), InputError);
}

TEST_CASE("G-set predicates") {
    Trapdoor td;
    CHECK(g_set_member(g_set_all_true(), td, 0, {0}, {0, 0, 0}));
    CHECK_FALSE(g_set_member(g_set_reject_zero(), td, 0, {0}, {0, 0, 0}));
    CHECK(g_set_member(g_set_by_name("reject_zero"), td, 0, {0}, {0, 1, 0}));
    CHECK_THROWS_AS(g_set_by_name("everything"), ConfigError);
}

TEST_CASE("densities: f and f′ share their center at e = 0") {
    Params p = builtin_preset("proto");
    Rng rng(7);
    KeyOptions zero;
    zero.zero_noise = true;
    KeyPair kp = gen_f(p, rng, zero);
    ZqVector x = {10};
    ShiftedDensity f = density_f(kp.td, 1, x);
    ShiftedDensity fp = density_f_prime(kp.pk, p.B_P, 1, x);
    CHECK(f.center == fp.center);
    CHECK(f(f.center) > 0);
    CHECK(key_kind_name(KeyKind::Injective) == std::string("injective"));
}

TEST_CASE("public key JSON round trip") {
    Rng rng(8);
    KeyPair kp = gen_f(builtin_preset("proto"), rng);
    PublicKey back = public_key_from_json(public_key_to_json(kp.pk));
    CHECK(back.A == kp.pk.A);
    CHECK(back.t == kp.pk.t);
    CHECK(back.q == kp.pk.q);
}
