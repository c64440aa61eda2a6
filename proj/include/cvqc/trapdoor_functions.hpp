// trapdoor_functions.hpp -- the LWE claw-free family F and injective family G.
#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "cvqc/lattice.hpp"

namespace cvqc {

enum class KeyKind { ClawFree, Injective };

const char* key_kind_name(KeyKind k);

// The public part of either kind: (A, t) with t = A·s + e for claw-free keys
// and t = u for injective keys. The two kinds have the same layout.
struct PublicKey {
    ZqMatrix A;
    ZqVector t;
    i64 q = 0;
};

struct Trapdoor {
    KeyKind kind = KeyKind::ClawFree;
    PublicKey pk;
    MatrixTrapdoor mt;
    ZqVector s;  // binary secret (claw-free only)
    ZqVector e;  // noise of t (claw-free only)
    double B_P = 0;
};

struct KeyPair {
    PublicKey pk;
    Trapdoor td;
};

struct KeyOptions {
    bool zero_noise = false;  // force e = 0
    bool certify = true;      // certify unique decoding at the claw radius
};

// Radius up to which inversion must be unique for claws to decode:
// sqrt(m)·(⌊B_P⌋ + ⌊B_V⌋).
double claw_radius(const Params& p, bool zero_noise = false);

KeyPair gen_f(const Params& p, Rng& rng, const KeyOptions& opt = {});
KeyPair gen_g(const Params& p, Rng& rng, const KeyOptions& opt = {});
// Builds a claw-free key from an explicit secret and noise on a fresh trapdoor.
KeyPair gen_f_with(const Params& p, Rng& rng, const ZqVector& s, const ZqVector& e, const KeyOptions& opt = {});

// Truncated Gaussian over Z_q^m centered at `center`.
struct ShiftedDensity {
    GaussDensity g;
    ZqVector center;
    double operator()(const ZqVector& y) const { return g.density(y, center); }
};

// f_{k,b}(x): center A·x + b·A·s (needs the trapdoor's secret).
ShiftedDensity density_f(const Trapdoor& td, int b, const ZqVector& x);
// f'_{k,b}(x) and g_{k,b}(x): center A·x + b·t, public key only.
ShiftedDensity density_public(const PublicKey& pk, double B_P, int b, const ZqVector& x);
inline ShiftedDensity density_f_prime(const PublicKey& pk, double B_P, int b, const ZqVector& x) {
    return density_public(pk, B_P, b, x);
}
inline ShiftedDensity density_g(const PublicKey& pk, double B_P, int b, const ZqVector& x) {
    return density_public(pk, B_P, b, x);
}

// True iff every coordinate of y − A·x − b·t has |·| ≤ B_P.
bool chk(const PublicKey& pk, double B_P, int b, const ZqVector& x, const ZqVector& y);

// x with y ∈ Supp f'_{k,b}(x): invert(y − b·A·s).
std::optional<ZqVector> inv_f(const Trapdoor& td, int b, const ZqVector& y);
// Unique (b, x) whose residual passes chk.
std::optional<std::pair<int, ZqVector>> inv_g(const Trapdoor& td, const ZqVector& y);
// (inv_f(0, y), inv_f(1, y)); on success x0 − x1 = s.
std::optional<std::pair<ZqVector, ZqVector>> claw_of(const Trapdoor& td, const ZqVector& y);

// ---- J map ------------------------------------------------------------------

using Bits = std::vector<int>;

// Bits per coordinate, ⌈log2 q⌉.
inline int coord_bits(i64 q) { return ceil_log2(q); }

// LSB-first per coordinate block.
Bits j_map(const ZqVector& x, i64 q);
ZqVector j_inv(const Bits& bits, int n, i64 q);
// J(x) packed as an integer with bit j·⌈log2 q⌉ + i holding bit i of x_j.
std::uint64_t j_index(const ZqVector& x, i64 q);
ZqVector j_index_inv(std::uint64_t idx, int n, i64 q);

std::uint64_t bits_to_mask(const Bits& b);
Bits mask_to_bits(std::uint64_t m, int w);
inline int parity(std::uint64_t v) { return __builtin_popcountll(v) & 1; }

// d·(J(x0) ⊕ J(x1)) mod 2 for the claw of y.
std::optional<int> hadamard_decode_bit(const Trapdoor& td, const ZqVector& y, const Bits& d);

// d̂ placed at the least significant bit of each coordinate block.
Bits embed_dhat(const Bits& dhat, i64 q);

// ---- G_{k,b,x} predicate ------------------------------------------------------

using GSetPredicate = std::function<bool(const Trapdoor&, int b, const ZqVector& x, const Bits& d)>;

GSetPredicate g_set_all_true();
GSetPredicate g_set_reject_zero();
GSetPredicate g_set_by_name(const std::string& name);
bool g_set_member(const GSetPredicate& pred, const Trapdoor& td, int b, const ZqVector& x, const Bits& d);

nlohmann::json public_key_to_json(const PublicKey& pk);
PublicKey public_key_from_json(const nlohmann::json& j);

}  // namespace cvqc
