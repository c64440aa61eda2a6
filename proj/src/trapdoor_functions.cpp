#include "cvqc/trapdoor_functions.hpp"

#include <cmath>

namespace cvqc {

const char* key_kind_name(KeyKind k) { return k == KeyKind::ClawFree ? "claw_free" : "injective"; }

double claw_radius(const Params& p, bool zero_noise) {
    const double bp = std::floor(p.B_P);
    const double bv = zero_noise ? 0.0 : std::floor(p.B_V);
    return std::sqrt(static_cast<double>(p.m)) * (bp + bv);
}

static MatrixTrapdoor key_trapdoor(const Params& p, Rng& rng, const KeyOptions& opt) {
    check_structure(p);
    TrapOptions to;
    to.C_T = p.C_T;
    to.certify_radius = opt.certify ? claw_radius(p, opt.zero_noise) : 0.0;
    return gen_trap(p.n, p.m, p.q, rng, to);
}

KeyPair gen_f_with(const Params& p, Rng& rng, const ZqVector& s, const ZqVector& e, const KeyOptions& opt) {
    if (static_cast<int>(s.size()) != p.n || static_cast<int>(e.size()) != p.m)
        throw InputError("gen_f_with: secret or noise has wrong length");
    KeyPair kp;
    kp.td.kind = KeyKind::ClawFree;
    kp.td.mt = key_trapdoor(p, rng, opt);
    kp.td.s = s;
    kp.td.e = e;
    kp.td.B_P = p.B_P;
    kp.pk.A = kp.td.mt.A;
    kp.pk.q = p.q;
    kp.pk.t = vec_add(mat_vec(kp.pk.A, s, p.q), e, p.q);
    kp.td.pk = kp.pk;
    return kp;
}

KeyPair gen_f(const Params& p, Rng& rng, const KeyOptions& opt) {
    check_structure(p);
    ZqVector s(p.n);
    for (auto& b : s) b = rng.bit();
    ZqVector e = opt.zero_noise ? ZqVector(p.m, 0) : sample_gaussian_vec(p.m, p.B_V, p.q, rng);
    return gen_f_with(p, rng, s, e, opt);
}

KeyPair gen_g(const Params& p, Rng& rng, const KeyOptions& opt) {
    KeyPair kp;
    kp.td.kind = KeyKind::Injective;
    kp.td.mt = key_trapdoor(p, rng, opt);
    kp.td.B_P = p.B_P;
    kp.pk.A = kp.td.mt.A;
    kp.pk.q = p.q;
    for (int attempt = 0; attempt < 64; ++attempt) {
        ZqVector u = uniform_vector(p.m, p.q, rng);
        if (!invert(kp.td.mt, u)) {
            kp.pk.t = u;
            kp.td.pk = kp.pk;
            return kp;
        }
    }
    throw GenerationError("gen_g: every sampled u was invertible after 64 attempts");
}

ShiftedDensity density_f(const Trapdoor& td, int b, const ZqVector& x) {
    const i64 q = td.pk.q;
    ZqVector c = mat_vec(td.pk.A, x, q);
    if (b) c = vec_add(c, mat_vec(td.pk.A, td.s, q), q);
    return ShiftedDensity{GaussDensity(td.B_P, q), c};
}

ShiftedDensity density_public(const PublicKey& pk, double B_P, int b, const ZqVector& x) {
    ZqVector c = mat_vec(pk.A, x, pk.q);
    if (b) c = vec_add(c, pk.t, pk.q);
    return ShiftedDensity{GaussDensity(B_P, pk.q), c};
}

bool chk(const PublicKey& pk, double B_P, int b, const ZqVector& x, const ZqVector& y) {
    if (static_cast<int>(x.size()) != pk.A.cols || static_cast<int>(y.size()) != pk.A.rows) return false;
    ZqVector c = mat_vec(pk.A, x, pk.q);
    for (std::size_t i = 0; i < y.size(); ++i) {
        i64 r = y[i] - c[i] - (b ? pk.t[i] : 0);
        if (static_cast<double>(abs_q(r, pk.q)) > B_P) return false;
    }
    return true;
}

std::optional<ZqVector> inv_f(const Trapdoor& td, int b, const ZqVector& y) {
    const i64 q = td.pk.q;
    ZqVector target = b ? vec_sub(y, mat_vec(td.pk.A, td.s, q), q) : y;
    auto r = invert(td.mt, target);
    if (!r) return std::nullopt;
    return r->s;
}

std::optional<std::pair<int, ZqVector>> inv_g(const Trapdoor& td, const ZqVector& y) {
    const i64 q = td.pk.q;
    if (auto r = invert(td.mt, y); r && chk(td.pk, td.B_P, 0, r->s, y)) return std::make_pair(0, r->s);
    if (auto r = invert(td.mt, vec_sub(y, td.pk.t, q)); r && chk(td.pk, td.B_P, 1, r->s, y))
        return std::make_pair(1, r->s);
    return std::nullopt;
}

std::optional<std::pair<ZqVector, ZqVector>> claw_of(const Trapdoor& td, const ZqVector& y) {
    auto x0 = inv_f(td, 0, y);
    if (!x0) return std::nullopt;
    auto x1 = inv_f(td, 1, y);
    if (!x1) return std::nullopt;
    return std::make_pair(*x0, *x1);
}

// ---- J map ------------------------------------------------------------------

Bits j_map(const ZqVector& x, i64 q) {
    const int k = coord_bits(q);
    Bits out(x.size() * k);
    for (std::size_t j = 0; j < x.size(); ++j)
        for (int i = 0; i < k; ++i) out[j * k + i] = static_cast<int>((x[j] >> i) & 1);
    return out;
}

ZqVector j_inv(const Bits& bits, int n, i64 q) {
    const int k = coord_bits(q);
    if (static_cast<int>(bits.size()) != n * k) throw DecodeError("j_inv: bit string has wrong length");
    ZqVector x(n, 0);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < k; ++i) {
            if (bits[j * k + i] != 0 && bits[j * k + i] != 1) throw DecodeError("j_inv: non-binary entry");
            x[j] |= static_cast<i64>(bits[j * k + i]) << i;
        }
        if (x[j] >= q) throw DecodeError("j_inv: block value " + std::to_string(x[j]) + " is not below q");
    }
    return x;
}

std::uint64_t j_index(const ZqVector& x, i64 q) {
    const int k = coord_bits(q);
    std::uint64_t idx = 0;
    for (std::size_t j = 0; j < x.size(); ++j) idx |= static_cast<std::uint64_t>(x[j]) << (j * k);
    return idx;
}

ZqVector j_index_inv(std::uint64_t idx, int n, i64 q) {
    const int k = coord_bits(q);
    const std::uint64_t mask = (std::uint64_t{1} << k) - 1;
    ZqVector x(n);
    for (int j = 0; j < n; ++j) {
        x[j] = static_cast<i64>((idx >> (j * k)) & mask);
        if (x[j] >= q) throw DecodeError("j_index_inv: block value is not below q");
    }
    return x;
}

std::uint64_t bits_to_mask(const Bits& b) {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i]) m |= std::uint64_t{1} << i;
    return m;
}

Bits mask_to_bits(std::uint64_t m, int w) {
    Bits b(w);
    for (int i = 0; i < w; ++i) b[i] = static_cast<int>((m >> i) & 1);
    return b;
}

std::optional<int> hadamard_decode_bit(const Trapdoor& td, const ZqVector& y, const Bits& d) {
    const i64 q = td.pk.q;
    if (static_cast<int>(d.size()) != td.pk.A.cols * coord_bits(q))
        throw InputError("hadamard_decode_bit: d has wrong length");
    auto claw = claw_of(td, y);
    if (!claw) return std::nullopt;
    return parity(bits_to_mask(d) & (j_index(claw->first, q) ^ j_index(claw->second, q)));
}

Bits embed_dhat(const Bits& dhat, i64 q) {
    const int k = coord_bits(q);
    Bits out(dhat.size() * k, 0);
    for (std::size_t j = 0; j < dhat.size(); ++j) out[j * k] = dhat[j];
    return out;
}

// ---- G_{k,b,x} predicate ------------------------------------------------------

GSetPredicate g_set_all_true() {
    return [](const Trapdoor&, int, const ZqVector&, const Bits&) { return true; };
}

GSetPredicate g_set_reject_zero() {
    return [](const Trapdoor&, int, const ZqVector&, const Bits& d) {
        for (int v : d)
            if (v) return true;
        return false;
    };
}

GSetPredicate g_set_by_name(const std::string& name) {
    if (name == "all_true") return g_set_all_true();
    if (name == "reject_zero") return g_set_reject_zero();
    throw ConfigError("unknown G-set predicate: " + name);
}

bool g_set_member(const GSetPredicate& pred, const Trapdoor& td, int b, const ZqVector& x, const Bits& d) {
    return pred(td, b, x, d);
}

nlohmann::json public_key_to_json(const PublicKey& pk) {
    return nlohmann::json{{"q", pk.q}, {"A", matrix_to_json(pk.A)}, {"t", pk.t}};
}

PublicKey public_key_from_json(const nlohmann::json& j) {
    PublicKey pk;
    pk.q = j.at("q").get<i64>();
    pk.A = matrix_from_json(j.at("A"));
    pk.t = j.at("t").get<ZqVector>();
    return pk;
}

}  // namespace cvqc
