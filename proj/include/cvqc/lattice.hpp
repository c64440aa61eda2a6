// lattice.hpp -- Z_q arithmetic, truncated discrete Gaussians, gadget
// trapdoors with a brute-force reference inverter, and the lossy sampler.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvqc/common.hpp"

namespace cvqc {

using i64 = std::int64_t;
using ZqVector = std::vector<i64>;

// Row-major matrix over Z_q, entries canonical in [0, q).
struct ZqMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<i64> data;

    ZqMatrix() = default;
    ZqMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0) {}

    i64& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    i64 at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    bool operator==(const ZqMatrix&) const = default;
};

// ---- Z_q arithmetic ---------------------------------------------------------

inline i64 mod_q(i64 x, i64 q) {
    i64 r = x % q;
    return r < 0 ? r + q : r;
}

// Signed representative in (-q/2, q/2].
inline i64 signed_rep(i64 x, i64 q) {
    i64 r = mod_q(x, q);
    return 2 * r > q ? r - q : r;
}

inline i64 abs_q(i64 x, i64 q) {
    i64 s = signed_rep(x, q);
    return s < 0 ? -s : s;
}

bool is_prime(i64 q);
int ceil_log2(i64 q);

ZqVector mat_vec(const ZqMatrix& A, const ZqVector& x, i64 q);
ZqVector vec_add(const ZqVector& a, const ZqVector& b, i64 q);
ZqVector vec_sub(const ZqVector& a, const ZqVector& b, i64 q);
ZqVector vec_scale(const ZqVector& a, i64 c, i64 q);
// Squared Euclidean norm of the signed representatives.
i64 sq_norm(const ZqVector& v, i64 q);
double norm(const ZqVector& v, i64 q);

// Mixed-radix index of x in Z_q^n, coordinate j weighted by q^j.
std::uint64_t vec_index(const ZqVector& x, i64 q);
ZqVector vec_from_index(std::uint64_t idx, int n, i64 q);
std::uint64_t ipow(i64 base, int exp);

ZqMatrix uniform_matrix(int rows, int cols, i64 q, Rng& rng);
ZqVector uniform_vector(int n, i64 q, Rng& rng);

// ---- Parameters -------------------------------------------------------------

struct Params {
    int lambda = 1;
    int l = 1;
    int n = 1;
    int m = 4;
    int w = 3;
    i64 q = 5;
    double B_L = 2;
    double B_V = 4;
    double B_P = 8;
    double C_T = 1.0;
    double R = 2.0;  // minimum ratio between consecutive noise bounds

    bool operator==(const Params&) const = default;
};

struct Violation {
    std::string name;
    std::string message;
};

// Every invariant of the parameter tuple, each reported by name:
// prime_modulus, positive_dims, bit_length, noise_floor, noise_order,
// inversion_bound, ratio.
std::vector<Violation> validate(const Params& p);

// Lighter check enforced by key generation: prime q ≥ 3, positive dims and
// bounds, and enough rows for the gadget. Throws ParamError.
void check_structure(const Params& p);

Params find_params(const std::vector<i64>& q_candidates, int n, int m, double R, double C_T);
std::vector<i64> primes_below(i64 bound);

// q / (C_T·sqrt(n·log2 q)).
double inversion_radius(i64 q, int n, double C_T);

nlohmann::json params_to_json(const Params& p);
Params params_from_json(const nlohmann::json& j);
Params load_params(const std::string& path);
// Shipped presets: toy, proto, sim5 (a simulation-only preset that fails
// the noise_floor rule). Throws InputError for other names.
Params builtin_preset(const std::string& name);
std::vector<std::string> builtin_preset_names();
// FNV-1a over the canonical JSON dump.
std::string params_hash(const Params& p);

// ---- Truncated discrete Gaussian ---------------------------------------------

// Per-coordinate density D_{Z_q,B}: proportional to exp(-pi|x|^2/B^2) on
// {x : |x| ≤ B}, zero elsewhere.
struct GaussDensity {
    i64 q = 0;
    double B = 0;
    double normalizer = 0;
    std::vector<double> table;  // indexed by |x|

    GaussDensity() = default;
    GaussDensity(double B, i64 q);

    double operator()(i64 x) const {
        i64 a = abs_q(x, q);
        return a < static_cast<i64>(table.size()) ? table[a] : 0.0;
    }
    i64 radius() const { return static_cast<i64>(table.size()) - 1; }
    bool in_support(i64 x) const { return abs_q(x, q) <= radius(); }
    // Product density over Z_q^m of the vector y - center.
    double density(const ZqVector& y, const ZqVector& center) const;
    i64 sample(Rng& rng) const;
};

double gaussian_density(i64 x, double B, i64 q);
ZqVector sample_gaussian_vec(int m, double B, i64 q, Rng& rng);

// ---- Gadget trapdoor ---------------------------------------------------------

struct TrapOptions {
    double C_T = 1.0;
    // gen_trap resamples until λ1(A) > 2·certify_radius (exact when q^n ≤ 1e6).
    double certify_radius = 0.0;
    int max_attempts = 256;
};

struct MatrixTrapdoor {
    ZqMatrix A;       // m×n, A = [Ā ; G − R·Ā]
    i64 q = 0;
    int n = 0;
    int m = 0;
    i64 base = 2;     // gadget base
    int k = 0;        // digits per coordinate
    int mbar = 0;     // rows of Ā
    ZqMatrix R;       // nk×mbar, entries ±1 stored mod q
    double radius = 0;     // nominal inversion radius
    double certified = 0;  // λ1(A)/2, below which decoding is unique
};

struct Inversion {
    ZqVector s;
    ZqVector e;
};

// Smallest base with n·⌈log_base q⌉ + 2n ≤ m; throws ParamError if none.
i64 gadget_base(int n, int m, i64 q, int* digits = nullptr);

MatrixTrapdoor gen_trap(int n, int m, i64 q, Rng& rng, const TrapOptions& opt = {});

// Nearest lattice point A·s with ‖y − A·s‖ ≤ radius, ties broken by smallest
// s index. std::nullopt means NotInvertible.
std::optional<Inversion> invert(const MatrixTrapdoor& td, const ZqVector& y);

// Same semantics by exhaustive search over all s (q^n ≤ 1e6).
std::optional<Inversion> brute_force_invert(const ZqMatrix& A, i64 q, const ZqVector& y, double radius);

// Exact squared length of the shortest nonzero vector of {A·z + q·Z^m}.
i64 lattice_min_sq(const ZqMatrix& A, i64 q);

// B·C + F with B uniform m×l, C uniform l×n, F truncated Gaussian(B_L).
// B_L = 0 gives F = 0.
ZqMatrix lossy_sample(int n, int m, int l, i64 q, double B_L, Rng& rng);

// Rank over the prime field Z_q.
int rank_mod_q(ZqMatrix M, i64 q);

nlohmann::json matrix_to_json(const ZqMatrix& M);
ZqMatrix matrix_from_json(const nlohmann::json& j);

}  // namespace cvqc
