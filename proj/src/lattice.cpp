#include "cvqc/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cvqc {

bool is_prime(i64 q) {
    if (q < 2) return false;
    for (i64 d = 2; d * d <= q; ++d)
        if (q % d == 0) return false;
    return true;
}

int ceil_log2(i64 q) {
    int k = 0;
    while ((i64{1} << k) < q) ++k;
    return k;
}

std::uint64_t ipow(i64 base, int exp) {
    std::uint64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= static_cast<std::uint64_t>(base);
    return r;
}

ZqVector mat_vec(const ZqMatrix& A, const ZqVector& x, i64 q) {
    ZqVector y(A.rows, 0);
    for (int r = 0; r < A.rows; ++r) {
        i64 acc = 0;
        for (int c = 0; c < A.cols; ++c) acc = (acc + A.at(r, c) * x[c]) % q;
        y[r] = mod_q(acc, q);
    }
    return y;
}

ZqVector vec_add(const ZqVector& a, const ZqVector& b, i64 q) {
    ZqVector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = mod_q(a[i] + b[i], q);
    return r;
}

ZqVector vec_sub(const ZqVector& a, const ZqVector& b, i64 q) {
    ZqVector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = mod_q(a[i] - b[i], q);
    return r;
}

ZqVector vec_scale(const ZqVector& a, i64 c, i64 q) {
    ZqVector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = mod_q(a[i] * c, q);
    return r;
}

i64 sq_norm(const ZqVector& v, i64 q) {
    i64 s = 0;
    for (i64 x : v) {
        i64 r = signed_rep(x, q);
        s += r * r;
    }
    return s;
}

double norm(const ZqVector& v, i64 q) { return std::sqrt(static_cast<double>(sq_norm(v, q))); }

std::uint64_t vec_index(const ZqVector& x, i64 q) {
    std::uint64_t idx = 0;
    for (std::size_t j = x.size(); j-- > 0;) idx = idx * static_cast<std::uint64_t>(q) + static_cast<std::uint64_t>(x[j]);
    return idx;
}

ZqVector vec_from_index(std::uint64_t idx, int n, i64 q) {
    ZqVector x(n);
    for (int j = 0; j < n; ++j) {
        x[j] = static_cast<i64>(idx % static_cast<std::uint64_t>(q));
        idx /= static_cast<std::uint64_t>(q);
    }
    return x;
}

ZqMatrix uniform_matrix(int rows, int cols, i64 q, Rng& rng) {
    ZqMatrix M(rows, cols);
    for (auto& v : M.data) v = rng.uniform_int(0, q - 1);
    return M;
}

ZqVector uniform_vector(int n, i64 q, Rng& rng) {
    ZqVector v(n);
    for (auto& x : v) x = rng.uniform_int(0, q - 1);
    return v;
}

// ---- Parameters -------------------------------------------------------------

double inversion_radius(i64 q, int n, double C_T) {
    return static_cast<double>(q) / (C_T * std::sqrt(n * std::log2(static_cast<double>(q))));
}

static double noise_ceiling(const Params& p) {
    return static_cast<double>(p.q) /
           (2.0 * p.C_T * std::sqrt(p.m * p.n * std::log2(static_cast<double>(p.q))));
}

std::vector<Violation> validate(const Params& p) {
    std::vector<Violation> out;
    auto fail = [&](const char* name, std::string msg) { out.push_back({name, std::move(msg)}); };
    if (p.q < 3 || !is_prime(p.q)) fail("prime_modulus", "q=" + std::to_string(p.q) + " is not an odd prime");
    if (p.n < 1 || p.m < 1 || p.l < 1 || p.lambda < 1)
        fail("positive_dims", "lambda, l, n, m must be positive");
    if (p.B_L <= 0 || p.B_V <= 0 || p.B_P <= 0 || p.C_T <= 0)
        fail("positive_dims", "bounds and C_T must be positive");
    if (p.q >= 2 && p.n >= 1 && p.w != p.n * ceil_log2(p.q))
        fail("bit_length", "w must equal n*ceil(log2 q) = " + std::to_string(p.n * ceil_log2(p.q)));
    if (p.n >= 1 && p.B_L < 2.0 * std::sqrt(static_cast<double>(p.n)))
        fail("noise_floor", "B_L must be at least 2*sqrt(n)");
    if (!(p.B_L < p.B_V && p.B_V < p.B_P)) fail("noise_order", "need B_L < B_V < B_P");
    if (p.q >= 2 && p.n >= 1 && p.m >= 1 && p.C_T > 0 && p.B_P > noise_ceiling(p)) {
        std::ostringstream os;
        os << "B_P=" << p.B_P << " exceeds q/(2 C_T sqrt(m n log2 q)) = " << noise_ceiling(p);
        fail("inversion_bound", os.str());
    }
    if (p.R < 2) fail("ratio", "minimum ratio R must be at least 2");
    if (p.B_L > 0 && p.B_V > 0 && (p.B_P / p.B_V < p.R || p.B_V / p.B_L < p.R))
        fail("ratio", "B_P/B_V and B_V/B_L must both be at least R");
    return out;
}

void check_structure(const Params& p) {
    if (p.q < 3 || !is_prime(p.q)) throw ParamError("q must be a prime >= 3");
    if (p.n < 1 || p.m < 1) throw ParamError("n and m must be positive");
    if (p.B_V <= 0 || p.B_P <= 0 || p.C_T <= 0) throw ParamError("bounds and C_T must be positive");
    gadget_base(p.n, p.m, p.q);
}

std::vector<i64> primes_below(i64 bound) {
    std::vector<i64> out;
    for (i64 q = 3; q < bound; ++q)
        if (is_prime(q)) out.push_back(q);
    return out;
}

Params find_params(const std::vector<i64>& q_candidates, int n, int m, double R, double C_T) {
    if (q_candidates.empty()) throw ParamError("empty q candidate list");
    if (n < 1 || m < 1) throw ParamError("n and m must be positive");
    if (R < 2) throw ParamError("ratio R must be at least 2");
    std::vector<i64> qs = q_candidates;
    std::sort(qs.begin(), qs.end());
    Params p;
    p.n = n;
    p.m = m;
    p.lambda = n;
    p.l = std::max(1, n - 1);
    p.C_T = C_T;
    p.R = R;
    p.B_L = std::ceil(2.0 * std::sqrt(static_cast<double>(n)));
    p.B_V = std::max(p.B_L + 1, std::ceil(R * p.B_L));
    p.B_P = std::max(p.B_V + 1, std::ceil(R * p.B_V));
    for (i64 q : qs) {
        if (q < 3 || !is_prime(q)) continue;
        p.q = q;
        p.w = n * ceil_log2(q);
        if (validate(p).empty()) return p;
    }
    throw ParamError("infeasible parameters: no candidate q satisfies all invariants");
}

nlohmann::json params_to_json(const Params& p) {
    return nlohmann::json{{"lambda", p.lambda}, {"l", p.l},     {"n", p.n},     {"m", p.m},
                          {"w", p.w},           {"q", p.q},     {"B_L", p.B_L}, {"B_V", p.B_V},
                          {"B_P", p.B_P},       {"C_T", p.C_T}, {"R", p.R}};
}

Params params_from_json(const nlohmann::json& j) {
    if (j.contains("params")) return params_from_json(j.at("params"));
    Params p;
    try {
        p.n = j.at("n").get<int>();
        p.m = j.at("m").get<int>();
        p.q = j.at("q").get<i64>();
        p.B_L = j.at("B_L").get<double>();
        p.B_V = j.at("B_V").get<double>();
        p.B_P = j.at("B_P").get<double>();
        p.lambda = j.value("lambda", p.n);
        p.l = j.value("l", std::max(1, p.n - 1));
        p.w = j.value("w", p.n * ceil_log2(p.q));
        p.C_T = j.value("C_T", 1.0);
        p.R = j.value("R", 2.0);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed params: ") + e.what());
    }
    return p;
}

Params load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open params file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed JSON in " + path + ": " + e.what());
    }
    return params_from_json(j);
}

Params builtin_preset(const std::string& name) {
    Params p;
    p.lambda = 1;
    p.l = 1;
    p.n = 1;
    p.C_T = 1.0;
    p.R = 2.0;
    if (name == "toy" || name == "proto") {
        p.m = name == "toy" ? 4 : 16;
        p.q = name == "toy" ? 83 : 179;
        p.w = ceil_log2(p.q);
        p.B_L = 2.0;
        p.B_V = 4.0;
        p.B_P = 8.0;
    } else if (name == "sim5") {
        p.m = 4;
        p.q = 5;
        p.w = 3;
        p.B_L = 0.125;
        p.B_V = 0.25;
        p.B_P = 0.5;
        p.C_T = 1.6;
    } else {
        throw InputError("unknown preset: " + name);
    }
    return p;
}

std::vector<std::string> builtin_preset_names() { return {"toy", "proto", "sim5"}; }

std::string params_hash(const Params& p) {
    std::string s = params_to_json(p).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

// ---- Gaussian ---------------------------------------------------------------

GaussDensity::GaussDensity(double B_, i64 q_) : q(q_), B(B_) {
    if (!(B > 0)) throw ParamError("Gaussian bound must be positive");
    if (q < 2) throw ParamError("modulus must be at least 2");
    i64 rmax = std::min<i64>(static_cast<i64>(std::floor(B)), q / 2);
    table.resize(rmax + 1);
    double total = 0;
    for (i64 a = 0; a <= rmax; ++a) {
        table[a] = std::exp(-M_PI * static_cast<double>(a * a) / (B * B));
        // a and -a are distinct residues unless a = 0
        total += (a == 0 ? 1.0 : 2.0) * table[a];
    }
    normalizer = total;
    for (double& t : table) t /= total;
}

double GaussDensity::density(const ZqVector& y, const ZqVector& center) const {
    double d = 1.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        d *= (*this)(y[i] - center[i]);
        if (d == 0.0) return 0.0;
    }
    return d;
}

i64 GaussDensity::sample(Rng& rng) const {
    double u = rng.uniform01();
    double acc = table[0];
    if (u < acc) return 0;
    for (i64 a = 1; a <= radius(); ++a) {
        acc += table[a];
        if (u < acc) return a;
        acc += table[a];
        if (u < acc) return mod_q(-a, q);
    }
    return 0;
}

double gaussian_density(i64 x, double B, i64 q) {
    if (!(B > 0)) throw ParamError("Gaussian bound must be positive");
    return GaussDensity(B, q)(x);
}

ZqVector sample_gaussian_vec(int m, double B, i64 q, Rng& rng) {
    GaussDensity g(B, q);
    ZqVector v(m);
    for (auto& x : v) x = g.sample(rng);
    return v;
}

// ---- Gadget trapdoor --------------------------------------------------------

static int digits_in_base(i64 q, i64 base) {
    int k = 0;
    i64 p = 1;
    while (p < q) {
        p *= base;
        ++k;
    }
    return k;
}

i64 gadget_base(int n, int m, i64 q, int* digits) {
    for (i64 base = 2; base <= q; ++base) {
        int k = digits_in_base(q, base);
        if (n * k + 2 * n <= m) {
            if (digits) *digits = k;
            return base;
        }
    }
    throw ParamError("m=" + std::to_string(m) + " too small for a gadget trapdoor with n=" + std::to_string(n));
}

i64 lattice_min_sq(const ZqMatrix& A, i64 q) {
    const int n = A.cols;
    const std::uint64_t total = ipow(q, n);
    if (static_cast<double>(total) > 1e6) throw ResourceError("lattice_min_sq needs q^n <= 1e6");
    i64 best = q * q;
    for (std::uint64_t idx = 1; idx < total; ++idx) {
        ZqVector z = vec_from_index(idx, n, q);
        best = std::min(best, sq_norm(mat_vec(A, z, q), q));
    }
    return best;
}

MatrixTrapdoor gen_trap(int n, int m, i64 q, Rng& rng, const TrapOptions& opt) {
    if (n < 1 || m < 1) throw ParamError("dimensions must be positive");
    if (q < 3 || !is_prime(q)) throw ParamError("q must be a prime >= 3");
    int k = 0;
    const i64 base = gadget_base(n, m, q, &k);
    const int nk = n * k;
    const int mbar = m - nk;
    const bool exact = static_cast<double>(ipow(q, n)) <= 1e6;

    for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
        MatrixTrapdoor td;
        td.q = q;
        td.n = n;
        td.m = m;
        td.base = base;
        td.k = k;
        td.mbar = mbar;
        td.radius = inversion_radius(q, n, opt.C_T);
        ZqMatrix Abar = uniform_matrix(mbar, n, q, rng);
        td.R = ZqMatrix(nk, mbar);
        for (auto& r : td.R.data) r = rng.bit() ? 1 : q - 1;
        td.A = ZqMatrix(m, n);
        for (int r = 0; r < mbar; ++r)
            for (int c = 0; c < n; ++c) td.A.at(r, c) = Abar.at(r, c);
        for (int j = 0; j < n; ++j) {
            i64 g = 1;
            for (int i = 0; i < k; ++i) {
                const int row = j * k + i;
                for (int c = 0; c < n; ++c) {
                    i64 acc = (c == j) ? g : 0;
                    for (int t = 0; t < mbar; ++t) acc -= td.R.at(row, t) * Abar.at(t, c);
                    td.A.at(mbar + row, c) = mod_q(acc, q);
                }
                g = (g * base) % q;
            }
        }
        if (!exact) {
            td.certified = 0;
            return td;
        }
        const double lambda1 = std::sqrt(static_cast<double>(lattice_min_sq(td.A, q)));
        if (lambda1 > 2.0 * opt.certify_radius) {
            td.certified = lambda1 / 2.0;
            return td;
        }
    }
    throw GenerationError("gen_trap: no matrix with lambda1 > " + std::to_string(2.0 * opt.certify_radius) +
                          " after " + std::to_string(opt.max_attempts) + " attempts");
}

std::optional<Inversion> invert(const MatrixTrapdoor& td, const ZqVector& y) {
    const i64 q = td.q;
    const int n = td.n, k = td.k, mbar = td.mbar;
    if (static_cast<int>(y.size()) != td.m) throw InputError("invert: y has wrong length");

    // t = [R | I]·y = G·s + [R | I]·e
    const int nk = n * k;
    ZqVector t(nk);
    for (int row = 0; row < nk; ++row) {
        i64 acc = y[mbar + row];
        for (int c = 0; c < mbar; ++c) acc += td.R.at(row, c) * y[c];
        t[row] = mod_q(acc, q);
    }

    // ‖[R | I]·e‖ ≤ ‖[R | I]‖_F·‖e‖, so every s within the radius survives the
    // per-coordinate gadget filter below.
    const double frob = std::sqrt(static_cast<double>(nk) * mbar + nk);
    const double limit = frob * td.radius;
    const double limit_sq = limit * limit;

    std::vector<std::vector<i64>> cand(n);
    for (int j = 0; j < n; ++j) {
        for (i64 s = 0; s < q; ++s) {
            i64 acc = 0;
            i64 g = 1;
            for (int i = 0; i < k; ++i) {
                i64 r = signed_rep(t[j * k + i] - g * s, q);
                acc += r * r;
                g = (g * td.base) % q;
            }
            if (static_cast<double>(acc) <= limit_sq) cand[j].push_back(s);
        }
        if (cand[j].empty()) return std::nullopt;
    }

    const double r2 = td.radius * td.radius;
    std::optional<Inversion> best;
    i64 best_sq = 0;
    std::uint64_t best_idx = 0;
    std::vector<std::size_t> pos(n, 0);
    ZqVector s(n);
    while (true) {
        for (int j = 0; j < n; ++j) s[j] = cand[j][pos[j]];
        ZqVector e = vec_sub(y, mat_vec(td.A, s, q), q);
        i64 sq = sq_norm(e, q);
        if (static_cast<double>(sq) <= r2) {
            std::uint64_t idx = vec_index(s, q);
            if (!best || sq < best_sq || (sq == best_sq && idx < best_idx)) {
                best = Inversion{s, e};
                best_sq = sq;
                best_idx = idx;
            }
        }
        int j = 0;
        while (j < n && ++pos[j] == cand[j].size()) pos[j++] = 0;
        if (j == n) break;
    }
    return best;
}

std::optional<Inversion> brute_force_invert(const ZqMatrix& A, i64 q, const ZqVector& y, double radius) {
    const int n = A.cols;
    const std::uint64_t total = ipow(q, n);
    if (static_cast<double>(total) > 1e6) throw ResourceError("brute_force_invert needs q^n <= 1e6");
    const double r2 = radius * radius;
    std::optional<Inversion> best;
    i64 best_sq = 0;
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        ZqVector s = vec_from_index(idx, n, q);
        ZqVector e = vec_sub(y, mat_vec(A, s, q), q);
        i64 sq = sq_norm(e, q);
        if (static_cast<double>(sq) <= r2 && (!best || sq < best_sq)) {
            best = Inversion{s, e};
            best_sq = sq;
        }
    }
    return best;
}

ZqMatrix lossy_sample(int n, int m, int l, i64 q, double B_L, Rng& rng) {
    if (!(l < n)) throw ParamError("lossy_sample requires l < n");
    ZqMatrix B = uniform_matrix(m, l, q, rng);
    ZqMatrix C = uniform_matrix(l, n, q, rng);
    ZqMatrix out(m, n);
    std::optional<GaussDensity> g;
    if (B_L > 0) g.emplace(B_L, q);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) {
            i64 acc = 0;
            for (int t = 0; t < l; ++t) acc = (acc + B.at(r, t) * C.at(t, c)) % q;
            if (g) acc += g->sample(rng);
            out.at(r, c) = mod_q(acc, q);
        }
    return out;
}

static i64 inv_mod(i64 a, i64 q) {
    i64 result = 1, base = mod_q(a, q), e = q - 2;
    while (e > 0) {
        if (e & 1) result = result * base % q;
        base = base * base % q;
        e >>= 1;
    }
    return result;
}

int rank_mod_q(ZqMatrix M, i64 q) {
    int rank = 0;
    for (int c = 0; c < M.cols && rank < M.rows; ++c) {
        int piv = -1;
        for (int r = rank; r < M.rows; ++r)
            if (M.at(r, c) != 0) {
                piv = r;
                break;
            }
        if (piv < 0) continue;
        for (int cc = 0; cc < M.cols; ++cc) std::swap(M.at(piv, cc), M.at(rank, cc));
        i64 inv = inv_mod(M.at(rank, c), q);
        for (int r = 0; r < M.rows; ++r) {
            if (r == rank || M.at(r, c) == 0) continue;
            i64 f = M.at(r, c) * inv % q;
            for (int cc = 0; cc < M.cols; ++cc) M.at(r, cc) = mod_q(M.at(r, cc) - f * M.at(rank, cc), q);
        }
        ++rank;
    }
    return rank;
}

nlohmann::json matrix_to_json(const ZqMatrix& M) {
    return nlohmann::json{{"rows", M.rows}, {"cols", M.cols}, {"data", M.data}};
}

ZqMatrix matrix_from_json(const nlohmann::json& j) {
    ZqMatrix M(j.at("rows").get<int>(), j.at("cols").get<int>());
    M.data = j.at("data").get<std::vector<i64>>();
    if (M.data.size() != static_cast<std::size_t>(M.rows) * M.cols) throw InputError("matrix data size mismatch");
    return M;
}

}  // namespace cvqc
