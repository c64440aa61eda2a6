#include "cvqc/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cvqc {

// ---- Tolerances and reports ------------------------------------------------------

nlohmann::json Tolerances::to_json() const {
    return {{"exact", exact}, {"tv", tv}, {"projection", projection}, {"sigma", sigma}, {"hardcore_min", hardcore_min}};
}

Tolerances tolerances_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("tolerance config must be a JSON object");
    Tolerances t;
    const std::map<std::string, double*> fields = {{"exact", &t.exact},
                                                   {"tv", &t.tv},
                                                   {"projection", &t.projection},
                                                   {"sigma", &t.sigma},
                                                   {"hardcore_min", &t.hardcore_min}};
    for (auto& [k, v] : j.items()) {
        auto it = fields.find(k);
        if (it == fields.end()) throw ConfigError("unknown tolerance: " + k);
        if (!v.is_number()) throw ConfigError("tolerance " + k + " is not a number");
        const double x = v.get<double>();
        if (!(x > 0) || !std::isfinite(x)) throw ConfigError("tolerance " + k + " must be positive");
        *it->second = x;
    }
    return t;
}

Tolerances load_tolerances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open tolerance file: " + path);
    try {
        return tolerances_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed tolerance file " + path + ": " + e.what());
    }
}

bool ExperimentReport::check_le(const std::string& check, double value, double tol, bool expected_fail) {
    checks.push_back({check, value, tol, "<=", value <= tol, expected_fail});
    return checks.back().holds;
}

bool ExperimentReport::check_ge(const std::string& check, double value, double tol, bool expected_fail) {
    checks.push_back({check, value, tol, ">=", value >= tol, expected_fail});
    return checks.back().holds;
}

bool ExperimentReport::passed() const {
    for (auto& c : checks)
        if (!c.ok()) return false;
    return true;
}

nlohmann::json ExperimentReport::to_json(bool with_time) const {
    nlohmann::json cs = nlohmann::json::array();
    for (auto& c : checks)
        cs.push_back({{"name", c.name},
                      {"value", c.value},
                      {"relation", c.relation},
                      {"tolerance", c.tolerance},
                      {"holds", c.holds},
                      {"expected_fail", c.expected_fail},
                      {"ok", c.ok()}});
    nlohmann::json j = {{"experiment", name}, {"seed", seed}, {"metrics", metrics}, {"checks", cs}, {"passed", passed()}};
    if (params) j["params"] = params_to_json(*params);
    if (with_time) j["wall_seconds"] = wall_seconds;
    return j;
}

void write_report(const std::string& dir, const ExperimentReport& r) {
    std::filesystem::create_directories(dir);
    const std::string path = (std::filesystem::path(dir) / (r.name + ".json")).string();
    std::ofstream out(path);
    if (!out) throw InputError("cannot write report: " + path);
    out << nlohmann::json{{"version", kVersion}, {"params_hash", r.params ? params_hash(*r.params) : "none"}, {"seed", r.seed}}
               .dump()
        << "\n"
        << r.to_json().dump() << "\n";
}

std::string summary_table(const std::vector<ExperimentReport>& reports) {
    std::size_t w = 10;
    for (auto& r : reports) w = std::max(w, r.name.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(w) + 2) << "experiment" << std::setw(8) << "status" << std::setw(10)
       << "checks" << "seconds\n";
    for (auto& r : reports) {
        int ok = 0;
        for (auto& c : r.checks) ok += c.ok();
        std::ostringstream checks;
        checks << ok << "/" << r.checks.size();
        os << std::left << std::setw(static_cast<int>(w) + 2) << r.name << std::setw(8) << (r.passed() ? "pass" : "FAIL")
           << std::setw(10) << checks.str() << std::fixed << std::setprecision(2) << r.wall_seconds << "\n";
    }
    return os.str();
}

double binomial_sigma(double p, int n) { return n > 0 ? std::sqrt(std::max(0.0, p * (1 - p)) / n) : 0.0; }

namespace {

class Timer {
public:
    explicit Timer(ExperimentReport& r) : r_(r), t0_(std::chrono::steady_clock::now()) {}
    ~Timer() { r_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    ExperimentReport& r_;
    std::chrono::steady_clock::time_point t0_;
};

ExperimentReport make_report(const std::string& name, std::uint64_t seed, std::optional<Params> p = std::nullopt) {
    ExperimentReport r;
    r.name = name;
    r.seed = seed;
    r.params = p;
    return r;
}

QState single_qubit(double p1) {
    RegisterLayout L;
    L.add("t0", 2);
    return QState::from_amplitudes(L, {std::sqrt(1 - p1), std::sqrt(p1)});
}

std::vector<double> random_distribution(int size, Rng& rng) {
    std::vector<double> p(size);
    double s = 0;
    for (auto& v : p) s += (v = -std::log(1.0 - rng.uniform01()));
    for (auto& v : p) v /= s;
    return p;
}

}  // namespace

std::vector<KeyPair> exact_keys(const Bits& h, const Params& p, Rng& rng, bool all_claw_free) {
    KeyOptions opt;
    opt.zero_noise = true;
    std::vector<KeyPair> keys;
    for (int hi : h) {
        if (hi || all_claw_free)
            keys.push_back(gen_f_with(p, rng, ZqVector(p.n, 1), ZqVector(p.m, 0), opt));
        else
            keys.push_back(gen_g(p, rng, opt));
    }
    return keys;
}

// ---- Lattice-level experiments ---------------------------------------------

ExperimentReport trapdoor_roundtrip_experiment(const Params& p, const Params& small, int trials, std::uint64_t seed,
                                               const Tolerances&) {
    ExperimentReport r = make_report("trapdoor_roundtrip", seed, p);
    Timer timer(r);
    Rng rng(seed);
    TrapOptions to;
    to.C_T = p.C_T;
    to.certify_radius = std::sqrt(static_cast<double>(p.m)) * std::floor(p.B_V);
    MatrixTrapdoor mt;
    int exact = 0;
    for (int t = 0; t < trials; ++t) {
        if (t % 10 == 0) mt = gen_trap(p.n, p.m, p.q, rng, to);
        ZqVector s = uniform_vector(p.n, p.q, rng);
        ZqVector e = sample_gaussian_vec(p.m, p.B_V, p.q, rng);
        auto inv = invert(mt, vec_add(mat_vec(mt.A, s, p.q), e, p.q));
        exact += inv && inv->s == s;
    }
    r.metric("roundtrip_exact", exact);
    r.metric("roundtrip_trials", trials);
    r.check_ge("roundtrip_fraction", static_cast<double>(exact) / trials, 1.0);

    TrapOptions so;
    so.C_T = small.C_T;
    long mismatches = 0, inputs = 0, invertible = 0;
    const std::uint64_t total = static_cast<std::uint64_t>(ipow(small.q, small.m));
    for (int k = 0; k < 5; ++k) {
        MatrixTrapdoor st = gen_trap(small.n, small.m, small.q, rng, so);
        for (std::uint64_t idx = 0; idx < total; ++idx) {
            ZqVector y = vec_from_index(idx, small.m, small.q);
            auto a = invert(st, y);
            auto b = brute_force_invert(st.A, small.q, y, st.radius);
            ++inputs;
            invertible += a.has_value();
            if (a.has_value() != b.has_value() || (a && a->s != b->s)) ++mismatches;
        }
    }
    r.metric("oracle_inputs", static_cast<double>(inputs));
    r.metric("oracle_invertible", static_cast<double>(invertible));
    r.check_le("oracle_mismatches", static_cast<double>(mismatches), 0.0);
    return r;
}

ExperimentReport claw_structure_experiment(const Params& p, const Params& small, int commitments, std::uint64_t seed,
                                           const Tolerances&) {
    ExperimentReport r = make_report("claw_structure", seed, p);
    Timer timer(r);
    Rng rng(seed);
    RegisterLayout L;
    L.add("q0", 2);
    const QState plus = QState::from_amplitudes(L, {1 / std::sqrt(2.0), 1 / std::sqrt(2.0)});

    for (int noisy = 0; noisy < 2; ++noisy) {
        KeyOptions opt;
        opt.zero_noise = !noisy;
        int claws = 0, diff_ok = 0, both_chk = 0, branch_ok = 0, both_branches = 0;
        for (int c = 0; c < commitments; ++c) {
            KeyPair kp = gen_f(p, rng, opt);
            CommitSpec spec{&kp.pk, kp.td.B_P, "q0", "x0"};
            CommitResult cr = samp_commit(plus, spec, rng, CommitMode::Lazy);
            auto claw = claw_of(kp.td, cr.y);
            if (!claw) continue;
            ++claws;
            diff_ok += vec_sub(claw->first, claw->second, p.q) == kp.td.s;
            both_chk += chk(kp.pk, kp.td.B_P, 0, claw->first, cr.y) && chk(kp.pk, kp.td.B_P, 1, claw->second, cr.y);
            // every branch left in the post-state is the claw preimage and passes chk
            std::vector<double> joint = marginal(cr.state, {"q0", "x0"});
            const std::uint64_t nx = static_cast<std::uint64_t>(ipow(p.q, p.n));
            bool ok = true;
            int present = 0;
            for (std::uint64_t i = 0; i < joint.size(); ++i) {
                if (joint[i] < 1e-15) continue;
                const int b = static_cast<int>(i / nx);
                const ZqVector x = vec_from_index(i % nx, p.n, p.q);
                ++present;
                ok = ok && x == (b ? claw->second : claw->first) && chk(kp.pk, kp.td.B_P, b, x, cr.y);
            }
            branch_ok += ok;
            both_branches += present == 2;
        }
        const std::string tag = noisy ? "noisy_" : "zero_noise_";
        r.metric(tag + "claws", claws);
        r.metric(tag + "both_branch_rate", static_cast<double>(both_branches) / commitments);
        r.check_ge(tag + "claw_fraction", static_cast<double>(claws) / commitments, 1.0);
        r.check_ge(tag + "difference_is_secret", static_cast<double>(diff_ok) / commitments, 1.0);
        r.check_ge(tag + "branches_consistent", static_cast<double>(branch_ok) / commitments, 1.0);
        if (!noisy) r.check_ge("zero_noise_chk_both", static_cast<double>(both_chk) / commitments, 1.0);
    }

    // at most one (b, x) passes chk for any y under injective keys
    int max_pre = 0;
    long covered = 0;
    const std::uint64_t ny = static_cast<std::uint64_t>(ipow(small.q, small.m));
    const std::uint64_t nx = static_cast<std::uint64_t>(ipow(small.q, small.n));
    for (int k = 0; k < 20; ++k) {
        KeyPair g = gen_g(small, rng);
        for (std::uint64_t yi = 0; yi < ny; ++yi) {
            const ZqVector y = vec_from_index(yi, small.m, small.q);
            int pre = 0;
            for (int b = 0; b < 2; ++b)
                for (std::uint64_t xi = 0; xi < nx; ++xi)
                    pre += chk(g.pk, g.td.B_P, b, vec_from_index(xi, small.n, small.q), y);
            max_pre = std::max(max_pre, pre);
            covered += pre > 0;
        }
    }
    r.metric("injective_supported_strings", static_cast<double>(covered));
    r.check_le("injective_max_preimages", max_pre, 1.0);
    return r;
}

ExperimentReport dependence_on_secret_experiment(const std::vector<i64>& qs, int n_max, bool negative_control,
                                                 const Tolerances&) {
    ExperimentReport r = make_report("dependence_on_secret", 0);
    Timer timer(r);
    long total = 0, equal = 0, wrap = 0, wrap_equal = 0;
    for (i64 q : qs) {
        for (int n = 1; n <= n_max; ++n) {
            const std::uint64_t nx = static_cast<std::uint64_t>(ipow(q, n));
            for (std::uint64_t sm = 0; sm < (1u << n); ++sm) {
                const Bits s = mask_to_bits(sm, n);
                for (std::uint64_t dm = 0; dm < (1u << n); ++dm) {
                    const Bits dhat = mask_to_bits(dm, n);
                    const std::uint64_t jd = bits_to_mask(embed_dhat(dhat, q));
                    const int rhs = parity(sm & dm);
                    for (int b = 0; b < 2; ++b)
                        for (std::uint64_t xi = 0; xi < nx; ++xi) {
                            const ZqVector x = vec_from_index(xi, n, q);
                            ZqVector xp(n);
                            bool wrapped = false;
                            for (int j = 0; j < n; ++j) {
                                const i64 v = x[j] - (b ? -1 : 1) * s[j];
                                wrapped = wrapped || v < 0 || v >= q;
                                xp[j] = mod_q(v, q);
                            }
                            const bool eq = parity(jd & (j_index(x, q) ^ j_index(xp, q))) == rhs;
                            if (wrapped) {
                                ++wrap;
                                wrap_equal += eq;
                            } else {
                                ++total;
                                equal += eq;
                            }
                        }
                }
            }
        }
    }
    r.metric("inputs", static_cast<double>(total));
    r.metric("wraparound_inputs", static_cast<double>(wrap));
    r.metric("wraparound_equal", static_cast<double>(wrap_equal));
    r.check_ge("equal_fraction", static_cast<double>(equal) / total, 1.0);
    if (negative_control)
        r.check_ge("equal_fraction_with_wraparound", static_cast<double>(equal + wrap_equal) / (total + wrap), 1.0,
                   true);
    return r;
}

// ---- Protocol experiments -------------------------------------------------------

ExperimentReport completeness_experiment(const std::string& state, const Bits& h, int trials, const Params& p,
                                         const Params& exact, std::uint64_t seed, const Tolerances& tol) {
    ExperimentReport r = make_report("completeness_" + state + "_h" + bits_string(h), seed, p);
    Timer timer(r);
    const QState psi = named_state(state);
    const ProverSpec P = honest_prover(psi);
    SessionConfig cfg;
    cfg.params = p;
    Rng rng(seed);
    int test_acc = 0, had_acc = 0;
    for (int t = 0; t < trials; ++t) test_acc += run_session(P, h, RoundType::Test, cfg, rng.derive_seed()).accept;
    for (int t = 0; t < trials; ++t) had_acc += run_session(P, h, RoundType::Hadamard, cfg, rng.derive_seed()).accept;
    r.metric("test_accepted", test_acc);
    r.metric("hadamard_accepted", had_acc);
    r.metric("trials", trials);
    r.metric("hadamard_slack", 1.0 - static_cast<double>(had_acc) / trials);
    r.check_ge("test_acceptance", static_cast<double>(test_acc) / trials, 1.0);
    r.check_ge("hadamard_acceptance", static_cast<double>(had_acc) / trials, 1.0);

    SessionConfig ecfg;
    ecfg.params = exact;
    ecfg.key_opt.zero_noise = true;
    auto keys = exact_keys(h, exact, rng);
    ExactDistribution ed = exact_distribution(P, h, keys, ecfg);
    r.metric("exact_accept_probability", ed.accept_probability);
    r.check_le("exact_tv", tv_distance(ed.DC, ideal_distribution(psi, h)), tol.tv);
    return r;
}

ExperimentReport soundness_hybrid_experiment(const std::string& attack, const std::string& state, const Bits& h,
                                             const Params& exact, std::uint64_t seed, const Tolerances& tol) {
    ExperimentReport r = make_report("soundness_" + attack + "_" + state + "_h" + bits_string(h), seed, exact);
    Timer timer(r);
    const QState psi = named_state(state);
    const ProverSpec P = attacked_prover(psi, attack);
    const int n = P.n_qubits();
    if (static_cast<int>(h.size()) != n) throw InputError("basis choice length does not match the state");
    SessionConfig cfg;
    cfg.params = exact;
    cfg.key_opt.zero_noise = true;
    Rng rng(seed);
    const auto keys_h = exact_keys(h, exact, rng);
    const auto keys_cf = exact_keys(h, exact, rng, true);

    const Distribution DP = exact_distribution(P, h, keys_h, cfg).D;

    // standard-basis positions: X-trivializing the attack there changes nothing
    double std_dev = 0, twirl_dev = 0;
    for (int j = 0; j < n; ++j) {
        const ProverSpec Pj = x_trivialize_prover(P, j);
        const Distribution DPj = exact_distribution(Pj, h, keys_h, cfg).D;
        if (h[j] == 0) {
            std_dev = std::max(std_dev, tv_distance(DP, DPj));
        } else {
            const Distribution DT = exact_distribution(z_twirl_prover(Pj, j), h, keys_h, cfg).D;
            twirl_dev = std::max(twirl_dev, tv_distance(DPj, DT));
            r.metric("twirl_of_attack_tv_q" + std::to_string(j),
                     tv_distance(DP, exact_distribution(z_twirl_prover(P, j), h, keys_h, cfg).D));
        }
    }
    r.check_le("standard_reduction_tv", std_dev, tol.exact);
    r.check_le("twirl_of_trivialized_tv", twirl_dev, tol.exact);

    const ProverSpec Phat = x_trivialize_all(P);
    const Distribution DPhat = exact_distribution(Phat, h, keys_h, cfg).D;
    const DensityOp rho = construct_underlying_state(Phat, h, keys_cf, HybridVariant::Full, cfg);
    const DensityOp rho1 = construct_underlying_state(Phat, h, keys_cf, HybridVariant::H1, cfg);
    const DensityOp rho2 = construct_underlying_state(Phat, h, keys_h, HybridVariant::H2, cfg);
    const Distribution Drho = ideal_distribution(rho, h), Drho1 = ideal_distribution(rho1, h),
                       Drho2 = ideal_distribution(rho2, h);
    r.metric("rho_trace", rho.rho.trace().real());
    r.check_le("rho_vs_rho1_tv", tv_distance(Drho, Drho1), tol.exact);
    r.check_le("rho2_vs_trivial_prover_tv", tv_distance(Drho2, DPhat), tol.exact);
    r.metric("key_swap_tv", tv_distance(Drho1, Drho2));
    r.metric("prover_vs_trivial_tv", tv_distance(DP, DPhat));
    r.metric("prover_vs_rho_tv", tv_distance(DP, Drho));
    if (attack == "I") r.check_le("identity_prover_vs_rho_tv", tv_distance(DP, Drho), tol.tv);
    return r;
}

ExperimentReport injective_collapse_experiment(double p1, int trials, const Params& p, std::uint64_t seed,
                                               const Tolerances& tol) {
    ExperimentReport r = make_report("injective_collapse", seed, p);
    Timer timer(r);
    Rng rng(seed);
    QState psi = single_qubit(p1);
    RegisterLayout L;
    L.add("q0", 2);
    psi.layout = L;
    KeyPair kp;
    int ones = 0, decoded = 0, collapsed = 0;
    for (int t = 0; t < trials; ++t) {
        if (t % 100 == 0) kp = gen_g(p, rng);
        CommitSpec spec{&kp.pk, kp.td.B_P, "q0", "x0"};
        CommitResult cr = samp_commit(psi, spec, rng, CommitMode::Lazy);
        auto g = inv_g(kp.td, cr.y);
        if (!g) continue;
        ++decoded;
        ones += g->first;
        collapsed += marginal(cr.state, {"q0"})[g->first] > 1 - 1e-12;
    }
    const double f = static_cast<double>(ones) / trials;
    r.metric("b1_frequency", f);
    r.metric("sigma", binomial_sigma(p1, trials));
    r.check_ge("decoded_fraction", static_cast<double>(decoded) / trials, 1.0);
    r.check_ge("collapsed_fraction", static_cast<double>(collapsed) / trials, 1.0);
    r.check_le("b1_deviation", std::abs(f - p1), tol.sigma * binomial_sigma(p1, trials));
    return r;
}

// ---- Hardcore bit -----------------------------------------------------------------

Distinguisher random_guess_distinguisher() {
    return [](const HardcoreSample&, Rng& rng) { return rng.bit(); };
}

Distinguisher trapdoor_distinguisher() {
    return [](const HardcoreSample& s, Rng& rng) {
        auto inv = invert(s.td->mt, s.pk.t);
        if (!inv) return rng.bit();
        const std::uint64_t sm = bits_to_mask(Bits(inv->s.begin(), inv->s.end()));
        return parity(sm & bits_to_mask(s.dhat)) == s.bit ? 0 : 1;
    };
}

Distinguisher brute_force_distinguisher() {
    return [](const HardcoreSample& s, Rng&) {
        const int n = s.pk.A.cols;
        std::uint64_t best = 0;
        i64 best_norm = -1;
        for (std::uint64_t sm = 0; sm < (std::uint64_t{1} << n); ++sm) {
            ZqVector cand(n);
            for (int j = 0; j < n; ++j) cand[j] = static_cast<i64>((sm >> j) & 1);
            const i64 d = sq_norm(vec_sub(s.pk.t, mat_vec(s.pk.A, cand, s.pk.q), s.pk.q), s.pk.q);
            if (best_norm < 0 || d < best_norm) {
                best_norm = d;
                best = sm;
            }
        }
        return parity(best & bits_to_mask(s.dhat)) == s.bit ? 0 : 1;
    };
}

Distinguisher distinguisher_by_name(const std::string& name) {
    if (name == "random") return random_guess_distinguisher();
    if (name == "trapdoor") return trapdoor_distinguisher();
    if (name == "brute_force") return brute_force_distinguisher();
    throw InputError("unknown distinguisher: " + name);
}

ExperimentReport hardcore_experiment(const std::string& distinguisher, const std::string& expect, int trials,
                                     const Params& p, std::uint64_t seed, const Tolerances& tol) {
    ExperimentReport r = make_report("hardcore_" + distinguisher, seed, p);
    Timer timer(r);
    const Distinguisher A = distinguisher_by_name(distinguisher);
    Rng rng(seed), arng(rng.derive_seed());
    int zero[2] = {0, 0};
    for (int t = 0; t < trials; ++t) {
        for (int which = 0; which < 2; ++which) {
            KeyPair kp = gen_f(p, rng);
            HardcoreSample s;
            s.pk = kp.pk;
            s.td = &kp.td;
            do {
                s.dhat.clear();
                for (int j = 0; j < p.n; ++j) s.dhat.push_back(rng.bit());
            } while (bits_to_mask(s.dhat) == 0);
            const std::uint64_t sm = bits_to_mask(Bits(kp.td.s.begin(), kp.td.s.end()));
            s.bit = which == 0 ? parity(sm & bits_to_mask(s.dhat)) : rng.bit();
            zero[which] += A(s, arng) == 0;
        }
    }
    const double adv = std::abs(static_cast<double>(zero[0] - zero[1]) / trials);
    const double sigma = std::sqrt(0.5 / trials);
    r.metric("advantage", adv);
    r.metric("sigma", sigma);
    r.metric("samples_per_distribution", trials);
    if (expect == "zero") r.check_le("advantage", adv, tol.sigma * sigma);
    if (expect == "calibrated") r.check_ge("advantage", adv, tol.hardcore_min);
    return r;
}

// ---- Lemma checks -------------------------------------------------------------

ExperimentReport twirl_experiment(int maps, std::uint64_t seed, bool negative_control, const Tolerances& tol) {
    ExperimentReport r = make_report("z_twirl", seed);
    Timer timer(r);
    Rng rng(seed);
    double worst = 0, recompose = 0, neg_min = 1e300;
    for (int i = 0; i < maps; ++i) {
        const int dim = 1 << (1 + i % 3);
        CPTPMap map = random_cptp(dim, 4, rng);
        TwirlReport rep = z_twirl_check(map, 4, rng);
        worst = std::max({worst, rep.lemma_deviation, rep.corollary_deviation});
        recompose = std::max(recompose, rep.recompose_error);
        if (negative_control) {
            TwirlReport bad = z_twirl_check(map, 4, rng, true);
            neg_min = std::min(neg_min, std::max(bad.lemma_deviation, bad.corollary_deviation));
        }
    }
    r.metric("maps", maps);
    r.check_le("max_deviation", worst, tol.exact);
    r.check_le("recompose_error", recompose, tol.exact);
    if (negative_control) r.check_le("sign_error_min_deviation", neg_min, tol.exact, true);
    return r;
}

ExperimentReport distance_lemmas_experiment(int cases, std::uint64_t seed, bool negative_control,
                                            const Tolerances& tol) {
    ExperimentReport r = make_report("distance_lemmas", seed);
    Timer timer(r);
    Rng rng(seed);

    // trace distance of the square-root superpositions
    double hdev = 0, hneg = 1e300;
    for (int c = 0; c < cases; ++c) {
        auto f1 = random_distribution(8, rng), f2 = random_distribution(8, rng);
        CVec a(8), b(8);
        for (int i = 0; i < 8; ++i) {
            a[i] = std::sqrt(f1[i]);
            b[i] = std::sqrt(f2[i]);
        }
        const double td = trace_distance(CMat(a * a.adjoint()), CMat(b * b.adjoint()));
        const double h2 = hellinger2(f1, f2);
        hdev = std::max(hdev, std::abs(td - std::sqrt(1 - (1 - h2) * (1 - h2))));
        const double tv = tv_distance(f1, f2);
        hneg = std::min(hneg, std::abs(td - std::sqrt(1 - (1 - tv) * (1 - tv))));
    }
    r.check_le("hellinger_to_trace_deviation", hdev, tol.exact);
    if (negative_control) r.check_le("hellinger_replaced_by_tv_deviation", hneg, tol.exact, true);

    // shifted truncated Gaussian over Z_q^m
    const i64 q = 101;
    const int m = 3;
    const double B = 10;
    const GaussDensity g(B, q);
    double h_slack = 1e300, tv_slack = 1e300, neg_slack = 1e300;
    for (int c = 0; c < cases; ++c) {
        ZqVector e(m);
        double en;
        do {
            for (auto& v : e) v = rng.uniform_int(-5, 5);
            en = 0;
            for (auto v : e) en += static_cast<double>(v * v);
            en = std::sqrt(en);
        } while (en > B / 2 || en == 0);
        double bc = 1;
        std::vector<std::vector<double>> d0(m, std::vector<double>(q)), d1(m, std::vector<double>(q));
        for (int j = 0; j < m; ++j) {
            double s = 0;
            for (i64 x = 0; x < q; ++x) {
                d0[j][x] = g(x);
                d1[j][x] = g(x - e[j]);
                s += std::sqrt(d0[j][x] * d1[j][x]);
            }
            bc *= s;
        }
        double tv = 0;
        for (i64 x0 = 0; x0 < q; ++x0)
            for (i64 x1 = 0; x1 < q; ++x1)
                for (i64 x2 = 0; x2 < q; ++x2)
                    tv += std::abs(d0[0][x0] * d0[1][x1] * d0[2][x2] - d1[0][x0] * d1[1][x1] * d1[2][x2]);
        tv /= 2;
        const double h2 = 1 - bc;
        const double bound = 1 - std::exp(-2 * M_PI * std::sqrt(static_cast<double>(m)) * en / B);
        h_slack = std::min(h_slack, bound - h2);
        tv_slack = std::min(tv_slack, 2 * bound - tv * tv);
        const double wrong = 1 - std::exp(-2 * M_PI * std::sqrt(static_cast<double>(m)) * (en / 1000) / B);
        neg_slack = std::min(neg_slack, wrong - h2);
    }
    r.check_ge("shifted_gaussian_hellinger_slack", h_slack, -tol.exact);
    r.check_ge("shifted_gaussian_tv_slack", tv_slack, -tol.exact);
    if (negative_control) r.check_ge("shrunk_shift_hellinger_slack", neg_slack, -tol.exact, true);

    // |P0(X') − P1(X')| ≤ TV
    double proj_excess = -1e300, neg_excess = -1e300;
    for (int c = 0; c < cases; ++c) {
        auto p0 = random_distribution(16, rng), p1 = random_distribution(16, rng);
        double a = 0, b = 0, best = 0;
        for (int i = 0; i < 16; ++i) {
            if (rng.bit()) {
                a += p0[i];
                b += p1[i];
            }
            best += std::max(0.0, p0[i] - p1[i]);
        }
        const double tv = tv_distance(p0, p1);
        proj_excess = std::max(proj_excess, std::abs(a - b) - tv);
        neg_excess = std::max(neg_excess, best - tv / 2);
    }
    r.check_le("projection_excess", proj_excess, tol.projection);
    if (negative_control) r.check_le("projection_against_half_tv", neg_excess, tol.projection, true);
    r.metric("cases", cases);
    return r;
}

namespace {

XZHamiltonian random_hamiltonian(int n, Rng& rng) {
    XZHamiltonian H;
    H.n_qubits = n;
    const int terms = static_cast<int>(rng.uniform_int(1, 4));
    for (int t = 0; t < terms; ++t) {
        PauliTerm term;
        do term.coeff = 2 * rng.uniform01() - 1;
        while (term.coeff == 0);
        const int a = static_cast<int>(rng.uniform_int(0, n - 1));
        term.paulis.push_back({a, rng.bit() ? 'X' : 'Z'});
        if (rng.bit()) {
            int b;
            do b = static_cast<int>(rng.uniform_int(0, n - 1));
            while (b == a);
            term.paulis.push_back({b, rng.bit() ? 'X' : 'Z'});
        }
        H.terms.push_back(term);
    }
    return H;
}

DensityOp density_on(const CMat& rho, int n) {
    DensityOp op;
    for (int i = 0; i < n; ++i) op.layout.add("t" + std::to_string(i), 2);
    op.rho = rho;
    return op;
}

// Acceptance with the sign rule inverted, for the negative control.
double wrong_sign_acceptance(const XZHamiltonian& H, const DensityOp& rho) {
    XZHamiltonian F = H;
    for (auto& t : F.terms) t.coeff = -t.coeff;
    return single_term_acceptance(F, rho);
}

}  // namespace

ExperimentReport p_acc_experiment(int cases, const Params& exact, std::uint64_t seed, bool negative_control,
                                  const Tolerances& tol) {
    ExperimentReport r = make_report("p_acc", seed, exact);
    Timer timer(r);
    Rng rng(seed);
    SessionConfig cfg;
    cfg.params = exact;
    cfg.key_opt.zero_noise = true;
    double dev = 0, proto_dev = 0, affine_dev = 0, neg_min = 1e300;
    double ground_slack = 1e300, max_slack = 1e300, grid_slack = 1e300;
    int proto_cases = 0;
    for (int c = 0; c < cases; ++c) {
        const int n = 2 + c % 2;
        const XZHamiltonian H = random_hamiltonian(n, rng);
        const DensityOp rho = density_on(random_density(1 << n, rng), n);
        const double formula = p_acc(H, rho.rho);
        dev = std::max(dev, std::abs(single_term_acceptance(H, rho) - formula));
        if (n == 2) {
            proto_dev = std::max(proto_dev, std::abs(protocol_single_term_acceptance(H, rho, cfg, rng) - formula));
            ++proto_cases;
        }
        if (negative_control) neg_min = std::min(neg_min, std::abs(wrong_sign_acceptance(H, rho) - formula));

        const double S = H.abs_sum();
        const RescaledHamiltonian Hr = rescale(H);
        const double e = (H.matrix().cast<cplx>() * rho.rho).trace().real();
        const double er = (Hr.matrix().cast<cplx>() * rho.rho).trace().real();
        affine_dev = std::max(affine_dev, std::abs(er - (0.5 + e / (2 * S))));

        const GroundState gs = ground_energy(H);
        const double bound = 0.5 - gs.energy / (2 * S);
        ground_slack = std::min(ground_slack, p_acc(H, DensityOp::from_state(gs.state).rho) - bound);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.matrix());
        const Eigen::VectorXd top = es.eigenvectors().col(es.eigenvectors().cols() - 1);
        const CMat rho_max = (top * top.transpose()).cast<cplx>();
        max_slack = std::min(max_slack, bound - p_acc(H, rho_max));
        for (int k = 0; k < 10; ++k)
            grid_slack = std::min(grid_slack, bound - p_acc(H, random_density(1 << n, rng, 1 + k % (1 << n))));
    }
    r.metric("cases", cases);
    r.metric("protocol_cases", proto_cases);
    r.check_le("formula_vs_exact", dev, tol.exact);
    r.check_le("formula_vs_protocol", proto_dev, tol.exact);
    r.check_le("rescaled_affine", affine_dev, tol.exact);
    r.check_ge("ground_bound_slack", ground_slack, -tol.exact);
    r.check_ge("max_eigenvector_bound_slack", max_slack, -tol.exact);
    r.check_ge("random_state_bound_slack", grid_slack, -tol.exact);
    if (negative_control) r.check_le("inverted_sign_rule_deviation", neg_min, tol.exact, true);
    return r;
}

ExperimentReport qpip_experiment(const std::string& label, const XZHamiltonian& H, const QState& psi, int kprime,
                                 int trials, const Params& p, std::uint64_t seed, const Tolerances& tol) {
    ExperimentReport r = make_report("qpip_" + label, seed, p);
    Timer timer(r);
    SessionConfig cfg;
    cfg.params = p;
    cfg.key_opt.zero_noise = true;
    const QpipStats s = run_qpip_trials(H, psi, kprime, trials, cfg, seed);
    const nlohmann::json stats = s.to_json();
    for (auto& [k, v] : stats.items()) r.metric(k, v.get<double>());
    const double fh = s.hadamard_rounds ? static_cast<double>(s.hadamard_accepted) / s.hadamard_rounds : 0.0;
    const double fo = static_cast<double>(s.accepted) / s.trials;
    r.check_ge("test_acceptance", s.test_rounds ? static_cast<double>(s.test_accepted) / s.test_rounds : 1.0, 1.0);
    r.check_le("hadamard_rate_deviation", std::abs(fh - s.analytic_majority),
               tol.sigma * binomial_sigma(s.analytic_majority, s.hadamard_rounds) + tol.exact);
    r.check_le("overall_rate_deviation", std::abs(fo - s.analytic_rate),
               tol.sigma * binomial_sigma(s.analytic_rate, s.trials) + tol.exact);
    const double ep = s.term_total ? static_cast<double>(s.term_satisfied) / s.term_total : 0.0;
    r.check_le("term_rate_deviation", std::abs(ep - s.analytic_p_acc),
               tol.sigma * binomial_sigma(s.analytic_p_acc, static_cast<int>(s.term_total)) + tol.exact);
    return r;
}

std::vector<ExperimentReport> lemma_suite(std::uint64_t seed, bool negative_controls, const Tolerances& tol) {
    Rng rng(seed);
    const Params sim5 = builtin_preset("sim5");
    std::vector<ExperimentReport> out;
    out.push_back(twirl_experiment(100, rng.derive_seed(), negative_controls, tol));
    out.push_back(distance_lemmas_experiment(100, rng.derive_seed(), negative_controls, tol));
    out.push_back(dependence_on_secret_experiment({5, 17}, 2, negative_controls, tol));
    out.push_back(p_acc_experiment(20, sim5, rng.derive_seed(), negative_controls, tol));
    return out;
}

}  // namespace cvqc
