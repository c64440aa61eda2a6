#include "cvqc/protocol.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace cvqc {

const char* round_name(RoundType r) {
    switch (r) {
        case RoundType::Test: return "test";
        case RoundType::Hadamard: return "hadamard";
        case RoundType::RandomCoin: return "random";
    }
    return "?";
}

RoundType round_from_name(const std::string& s) {
    if (s == "test") return RoundType::Test;
    if (s == "hadamard") return RoundType::Hadamard;
    if (s == "random" || s == "coin") return RoundType::RandomCoin;
    throw InputError("unknown round type: " + s);
}

Bits parse_bits(const std::string& s) {
    Bits b;
    for (char c : s) {
        if (c != '0' && c != '1') throw InputError("not a bit string: " + s);
        b.push_back(c - '0');
    }
    if (b.empty()) throw InputError("empty bit string");
    return b;
}

std::string bits_string(const Bits& b) {
    std::string s;
    for (int v : b) s += v ? '1' : '0';
    return s;
}

int ProverSpec::n_qubits() const {
    int n = 0;
    for (auto& b : blocks) n += static_cast<int>(b.committed.size());
    return n;
}

std::vector<std::string> ProverSpec::committed_names() const {
    std::vector<std::string> out;
    for (auto& b : blocks) out.insert(out.end(), b.committed.begin(), b.committed.end());
    return out;
}

namespace {

std::string qname(int i) { return "q" + std::to_string(i); }
std::string xname(int i) { return "x" + std::to_string(i); }
int qindex(const std::string& name) { return std::stoi(name.substr(1)); }

int qubit_count(const QState& psi) {
    for (auto& r : psi.layout.registers())
        if (r.dim != 2) throw InputError("prover input must consist of qubits");
    return static_cast<int>(psi.layout.size());
}

// Block over committed q<first>.. and aux a<aux_first>.. holding `init`
// (committed qubits first, then aux).
ProverBlock make_block(const QState& init, int n_committed, int first, int aux_first) {
    ProverBlock blk;
    RegisterLayout L;
    const int total = qubit_count(init);
    for (int i = 0; i < n_committed; ++i) {
        blk.committed.push_back(qname(first + i));
        L.add(blk.committed.back(), 2);
    }
    for (int i = 0; i < total - n_committed; ++i) {
        blk.aux.push_back("a" + std::to_string(aux_first + i));
        L.add(blk.aux.back(), 2);
    }
    blk.initial.layout = L;
    blk.initial.amp = init.amp;
    if (std::abs(blk.initial.amp.norm() - 1.0) > 1e-10) throw InputError("prover input state is not normalized");
    return blk;
}

std::vector<std::string> block_regs(const ProverBlock& b) {
    std::vector<std::string> r = b.committed;
    r.insert(r.end(), b.aux.begin(), b.aux.end());
    return r;
}

QState zeros(int n) {
    RegisterLayout L;
    for (int i = 0; i < n; ++i) L.add("z" + std::to_string(i), 2);
    return QState::basis(L, std::vector<u64>(n, 0));
}

QState with_aux(const QState& psi, const QState& aux) { return aux.layout.size() ? tensor(psi, aux) : psi; }

// Embeds a k-qubit operator acting on `pos` into an nq-qubit operator.
CMat embed(const CMat& M, const std::vector<int>& pos, int nq) {
    const u64 D = u64{1} << nq;
    const int k = static_cast<int>(pos.size());
    CMat E = CMat::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
    u64 pmask = 0;
    for (int p : pos) pmask |= u64{1} << (nq - 1 - p);
    auto sub = [&](u64 idx) {
        u64 s = 0;
        for (int j = 0; j < k; ++j) s = (s << 1) | ((idx >> (nq - 1 - pos[j])) & 1);
        return s;
    };
    for (u64 o = 0; o < D; ++o)
        for (u64 i = 0; i < D; ++i)
            if ((o & ~pmask) == (i & ~pmask))
                E(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) =
                    M(static_cast<Eigen::Index>(sub(o)), static_cast<Eigen::Index>(sub(i)));
    return E;
}

void validate_attack(const ProverBlock& blk) {
    if (!blk.attack) return;
    const u64 D = blk.initial.layout.total();
    for (auto& K : blk.attack->kraus)
        if (static_cast<u64>(K.rows()) != D || static_cast<u64>(K.cols()) != D)
            throw InputError("attack dimension does not match committed and aux qubits");
    if (blk.attack->completeness_error() > 1e-9) throw InputError("attack is not a valid CPTP map");
}

}  // namespace

ProverSpec honest_prover(const QState& psi, const std::string& label) {
    ProverSpec p;
    p.variant = ProverVariant::Honest;
    p.label = label;
    p.blocks.push_back(make_block(psi, qubit_count(psi), 0, 0));
    return p;
}

ProverSpec honest_prover_mixed(const DensityOp& rho, const std::string& label) {
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (rho.rho + rho.rho.adjoint()));
    const auto D = rho.rho.rows();
    std::vector<std::pair<double, CVec>> comps;
    for (Eigen::Index k = D; k-- > 0;)
        if (es.eigenvalues()[k] > 1e-12) comps.push_back({es.eigenvalues()[k], es.eigenvectors().col(k)});
    int n_aux = 0;
    while ((std::size_t{1} << n_aux) < comps.size()) ++n_aux;
    int nq = 0;
    while ((Eigen::Index{1} << nq) < D) ++nq;
    RegisterLayout L;
    for (int i = 0; i < nq + n_aux; ++i) L.add("t" + std::to_string(i), 2);
    QState psi;
    psi.layout = L;
    psi.amp = CVec::Zero(static_cast<Eigen::Index>(L.total()));
    double tot = 0;
    for (auto& c : comps) tot += c.first;
    for (std::size_t k = 0; k < comps.size(); ++k)
        for (Eigen::Index i = 0; i < D; ++i)
            psi.amp[(i << n_aux) + static_cast<Eigen::Index>(k)] = std::sqrt(comps[k].first / tot) * comps[k].second[i];
    ProverSpec p;
    p.variant = ProverVariant::Honest;
    p.label = label;
    p.blocks.push_back(make_block(psi, nq, 0, 0));
    return p;
}

ProverSpec honest_copies(const QState& psi, int copies, const std::string& label) {
    const int n = qubit_count(psi);
    ProverSpec p;
    p.variant = ProverVariant::Honest;
    p.label = label;
    for (int c = 0; c < copies; ++c) p.blocks.push_back(make_block(psi, n, c * n, 0));
    return p;
}

QState named_state(const std::string& name) {
    const double s = 1.0 / std::sqrt(2.0);
    RegisterLayout one;
    one.add("t0", 2);
    if (name == "zero") return QState::from_amplitudes(one, {1, 0});
    if (name == "one") return QState::from_amplitudes(one, {0, 1});
    if (name == "plus") return QState::from_amplitudes(one, {s, s});
    if (name == "minus") return QState::from_amplitudes(one, {s, -s});
    if (name == "bell") {
        RegisterLayout two;
        two.add("t0", 2);
        two.add("t1", 2);
        return QState::from_amplitudes(two, {s, 0, 0, s});
    }
    if (name.rfind("basis:", 0) == 0) {
        Bits b = parse_bits(name.substr(6));
        RegisterLayout L;
        std::vector<u64> v;
        for (std::size_t i = 0; i < b.size(); ++i) {
            L.add("t" + std::to_string(i), 2);
            v.push_back(static_cast<u64>(b[i]));
        }
        return QState::basis(L, v);
    }
    throw InputError("unknown state name: " + name);
}

static ProverSpec characterized_from(const QState& init, int n_committed, const CPTPMap& attack, ProverVariant v,
                                     const std::string& label) {
    ProverSpec p;
    p.variant = v;
    p.label = label;
    ProverBlock blk = make_block(init, n_committed, 0, 0);
    blk.attack = attack;
    validate_attack(blk);
    p.blocks.push_back(std::move(blk));
    return p;
}

ProverSpec characterized_prover(const QState& psi, const CPTPMap& attack, int n_aux, const std::string& label) {
    return characterized_from(with_aux(psi, zeros(n_aux)), qubit_count(psi), attack, ProverVariant::Characterized,
                              label);
}

bool is_x_trivial(const CPTPMap& map, const std::vector<u64>& dims, const std::vector<std::size_t>& positions,
                  double tol) {
    const int nq = static_cast<int>(dims.size());
    for (u64 d : dims)
        if (d != 2) throw InputError("is_x_trivial expects qubit factors");
    // per outcome: S(P_b ρ P_b) = P_b S(ρ) P_b, which rules out X components
    for (std::size_t p : positions)
        for (int b = 0; b < 2; ++b) {
            CMat P = CMat::Zero(2, 2);
            P(b, b) = 1;
            const CPTPMap proj{{embed(P, {static_cast<int>(p)}, nq)}};
            if ((choi(compose(map, proj)) - choi(compose(proj, map))).cwiseAbs().maxCoeff() > tol) return false;
        }
    return true;
}

ProverSpec trivial_prover(const QState& psi, const CPTPMap& attack, int n_aux, const std::string& label) {
    const int n = qubit_count(psi);
    std::vector<u64> dims(n + n_aux, 2);
    std::vector<std::size_t> pos;
    for (int i = 0; i < n; ++i) pos.push_back(i);
    if (!is_x_trivial(attack, dims, pos)) throw InputError("attack does not commute with standard-basis measurement");
    return characterized_from(with_aux(psi, zeros(n_aux)), n, attack, ProverVariant::Trivial, label);
}

static std::pair<std::size_t, std::size_t> locate(const ProverSpec& p, int global_index) {
    for (std::size_t b = 0; b < p.blocks.size(); ++b)
        for (std::size_t i = 0; i < p.blocks[b].committed.size(); ++i)
            if (p.blocks[b].committed[i] == qname(global_index)) return {b, i};
    throw InputError("no committed qubit " + std::to_string(global_index));
}

static CPTPMap block_attack(const ProverBlock& blk) {
    return blk.attack ? *blk.attack : CPTPMap::identity(blk.initial.layout.total());
}

ProverSpec x_trivialize_prover(const ProverSpec& p, int global_index) {
    auto [b, i] = locate(p, global_index);
    ProverSpec out = p;
    ProverBlock& blk = out.blocks[b];
    std::vector<u64> dims(blk.initial.layout.size(), 2);
    blk.attack = x_trivialize(block_attack(blk), dims, i);
    if (out.variant == ProverVariant::Honest) out.variant = ProverVariant::Characterized;
    return out;
}

ProverSpec x_trivialize_all(const ProverSpec& p) {
    ProverSpec out = p;
    for (int g = 0; g < p.n_qubits(); ++g) out = x_trivialize_prover(out, g);
    out.variant = ProverVariant::Trivial;
    return out;
}

ProverSpec z_twirl_prover(const ProverSpec& p, int global_index) {
    auto [b, i] = locate(p, global_index);
    ProverSpec out = p;
    ProverBlock& blk = out.blocks[b];
    std::vector<u64> dims(blk.initial.layout.size(), 2);
    blk.attack = z_twirl(block_attack(blk), dims, i);
    if (out.variant == ProverVariant::Honest) out.variant = ProverVariant::Characterized;
    return out;
}

std::vector<NamedAttack> attack_library() {
    return {
        {"I", "identity"},
        {"X", "X on the target committed qubit"},
        {"Z", "Z on the target committed qubit"},
        {"H", "Hadamard on the target committed qubit"},
        {"CZ_aux", "controlled-Z between the target committed qubit and an aux qubit in |+>"},
        {"U2", "fixed-seed random unitary on the target and one other qubit"},
    };
}

ProverSpec attacked_prover(const QState& psi, const std::string& attack, int target, std::uint64_t seed) {
    const int n = qubit_count(psi);
    if (target < 0 || target >= n) throw InputError("attack target out of range");
    auto single = [&](const CMat& g) {
        return characterized_prover(psi, CPTPMap{{embed(g, {target}, n)}}, 0, "attack:" + attack);
    };
    if (attack == "I") return characterized_prover(psi, CPTPMap::identity(u64{1} << n), 0, "attack:I");
    if (attack == "X") return single(gate_x());
    if (attack == "Z") return single(gate_z());
    if (attack == "H") return single(gate_h());
    if (attack == "CZ_aux") {
        RegisterLayout L;
        L.add("t", 2);
        QState plus = QState::from_amplitudes(L, {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)});
        CMat cz = CMat::Identity(4, 4);
        cz(3, 3) = -1;
        return characterized_from(tensor(psi, plus), n, CPTPMap{{embed(cz, {target, n}, n + 1)}},
                                  ProverVariant::Characterized, "attack:CZ_aux");
    }
    if (attack == "U2") {
        Rng rng(seed);
        CMat U = random_unitary(4, rng);
        if (n >= 2) return characterized_prover(psi, CPTPMap{{embed(U, {target, (target + 1) % n}, n)}}, 0, "attack:U2");
        return characterized_prover(psi, CPTPMap{{embed(U, {target, n}, n + 1)}}, 1, "attack:U2");
    }
    throw InputError("unknown attack: " + attack);
}

// ---- Verifier --------------------------------------------------------------

std::vector<KeyPair> verifier_keygen(const Bits& h, const Params& p, Rng& rng, const KeyOptions& opt) {
    std::vector<KeyPair> keys;
    for (int hi : h) keys.push_back(hi ? gen_f(p, rng, opt) : gen_g(p, rng, opt));
    return keys;
}

std::vector<KeyPair> claw_free_keys(int n, const Params& p, Rng& rng, const KeyOptions& opt) {
    std::vector<KeyPair> keys;
    for (int i = 0; i < n; ++i) keys.push_back(gen_f(p, rng, opt));
    return keys;
}

Verdict verify_answers(const std::vector<KeyPair>& keys, const Bits& h, RoundType round,
                       const std::vector<ZqVector>& y, const std::vector<Answer>& answers, const GSetPredicate& gset,
                       Rng& rng) {
    const std::size_t n = h.size();
    if (keys.size() != n || y.size() != n || answers.size() != n)
        throw InputError("verify_answers: transcript sizes do not match the basis choice");
    Verdict v;
    v.qubit_ok.assign(n, 1);
    if (round == RoundType::Test) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = answers[i];
            const bool ok = (a.b == 0 || a.b == 1) && chk(keys[i].pk, keys[i].td.B_P, a.b, a.x, y[i]);
            v.qubit_ok[i] = ok ? 1 : 0;
        }
    } else {
        v.m.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const Trapdoor& td = keys[i].td;
            bool ok = false;
            int m = 0;
            if (h[i] == 0) {
                if (auto r = inv_g(td, y[i])) {
                    ok = true;
                    m = r->first;
                }
            } else if (auto claw = claw_of(td, y[i])) {
                const i64 q = td.pk.q;
                const int w = td.pk.A.cols * coord_bits(q);
                const Bits d = mask_to_bits(answers[i].d, w);
                if (g_set_member(gset, td, 0, claw->first, d) && g_set_member(gset, td, 1, claw->second, d)) {
                    ok = true;
                    m = answers[i].b ^ parity(answers[i].d & (j_index(claw->first, q) ^ j_index(claw->second, q)));
                }
            }
            if (!ok) m = rng.bit();
            v.qubit_ok[i] = ok ? 1 : 0;
            v.m[i] = m;
        }
    }
    v.accept = true;
    for (int ok : v.qubit_ok) v.accept = v.accept && ok;
    return v;
}

// ---- Prover simulation -----------------------------------------------------

namespace {

CommitSpec commit_spec(const std::vector<KeyPair>& keys, const std::string& q) {
    const int i = qindex(q);
    CommitSpec s;
    s.pk = &keys[i].pk;
    s.B_P = keys[i].td.B_P;
    s.committed = q;
    s.preimage = xname(i);
    return s;
}

void apply_kraus_sampled(QState& st, const ProverBlock& blk, Rng& rng) {
    if (!blk.attack) return;
    const auto regs = block_regs(blk);
    std::vector<QState> outs;
    std::vector<double> w;
    for (auto& K : blk.attack->kraus) {
        QState t = st;
        apply_matrix(t, regs, K);
        w.push_back(t.norm2());
        outs.push_back(std::move(t));
    }
    st = std::move(outs[rng.discrete(w)]);
    st.renormalize();
}

}  // namespace

Transcript run_session(const ProverSpec& prover, const Bits& h, RoundType round, const SessionConfig& cfg,
                       std::uint64_t seed) {
    const int n = prover.n_qubits();
    if (static_cast<int>(h.size()) != n) throw InputError("basis choice length does not match the prover's qubits");
    Transcript t;
    t.params = cfg.params;
    t.h = h;
    t.key_opt = cfg.key_opt;
    t.gset = cfg.gset;
    t.seed = seed;
    t.requested = round;
    Rng master(seed);
    t.verifier_seed = master.derive_seed();
    t.prover_seed = master.derive_seed();
    {
        std::ostringstream os;
        os << std::hex << seed;
        t.session_id = os.str();
    }
    Rng vr(t.verifier_seed), pr(t.prover_seed);
    const GSetPredicate gset = g_set_by_name(cfg.gset);

    // 1. keys
    std::vector<KeyPair> keys = verifier_keygen(h, cfg.params, vr, cfg.key_opt);
    for (auto& k : keys) t.keys.push_back(k.pk);

    // 2. commitments
    t.y.assign(n, {});
    std::vector<QState> states;
    for (auto& blk : prover.blocks) {
        QState st = blk.initial;
        for (auto& q : blk.committed) {
            CommitResult cr = samp_commit(st, commit_spec(keys, q), pr, cfg.commit_mode, cfg.budget);
            st = std::move(cr.state);
            t.y[qindex(q)] = cr.y;
        }
        states.push_back(std::move(st));
    }

    // 3. round type
    t.round = round == RoundType::RandomCoin ? (vr.bit() ? RoundType::Hadamard : RoundType::Test) : round;

    // 4. answers
    t.answers.assign(n, {});
    const i64 q = cfg.params.q;
    for (std::size_t b = 0; b < prover.blocks.size(); ++b) {
        const ProverBlock& blk = prover.blocks[b];
        QState& st = states[b];
        if (t.round == RoundType::Test) {
            for (auto& c : blk.committed) {
                const int i = qindex(c);
                MeasureResult mr = measure(st, {c, xname(i)}, pr);
                t.answers[i].b = static_cast<int>(mr.values[0]);
                t.answers[i].x = vec_from_index(mr.values[1], cfg.params.n, q);
            }
        } else {
            for (auto& c : blk.committed) apply_u_j(st, xname(qindex(c)), cfg.params.n, q);
            apply_kraus_sampled(st, blk, pr);
            for (auto& c : blk.committed) {
                const int i = qindex(c);
                HadamardOutcome o = hadamard_round_measure(st, c, xname(i), pr);
                t.answers[i].b = o.bprime;
                t.answers[i].d = o.d;
            }
        }
    }

    // 5. verdict
    Verdict v = verify_answers(keys, h, t.round, t.y, t.answers, gset, vr);
    t.qubit_ok = v.qubit_ok;
    t.accept = v.accept;
    t.m = v.m;
    return t;
}

// ---- Exact distributions ---------------------------------------------------

namespace {

struct Leaf {
    double p = 1;
    QState st;
    std::map<int, ZqVector> y;  // by global qubit index
};

std::vector<Leaf> commit_leaves(const ProverBlock& blk, const std::vector<KeyPair>& keys) {
    std::vector<Leaf> leaves{{1.0, blk.initial, {}}};
    for (auto& q : blk.committed) {
        std::vector<Leaf> next;
        for (auto& lf : leaves)
            for (auto& br : commit_branches(lf.st, commit_spec(keys, q))) {
                Leaf nl{lf.p * br.probability, std::move(br.state), lf.y};
                nl.y[qindex(q)] = br.y;
                next.push_back(std::move(nl));
            }
        leaves = std::move(next);
    }
    return leaves;
}

std::vector<QState> kraus_branches(const QState& st, const ProverBlock& blk) {
    if (!blk.attack) return {st};
    std::vector<QState> out;
    for (auto& K : blk.attack->kraus) {
        QState t = st;
        apply_matrix(t, block_regs(blk), K);
        out.push_back(std::move(t));
    }
    return out;
}

using WeightedKeys = std::map<u64, double>;

WeightedKeys combine(const WeightedKeys& a, const WeightedKeys& b) {
    WeightedKeys out;
    for (auto& [ka, wa] : a)
        for (auto& [kb, wb] : b) out[ka | kb] += wa * wb;
    return out;
}

}  // namespace

ExactDistribution exact_distribution(const ProverSpec& prover, const Bits& h, const std::vector<KeyPair>& keys,
                                     const SessionConfig& cfg) {
    const int n = prover.n_qubits();
    if (static_cast<int>(h.size()) != n || static_cast<int>(keys.size()) != n)
        throw InputError("exact_distribution: sizes do not match");
    const GSetPredicate gset = g_set_by_name(cfg.gset);
    const i64 q = cfg.params.q;
    const int w = cfg.params.n * coord_bits(q);

    WeightedKeys all{{0, 1.0}}, acc{{0, 1.0}};
    for (auto& blk : prover.blocks) {
        WeightedKeys ball, bacc;
        std::vector<int> hq, sq;  // global indices of Hadamard / standard qubits
        for (auto& c : blk.committed) (h[qindex(c)] ? hq : sq).push_back(qindex(c));
        std::vector<std::string> mregs;
        for (int i : hq) {
            mregs.push_back(qname(i));
            mregs.push_back(xname(i));
        }
        for (auto& lf : commit_leaves(blk, keys)) {
            // verifier-side decode data for this leaf
            u64 fixed_bits = 0, fail_std = 0;
            for (int i : sq) {
                if (auto r = inv_g(keys[i].td, lf.y[i]))
                    fixed_bits |= static_cast<u64>(r->first) << i;
                else
                    fail_std |= u64{1} << i;
            }
            std::map<int, std::optional<std::pair<ZqVector, ZqVector>>> claws;
            for (int i : hq) claws[i] = claw_of(keys[i].td, lf.y[i]);

            QState st = lf.st;
            for (auto& c : blk.committed) apply_u_j(st, xname(qindex(c)), cfg.params.n, q);
            for (QState& phi : kraus_branches(st, blk)) {
                for (int i : hq) {
                    apply_matrix(phi, {qname(i)}, gate_h());
                    apply_wht(phi, xname(i));
                }
                std::vector<double> p = mregs.empty() ? std::vector<double>{phi.norm2()} : marginal(phi, mregs);
                for (u64 c = 0; c < p.size(); ++c) {
                    if (p[c] <= 0) continue;
                    u64 bits = fixed_bits, fail = fail_std, rem = c;
                    for (std::size_t k = hq.size(); k-- > 0;) {
                        const int i = hq[k];
                        const u64 d = rem % (u64{1} << w);
                        rem >>= w;
                        const int bp = static_cast<int>(rem & 1);
                        rem >>= 1;
                        const auto& cl = claws[i];
                        bool ok = cl.has_value();
                        if (ok) {
                            const Bits db = mask_to_bits(d, w);
                            ok = g_set_member(gset, keys[i].td, 0, cl->first, db) &&
                                 g_set_member(gset, keys[i].td, 1, cl->second, db);
                        }
                        if (ok)
                            bits |= static_cast<u64>(bp ^ parity(d & (j_index(cl->first, q) ^ j_index(cl->second, q))))
                                    << i;
                        else
                            fail |= u64{1} << i;
                    }
                    const double wgt = lf.p * p[c];
                    if (!fail) {
                        ball[bits] += wgt;
                        bacc[bits] += wgt;
                        continue;
                    }
                    // random bits on failed qubits, uniformly
                    std::vector<int> fb;
                    for (int i = 0; i < n; ++i)
                        if ((fail >> i) & 1) fb.push_back(i);
                    const double share = wgt / static_cast<double>(u64{1} << fb.size());
                    for (u64 r = 0; r < (u64{1} << fb.size()); ++r) {
                        u64 key = bits;
                        for (std::size_t k = 0; k < fb.size(); ++k)
                            if ((r >> k) & 1) key |= u64{1} << fb[k];
                        ball[key] += share;
                    }
                }
            }
        }
        all = combine(all, ball);
        acc = bacc.empty() ? WeightedKeys{} : combine(acc, bacc);
    }
    ExactDistribution out;
    out.D = all;
    double pa = 0;
    for (auto& [k, v] : acc) pa += v;
    out.accept_probability = pa;
    if (pa > 0)
        for (auto& [k, v] : acc) out.DC[k] = v / pa;
    return out;
}

Distribution ideal_distribution(const DensityOp& rho, const Bits& h) {
    std::vector<std::string> names;
    std::vector<Basis> bases;
    for (std::size_t i = 0; i < h.size(); ++i) {
        names.push_back(rho.layout[i].name);
        bases.push_back(h[i] ? Basis::Hadamard : Basis::Standard);
    }
    return exact_measurement_distribution(rho, names, bases);
}

Distribution ideal_distribution(const QState& psi, const Bits& h) {
    std::vector<std::string> names;
    std::vector<Basis> bases;
    for (std::size_t i = 0; i < h.size(); ++i) {
        names.push_back(psi.layout[i].name);
        bases.push_back(h[i] ? Basis::Hadamard : Basis::Standard);
    }
    return exact_measurement_distribution(psi, names, bases);
}

EmpiricalDistribution estimate_distribution(const ProverSpec& prover, const Bits& h, const SessionConfig& cfg,
                                            int trials, std::uint64_t seed) {
    if (trials < 1) throw InputError("trials must be at least 1");
    EmpiricalDistribution e;
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        Transcript tr = run_session(prover, h, RoundType::Hadamard, cfg, rng.derive_seed());
        u64 key = 0;
        for (std::size_t i = 0; i < tr.m.size(); ++i)
            if (tr.m[i]) key |= u64{1} << i;
        e.D[key] += 1;
        if (tr.accept) {
            e.DC[key] += 1;
            ++e.accepted;
        }
    }
    e.trials = trials;
    for (auto& [k, v] : e.D) v /= trials;
    if (e.accepted)
        for (auto& [k, v] : e.DC) v /= e.accepted;
    return e;
}

// ---- Underlying state ------------------------------------------------------

DensityOp construct_underlying_state(const ProverSpec& prover, const Bits& h, const std::vector<KeyPair>& keys,
                                     HybridVariant variant, const SessionConfig& cfg) {
    const int n = prover.n_qubits();
    if (static_cast<int>(h.size()) != n || static_cast<int>(keys.size()) != n)
        throw InputError("construct_underlying_state: sizes do not match");
    if (prover.variant != ProverVariant::Trivial && prover.variant != ProverVariant::Honest)
        throw InputError("construct_underlying_state requires a trivial prover");
    const i64 q = cfg.params.q;
    const int w = cfg.params.n * coord_bits(q);

    std::optional<DensityOp> total;
    for (auto& blk : prover.blocks) {
        const std::size_t k = blk.committed.size();
        const auto dimc = static_cast<Eigen::Index>(u64{1} << k);
        DensityOp rb;
        for (auto& c : blk.committed) rb.layout.add(c, 2);
        rb.rho = CMat::Zero(dimc, dimc);

        for (auto& lf : commit_leaves(blk, keys)) {
            std::vector<u64> zmask(k, 0);  // J(x0) ⊕ J(x1) where the decode applies
            for (std::size_t j = 0; j < k; ++j) {
                const int i = qindex(blk.committed[j]);
                const bool decode = variant == HybridVariant::Full || h[i] == 1;
                if (!decode || keys[i].td.kind != KeyKind::ClawFree) continue;
                if (auto cl = claw_of(keys[i].td, lf.y[i])) zmask[j] = j_index(cl->first, q) ^ j_index(cl->second, q);
            }
            QState st = lf.st;
            for (auto& c : blk.committed) apply_u_j(st, xname(qindex(c)), cfg.params.n, q);
            for (QState& phi : kraus_branches(st, blk)) {
                for (auto& c : blk.committed) apply_wht(phi, xname(qindex(c)));
                const u64 nd = u64{1} << (w * k);
                for (u64 dt = 0; dt < nd; ++dt) {
                    QState proj = phi;
                    for (std::size_t j = 0; j < k; ++j) {
                        const u64 d = (dt >> (w * j)) & ((u64{1} << w) - 1);
                        proj = fix_register(proj, xname(qindex(blk.committed[j])), d);
                    }
                    if (proj.norm2() <= 0) continue;
                    for (std::size_t j = 0; j < k; ++j) {
                        const u64 d = (dt >> (w * j)) & ((u64{1} << w) - 1);
                        if (parity(d & zmask[j])) apply_matrix(proj, {blk.committed[j]}, gate_z());
                    }
                    rb.rho += lf.p * reduced_density(proj, blk.committed).rho;
                }
            }
        }
        rb.trace = rb.rho.trace().real();
        total = total ? tensor(*total, rb) : rb;
    }
    return *total;
}

// ---- Transcripts -----------------------------------------------------------

namespace {

nlohmann::json record(std::uint64_t seq, const std::string& dir, nlohmann::json payload) {
    return nlohmann::json{{"seq", seq}, {"direction", dir}, {"payload", std::move(payload)}};
}

}  // namespace

std::vector<nlohmann::json> transcript_records(const Transcript& t, std::uint64_t& seq) {
    using nlohmann::json;
    const int w = t.params.n * coord_bits(t.params.q);
    std::vector<json> out;
    json keys = json::array();
    for (auto& pk : t.keys) keys.push_back(public_key_to_json(pk));
    out.push_back(record(seq++, "verifier->prover",
                         {{"session", t.session_id},
                          {"type", "keys"},
                          {"params", params_to_json(t.params)},
                          {"round_mode", round_name(t.requested)},
                          {"keys", keys}}));
    out.push_back(record(seq++, "prover->verifier", {{"session", t.session_id}, {"type", "commitments"}, {"y", t.y}}));
    out.push_back(record(seq++, "verifier->prover",
                         {{"session", t.session_id}, {"type", "round"}, {"round", round_name(t.round)}}));
    json answers = json::array();
    for (auto& a : t.answers) {
        if (t.round == RoundType::Test)
            answers.push_back({{"b", a.b}, {"x", a.x}});
        else
            answers.push_back({{"b", a.b}, {"d", bits_string(mask_to_bits(a.d, w))}});
    }
    out.push_back(record(seq++, "prover->verifier", {{"session", t.session_id}, {"type", "answers"}, {"answers", answers}}));
    json verdict = {{"session", t.session_id},
                    {"type", "verdict"},
                    {"h", bits_string(t.h)},
                    {"seed", t.seed},
                    {"verifier_seed", t.verifier_seed},
                    {"prover_seed", t.prover_seed},
                    {"zero_noise", t.key_opt.zero_noise},
                    {"certify", t.key_opt.certify},
                    {"gset", t.gset},
                    {"qubit_ok", t.qubit_ok},
                    {"accept", t.accept}};
    if (t.round == RoundType::Hadamard) verdict["m"] = t.m;
    out.push_back(record(seq++, "verifier", verdict));
    return out;
}

void write_transcripts(const std::string& path, const std::vector<Transcript>& ts, const Params& p, std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write transcript file: " + path);
    out << nlohmann::json{{"version", kVersion}, {"kind", "transcript"}, {"params_hash", params_hash(p)}, {"seed", seed}}
               .dump()
        << "\n";
    std::uint64_t seq = 0;
    for (auto& t : ts)
        for (auto& r : transcript_records(t, seq)) out << r.dump() << "\n";
}

std::vector<Transcript> read_transcripts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open transcript file: " + path);
    std::string line;
    std::vector<Transcript> out;
    std::vector<std::string> expected = {"keys", "commitments", "round", "answers", "verdict"};
    std::size_t stage = 0;
    bool header = true;
    try {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            if (header) {
                if (!j.contains("version") || !j.contains("params_hash")) throw InputError("transcript header missing");
                header = false;
                continue;
            }
            const auto& pl = j.at("payload");
            const std::string type = pl.at("type").get<std::string>();
            if (type != expected[stage]) throw InputError("transcript messages out of order at seq " + j.at("seq").dump());
            if (stage == 0) {
                out.emplace_back();
                Transcript& t = out.back();
                t.session_id = pl.at("session").get<std::string>();
                t.params = params_from_json(pl.at("params"));
                t.requested = round_from_name(pl.at("round_mode").get<std::string>());
                for (auto& k : pl.at("keys")) t.keys.push_back(public_key_from_json(k));
            } else {
                Transcript& t = out.back();
                if (pl.at("session").get<std::string>() != t.session_id) throw InputError("interleaved sessions");
                if (type == "commitments") t.y = pl.at("y").get<std::vector<ZqVector>>();
                if (type == "round") t.round = round_from_name(pl.at("round").get<std::string>());
                if (type == "answers") {
                    for (auto& a : pl.at("answers")) {
                        Answer ans;
                        ans.b = a.at("b").get<int>();
                        if (a.contains("x")) ans.x = a.at("x").get<ZqVector>();
                        if (a.contains("d")) ans.d = bits_to_mask(parse_bits(a.at("d").get<std::string>()));
                        t.answers.push_back(ans);
                    }
                }
                if (type == "verdict") {
                    t.h = parse_bits(pl.at("h").get<std::string>());
                    t.seed = pl.at("seed").get<std::uint64_t>();
                    t.verifier_seed = pl.at("verifier_seed").get<std::uint64_t>();
                    t.prover_seed = pl.at("prover_seed").get<std::uint64_t>();
                    t.key_opt.zero_noise = pl.at("zero_noise").get<bool>();
                    t.key_opt.certify = pl.at("certify").get<bool>();
                    t.gset = pl.at("gset").get<std::string>();
                    t.qubit_ok = pl.at("qubit_ok").get<std::vector<int>>();
                    t.accept = pl.at("accept").get<bool>();
                    if (pl.contains("m")) t.m = pl.at("m").get<std::vector<int>>();
                }
            }
            stage = (stage + 1) % expected.size();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed transcript: ") + e.what());
    }
    if (header) throw InputError("empty transcript file: " + path);
    if (stage != 0) throw InputError("transcript ends mid-session");
    return out;
}

ReplayResult replay(const Transcript& t) {
    ReplayResult r;
    Rng vr(t.verifier_seed);
    std::vector<KeyPair> keys = verifier_keygen(t.h, t.params, vr, t.key_opt);
    r.keys_match = keys.size() == t.keys.size();
    for (std::size_t i = 0; r.keys_match && i < keys.size(); ++i)
        r.keys_match = keys[i].pk.A == t.keys[i].A && keys[i].pk.t == t.keys[i].t && keys[i].pk.q == t.keys[i].q;
    if (!r.keys_match) {
        r.detail = "regenerated keys differ from the transcript";
        return r;
    }
    RoundType round = t.requested;
    if (round == RoundType::RandomCoin) round = vr.bit() ? RoundType::Hadamard : RoundType::Test;
    r.round_match = round == t.round;
    if (!r.round_match) {
        r.detail = "round coin differs from the transcript";
        return r;
    }
    Verdict v = verify_answers(keys, t.h, t.round, t.y, t.answers, g_set_by_name(t.gset), vr);
    r.verdict_match = v.qubit_ok == t.qubit_ok && v.accept == t.accept && v.m == t.m;
    if (!r.verdict_match) r.detail = "recomputed verdict differs from the transcript";
    return r;
}

}  // namespace cvqc
