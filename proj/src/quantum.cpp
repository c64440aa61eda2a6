#include "cvqc/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace cvqc {

// ---- Layout ----------------------------------------------------------------

RegisterLayout::RegisterLayout(std::vector<Register> regs) {
    for (auto& r : regs) add(r.name, r.dim);
}

void RegisterLayout::add(const std::string& name, u64 dim) {
    if (dim == 0) throw InputError("register " + name + " has zero dimension");
    if (contains(name)) throw InputError("duplicate register name: " + name);
    regs_.push_back({name, dim});
}

int RegisterLayout::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < regs_.size(); ++i)
        if (regs_[i].name == name) return static_cast<int>(i);
    throw InputError("unknown register: " + name);
}

bool RegisterLayout::contains(const std::string& name) const {
    return std::any_of(regs_.begin(), regs_.end(), [&](const Register& r) { return r.name == name; });
}

u64 RegisterLayout::total() const {
    u64 t = 1;
    for (auto& r : regs_) t *= r.dim;
    return t;
}

u64 RegisterLayout::stride(std::size_t i) const {
    u64 s = 1;
    for (std::size_t j = i + 1; j < regs_.size(); ++j) s *= regs_[j].dim;
    return s;
}

u64 RegisterLayout::dim_of(const std::vector<std::string>& names) const {
    u64 d = 1;
    for (auto& n : names) d *= regs_[index_of(n)].dim;
    return d;
}

bool RegisterLayout::operator==(const RegisterLayout& o) const {
    if (regs_.size() != o.regs_.size()) return false;
    for (std::size_t i = 0; i < regs_.size(); ++i)
        if (regs_[i].name != o.regs_[i].name || regs_[i].dim != o.regs_[i].dim) return false;
    return true;
}

namespace {

// Index sets for a gather/scatter over a register subset: the amplitude of
// (rest = bases[r], subset = c) lives at bases[r] + offsets[c].
struct Gather {
    std::vector<u64> offsets;
    std::vector<u64> bases;
};

Gather make_gather(const RegisterLayout& L, const std::vector<std::string>& regs) {
    std::vector<int> sel;
    for (auto& n : regs) {
        int i = L.index_of(n);
        if (std::find(sel.begin(), sel.end(), i) != sel.end()) throw InputError("register listed twice: " + n);
        sel.push_back(i);
    }
    Gather g;
    u64 dimS = 1;
    for (int i : sel) dimS *= L[i].dim;
    g.offsets.resize(dimS);
    for (u64 c = 0; c < dimS; ++c) {
        u64 rem = c, off = 0;
        for (std::size_t k = sel.size(); k-- > 0;) {
            const u64 d = L[sel[k]].dim;
            off += (rem % d) * L.stride(sel[k]);
            rem /= d;
        }
        g.offsets[c] = off;
    }
    std::vector<int> rest;
    for (std::size_t i = 0; i < L.size(); ++i)
        if (std::find(sel.begin(), sel.end(), static_cast<int>(i)) == sel.end()) rest.push_back(static_cast<int>(i));
    u64 dimR = 1;
    for (int i : rest) dimR *= L[i].dim;
    g.bases.resize(dimR);
    for (u64 r = 0; r < dimR; ++r) {
        u64 rem = r, off = 0;
        for (std::size_t k = rest.size(); k-- > 0;) {
            const u64 d = L[rest[k]].dim;
            off += (rem % d) * L.stride(rest[k]);
            rem /= d;
        }
        g.bases[r] = off;
    }
    return g;
}

void apply_matrix_vec(const RegisterLayout& L, CVec& v, const std::vector<std::string>& regs, const CMat& M) {
    Gather g = make_gather(L, regs);
    const auto d = static_cast<Eigen::Index>(g.offsets.size());
    if (M.rows() != d || M.cols() != d) throw InputError("apply_matrix: operator dimension mismatch");
    CVec sub(d), out(d);
    for (u64 base : g.bases) {
        for (Eigen::Index c = 0; c < d; ++c) sub[c] = v[base + g.offsets[c]];
        out.noalias() = M * sub;
        for (Eigen::Index c = 0; c < d; ++c) v[base + g.offsets[c]] = out[c];
    }
}

void fwht(std::vector<cplx>& a) {
    const std::size_t n = a.size();
    for (std::size_t len = 1; len < n; len <<= 1)
        for (std::size_t i = 0; i < n; i += len << 1)
            for (std::size_t j = i; j < i + len; ++j) {
                cplx u = a[j], w = a[j + len];
                a[j] = u + w;
                a[j + len] = u - w;
            }
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& x : a) x *= s;
}

}  // namespace

QState QState::basis(const RegisterLayout& layout, const std::vector<u64>& values) {
    if (values.size() != layout.size()) throw InputError("basis: wrong number of register values");
    QState st;
    st.layout = layout;
    st.amp = CVec::Zero(static_cast<Eigen::Index>(layout.total()));
    u64 idx = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (values[i] >= layout[i].dim) throw InputError("basis: value out of range for " + layout[i].name);
        idx += values[i] * layout.stride(i);
    }
    st.amp[static_cast<Eigen::Index>(idx)] = 1.0;
    return st;
}

QState QState::from_amplitudes(const RegisterLayout& layout, const std::vector<cplx>& amps) {
    if (amps.size() != layout.total()) throw InputError("from_amplitudes: size mismatch");
    QState st;
    st.layout = layout;
    st.amp = Eigen::Map<const CVec>(amps.data(), static_cast<Eigen::Index>(amps.size()));
    return st;
}

void QState::renormalize() {
    const double n = amp.norm();
    if (n == 0) throw InputError("cannot renormalize a zero state");
    amp /= n;
    normalized = true;
}

QState tensor(const QState& a, const QState& b) {
    QState out;
    out.layout = a.layout;
    for (auto& r : b.layout.registers()) out.layout.add(r.name, r.dim);
    out.amp = CVec(a.amp.size() * b.amp.size());
    for (Eigen::Index i = 0; i < a.amp.size(); ++i) out.amp.segment(i * b.amp.size(), b.amp.size()) = a.amp[i] * b.amp;
    out.normalized = a.normalized && b.normalized;
    return out;
}

void apply_matrix(QState& st, const std::vector<std::string>& regs, const CMat& M) {
    apply_matrix_vec(st.layout, st.amp, regs, M);
}

void apply_wht(QState& st, const std::string& reg) {
    const int ri = st.layout.index_of(reg);
    const u64 d = st.layout[ri].dim;
    if (d & (d - 1)) throw InputError("apply_wht: register dimension is not a power of two");
    Gather g = make_gather(st.layout, {reg});
    std::vector<cplx> sub(d);
    for (u64 base : g.bases) {
        for (u64 c = 0; c < d; ++c) sub[c] = st.amp[base + g.offsets[c]];
        fwht(sub);
        for (u64 c = 0; c < d; ++c) st.amp[base + g.offsets[c]] = sub[c];
    }
}

void apply_relabel(QState& st, const std::string& reg, u64 new_dim, const std::function<u64(u64)>& map) {
    const int ri = st.layout.index_of(reg);
    const u64 old_dim = st.layout[ri].dim;
    const u64 stride = st.layout.stride(ri);
    std::vector<Register> regs = st.layout.registers();
    regs[ri].dim = new_dim;
    RegisterLayout nl(regs);
    std::vector<u64> table(old_dim);
    std::vector<char> used(new_dim, 0);
    for (u64 v = 0; v < old_dim; ++v) {
        table[v] = map(v);
        if (table[v] >= new_dim || used[table[v]]) throw InputError("apply_relabel: map is not injective into range");
        used[table[v]] = 1;
    }
    CVec out = CVec::Zero(static_cast<Eigen::Index>(nl.total()));
    for (u64 idx = 0; idx < static_cast<u64>(st.amp.size()); ++idx) {
        if (st.amp[idx] == cplx(0)) continue;
        const u64 lo = idx % stride;
        const u64 v = (idx / stride) % old_dim;
        const u64 hi = idx / (stride * old_dim);
        out[(hi * new_dim + table[v]) * stride + lo] = st.amp[idx];
    }
    st.layout = nl;
    st.amp = std::move(out);
}

void apply_relabel_inverse(QState& st, const std::string& reg, u64 old_dim, const std::function<u64(u64)>& map) {
    const int ri = st.layout.index_of(reg);
    const u64 new_dim = st.layout[ri].dim;
    const u64 stride = st.layout.stride(ri);
    std::vector<i64> inv(new_dim, -1);
    for (u64 v = 0; v < old_dim; ++v) inv[map(v)] = static_cast<i64>(v);
    std::vector<Register> regs = st.layout.registers();
    regs[ri].dim = old_dim;
    RegisterLayout nl(regs);
    CVec out = CVec::Zero(static_cast<Eigen::Index>(nl.total()));
    for (u64 idx = 0; idx < static_cast<u64>(st.amp.size()); ++idx) {
        if (std::abs(st.amp[idx]) == 0.0) continue;
        const u64 lo = idx % stride;
        const u64 v = (idx / stride) % new_dim;
        const u64 hi = idx / (stride * new_dim);
        if (inv[v] < 0) {
            if (std::abs(st.amp[idx]) > 1e-12) throw InputError("apply_relabel_inverse: amplitude outside image");
            continue;
        }
        out[(hi * old_dim + static_cast<u64>(inv[v])) * stride + lo] = st.amp[idx];
    }
    st.layout = nl;
    st.amp = std::move(out);
}

std::vector<double> marginal(const QState& st, const std::vector<std::string>& regs) {
    Gather g = make_gather(st.layout, regs);
    std::vector<double> p(g.offsets.size(), 0.0);
    for (u64 base : g.bases)
        for (std::size_t c = 0; c < g.offsets.size(); ++c) p[c] += std::norm(st.amp[base + g.offsets[c]]);
    return p;
}

QState fix_register(const QState& st, const std::string& reg, u64 value) {
    Gather g = make_gather(st.layout, {reg});
    if (value >= g.offsets.size()) throw InputError("fix_register: value out of range");
    QState out;
    for (auto& r : st.layout.registers())
        if (r.name != reg) out.layout.add(r.name, r.dim);
    out.amp = CVec(static_cast<Eigen::Index>(g.bases.size()));
    for (std::size_t r = 0; r < g.bases.size(); ++r) out.amp[r] = st.amp[g.bases[r] + g.offsets[value]];
    out.normalized = false;
    return out;
}

QState project(const QState& st, const std::vector<std::string>& regs, const std::vector<u64>& values) {
    if (regs.size() != values.size()) throw InputError("project: size mismatch");
    QState out = st;
    std::vector<int> idx;
    for (auto& n : regs) idx.push_back(st.layout.index_of(n));
    for (u64 i = 0; i < static_cast<u64>(st.amp.size()); ++i) {
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if ((i / st.layout.stride(idx[k])) % st.layout[idx[k]].dim != values[k]) {
                out.amp[i] = 0;
                break;
            }
        }
    }
    out.normalized = false;
    return out;
}

MeasureResult measure(QState& st, const std::vector<std::string>& regs, Rng& rng) {
    std::vector<double> p = marginal(st, regs);
    const u64 c = rng.discrete(p);
    MeasureResult res;
    res.probability = p[c] / std::accumulate(p.begin(), p.end(), 0.0);
    u64 rem = c;
    res.values.resize(regs.size());
    for (std::size_t k = regs.size(); k-- > 0;) {
        const u64 d = st.layout[st.layout.index_of(regs[k])].dim;
        res.values[k] = rem % d;
        rem /= d;
    }
    st = project(st, regs, res.values);
    st.renormalize();
    return res;
}

// ---- Density operators -----------------------------------------------------

DensityOp DensityOp::from_state(const QState& st) {
    DensityOp op;
    op.layout = st.layout;
    op.rho = st.amp * st.amp.adjoint();
    op.trace = op.rho.trace().real();
    op.unnormalized = !st.normalized;
    return op;
}

void DensityOp::check(double tol) const {
    if (hermitian && (rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) throw InputError("density operator is not Hermitian");
    if (std::abs(rho.trace().real() - trace) > tol) throw InputError("density operator trace differs from recorded value");
    if (!unnormalized && std::abs(trace - 1.0) > tol) throw InputError("density operator is not normalized");
}

DensityOp reduced_density(const QState& st, const std::vector<std::string>& keep) {
    Gather g = make_gather(st.layout, keep);
    const auto d = static_cast<Eigen::Index>(g.offsets.size());
    CMat M(d, static_cast<Eigen::Index>(g.bases.size()));
    for (std::size_t r = 0; r < g.bases.size(); ++r)
        for (Eigen::Index c = 0; c < d; ++c) M(c, static_cast<Eigen::Index>(r)) = st.amp[g.bases[r] + g.offsets[c]];
    DensityOp op;
    for (auto& n : keep) op.layout.add(n, st.layout[st.layout.index_of(n)].dim);
    op.rho = M * M.adjoint();
    op.trace = op.rho.trace().real();
    op.unnormalized = !st.normalized;
    return op;
}

DensityOp partial_trace(const DensityOp& op, const std::vector<std::string>& keep) {
    Gather g = make_gather(op.layout, keep);
    const auto d = static_cast<Eigen::Index>(g.offsets.size());
    DensityOp out;
    for (auto& n : keep) out.layout.add(n, op.layout[op.layout.index_of(n)].dim);
    out.rho = CMat::Zero(d, d);
    for (u64 base : g.bases)
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                out.rho(i, j) += op.rho(static_cast<Eigen::Index>(base + g.offsets[i]),
                                        static_cast<Eigen::Index>(base + g.offsets[j]));
    out.trace = out.rho.trace().real();
    out.hermitian = op.hermitian;
    out.unnormalized = op.unnormalized;
    return out;
}

CMat kron(const CMat& a, const CMat& b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

CMat kron_all(const std::vector<CMat>& ops) {
    CMat out = CMat::Identity(1, 1);
    for (auto& o : ops) out = kron(out, o);
    return out;
}

DensityOp tensor(const DensityOp& a, const DensityOp& b) {
    DensityOp out;
    out.layout = a.layout;
    for (auto& r : b.layout.registers()) out.layout.add(r.name, r.dim);
    out.rho = kron(a.rho, b.rho);
    out.trace = out.rho.trace().real();
    out.unnormalized = a.unnormalized || b.unnormalized;
    return out;
}

double CPTPMap::completeness_error() const {
    if (kraus.empty()) return 1.0;
    const auto d = kraus.front().cols();
    CMat S = CMat::Zero(d, d);
    for (auto& K : kraus) S += K.adjoint() * K;
    return (S - CMat::Identity(d, d)).cwiseAbs().maxCoeff();
}

void CPTPMap::check(double tol) const {
    if (completeness_error() > tol) throw InputError("Kraus operators are not trace preserving");
}

CPTPMap CPTPMap::identity(u64 dim) {
    return CPTPMap{{CMat::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))}};
}

CPTPMap CPTPMap::unitary(const CMat& U) {
    if ((U.adjoint() * U - CMat::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff() > 1e-9)
        throw InputError("operator is not unitary");
    return CPTPMap{{U}};
}

CMat apply_channel(const CPTPMap& map, const CMat& rho) {
    CMat out = CMat::Zero(map.kraus.front().rows(), map.kraus.front().rows());
    for (auto& K : map.kraus) out += K * rho * K.adjoint();
    return out;
}

DensityOp apply_channel(const CPTPMap& map, const DensityOp& op, const std::vector<std::string>& regs) {
    DensityOp out = op;
    out.rho.setZero();
    for (auto& K : map.kraus) {
        CMat T = op.rho;
        for (Eigen::Index j = 0; j < T.cols(); ++j) {
            CVec col = T.col(j);
            apply_matrix_vec(op.layout, col, regs, K);
            T.col(j) = col;
        }
        CMat U = T.adjoint();
        for (Eigen::Index j = 0; j < U.cols(); ++j) {
            CVec col = U.col(j);
            apply_matrix_vec(op.layout, col, regs, K);
            U.col(j) = col;
        }
        out.rho += U.adjoint();
    }
    out.trace = out.rho.trace().real();
    return out;
}

CMat choi(const CPTPMap& map) {
    const auto d = map.kraus.front().cols();
    const auto r = map.kraus.front().rows();
    CMat C = CMat::Zero(d * r, d * r);
    for (auto& K : map.kraus)
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) C.block(i * r, j * r, r, r) += K.col(i) * K.col(j).adjoint();
    return C;
}

CPTPMap compose(const CPTPMap& second, const CPTPMap& first) {
    CPTPMap out;
    for (auto& A : second.kraus)
        for (auto& B : first.kraus) out.kraus.push_back(A * B);
    return out;
}

// ---- Distributions ---------------------------------------------------------

static Distribution to_distribution(const std::vector<double>& p, std::size_t nq) {
    Distribution d;
    for (u64 c = 0; c < p.size(); ++c) {
        // combined index has qubits[0] most significant; keys put it at bit 0
        u64 key = 0;
        for (std::size_t i = 0; i < nq; ++i)
            if ((c >> (nq - 1 - i)) & 1) key |= u64{1} << i;
        if (p[c] > 0) d[key] += p[c];
    }
    return d;
}

Distribution exact_measurement_distribution(const QState& st, const std::vector<std::string>& qubits,
                                            const std::vector<Basis>& bases) {
    if (qubits.size() != bases.size()) throw InputError("qubit and basis lists differ in length");
    QState tmp = st;
    for (std::size_t i = 0; i < qubits.size(); ++i) {
        if (tmp.layout[tmp.layout.index_of(qubits[i])].dim != 2) throw InputError(qubits[i] + " is not a qubit");
        if (bases[i] == Basis::Hadamard) apply_matrix(tmp, {qubits[i]}, gate_h());
    }
    std::vector<double> p = marginal(tmp, qubits);
    const double tot = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& x : p) x /= tot;
    return to_distribution(p, qubits.size());
}

Distribution exact_measurement_distribution(const DensityOp& op, const std::vector<std::string>& qubits,
                                            const std::vector<Basis>& bases) {
    if (qubits.size() != bases.size()) throw InputError("qubit and basis lists differ in length");
    DensityOp tmp = op;
    for (std::size_t i = 0; i < qubits.size(); ++i)
        if (bases[i] == Basis::Hadamard) tmp = apply_channel(CPTPMap{{gate_h()}}, tmp, {qubits[i]});
    DensityOp red = partial_trace(tmp, qubits);
    std::vector<double> p(static_cast<std::size_t>(red.rho.rows()));
    double tot = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::max(0.0, red.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real());
        tot += p[i];
    }
    for (auto& x : p) x /= tot;
    return to_distribution(p, qubits.size());
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw InputError("tv_distance: dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

double tv_distance(const Distribution& p, const Distribution& q) {
    std::set<u64> keys;
    for (auto& [k, v] : p) keys.insert(k);
    for (auto& [k, v] : q) keys.insert(k);
    double s = 0;
    for (u64 k : keys) {
        auto a = p.find(k), b = q.find(k);
        s += std::abs((a == p.end() ? 0.0 : a->second) - (b == q.end() ? 0.0 : b->second));
    }
    return 0.5 * s;
}

double hellinger2(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw InputError("hellinger2: dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::sqrt(p[i] * q[i]);
    return 1.0 - s;
}

double trace_distance(const CMat& a, const CMat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("trace_distance: dimension mismatch");
    CMat d = a - b;
    CMat h = 0.5 * (d + d.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const DensityOp& a, const DensityOp& b) { return trace_distance(a.rho, b.rho); }

std::string bitstring(u64 key, int nbits) {
    std::string s;
    for (int i = 0; i < nbits; ++i) s += ((key >> i) & 1) ? '1' : '0';
    return s;
}

// ---- Gates and random objects ----------------------------------------------

CMat gate_i() { return CMat::Identity(2, 2); }

CMat gate_x() {
    CMat m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

CMat gate_z() {
    CMat m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

CMat gate_h() {
    CMat m(2, 2);
    const double s = 1.0 / std::sqrt(2.0);
    m << s, s, s, -s;
    return m;
}

static CMat ginibre(int rows, int cols, Rng& rng) {
    CMat g(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) g(i, j) = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0);
    return g;
}

CMat random_unitary(int dim, Rng& rng) {
    CMat g = ginibre(dim, dim, rng);
    Eigen::HouseholderQR<CMat> qr(g);
    CMat Q = qr.householderQ() * CMat::Identity(dim, dim);
    CMat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < dim; ++i) {
        cplx d = R(i, i);
        Q.col(i) *= d / std::abs(d);
    }
    return Q;
}

CPTPMap random_cptp(int dim, int n_kraus, Rng& rng) {
    std::vector<CMat> G;
    CMat S = CMat::Zero(dim, dim);
    for (int i = 0; i < n_kraus; ++i) {
        G.push_back(ginibre(dim, dim, rng));
        S += G.back().adjoint() * G.back();
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(S);
    CMat inv_sqrt = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() *
                    es.eigenvectors().adjoint();
    CPTPMap map;
    for (auto& g : G) map.kraus.push_back(g * inv_sqrt);
    return map;
}

CMat random_density(int dim, Rng& rng, int rank) {
    if (rank <= 0) rank = dim;
    CMat g = ginibre(dim, rank, rng);
    CMat rho = g * g.adjoint();
    return rho / rho.trace().real();
}

// ---- Pauli decomposition ---------------------------------------------------

std::array<CMat, 4> pauli_decompose(const CMat& K) {
    const auto r = K.rows() / 2;
    if (K.rows() != K.cols() || K.rows() % 2) throw InputError("pauli_decompose: operator must be square of even dimension");
    CMat K00 = K.topLeftCorner(r, r), K01 = K.topRightCorner(r, r);
    CMat K10 = K.bottomLeftCorner(r, r), K11 = K.bottomRightCorner(r, r);
    return {(K00 + K11) / 2.0, (K00 - K11) / 2.0, (K01 + K10) / 2.0, (K10 - K01) / 2.0};
}

CMat pauli_recompose(const std::array<CMat, 4>& B) {
    return kron(gate_i(), B[0]) + kron(gate_z(), B[1]) + kron(gate_x(), B[2]) + kron(gate_x() * gate_z(), B[3]);
}

static std::vector<u64> front_permutation(const std::vector<u64>& dims, std::size_t pos) {
    // perm[new_index] = old_index with factor `pos` moved to the front
    u64 total = 1;
    for (u64 d : dims) total *= d;
    std::vector<u64> order;
    order.push_back(pos);
    for (std::size_t i = 0; i < dims.size(); ++i)
        if (i != pos) order.push_back(i);
    std::vector<u64> perm(total);
    std::vector<u64> digits(dims.size());
    for (u64 nidx = 0; nidx < total; ++nidx) {
        u64 rem = nidx;
        for (std::size_t k = order.size(); k-- > 0;) {
            digits[order[k]] = rem % dims[order[k]];
            rem /= dims[order[k]];
        }
        u64 oidx = 0;
        for (std::size_t i = 0; i < dims.size(); ++i) oidx = oidx * dims[i] + digits[i];
        perm[nidx] = oidx;
    }
    return perm;
}

CMat move_factor_to_front(const CMat& K, const std::vector<u64>& dims, std::size_t pos) {
    auto perm = front_permutation(dims, pos);
    CMat out(K.rows(), K.cols());
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t j = 0; j < perm.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                K(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
    return out;
}

CMat move_front_factor_to(const CMat& K, const std::vector<u64>& dims, std::size_t pos) {
    auto perm = front_permutation(dims, pos);
    CMat out(K.rows(), K.cols());
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t j = 0; j < perm.size(); ++j)
            out(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])) =
                K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return out;
}

static CMat z_on(const std::vector<u64>& dims, std::size_t pos) {
    std::vector<CMat> f;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        auto d = static_cast<Eigen::Index>(dims[i]);
        f.push_back(i == pos ? gate_z() : CMat(CMat::Identity(d, d)));
    }
    return kron_all(f);
}

CPTPMap z_twirl(const CPTPMap& map, const std::vector<u64>& dims, std::size_t pos) {
    if (dims[pos] != 2) throw InputError("z_twirl: target factor is not a qubit");
    const CMat Z = z_on(dims, pos);
    CPTPMap out;
    for (int r = 0; r < 2; ++r)
        for (auto& B : map.kraus) out.kraus.push_back((r ? CMat(Z * B * Z) : B) / std::sqrt(2.0));
    return out;
}

CPTPMap x_trivialize(const CPTPMap& map, const std::vector<u64>& dims, std::size_t pos) {
    if (dims[pos] != 2) throw InputError("x_trivialize: target factor is not a qubit");
    CPTPMap out;
    for (int x = 0; x < 2; ++x)
        for (auto& K : map.kraus) {
            CMat F = move_factor_to_front(K, dims, pos);
            const auto r = F.rows() / 2;
            CMat Bp = CMat::Zero(F.rows(), F.cols());
            // B'_0 = diag(K00, K11), B'_1 = diag(K10, K01)
            if (x == 0) {
                Bp.topLeftCorner(r, r) = F.topLeftCorner(r, r);
                Bp.bottomRightCorner(r, r) = F.bottomRightCorner(r, r);
            } else {
                Bp.topLeftCorner(r, r) = F.bottomLeftCorner(r, r);
                Bp.bottomRightCorner(r, r) = F.topRightCorner(r, r);
            }
            out.kraus.push_back(move_front_factor_to(Bp, dims, pos));
        }
    return out;
}

double TwirlReport::max() const { return std::max({lemma_deviation, corollary_deviation, recompose_error}); }

TwirlReport z_twirl_check(const CPTPMap& map, int trials, Rng& rng, bool sign_error) {
    const auto D = map.kraus.front().rows();
    if (D % 2) throw InputError("z_twirl_check: first register must be a qubit");
    const auto r = D / 2;
    const CMat I_r = CMat::Identity(r, r);
    const CMat Z = kron(gate_z(), I_r);

    TwirlReport rep;
    CPTPMap lhs, rhs, lhs_m, rhs_m;
    const CMat P[2] = {kron(CMat((CMat(2, 2) << 1, 0, 0, 0).finished()) * gate_h(), I_r),
                       kron(CMat((CMat(2, 2) << 0, 0, 0, 1).finished()) * gate_h(), I_r)};
    bool first = true;
    for (auto& B : map.kraus) {
        auto parts = pauli_decompose(B);
        rep.recompose_error = std::max(rep.recompose_error, (pauli_recompose(parts) - B).cwiseAbs().maxCoeff());
        for (int rr = 0; rr < 2; ++rr) {
            CMat T = (rr ? CMat(Z * B * Z) : B) / std::sqrt(2.0);
            lhs.kraus.push_back(T);
            for (int b = 0; b < 2; ++b) lhs_m.kraus.push_back(P[b] * T);
        }
        for (int x = 0; x < 2; ++x) {
            const double zsign = (sign_error && first && x == 0) ? -1.0 : 1.0;
            CMat Bp = kron(gate_i(), parts[2 * x]) + zsign * kron(gate_z(), parts[2 * x + 1]);
            rhs.kraus.push_back((x ? kron(gate_x(), I_r) : CMat(CMat::Identity(D, D))) * Bp);
            for (int b = 0; b < 2; ++b) rhs_m.kraus.push_back(P[b] * Bp);
        }
        first = false;
    }
    for (int t = 0; t < trials; ++t) {
        CMat rho = random_density(static_cast<int>(D), rng, 1 + t % static_cast<int>(D));
        rep.lemma_deviation = std::max(rep.lemma_deviation, trace_distance(apply_channel(lhs, rho), apply_channel(rhs, rho)));
        rep.corollary_deviation =
            std::max(rep.corollary_deviation, trace_distance(apply_channel(lhs_m, rho), apply_channel(rhs_m, rho)));
    }
    return rep;
}

// ---- Commitment ------------------------------------------------------------

namespace {

struct CommitTables {
    i64 q = 0;
    int n = 0;
    int m = 0;
    u64 nx = 0;
    std::vector<ZqVector> Ax;  // A·x for every x index
};

CommitTables commit_tables(const PublicKey& pk) {
    CommitTables t;
    t.q = pk.q;
    t.n = pk.A.cols;
    t.m = pk.A.rows;
    t.nx = ipow(pk.q, t.n);
    t.Ax.resize(t.nx);
    for (u64 i = 0; i < t.nx; ++i) t.Ax[i] = mat_vec(pk.A, vec_from_index(i, t.n, pk.q), pk.q);
    return t;
}

// dens[b][x] = D_{B_P}(y − A·x − b·t)
std::array<std::vector<double>, 2> commit_densities(const CommitTables& T, const PublicKey& pk, const GaussDensity& g,
                                                    const ZqVector& y) {
    std::array<std::vector<double>, 2> d;
    for (int b = 0; b < 2; ++b) {
        d[b].assign(T.nx, 0.0);
        for (u64 x = 0; x < T.nx; ++x) {
            double v = 1.0;
            for (int i = 0; i < T.m && v > 0; ++i) v *= g(y[i] - T.Ax[x][i] - (b ? pk.t[i] : 0));
            d[b][x] = v;
        }
    }
    return d;
}

QState post_state(const QState& st, const CommitSpec& spec, const CommitTables& T,
                  const std::array<std::vector<double>, 2>& dens) {
    const int ci = st.layout.index_of(spec.committed);
    if (st.layout[ci].dim != 2) throw InputError("committed register must be a qubit");
    const u64 cstride = st.layout.stride(ci);
    QState out;
    out.layout = st.layout;
    out.layout.add(spec.preimage, T.nx);
    out.amp = CVec::Zero(static_cast<Eigen::Index>(st.layout.total() * T.nx));
    const double inv_nx = 1.0 / static_cast<double>(T.nx);
    std::array<std::vector<double>, 2> root;
    for (int b = 0; b < 2; ++b) {
        root[b].resize(T.nx);
        for (u64 x = 0; x < T.nx; ++x) root[b][x] = std::sqrt(dens[b][x] * inv_nx);
    }
    for (u64 idx = 0; idx < static_cast<u64>(st.amp.size()); ++idx) {
        const cplx a = st.amp[idx];
        if (a == cplx(0)) continue;
        const int b = static_cast<int>((idx / cstride) & 1);
        for (u64 x = 0; x < T.nx; ++x)
            if (root[b][x] > 0) out.amp[idx * T.nx + x] = a * root[b][x];
    }
    out.normalized = false;
    return out;
}

}  // namespace

QState commit_post_state(const QState& st, const CommitSpec& spec, const ZqVector& y) {
    CommitTables T = commit_tables(*spec.pk);
    GaussDensity g(spec.B_P, spec.pk->q);
    return post_state(st, spec, T, commit_densities(T, *spec.pk, g, y));
}

double commit_marginal(const QState& st, const CommitSpec& spec, const ZqVector& y) {
    CommitTables T = commit_tables(*spec.pk);
    GaussDensity g(spec.B_P, spec.pk->q);
    auto dens = commit_densities(T, *spec.pk, g, y);
    std::vector<double> w = marginal(st, {spec.committed});
    double p = 0;
    for (int b = 0; b < 2; ++b) p += w[b] * std::accumulate(dens[b].begin(), dens[b].end(), 0.0) / static_cast<double>(T.nx);
    return p;
}

CommitResult samp_commit(const QState& st, const CommitSpec& spec, Rng& rng, CommitMode mode, u64 budget) {
    const PublicKey& pk = *spec.pk;
    CommitTables T = commit_tables(pk);
    GaussDensity g(spec.B_P, pk.q);
    const u64 post_dim = st.layout.total() * T.nx;
    if (post_dim > budget)
        throw ResourceError("commitment state needs " + std::to_string(post_dim) + " amplitudes, budget " +
                            std::to_string(budget));
    const double ny = std::pow(static_cast<double>(pk.q), T.m);
    const bool dense_fits = static_cast<double>(post_dim) * ny <= static_cast<double>(budget);
    if (mode == CommitMode::Dense && !dense_fits)
        throw ResourceError("dense commitment register exceeds the amplitude budget");
    const bool dense = mode == CommitMode::Dense || (mode == CommitMode::Auto && dense_fits);

    CommitResult res;
    res.dense = dense;
    if (dense) {
        // Full superposition over (input, x, y), then measure the y register.
        const u64 nyi = static_cast<u64>(ny);
        QState full;
        full.layout = st.layout;
        full.layout.add(spec.preimage, T.nx);
        full.layout.add("__commitment", nyi);
        full.amp = CVec::Zero(static_cast<Eigen::Index>(post_dim * nyi));
        const int ci = st.layout.index_of(spec.committed);
        const u64 cstride = st.layout.stride(ci);
        const double inv_nx = 1.0 / static_cast<double>(T.nx);
        for (u64 yi = 0; yi < nyi; ++yi) {
            ZqVector y = vec_from_index(yi, T.m, pk.q);
            auto dens = commit_densities(T, pk, g, y);
            for (u64 idx = 0; idx < static_cast<u64>(st.amp.size()); ++idx) {
                const cplx a = st.amp[idx];
                if (a == cplx(0)) continue;
                const int b = static_cast<int>((idx / cstride) & 1);
                for (u64 x = 0; x < T.nx; ++x)
                    if (dens[b][x] > 0) full.amp[(idx * T.nx + x) * nyi + yi] = a * std::sqrt(dens[b][x] * inv_nx);
            }
        }
        MeasureResult mr = measure(full, {"__commitment"}, rng);
        res.y = vec_from_index(mr.values[0], T.m, pk.q);
        res.probability = mr.probability;
        res.state = fix_register(full, "__commitment", mr.values[0]);
        res.state.renormalize();
        return res;
    }

    // Lazy: (b, x, noise) sampled directly has exactly the y marginal.
    std::vector<double> w = marginal(st, {spec.committed});
    const int b = static_cast<int>(rng.discrete(w));
    const u64 x = static_cast<u64>(rng.uniform_int(0, static_cast<i64>(T.nx) - 1));
    ZqVector y(T.m);
    for (int i = 0; i < T.m; ++i) y[i] = mod_q(T.Ax[x][i] + (b ? pk.t[i] : 0) + g.sample(rng), pk.q);
    res.y = y;
    res.state = post_state(st, spec, T, commit_densities(T, pk, g, y));
    res.probability = res.state.norm2();
    res.state.renormalize();
    return res;
}

std::vector<CommitBranch> commit_branches(const QState& st, const CommitSpec& spec, u64 max_branches) {
    const PublicKey& pk = *spec.pk;
    CommitTables T = commit_tables(pk);
    GaussDensity g(spec.B_P, pk.q);
    const i64 r = g.radius();
    const u64 box = ipow(2 * r + 1, T.m);
    if (static_cast<double>(box) * 2.0 * static_cast<double>(T.nx) > static_cast<double>(max_branches))
        throw ResourceError("commit_branches: too many commitment strings to enumerate");
    std::vector<double> w = marginal(st, {spec.committed});
    std::set<ZqVector> ys;
    for (int b = 0; b < 2; ++b) {
        if (w[b] <= 0) continue;
        for (u64 x = 0; x < T.nx; ++x)
            for (u64 e = 0; e < box; ++e) {
                ZqVector y(T.m);
                u64 rem = e;
                for (int i = 0; i < T.m; ++i) {
                    const i64 eta = static_cast<i64>(rem % (2 * r + 1)) - r;
                    rem /= (2 * r + 1);
                    y[i] = mod_q(T.Ax[x][i] + (b ? pk.t[i] : 0) + eta, pk.q);
                }
                ys.insert(y);
            }
    }
    std::vector<CommitBranch> out;
    for (const auto& y : ys) {
        QState ps = post_state(st, spec, T, commit_densities(T, pk, g, y));
        const double p = ps.norm2();
        if (p <= 1e-300) continue;
        ps.renormalize();
        out.push_back({y, p, std::move(ps)});
    }
    return out;
}

void apply_u_j(QState& st, const std::string& preimage, int n, i64 q) {
    const u64 w = static_cast<u64>(n) * coord_bits(q);
    apply_relabel(st, preimage, u64{1} << w, [&](u64 v) { return j_index(vec_from_index(v, n, q), q); });
}

void apply_u_j_inverse(QState& st, const std::string& preimage, int n, i64 q) {
    apply_relabel_inverse(st, preimage, ipow(q, n), [&](u64 v) { return j_index(vec_from_index(v, n, q), q); });
}

HadamardOutcome hadamard_round_measure(QState& st, const std::string& committed, const std::string& preimage,
                                       Rng& rng) {
    apply_matrix(st, {committed}, gate_h());
    apply_wht(st, preimage);
    MeasureResult mr = measure(st, {committed, preimage}, rng);
    return HadamardOutcome{static_cast<int>(mr.values[0]), mr.values[1]};
}

}  // namespace cvqc
