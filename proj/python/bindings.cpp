// Python bindings: a thin layer over the C++ core. Structured results cross
// the boundary as JSON text and are decoded in cvqc/__init__.py.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cvqc/harness.hpp"

namespace py = pybind11;
using namespace cvqc;

namespace {

Params params_of(const std::string& preset_or_json) {
    if (!preset_or_json.empty() && preset_or_json.front() == '{')
        return params_from_json(nlohmann::json::parse(preset_or_json));
    return builtin_preset(preset_or_json);
}

std::string preset_json(const std::string& name) { return params_to_json(builtin_preset(name)).dump(); }

std::vector<std::string> validate_names(const std::string& params) {
    std::vector<std::string> out;
    for (auto& v : validate(params_of(params))) out.push_back(v.name);
    return out;
}

std::string measure_sessions(const std::string& state, const std::string& h, const std::string& round, int trials,
                    const std::string& params, bool zero_noise, std::uint64_t seed) {
    SessionConfig cfg;
    cfg.params = params_of(params);
    cfg.key_opt.zero_noise = zero_noise;
    const ProverSpec p = honest_prover(named_state(state));
    const Bits hb = parse_bits(h);
    Rng rng(seed);
    nlohmann::json sessions = nlohmann::json::array();
    for (int t = 0; t < trials; ++t) {
        Transcript tr = run_session(p, hb, round_from_name(round), cfg, rng.derive_seed());
        sessions.push_back({{"round", round_name(tr.round)}, {"accept", tr.accept}, {"m", tr.m}});
    }
    return sessions.dump();
}

std::string exact_hadamard_distribution(const std::string& state, const std::string& h, std::uint64_t seed) {
    SessionConfig cfg;
    cfg.params = builtin_preset("sim5");
    cfg.key_opt.zero_noise = true;
    const Bits hb = parse_bits(h);
    Rng rng(seed);
    ExactDistribution ed = exact_distribution(honest_prover(named_state(state)), hb, exact_keys(hb, cfg.params, rng), cfg);
    const int n = static_cast<int>(hb.size());
    nlohmann::json dc = nlohmann::json::object(), ideal = nlohmann::json::object();
    for (auto& [k, v] : ed.DC) dc[bitstring(k, n)] = v;
    for (auto& [k, v] : ideal_distribution(named_state(state), hb)) ideal[bitstring(k, n)] = v;
    return nlohmann::json{{"accept_probability", ed.accept_probability}, {"conditioned", dc}, {"ideal", ideal}}.dump();
}

std::string hamiltonian_summary(const std::string& path) {
    const XZHamiltonian H = load_hamiltonian(path);
    const GroundState g = ground_energy(H);
    return nlohmann::json{{"n_qubits", H.n_qubits},
                          {"terms", H.terms.size()},
                          {"ground_energy", g.energy},
                          {"max_energy", max_energy(H)},
                          {"p_acc_ground", p_acc(H, DensityOp::from_state(g.state).rho)}}
        .dump();
}

std::string qpip(const std::string& path, int kprime, int trials, std::uint64_t seed) {
    const XZHamiltonian H = load_hamiltonian(path);
    SessionConfig cfg;
    cfg.params = builtin_preset("sim5");
    cfg.key_opt.zero_noise = true;
    return run_qpip_trials(H, ground_energy(H).state, kprime, trials, cfg, seed).to_json().dump();
}

std::string lemmas(std::uint64_t seed, bool negative_controls) {
    nlohmann::json out = nlohmann::json::array();
    for (auto& r : lemma_suite(seed, negative_controls)) out.push_back(r.to_json());
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_impl, m) {
    m.doc() = "classical verification of quantum computation with LWE trapdoor claw-free functions";
    m.attr("version") = kVersion;

    py::register_exception<ParamError>(m, "ParamError", PyExc_ValueError);
    py::register_exception<ResourceError>(m, "ResourceError", PyExc_MemoryError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

    m.def("preset_names", &builtin_preset_names);
    m.def("preset_json", &preset_json, py::arg("name"));
    m.def("violations", &validate_names, py::arg("params"));
    m.def("params_hash", [](const std::string& p) { return params_hash(params_of(p)); }, py::arg("params"));
    m.def("j_map", [](const std::vector<i64>& x, i64 q) { return j_map(x, q); }, py::arg("x"), py::arg("q"));
    m.def("j_inv", [](const std::vector<int>& bits, int n, i64 q) { return j_inv(Bits(bits.begin(), bits.end()), n, q); },
          py::arg("bits"), py::arg("n"), py::arg("q"));
    m.def("measure_json", &measure_sessions, py::arg("state"), py::arg("h"), py::arg("round"), py::arg("trials"),
          py::arg("params"), py::arg("zero_noise"), py::arg("seed"));
    m.def("exact_distribution_json", &exact_hadamard_distribution, py::arg("state"), py::arg("h"), py::arg("seed"));
    m.def("hamiltonian_json", &hamiltonian_summary, py::arg("path"));
    m.def("qpip_json", &qpip, py::arg("path"), py::arg("kprime"), py::arg("trials"), py::arg("seed"));
    m.def("lemmas_json", &lemmas, py::arg("seed"), py::arg("negative_controls"));
}
