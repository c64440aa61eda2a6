// cvqc -- command-line entry point: parameter presets, protocol runs, QPIP,
// lemma checks and transcript replay.
//
// Exit codes: 0 ok, 1 verification failed, 2 params, 3 resource, 4 input, 5 config.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "cvqc/harness.hpp"

using namespace cvqc;

namespace {

struct Common {
    std::string config;
    std::string preset;
    std::string params_file;
    std::uint64_t seed = 0;
};

// Values from the JSON config file fill options that were not given on the
// command line. Keys are looked up under the subcommand first, then at top level.
class ConfigFile {
public:
    void load(const std::string& path) {
        if (path.empty()) return;
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config file: " + path);
        try {
            j_ = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("malformed config file " + path + ": " + e.what());
        }
        if (!j_.is_object()) throw ConfigError("config file must hold a JSON object");
    }

    template <class T>
    void fill(const std::string& sub, const std::string& key, CLI::Option* opt, T& field) const {
        if (opt && opt->count() > 0) return;
        const nlohmann::json* v = nullptr;
        if (j_.contains(sub) && j_.at(sub).is_object() && j_.at(sub).contains(key))
            v = &j_.at(sub).at(key);
        else if (j_.contains(key))
            v = &j_.at(key);
        if (!v) return;
        try {
            field = v->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config value for '" + key + "' has the wrong type");
        }
    }

private:
    nlohmann::json j_ = nlohmann::json::object();
};

Params resolve_params(const Common& c, const std::string& fallback) {
    if (!c.params_file.empty()) return load_params(c.params_file);
    return builtin_preset(c.preset.empty() ? fallback : c.preset);
}

void write_json_file(const std::string& path, const nlohmann::json& body, const Params* p, std::uint64_t seed) {
    nlohmann::json j = body;
    j["version"] = kVersion;
    j["params_hash"] = p ? params_hash(*p) : "none";
    j["seed"] = seed;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

// honest:<state> | attack:<name>[:<state>] | <state>
ProverSpec parse_prover(const std::string& spec) {
    auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "honest") return honest_prover(named_state(rest.empty() ? "zero" : rest), spec);
    if (kind == "attack") {
        auto c2 = rest.find(':');
        const std::string name = rest.substr(0, c2);
        const std::string state = c2 == std::string::npos ? "plus" : rest.substr(c2 + 1);
        return attacked_prover(named_state(state), name);
    }
    return honest_prover(named_state(spec), spec);
}

CommitMode parse_mode(const std::string& s) {
    if (s == "auto") return CommitMode::Auto;
    if (s == "dense") return CommitMode::Dense;
    if (s == "lazy") return CommitMode::Lazy;
    throw InputError("unknown commit mode: " + s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classical verification of quantum computation with LWE trapdoor claw-free functions"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);
    Common c;
    app.add_option("--config", c.config, "JSON config file (flags override it)");
    auto* o_preset = app.add_option("--preset", c.preset, "built-in parameter preset: toy, proto, sim5");
    auto* o_pfile = app.add_option("--params", c.params_file, "parameter preset file");
    auto* o_seed = app.add_option("--seed", c.seed, "master seed");

    // params
    auto* params = app.add_subcommand("params", "find or validate parameter presets");
    params->require_subcommand(1);
    int f_n = 1, f_m = 4;
    double f_ratio = 2, f_ct = 1;
    long f_qmax = 1000;
    std::string f_out;
    auto* pfind = params->add_subcommand("find", "search for the smallest feasible prime modulus");
    auto* o_n = pfind->add_option("--n", f_n, "secret dimension");
    auto* o_m = pfind->add_option("--m", f_m, "number of samples");
    auto* o_ratio = pfind->add_option("--ratio", f_ratio, "B_P / B_V ratio");
    auto* o_ct = pfind->add_option("--ct", f_ct, "trapdoor constant C_T");
    auto* o_qmax = pfind->add_option("--qmax", f_qmax, "search primes below this bound");
    pfind->add_option("--out", f_out, "write the preset to this file");
    std::string v_file;
    auto* pval = params->add_subcommand("validate", "check a preset against the parameter rules");
    pval->add_option("file", v_file, "preset file (defaults to --preset/--params)");

    // measure
    std::string m_h = "0", m_prover = "honest:zero", m_round = "random", m_out, m_gset = "all_true", m_mode = "auto";
    int m_trials = 100;
    bool m_zero = false;
    u64 m_budget = kDefaultBudget;
    auto* measure = app.add_subcommand("measure", "run measurement-protocol sessions");
    measure->set_help_flag("--help", "print this help message and exit");
    auto* o_h = measure->add_option("--h", m_h, "basis choice, qubit 0 first");
    auto* o_prover = measure->add_option("--prover", m_prover, "honest:<state> or attack:<name>[:<state>]");
    auto* o_round = measure->add_option("--round", m_round, "test, hadamard or random");
    auto* o_trials = measure->add_option("--trials", m_trials, "number of sessions");
    auto* o_tout = measure->add_option("--out", m_out, "transcript file (JSON lines)");
    auto* o_zero = measure->add_flag("--zero-noise", m_zero, "use e = 0 in claw-free keys");
    auto* o_gset = measure->add_option("--gset", m_gset, "G-set predicate: all_true or reject_zero");
    auto* o_mode = measure->add_option("--commit-mode", m_mode, "auto, dense or lazy");
    auto* o_budget = measure->add_option("--budget", m_budget, "amplitude budget for the simulated state");

    // qpip
    std::string q_ham, q_prover = "ground", q_report;
    int q_k = 15, q_trials = 100;
    auto* qpip = app.add_subcommand("qpip", "run the energy-test QPIP on a Hamiltonian");
    auto* o_ham = qpip->add_option("--hamiltonian", q_ham, "Hamiltonian JSON file");
    auto* o_qprover = qpip->add_option("--prover", q_prover, "ground or a named state (zero, basis:01, ...)");
    auto* o_k = qpip->add_option("--kprime", q_k, "number of sampled terms");
    auto* o_qtrials = qpip->add_option("--trials", q_trials, "number of QPIP runs");
    qpip->add_option("--report", q_report, "write the statistics report here");

    // verify-lemmas
    bool l_neg = false;
    std::string l_tol, l_dir;
    auto* lemmas = app.add_subcommand("verify-lemmas", "run the numeric lemma checks");
    auto* o_neg = lemmas->add_flag("--negative-controls", l_neg, "also run the controls that must fail");
    auto* o_tol = lemmas->add_option("--tolerances", l_tol, "tolerance config (JSON)");
    auto* o_dir = lemmas->add_option("--out-dir", l_dir, "write one report per experiment here");

    // replay
    std::string r_file;
    auto* replay_cmd = app.add_subcommand("replay", "re-verify a transcript file");
    replay_cmd->add_option("file", r_file, "transcript file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 4;
    }

    try {
        ConfigFile cfgf;
        cfgf.load(c.config);
        cfgf.fill("", "preset", o_preset, c.preset);
        cfgf.fill("", "params", o_pfile, c.params_file);
        cfgf.fill("", "seed", o_seed, c.seed);

        if (params->parsed()) {
            if (pfind->parsed()) {
                cfgf.fill("params", "n", o_n, f_n);
                cfgf.fill("params", "m", o_m, f_m);
                cfgf.fill("params", "ratio", o_ratio, f_ratio);
                cfgf.fill("params", "ct", o_ct, f_ct);
                cfgf.fill("params", "qmax", o_qmax, f_qmax);
                Params p = find_params(primes_below(f_qmax), f_n, f_m, f_ratio, f_ct);
                nlohmann::json body = {{"params", params_to_json(p)}};
                if (!f_out.empty()) write_json_file(f_out, body, &p, c.seed);
                std::cout << params_to_json(p).dump(2) << "\n";
                return 0;
            }
            Params p = v_file.empty() ? resolve_params(c, "toy") : load_params(v_file);
            auto violations = validate(p);
            if (violations.empty()) {
                std::cout << "valid (params hash " << params_hash(p) << ")\n";
                return 0;
            }
            for (auto& v : violations) std::cerr << "violated " << v.name << ": " << v.message << "\n";
            return 2;
        }

        if (measure->parsed()) {
            cfgf.fill("measure", "h", o_h, m_h);
            cfgf.fill("measure", "prover", o_prover, m_prover);
            cfgf.fill("measure", "round", o_round, m_round);
            cfgf.fill("measure", "trials", o_trials, m_trials);
            cfgf.fill("measure", "out", o_tout, m_out);
            cfgf.fill("measure", "zero_noise", o_zero, m_zero);
            cfgf.fill("measure", "gset", o_gset, m_gset);
            cfgf.fill("measure", "commit_mode", o_mode, m_mode);
            cfgf.fill("measure", "budget", o_budget, m_budget);
            if (m_trials < 1) throw InputError("--trials must be at least 1");
            SessionConfig cfg;
            cfg.params = resolve_params(c, "proto");
            cfg.key_opt.zero_noise = m_zero;
            cfg.gset = m_gset;
            g_set_by_name(m_gset);
            cfg.commit_mode = parse_mode(m_mode);
            cfg.budget = m_budget;
            const Bits h = parse_bits(m_h);
            const ProverSpec P = parse_prover(m_prover);
            const RoundType round = round_from_name(m_round);
            Rng rng(c.seed);
            std::vector<Transcript> ts;
            int test = 0, test_acc = 0, had = 0, had_acc = 0;
            std::map<std::string, int> hist;
            for (int t = 0; t < m_trials; ++t) {
                ts.push_back(run_session(P, h, round, cfg, rng.derive_seed()));
                const Transcript& tr = ts.back();
                if (tr.round == RoundType::Test) {
                    ++test;
                    test_acc += tr.accept;
                } else {
                    ++had;
                    had_acc += tr.accept;
                    ++hist[bits_string(Bits(tr.m.begin(), tr.m.end()))];
                }
            }
            if (!m_out.empty()) write_transcripts(m_out, ts, cfg.params, c.seed);
            std::cout << "test rounds: " << test_acc << "/" << test << " accepted\n";
            std::cout << "hadamard rounds: " << had_acc << "/" << had << " accepted\n";
            for (auto& [m, n] : hist)
                std::cout << "m=" << m << " count " << n << " frequency " << std::fixed << std::setprecision(4)
                          << static_cast<double>(n) / had << "\n";
            return 0;
        }

        if (qpip->parsed()) {
            cfgf.fill("qpip", "hamiltonian", o_ham, q_ham);
            cfgf.fill("qpip", "prover", o_qprover, q_prover);
            cfgf.fill("qpip", "kprime", o_k, q_k);
            cfgf.fill("qpip", "trials", o_qtrials, q_trials);
            if (q_ham.empty()) throw InputError("--hamiltonian is required");
            const XZHamiltonian H = load_hamiltonian(q_ham);
            SessionConfig cfg;
            cfg.params = resolve_params(c, "sim5");
            cfg.key_opt.zero_noise = true;
            QState psi = q_prover == "ground" ? ground_energy(H).state : named_state(q_prover);
            const QpipStats s = run_qpip_trials(H, psi, q_k, q_trials, cfg, c.seed);
            nlohmann::json j = s.to_json();
            if (!q_report.empty()) write_json_file(q_report, {{"qpip", j}}, &cfg.params, c.seed);
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (lemmas->parsed()) {
            cfgf.fill("verify-lemmas", "negative_controls", o_neg, l_neg);
            cfgf.fill("verify-lemmas", "tolerances", o_tol, l_tol);
            cfgf.fill("verify-lemmas", "out_dir", o_dir, l_dir);
            const Tolerances tol = l_tol.empty() ? Tolerances{} : load_tolerances(l_tol);
            auto reports = lemma_suite(c.seed, l_neg, tol);
            bool ok = true;
            for (auto& r : reports) {
                ok = ok && r.passed();
                if (!l_dir.empty()) write_report(l_dir, r);
                for (auto& ch : r.checks)
                    if (ch.expected_fail)
                        std::cout << "  control " << r.name << "/" << ch.name << ": "
                                  << (ch.ok() ? "failed as expected" : "UNEXPECTEDLY HELD") << "\n";
            }
            std::cout << summary_table(reports);
            return ok ? 0 : 1;
        }

        if (replay_cmd->parsed()) {
            auto ts = read_transcripts(r_file);
            int bad = 0;
            for (auto& t : ts) {
                ReplayResult rr = replay(t);
                if (!rr.ok()) {
                    ++bad;
                    std::cerr << "session " << t.session_id << ": " << rr.detail << "\n";
                }
            }
            std::cout << "replayed " << ts.size() << " sessions, " << ts.size() - bad << " verified\n";
            return bad ? 1 : 0;
        }
    } catch (const ParamError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 2;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 4;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
