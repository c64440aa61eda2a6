// Acceptance run: one PASS/FAIL line per criterion, each within its runtime budget.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "cvqc/harness.hpp"

using namespace cvqc;

namespace {

struct Criterion {
    int id;
    std::string description;
    double budget_seconds;
    std::function<std::vector<ExperimentReport>()> run;
};

void print_failures(const ExperimentReport& r) {
    for (auto& c : r.checks)
        if (!c.ok())
            std::printf("    %s/%s: %.6g %s %.6g%s\n", r.name.c_str(), c.name.c_str(), c.value, c.relation.c_str(),
                        c.tolerance, c.expected_fail ? " (negative control held)" : "");
}

}  // namespace

int main() {
    const Params toy = builtin_preset("toy");
    const Params proto = builtin_preset("proto");
    const Params sim5 = builtin_preset("sim5");
    const std::string zz = std::string(CVQC_SOURCE_DIR) + "/hamiltonians/zz.json";

    std::vector<Criterion> criteria = {
        {1, "trapdoor round trip at toy; gadget inverter vs brute force on Z_5^4", 60,
         [&] { return std::vector{trapdoor_roundtrip_experiment(toy, sim5, 100, 101)}; }},
        {2, "claw structure of 100 commitments; injective supports disjoint at q=5", 120,
         [&] { return std::vector{claw_structure_experiment(proto, sim5, 100, 102)}; }},
        {3, "dependence on the secret, exhaustive at q in {5, 17}, n <= 2", 30,
         [&] { return std::vector{dependence_on_secret_experiment({5, 17}, 2, true)}; }},
        {4, "completeness: 1000/1000 test rounds and exact TV <= 1e-6", 300,
         [&] {
             return std::vector{completeness_experiment("zero", {0}, 1000, proto, sim5, 104),
                                completeness_experiment("plus", {1}, 1000, proto, sim5, 105),
                                completeness_experiment("bell", {0, 1}, 1000, proto, sim5, 106)};
         }},
        {5, "Z Pauli twirl on 100 random maps, with sign-error control", 60,
         [&] { return std::vector{twirl_experiment(100, 107, true)}; }},
        {6, "distance lemmas on 100 cases each", 30,
         [&] { return std::vector{distance_lemmas_experiment(100, 108, true)}; }},
        {7, "p_acc formula on 20 random (H, rho) and the energy bounds", 60,
         [&] { return std::vector{p_acc_experiment(20, sim5, 109, true)}; }},
        {8, "QPIP on ZZ: ground state at the analytic rate, |00> rejected, 1000 runs", 600,
         [&] {
             const XZHamiltonian H = load_hamiltonian(zz);
             return std::vector{qpip_experiment("ground", H, ground_energy(H).state, 15, 1000, sim5, 110),
                                qpip_experiment("zero_zero", H, named_state("basis:00"), 15, 1000, sim5, 111)};
         }},
        {9, "soundness hybrid equalities for the attack library", 300,
         [&] {
             std::vector<ExperimentReport> out;
             std::uint64_t seed = 200;
             for (auto& a : attack_library()) {
                 out.push_back(soundness_hybrid_experiment(a.name, "plus", {1}, sim5, seed++));
                 out.push_back(soundness_hybrid_experiment(a.name, "zero", {0}, sim5, seed++));
                 for (const Bits& h : {Bits{0, 0}, Bits{0, 1}, Bits{1, 0}, Bits{1, 1}})
                     out.push_back(soundness_hybrid_experiment(a.name, "bell", h, sim5, seed++));
             }
             return out;
         }},
        {10, "injective commitment collapses with probability |alpha_b|^2 over 10^4", 120,
         [&] { return std::vector{injective_collapse_experiment(0.7, 10000, proto, 112)}; }},
        {11, "hardcore harness calibration over 10^4 samples", 120,
         [&] {
             return std::vector{hardcore_experiment("random", "zero", 10000, proto, 113),
                                hardcore_experiment("trapdoor", "calibrated", 10000, proto, 114),
                                hardcore_experiment("brute_force", "report", 10000, proto, 115)};
         }},
    };

    int failed = 0;
    for (auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<ExperimentReport> reports;
        std::string error;
        try {
            reports = c.run();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = error.empty() && secs <= c.budget_seconds;
        for (auto& r : reports) ok = ok && r.passed();
        std::printf("AC%d %s %s (%.2fs, budget %.0fs)\n", c.id, ok ? "PASS" : "FAIL", c.description.c_str(), secs,
                    c.budget_seconds);
        if (!ok) {
            ++failed;
            if (!error.empty()) std::printf("    error: %s\n", error.c_str());
            if (secs > c.budget_seconds) std::printf("    over budget\n");
            for (auto& r : reports) print_failures(r);
        }
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
