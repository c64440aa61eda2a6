#include <cmath>
#include <filesystem>
#include <fstream>

#include "cvqc/harness.hpp"
#include "doctest.h"

using namespace cvqc;

TEST_CASE("tolerances load, round trip and reject bad input") {
    Tolerances t = tolerances_from_json(nlohmann::json{{"tv", 1e-3}});
    CHECK(t.tv == 1e-3);
    CHECK(t.exact == 1e-9);
    Tolerances back = tolerances_from_json(t.to_json());
    CHECK(back.tv == t.tv);
    CHECK(back.sigma == t.sigma);
    CHECK_THROWS_AS(tolerances_from_json(nlohmann::json{{"tvv", 1e-3}}), ConfigError);
    CHECK_THROWS_AS(tolerances_from_json(nlohmann::json{{"tv", "small"}}), ConfigError);
    CHECK_THROWS_AS(tolerances_from_json(nlohmann::json{{"sigma", -1}}), ConfigError);
    CHECK_THROWS_AS(tolerances_from_json(nlohmann::json::array()), ConfigError);
    CHECK_THROWS_AS(load_tolerances("/nonexistent/tol.json"), InputError);
}

TEST_CASE("checks and negative controls") {
    ExperimentReport r;
    r.name = "x";
    CHECK(r.check_le("a", 0.5, 1.0));
    CHECK(r.passed());
    r.check_ge("b", 0.5, 1.0, true);
    CHECK(r.checks.back().ok());
    CHECK(r.passed());
    r.check_ge("c", 0.5, 1.0);
    CHECK_FALSE(r.passed());
    auto j = r.to_json(false);
    CHECK_FALSE(j.contains("wall_seconds"));
    CHECK(j["checks"].size() == 3);
}

TEST_CASE("reports are written as a header line and a body line") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "cvqc_test_reports";
    fs::remove_all(dir);
    ExperimentReport r = dependence_on_secret_experiment({5}, 1, false);
    write_report(dir.string(), r);
    std::ifstream in(dir / "dependence_on_secret.json");
    std::string header, body;
    REQUIRE(std::getline(in, header));
    REQUIRE(std::getline(in, body));
    auto h = nlohmann::json::parse(header);
    CHECK(h.contains("version"));
    CHECK(h.contains("seed"));
    CHECK(nlohmann::json::parse(body)["experiment"] == "dependence_on_secret");
    CHECK(summary_table({r}).find("dependence_on_secret") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("binomial sigma") {
    CHECK(binomial_sigma(0.5, 100) == doctest::Approx(0.05));
    CHECK(binomial_sigma(1.0, 100) == 0.0);
}

TEST_CASE("exact keys use s = 1 and injective keys where h = 0") {
    Rng rng(1);
    auto keys = exact_keys({0, 1}, builtin_preset("sim5"), rng);
    CHECK(keys[0].td.kind == KeyKind::Injective);
    CHECK(keys[1].td.kind == KeyKind::ClawFree);
    CHECK(keys[1].td.s == ZqVector{1});
    CHECK(exact_keys({0}, builtin_preset("sim5"), rng, true)[0].td.kind == KeyKind::ClawFree);
}

TEST_CASE("dependence on the secret holds off the wraparound and fails on it") {
    ExperimentReport r = dependence_on_secret_experiment({5, 17}, 2, true);
    CHECK(r.passed());
    for (auto& c : r.checks) CHECK(c.ok());
}

TEST_CASE("twirl and distance experiments pass with their controls") {
    ExperimentReport t = twirl_experiment(10, 1, true);
    CHECK(t.passed());
    ExperimentReport d = distance_lemmas_experiment(10, 2, true);
    CHECK(d.passed());
    for (auto& c : d.checks)
        if (c.expected_fail) CHECK_FALSE(c.holds);
}

TEST_CASE("completeness and soundness hybrids at small size") {
    Params proto = builtin_preset("proto"), sim5 = builtin_preset("sim5");
    CHECK(completeness_experiment("plus", {1}, 20, proto, sim5, 3).passed());
    ExperimentReport s = soundness_hybrid_experiment("I", "plus", {1}, sim5, 4);
    CHECK(s.passed());
    CHECK(s.metrics.count("prover_vs_rho_tv"));
}

TEST_CASE("hardcore calibration distinguishers") {
    Params proto = builtin_preset("proto");
    CHECK(hardcore_experiment("random", "zero", 2000, proto, 5).passed());
    CHECK(hardcore_experiment("trapdoor", "calibrated", 2000, proto, 6).passed());
    CHECK_THROWS_AS(distinguisher_by_name("oracle"), InputError);
}

TEST_CASE("lemma suite passes") {
    for (auto& r : lemma_suite(7, true)) CHECK_MESSAGE(r.passed(), r.name);
}
