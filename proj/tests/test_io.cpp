#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "imputelab/io/json_specs.hpp"
#include "imputelab/io/tables.hpp"
#include "oracles.hpp"

using namespace imputelab;
using namespace imputelab::io;

TEST_CASE("doubles round-trip through the CSV formatter") {
    std::mt19937_64 g(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(g) / 7.0;
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.75) == "0.75");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(std::isnan(parse_double("nan")));
    CHECK_THROWS_AS(parse_double("1.5x"), ConfigError);
    CHECK_THROWS_AS(parse_u64("-1"), ConfigError);
}

TEST_CASE("CSV parsing") {
    const auto t = parse_csv("a,b\r\n1,2\n\n3,4\n");
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.rows.size() == 2);
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("c"), ConfigError);
    CHECK_THROWS_AS(parse_csv(""), ConfigError);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ConfigError);
    CHECK(split_line("x,,y") == std::vector<std::string>{"x", "", "y"});
}

TEST_CASE("population JSON round-trips, both forms") {
    std::mt19937_64 g(2);
    for (int i = 0; i < 50; ++i) {
        const auto m = i % 2 ? oracle::random_general(g) : oracle::random_mar(g);
        const auto back = population_from_json(population_to_json(m));
        CHECK(model_digest(back) == model_digest(m));
    }
    const auto mar = population_from_json(json::parse(R"({"mar": {
        "x_domain": ["a"], "w_domain": ["p", "q"], "x_dist": [1.0],
        "w_given_x": [[0.25, 0.75]], "z_given_x": [0.4],
        "outcomes": [{"x": "a", "w": "p", "support": [0, 1], "probs": [0.5, 0.5]},
                     {"x": "a", "w": "q", "support": [2], "probs": [1]}]}})"));
    CHECK(is_mar(mar));
    CHECK(mar.prob(0, 1, 1) == 0.75 * 0.4);
}

TEST_CASE("malformed population JSON gives config errors") {
    CHECK_THROWS_AS(population_from_json(json::parse(R"({"w_domain": ["p"]})")), ConfigError);
    CHECK_THROWS_AS(population_from_json(json::parse(R"({"mar": {"x_domain": ["a"], "w_domain": ["p"],
        "x_dist": [1.0], "w_given_x": [[1.0]], "z_given_x": [0.5], "outcomes": []}})")),
                    ConfigError);
    CHECK_THROWS_AS(population_from_json(json::parse(R"({"x_domain": ["a"], "w_domain": ["p"],
        "cells": [{"x": "a", "w": "p", "z": 2, "prob": 1.0}], "outcomes": []})")),
                    ConfigError);
    CHECK_THROWS_AS(population_from_json(json::parse(R"({"x_domain": ["a"], "w_domain": ["p"],
        "cells": [{"x": "b", "w": "p", "z": 1, "prob": 1.0}], "outcomes": []})")),
                    UnknownLabel);
    CHECK_THROWS_AS(population_from_json(json::parse(R"({"x_domain": ["a"], "w_domain": ["p"],
        "cells": [{"x": "a", "w": "p", "z": 1, "prob": 0.9}],
        "outcomes": [{"x": "a", "w": "p", "z": 1, "support": [1], "probs": [1]}]})")),
                    MalformedDistribution);
}

TEST_CASE("scheme JSON") {
    std::mt19937_64 g(3);
    const auto m = oracle::random_mar(g, 3, 3, 0.0);
    const auto s = scheme_from_truth(m, 4);
    const auto back = scheme_from_json(scheme_to_json(s, m.x_domain()), m.x_domain(), m.w_domain());
    CHECK(back.g_table == s.g_table);
    CHECK(back.m_count == 4);
    CHECK(scheme_for_model(json{{"kind", "winner_take_all"}}, m).kind == SchemeKind::deterministic);
    CHECK(scheme_for_model(json{{"kind", "hot_deck"}, {"m_count", 2}}, m).kind == SchemeKind::hot_deck);
    CHECK_THROWS_AS(scheme_for_model(json{{"kind", "random_conditional"}}, m), ConfigError);
    CHECK_THROWS_AS(scheme_for_model(json{{"kind", "matched_truth"}, {"m_count", 0}}, m), ConfigError);
}

TEST_CASE("sample CSV round-trips") {
    std::mt19937_64 g(4);
    const auto m = oracle::random_mar(g);
    Sample s = draw_sample(m, 500, 9);
    const Sample back = sample_from_csv(sample_to_csv(s), s.x_domain, s.w_domain);
    REQUIRE(back.records.size() == s.records.size());
    for (std::size_t i = 0; i < s.records.size(); ++i) CHECK(back.records[i] == s.records[i]);
    CHECK_THROWS_AS(sample_from_csv("y,x,z,w\n1,x0,0,w0\n", s.x_domain, s.w_domain), ConfigError);
    CHECK_THROWS_AS(sample_from_csv("y,x,z,w\n1,x0,1,\n", s.x_domain, s.w_domain), ConfigError);
}

TEST_CASE("imputations CSV lists every missing record for every m") {
    std::mt19937_64 g(5);
    const auto m = oracle::random_mar(g, 2, 2, 0.0);
    const auto imp = impute(draw_sample(m, 200, 1), scheme_from_truth(m, 3), 2);
    const auto t = parse_csv(imputations_to_csv(imp));
    CHECK(t.rows.size() == imp.missing.size() * 3);
}

TEST_CASE("typed pairs CSV round-trips") {
    const auto pairs = synth_hla_dgp(default_hla_config(), kReferenceCoefficients, 300, 4);
    CHECK(pairs_from_csv(pairs_to_csv(pairs)) == pairs);
    CHECK_THROWS_AS(pairs_from_csv("donor_a1\n1\n"), ConfigError);
}

TEST_CASE("bounds CSV") {
    const auto in = bounds_inputs_from_csv("p_w,p_y\n0.8,0.6\n");
    REQUIRE(in.size() == 1);
    CHECK(in[0].p_y == 0.6);
    CHECK(in[0].p_w == 0.8);
}

TEST_CASE("atomic write replaces the file and leaves no temporary") {
    const auto dir = std::filesystem::temp_directory_path() / "imputelab_test_io";
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "a.txt", "one");
    write_file_atomic(dir / "a.txt", "two");
    CHECK(read_file(dir / "a.txt") == "two");
    CHECK_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(read_file(dir / "missing.txt"), ConfigError);
}
