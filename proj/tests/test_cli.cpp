#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <random>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace imputelab;

namespace {
struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "imputelab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("imputelab_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const std::string kConfigs = IMPUTELAB_CONFIG_DIR;
}  // namespace

TEST_CASE("bounds on the command line") {
    const auto r = run({"bounds", "0.6", "0.8"});
    REQUIRE(r.code == 0);
    const auto t = io::parse_csv(r.out);
    REQUIRE(t.rows.size() == 1);
    CHECK(std::abs(io::parse_double(t.rows[0][t.column("lo")]) - 0.5) < 1e-12);
    CHECK(std::abs(io::parse_double(t.rows[0][t.column("hi")]) - 0.75) < 1e-12);
}

TEST_CASE("bounds rejects out-of-range rows with row diagnostics") {
    const auto r = run({"bounds", "0.6", "0.8", "0.5", "0", "1.5", "0.5"});
    CHECK(r.code == 2);
    CHECK(r.err.find("row 2") != std::string::npos);
    CHECK(r.err.find("row 3") != std::string::npos);
    CHECK(run({"bounds", "0.6"}).code == 2);
}

TEST_CASE("bounds from a CSV file into an output directory") {
    const auto dir = scratch("bounds");
    const auto r = run({"--out", dir.string(), "bounds", "--csv", kConfigs + "/bounds.csv"});
    REQUIRE(r.code == 0);
    CHECK(io::parse_csv(io::read_file(dir / "bounds.csv")).rows.size() == 3);
}

TEST_CASE("plim writes a report and resolves the population path from the config") {
    const auto dir = scratch("plim");
    const auto r = run({"--config", kConfigs + "/plim.json", "--out", dir.string(), "plim"});
    REQUIRE(r.code == 0);
    const auto t = io::parse_csv(io::read_file(dir / "plim.csv"));
    CHECK(t.rows.size() == 8);  // 2 cells x 4 regimes
    for (const auto& row : t.rows) {
        if (row[t.column("omega")] == "w1") CHECK(io::parse_double(row[t.column("theta")]) == 0.75);
    }
    CHECK(fs::exists(dir / "plim.txt"));
}

TEST_CASE("plim on a non-MAR population drops MAR regimes, or exits 3 when asked for one") {
    const auto dir = scratch("notmar");
    const auto r = run({"--config", kConfigs + "/not_mar.json", "--out", dir.string(), "plim"});
    REQUIRE(r.code == 0);
    const auto t = io::parse_csv(io::read_file(dir / "plim.csv"));
    for (const auto& row : t.rows) {
        const auto& regime = row[t.column("regime")];
        CHECK((regime == "general" || regime == "random_x"));
    }
    auto cfg = nlohmann::json::parse(io::read_file(kConfigs + "/not_mar.json"));
    cfg["regimes"] = {"general", "mar"};
    io::write_file_atomic(dir / "cfg.json", cfg.dump());
    const auto bad = run({"--config", (dir / "cfg.json").string(), "--out", dir.string(), "plim"});
    CHECK(bad.code == 3);
    CHECK(bad.err.find("P(w|x,z=1)") != std::string::npos);
}

TEST_CASE("converge needs a seed and is byte-reproducible") {
    const auto dir = scratch("converge");
    auto cfg = nlohmann::json::parse(io::read_file(kConfigs + "/converge.json"));
    cfg.erase("seed");
    cfg["population"] = kConfigs + "/mar_shrinkage.json";
    cfg["n_grid"] = {100, 1000};
    cfg["seeds"] = 5;
    io::write_file_atomic(dir / "cfg.json", cfg.dump());
    const std::string c = (dir / "cfg.json").string();
    CHECK(run({"--config", c, "--out", (dir / "a").string(), "converge"}).code == 2);
    REQUIRE(run({"--config", c, "--seed", "4", "--out", (dir / "a").string(), "converge"}).code == 0);
    REQUIRE(run({"--config", c, "--seed", "4", "--threads", "3", "--out", (dir / "b").string(), "converge"}).code == 0);
    for (const char* f : {"converge_all_w1.csv", "converge_plot.csv", "converge.txt"}) {
        CHECK(io::read_file(dir / "a" / f) == io::read_file(dir / "b" / f));
    }
}

TEST_CASE("rmi-logit end to end, reproducible") {
    const auto dir = scratch("rmi");
    nlohmann::json cfg{{"n", 1500}, {"repetitions", 4}, {"seed", 8}};
    io::write_file_atomic(dir / "cfg.json", cfg.dump());
    const std::string c = (dir / "cfg.json").string();
    REQUIRE(run({"--config", c, "--out", (dir / "a").string(), "rmi-logit"}).code == 0);
    REQUIRE(run({"--config", c, "--out", (dir / "b").string(), "rmi-logit"}).code == 0);
    for (const char* f : {"pairs.csv", "true_fit.csv", "imputed_fit.csv", "rmi_repetitions.csv", "report.txt"}) {
        CHECK(io::read_file(dir / "a" / f) == io::read_file(dir / "b" / f));
    }
    CHECK(io::read_file(dir / "a" / "report.txt").find("attenuation:") != std::string::npos);

    // re-running from the written pairs file reproduces the true-data table
    nlohmann::json again{{"pairs_csv", (dir / "a" / "pairs.csv").string()}, {"repetitions", 2}, {"seed", 8}};
    io::write_file_atomic(dir / "again.json", again.dump());
    REQUIRE(run({"--config", (dir / "again.json").string(), "--out", (dir / "c").string(), "rmi-logit"}).code == 0);
    CHECK(io::read_file(dir / "a" / "true_fit.csv") == io::read_file(dir / "c" / "true_fit.csv"));
}

TEST_CASE("rmi-logit warns on a single repetition") {
    const auto dir = scratch("rmi1");
    io::write_file_atomic(dir / "cfg.json", nlohmann::json{{"n", 1500}, {"repetitions", 1}}.dump());
    const auto r = run({"--config", (dir / "cfg.json").string(), "--seed", "1", "--out", dir.string(), "rmi-logit"});
    CHECK(r.code == 0);
    CHECK(r.err.find("repetitions = 1") != std::string::npos);
}

TEST_CASE("rmi-logit exits 4 when the true-data logit does not converge") {
    const auto dir = scratch("rmi_sep");
    auto pairs = synth_hla_dgp(default_hla_config(), kReferenceCoefficients, 800, 3);
    for (auto& p : pairs) p.y = count_mismatches(p).a_mm == 0 ? 1 : 0;  // perfectly separated
    io::write_file_atomic(dir / "pairs.csv", io::pairs_to_csv(pairs));
    io::write_file_atomic(dir / "cfg.json", nlohmann::json{{"pairs_csv", "pairs.csv"}, {"min_count", 1}}.dump());
    const auto r = run({"--config", (dir / "cfg.json").string(), "--seed", "1", "--out", dir.string(), "rmi-logit"});
    CHECK(r.code == 4);
}

TEST_CASE("config and usage errors exit 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"--config", "/nonexistent/cfg.json", "plim"}).code == 2);
    const auto dir = scratch("bad");
    io::write_file_atomic(dir / "cfg.json", "{\"population\": ");
    CHECK(run({"--config", (dir / "cfg.json").string(), "plim"}).code == 2);
    io::write_file_atomic(dir / "cfg2.json", nlohmann::json{{"imputation", "nearest"}}.dump());
    CHECK(run({"--config", (dir / "cfg2.json").string(), "--seed", "1", "rmi-logit"}).code == 2);
}

namespace {
nlohmann::json one_x_mar(double pz1) {
    return {{"mar",
             {{"x_domain", {"all"}},
              {"w_domain", {"w1", "w2", "w3"}},
              {"x_dist", {1.0}},
              {"w_given_x", {{0.2, 0.3, 0.5}}},
              {"z_given_x", {pz1}},
              {"outcomes",
               {{{"x", "all"}, {"w", "w1"}, {"support", {0, 1}}, {"probs", {0.1, 0.9}}},
                {{"x", "all"}, {"w", "w2"}, {"support", {0, 1}}, {"probs", {0.6, 0.4}}},
                {{"x", "all"}, {"w", "w3"}, {"support", {0, 2}}, {"probs", {0.5, 0.5}}}}}}}};
}
}  // namespace

TEST_CASE("plim with no respondents reports E(y | x) for every w") {
    const auto dir = scratch("plim_degenerate");
    io::write_file_atomic(dir / "cfg.json", nlohmann::json{{"population", one_x_mar(0.0)}, {"regimes", {"matched"}}}.dump());
    REQUIRE(run({"--config", (dir / "cfg.json").string(), "--out", dir.string(), "plim"}).code == 0);
    const auto t = io::parse_csv(io::read_file(dir / "plim.csv"));
    REQUIRE(t.rows.size() == 3);
    const double coarse = 0.2 * 0.9 + 0.3 * 0.4 + 0.5 * 1.0;
    for (const auto& row : t.rows) CHECK(std::abs(io::parse_double(row[t.column("theta")]) - coarse) < 1e-12);
}

TEST_CASE("converge with complete data closes in on E(y | x, w)") {
    const auto dir = scratch("converge_complete");
    nlohmann::json cfg{{"population", one_x_mar(1.0)},
                       {"estimands", {{{"x", "all"}, {"w", "w3"}}}},
                       {"n_grid", {100, 10000, 1000000}},
                       {"seeds", 20}};
    io::write_file_atomic(dir / "cfg.json", cfg.dump());
    REQUIRE(run({"--config", (dir / "cfg.json").string(), "--seed", "3", "--out", dir.string(), "converge"}).code == 0);
    const auto t = io::parse_csv(io::read_file(dir / "converge_all_w3.csv"));
    std::vector<double> err;
    for (const auto& row : t.rows) err.push_back(std::abs(io::parse_double(row[t.column("mean")]) - 1.0));
    REQUIRE(err.size() == 3);
    CHECK(err[0] > err[1]);
    CHECK(err[1] > err[2]);
}

TEST_CASE("converge under MAR ends at the predicted shrinkage bias") {
    const auto dir = scratch("converge_mar");
    nlohmann::json cfg{{"population", one_x_mar(0.4)},
                       {"estimands", {{{"x", "all"}, {"w", "w1"}}}},
                       {"n_grid", {1000, 200000}},
                       {"seeds", 20}};
    io::write_file_atomic(dir / "cfg.json", cfg.dump());
    REQUIRE(run({"--config", (dir / "cfg.json").string(), "--seed", "5", "--out", dir.string(), "converge"}).code == 0);
    const auto t = io::parse_csv(io::read_file(dir / "converge_all_w1.csv"));
    const auto& last = t.rows.back();
    // bias = (E(y|x) - E(y|x,w)) P(z=0|x), computed here from the inputs
    const double coarse = 0.2 * 0.9 + 0.3 * 0.4 + 0.5 * 1.0;
    const double bias = (coarse - 0.9) * 0.6;
    const double gap = io::parse_double(last[t.column("mean")]) - 0.9;
    const double sd = io::parse_double(last[t.column("sd")]);
    CHECK(std::abs(gap - bias) <= 4 * sd / std::sqrt(20.0));
}

TEST_CASE("bounds with w fully known, and a random batch") {
    const auto one = run({"bounds", "0.5", "1.0"});
    REQUIRE(one.code == 0);
    const auto t1 = io::parse_csv(one.out);
    CHECK(io::parse_double(t1.rows[0][t1.column("lo")]) == 0.5);
    CHECK(io::parse_double(t1.rows[0][t1.column("hi")]) == 0.5);

    const auto dir = scratch("bounds_batch");
    std::mt19937_64 g(100);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    io::CsvWriter in({"p_y", "p_w"});
    for (int i = 0; i < 100; ++i) in.row({io::format_double(u(g)), io::format_double(1.0 - u(g))});
    io::write_file_atomic(dir / "in.csv", in.str());
    const auto r = run({"bounds", "--csv", (dir / "in.csv").string()});
    REQUIRE(r.code == 0);
    const auto t = io::parse_csv(r.out);
    REQUIRE(t.rows.size() == 100);
    for (const auto& row : t.rows) {
        const double lo = io::parse_double(row[t.column("lo")]), hi = io::parse_double(row[t.column("hi")]);
        CHECK(lo <= hi);
        CHECK((row[t.column("lower_informative")] == "true") == (lo > 0.0));
        CHECK((row[t.column("upper_informative")] == "true") == (hi < 1.0));
    }
}

TEST_CASE("rmi-logit default config attenuates the DR coefficient") {
    const auto dir = scratch("rmi_default");
    const auto r = run({"--config", kConfigs + "/rmi_logit.json", "--out", dir.string(), "rmi-logit"});
    REQUIRE(r.code == 0);
    const auto t1 = io::parse_csv(io::read_file(dir / "true_fit.csv"));
    const auto t2 = io::parse_csv(io::read_file(dir / "imputed_fit.csv"));
    const double truth = io::parse_double(t1.rows[3][t1.column("estimate")]);
    const double imputed = io::parse_double(t2.rows[3][t2.column("mean")]);
    CHECK(std::abs(imputed) < 0.25 * std::abs(truth));
}

TEST_CASE("rmi-logit with winner-take-all imputation has zero spread") {
    const auto dir = scratch("rmi_wta");
    io::write_file_atomic(dir / "cfg.json",
                          nlohmann::json{{"n", 2000}, {"repetitions", 5}, {"imputation", "winner_take_all"}}.dump());
    REQUIRE(run({"--config", (dir / "cfg.json").string(), "--seed", "2", "--out", dir.string(), "rmi-logit"}).code == 0);
    const auto t2 = io::parse_csv(io::read_file(dir / "imputed_fit.csv"));
    for (const auto& row : t2.rows) CHECK(io::parse_double(row[t2.column("sd")]) == 0.0);
}

TEST_CASE("bounds without --out writes no files") {
    const auto dir = scratch("bounds_nofile");
    const auto cwd = fs::current_path();
    fs::current_path(dir);
    const auto r = run({"bounds", "0.2", "0.4"});
    fs::current_path(cwd);
    CHECK(r.code == 0);
    CHECK(fs::is_empty(dir));
}
