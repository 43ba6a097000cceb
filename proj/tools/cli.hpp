#pragma once

// Batch front-end: plim, converge, bounds, rmi-logit.
//
// Exit codes: 0 success, 1 unexpected failure, 2 config or input error,
// 3 a MAR-regime report was requested for a non-MAR population,
// 4 the logit on true data did not converge.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "imputelab/imputelab.hpp"
#include "imputelab/io/csv.hpp"
#include "imputelab/io/json_specs.hpp"
#include "imputelab/io/tables.hpp"

namespace imputelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kNotMar = 3, kNoConvergence = 4 };

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t threads = 0;
};

struct Context {
    GlobalOptions opts;
    json config = json::object();
    fs::path config_dir = ".";
    std::ostream& out;
    std::ostream& err;

    void load_config() {
        if (opts.config.empty()) return;
        const fs::path p(opts.config);
        try {
            config = json::parse(io::read_file(p));
        } catch (const json::parse_error& e) {
            throw ConfigError("config '" + p.string() + "': " + e.what());
        }
        if (!config.is_object()) throw ConfigError("config must be a JSON object");
        config_dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    }

    [[nodiscard]] std::uint64_t seed() const {
        if (opts.seed) return *opts.seed;
        if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
        throw ConfigError("a seed is required: pass --seed or set \"seed\" in the config");
    }

    [[nodiscard]] std::size_t threads() const {
        if (opts.threads != 0) return opts.threads;
        return config.value("threads", std::size_t{0});
    }

    [[nodiscard]] fs::path out_dir() const {
        fs::path dir = !opts.out.empty() ? fs::path(opts.out) : fs::path(config.value("out", std::string("imputelab_out")));
        fs::create_directories(dir);
        return dir;
    }

    void write(const fs::path& dir, const std::string& name, const std::string& contents) const {
        io::write_file_atomic(dir / name, contents);
    }
};

inline PopulationModel load_population(const Context& ctx) {
    if (!ctx.config.contains("population")) throw ConfigError("config: missing 'population'");
    const json& p = ctx.config.at("population");
    if (p.is_string()) {
        const fs::path path = ctx.config_dir / p.get<std::string>();
        try {
            return io::population_from_json(json::parse(io::read_file(path)));
        } catch (const json::parse_error& e) {
            throw ConfigError("population spec '" + path.string() + "': " + e.what());
        }
    }
    return io::population_from_json(p);
}

inline ImputationScheme load_scheme(const Context& ctx, const PopulationModel& model) {
    const json s = ctx.config.value("scheme", json{{"kind", "matched_truth"}, {"m_count", 1}});
    return io::scheme_for_model(s, model);
}

struct Estimand {
    std::size_t xi;
    std::size_t omega;
};

inline std::vector<Estimand> load_estimands(const Context& ctx, const PopulationModel& model) {
    std::vector<Estimand> out;
    if (ctx.config.contains("estimands")) {
        for (const auto& e : ctx.config.at("estimands")) {
            out.push_back({model.x_domain().index_of(e.at("x").get<std::string>()),
                           model.w_domain().index_of(e.at("w").get<std::string>())});
        }
        return out;
    }
    for (std::size_t x = 0; x < model.x_domain().size(); ++x)
        for (std::size_t w = 0; w < model.w_domain().size(); ++w) out.push_back({x, w});
    return out;
}

inline std::string fixed(double v, int digits = 6) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string pad(std::string s, std::size_t width, bool left = false) {
    if (s.size() >= width) return s;
    return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

// ---------------------------------------------------------------------------

inline int cmd_plim(Context& ctx) {
    const PopulationModel model = load_population(ctx);
    const ImputationScheme scheme = load_scheme(ctx, model);
    const auto estimands = load_estimands(ctx, model);
    const auto violation = mar_violation(model, kUserTol);

    std::vector<std::string> regimes;
    if (ctx.config.contains("regimes")) {
        regimes = ctx.config.at("regimes").get<std::vector<std::string>>();
    } else {
        regimes = {"general", "random_x"};
        if (!violation) {
            regimes.push_back("mar");
            regimes.push_back("matched");
        }
    }
    for (const auto& r : regimes) {
        if (r != "general" && r != "random_x" && r != "mar" && r != "matched") {
            throw ConfigError("unknown regime '" + r + "' (expected general, random_x, mar, matched)");
        }
        if ((r == "mar" || r == "matched") && violation) {
            throw NotMar("regime '" + r + "' requires MAR given x, but " + *violation);
        }
    }

    std::vector<PlimEntry> entries;
    std::vector<std::string> skipped;
    for (const auto& e : estimands) {
        for (const auto& r : regimes) {
            for (std::size_t m = 1; m <= scheme.m_count; ++m) {
                try {
                    if (r == "general") entries.push_back(plim_general(model, scheme, e.xi, e.omega, m));
                    if (r == "random_x") entries.push_back(plim_random_x(model, scheme, e.xi, e.omega, m));
                    if (r == "mar") entries.push_back(plim_mar(model, scheme, e.xi, e.omega, m));
                    if (r == "matched") entries.push_back(plim_matched(model, e.xi, e.omega, m));
                } catch (const ZeroProbabilityEvent& ex) {
                    skipped.push_back("x=" + model.x_domain().label(e.xi) + " w=" + model.w_domain().label(e.omega) +
                                      " regime=" + r + ": " + ex.what());
                    break;
                }
            }
        }
    }

    const fs::path dir = ctx.out_dir();
    ctx.write(dir, "plim.csv", io::plim_to_csv(entries, model.x_domain(), model.w_domain()));

    std::ostringstream txt;
    txt << "Probability limits of imputation estimates\n";
    txt << "model " << model_digest(model) << (violation ? " (not MAR given x)" : " (MAR given x)") << ", scheme "
        << to_string(scheme.kind) << ", M = " << scheme.m_count << "\n\n";
    txt << pad("xi", 10, true) << pad("omega", 10, true) << pad("m", 4) << "  " << pad("regime", 12, true)
        << pad("pi", 12) << pad("theta", 12) << pad("E(y|x,w)", 12) << pad("E(y|x)", 12) << pad("bias", 12) << "\n";
    for (const auto& e : entries) {
        txt << pad(model.x_domain().label(e.xi), 10, true) << pad(model.w_domain().label(e.omega), 10, true)
            << pad(std::to_string(e.m), 4) << "  " << pad(to_string(e.regime), 12, true) << pad(fixed(e.pi), 12)
            << pad(fixed(e.theta), 12) << pad(fixed(e.target_full), 12) << pad(fixed(e.target_coarse), 12)
            << pad(fixed(e.bias), 12) << "\n";
    }
    for (const auto& s : skipped) txt << "skipped " << s << "\n";
    ctx.write(dir, "plim.txt", txt.str());
    for (const auto& s : skipped) ctx.err << "warning: skipped " << s << "\n";
    ctx.out << txt.str();
    return kOk;
}

inline std::string file_safe(const std::string& label) {
    std::string s = label;
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    }
    return s;
}

inline int cmd_converge(Context& ctx) {
    const PopulationModel model = load_population(ctx);
    const ImputationScheme scheme = load_scheme(ctx, model);
    const auto estimands = load_estimands(ctx, model);
    const std::uint64_t seed = ctx.seed();
    if (!ctx.config.contains("n_grid")) throw ConfigError("config: missing 'n_grid'");
    const auto n_grid = ctx.config.at("n_grid").get<std::vector<std::size_t>>();
    if (n_grid.empty()) throw ConfigError("config: 'n_grid' is empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 1 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
            throw ConfigError("config: 'n_grid' must be positive and strictly increasing");
        }
    }
    const std::size_t seeds = ctx.config.value("seeds", std::size_t{20});
    if (seeds < 2) throw ConfigError("config: 'seeds' must be >= 2");

    const fs::path dir = ctx.out_dir();
    io::CsvWriter plot({"xi", "omega", "n", "mean", "sd", "plim", "target_full", "runs"});
    std::ostringstream txt;
    txt << "Convergence of the RMI-averaged imputation estimate\n";
    txt << "model " << model_digest(model) << ", scheme " << to_string(scheme.kind) << ", M = " << scheme.m_count
        << ", seeds = " << seeds << ", master seed = " << seed << "\n";
    for (const auto& e : estimands) {
        const std::string xl = model.x_domain().label(e.xi);
        const std::string wl = model.w_domain().label(e.omega);
        std::vector<ConvergenceRow> rows;
        try {
            rows = convergence_scan(model, scheme, e.xi, e.omega, n_grid, seeds, seed, ctx.threads());
        } catch (const ZeroProbabilityEvent& ex) {
            ctx.err << "warning: skipped x=" << xl << " w=" << wl << ": " << ex.what() << "\n";
            txt << "\nskipped x=" << xl << " w=" << wl << ": " << ex.what() << "\n";
            continue;
        }
        const double target = detail::full_target(model, e.xi, e.omega);
        ctx.write(dir, "converge_" + file_safe(xl) + "_" + file_safe(wl) + ".csv", io::convergence_to_csv(rows));
        txt << "\nx=" << xl << " w=" << wl << "  E(y|x,w) = " << fixed(target) << "  plim = " << fixed(rows[0].plim)
            << "  asymptotic bias = " << fixed(rows[0].plim - target) << "\n";
        txt << pad("n", 10) << pad("mean", 12) << pad("sd", 12) << pad("mean-E(y|x,w)", 15) << pad("runs", 6) << "\n";
        for (const auto& r : rows) {
            plot.row({xl, wl, std::to_string(r.n), io::format_double(r.mean), io::format_double(r.sd),
                      io::format_double(r.plim), io::format_double(target), std::to_string(r.runs)});
            txt << pad(std::to_string(r.n), 10) << pad(fixed(r.mean), 12) << pad(fixed(r.sd), 12)
                << pad(fixed(r.mean - target), 15) << pad(std::to_string(r.runs), 6) << "\n";
        }
    }
    ctx.write(dir, "converge_plot.csv", plot.str());
    ctx.write(dir, "converge.txt", txt.str());
    ctx.out << txt.str();
    return kOk;
}

inline int cmd_bounds(Context& ctx, const std::vector<std::string>& values, const std::string& csv_path) {
    std::vector<BoundsInput> inputs;
    if (!csv_path.empty()) {
        if (!values.empty()) throw ConfigError("bounds: give either positional p_y p_w values or --csv, not both");
        inputs = io::bounds_inputs_from_csv(io::read_file(csv_path));
    } else {
        if (values.empty() || values.size() % 2 != 0) {
            throw ConfigError("bounds: expected pairs of values 'p_y p_w'");
        }
        for (std::size_t i = 0; i < values.size(); i += 2) {
            inputs.push_back({io::parse_double(values[i]), io::parse_double(values[i + 1])});
        }
    }
    io::CsvWriter csv(io::bounds_header());
    bool bad = false;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        try {
            csv.row(io::bounds_row(inputs[i], binary_bounds(inputs[i])));
        } catch (const DomainError& e) {
            ctx.err << "row " << (i + 1) << ": " << e.what() << "\n";
            bad = true;
        }
    }
    if (bad) return kConfig;
    if (!ctx.opts.out.empty()) ctx.write(ctx.out_dir(), "bounds.csv", csv.str());
    ctx.out << csv.str();
    return kOk;
}

namespace detail {
inline std::vector<AlleleFreq> allele_table(const json& j) {
    std::vector<AlleleFreq> out;
    for (const auto& e : j) out.push_back({e.at("antigen").get<Antigen>(), e.at("freq").get<double>()});
    return out;
}

inline std::vector<Haplotype> haplotype_table(const json& j) {
    std::vector<Haplotype> out;
    for (const auto& e : j) {
        out.push_back({e.at("a").get<Antigen>(), e.at("b").get<Antigen>(), e.at("dr").get<Antigen>(),
                       e.at("freq").get<double>()});
    }
    return out;
}

inline void coefficient_rows(std::ostringstream& txt, const Eigen::VectorXd& est, const Eigen::VectorXd& disp,
                             bool show_disp) {
    static const char* names[] = {"Constant", "A Mismatches [0-2]", "B Mismatches [0-2]", "DR Mismatches [0-2]"};
    for (int j : {1, 2, 3, 0}) {
        txt << "  " << pad(names[j], 22, true) << pad(fixed(est[j], 3), 8);
        if (show_disp) txt << " (" << fixed(disp[j], 3) << ")";
        txt << "\n";
    }
}
}  // namespace detail

inline HlaExperimentConfig load_hla_config(const json& c) {
    HlaExperimentConfig cfg;
    cfg.n = c.value("n", cfg.n);
    cfg.repetitions = c.value("repetitions", cfg.repetitions);
    cfg.min_count = c.value("min_count", cfg.min_count);
    cfg.logit.max_iter = c.value("max_iter", cfg.logit.max_iter);
    cfg.logit.tol = c.value("tol", cfg.logit.tol);
    if (c.contains("coefficients")) {
        const auto v = c.at("coefficients").get<std::vector<double>>();
        if (v.size() != 4) throw ConfigError("config: 'coefficients' needs 4 values (constant, A, B, DR)");
        std::copy(v.begin(), v.end(), cfg.coefficients.begin());
    }
    const std::string imputation = c.value("imputation", std::string("rmi"));
    if (imputation != "rmi" && imputation != "winner_take_all") {
        throw ConfigError("config: 'imputation' must be 'rmi' or 'winner_take_all'");
    }
    cfg.winner_take_all = imputation == "winner_take_all";
    const double linkage = c.value("linkage", kDefaultLinkage);
    if (c.contains("haplotypes")) {
        const auto& h = c.at("haplotypes");
        cfg.dgp = {detail::haplotype_table(h.at("donor")), detail::haplotype_table(h.at("recipient"))};
    } else if (c.contains("alleles")) {
        const auto& a = c.at("alleles");
        const auto table = linked_haplotypes(detail::allele_table(a.at("A")), detail::allele_table(a.at("B")),
                                             detail::allele_table(a.at("DR")), linkage);
        cfg.dgp = {table, table};
    } else {
        cfg.dgp = default_hla_config(linkage);
    }
    if (cfg.n < 1) throw ConfigError("config: 'n' must be >= 1");
    if (cfg.repetitions < 1) throw ConfigError("config: 'repetitions' must be >= 1");
    if (cfg.min_count < 1) throw ConfigError("config: 'min_count' must be >= 1");
    return cfg;
}

inline int cmd_rmi_logit(Context& ctx) {
    const HlaExperimentConfig cfg = load_hla_config(ctx.config);
    const std::uint64_t seed = ctx.seed();
    const fs::path dir = ctx.out_dir();
    if (cfg.repetitions == 1) {
        ctx.err << "warning: repetitions = 1; across-repetition standard deviations are reported as 0\n";
    }

    HlaExperimentResult res;
    if (ctx.config.contains("pairs_csv")) {
        const auto pairs = io::pairs_from_csv(io::read_file(ctx.config_dir / ctx.config.at("pairs_csv").get<std::string>()));
        const auto tag = static_cast<std::uint64_t>(StreamTag::hla_experiment);
        res = run_hla_pipeline_on(pairs, cfg, derive_key(seed, {tag, 1}), ctx.threads());
    } else {
        res = run_hla_pipeline(cfg, seed, ctx.threads());
    }
    ctx.write(dir, "pairs.csv", io::pairs_to_csv(res.generated));

    const auto& tf = res.true_fit;
    io::CsvWriter t1({"coefficient", "estimate", "robust_se"});
    static const char* keys[] = {"constant", "a_mm", "b_mm", "dr_mm"};
    for (int j = 0; j < 4; ++j) t1.row({keys[j], io::format_double(tf.coefficients[j]), io::format_double(tf.robust_se[j])});
    ctx.write(dir, "true_fit.csv", t1.str());

    std::ostringstream txt;
    txt << "Logit of survival on true mismatch counts\n";
    detail::coefficient_rows(txt, tf.coefficients, tf.robust_se, true);
    txt << "  " << pad("N", 22, true) << pad(std::to_string(tf.n), 8) << "\n";
    txt << "Robust standard errors in parentheses\n";
    if (!tf.converged) {
        txt << "\nlogit on true data did not converge (iterations " << tf.iterations << ", max |score| "
            << tf.max_abs_score << (tf.separated ? ", separation detected" : "") << ")\n";
        ctx.write(dir, "report.txt", txt.str());
        ctx.err << "error: logit on true data did not converge\n";
        return kNoConvergence;
    }

    const auto& rep = res.imputed;
    io::CsvWriter t2({"coefficient", "mean", "sd"});
    for (int j = 0; j < 4; ++j) t2.row({keys[j], io::format_double(rep.mean[j]), io::format_double(rep.sd[j])});
    ctx.write(dir, "imputed_fit.csv", t2.str());

    io::CsvWriter reps({"repetition", "constant", "a_mm", "b_mm", "dr_mm"});
    for (std::size_t r = 0; r < rep.per_repetition.size(); ++r) {
        const auto& c = rep.per_repetition[r];
        reps.row({std::to_string(r + 1), io::format_double(c[0]), io::format_double(c[1]), io::format_double(c[2]),
                  io::format_double(c[3])});
    }
    ctx.write(dir, "rmi_repetitions.csv", reps.str());

    txt << "\nLogit with " << (cfg.winner_take_all ? "winner-take-all" : "randomly") << " imputed DR ("
        << rep.repetitions << " repetitions)\n";
    detail::coefficient_rows(txt, rep.mean, rep.sd, rep.repetitions > 1);
    txt << (rep.repetitions > 1 ? "Averages across repetitions. Standard deviations in parentheses.\n"
                                : "Single repetition: no standard deviations.\n");
    if (rep.not_converged > 0) txt << "warning: " << rep.not_converged << " repetition fits did not converge\n";
    txt << "\nexcluded (A,B) types: donor " << res.donor_table.excluded.size() << ", recipient "
        << res.recipient_table.excluded.size() << "; pairs kept " << res.pairs.size() << " of " << res.generated.size()
        << "\n";
    txt << "attenuation: true_dr=" << fixed(tf.coefficients[3]) << " mean_imputed_dr=" << fixed(rep.mean[3])
        << " ratio=" << fixed(res.attenuation_ratio()) << "\n";
    ctx.write(dir, "report.txt", txt.str());
    ctx.out << txt.str();
    return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"imputelab: imputation shrinkage experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions opts;
    app.add_option("--config", opts.config, "experiment config (JSON)");
    app.add_option("--seed", opts.seed, "master RNG seed (overrides config)");
    app.add_option("--out", opts.out, "output directory (overrides config)");
    app.add_option("--threads", opts.threads, "worker threads, 0 = auto")->check(CLI::NonNegativeNumber);

    auto* plim = app.add_subcommand("plim", "probability limits under each assumption regime");
    auto* converge = app.add_subcommand("converge", "Monte Carlo convergence scan of the imputation estimate");
    auto* bounds = app.add_subcommand("bounds", "ecological-inference bounds on P(y=1 | x, w)");
    std::vector<std::string> bound_values;
    std::string bounds_csv;
    bounds->add_option("values", bound_values, "p_y p_w [p_y p_w ...]")->allow_extra_args();
    bounds->add_option("--csv", bounds_csv, "CSV with header p_y,p_w");
    auto* rmi = app.add_subcommand("rmi-logit", "RMI logit attenuation experiment on synthetic HLA data");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    Context ctx{opts, json::object(), ".", out, err};
    try {
        ctx.load_config();
        if (plim->parsed()) return cmd_plim(ctx);
        if (converge->parsed()) return cmd_converge(ctx);
        if (bounds->parsed()) return cmd_bounds(ctx, bound_values, bounds_csv);
        if (rmi->parsed()) return cmd_rmi_logit(ctx);
    } catch (const NotMar& e) {
        err << "error: " << e.what() << "\n";
        return kNotMar;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const MalformedDistribution& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const UnknownLabel& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const UncoveredType& e) {
        err << "input error: " << e.what() << "\n";
        return kConfig;
    } catch (const RankDeficient& e) {
        err << "logit error: " << e.what() << "\n";
        return kNoConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}

}  // namespace imputelab::cli
