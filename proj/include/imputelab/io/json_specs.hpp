#pragma once

// JSON forms of PopulationModel and ImputationScheme.  See docs/file_formats.md.

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "imputelab/error.hpp"
#include "imputelab/population.hpp"
#include "imputelab/sampling.hpp"

namespace imputelab::io {

using nlohmann::json;

namespace detail {

inline Domain domain_from(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("population spec: missing '") + key + "'");
    return Domain(j.at(key).get<std::vector<std::string>>());
}

inline OutcomeDist outcome_from(const json& j) {
    OutcomeDist o{j.at("support").get<std::vector<double>>(), j.at("probs").get<std::vector<double>>()};
    o.validate();
    return o;
}

inline PopulationModel population_from_mar(const json& m) {
    MarTables t;
    t.x_domain = domain_from(m, "x_domain");
    t.w_domain = domain_from(m, "w_domain");
    t.x_dist = m.at("x_dist").get<std::vector<double>>();
    t.w_given_x = m.at("w_given_x").get<std::vector<std::vector<double>>>();
    t.z_given_x = m.at("z_given_x").get<std::vector<double>>();
    const std::size_t nx = t.x_domain.size();
    const std::size_t nw = t.w_domain.size();
    std::vector<std::vector<std::optional<OutcomeDist>>> grid(nx, std::vector<std::optional<OutcomeDist>>(nw));
    for (const auto& o : m.at("outcomes")) {
        const std::size_t x = t.x_domain.index_of(o.at("x").get<std::string>());
        const std::size_t w = t.w_domain.index_of(o.at("w").get<std::string>());
        if (grid[x][w]) throw ConfigError("mar spec: duplicate outcome for (" + t.x_domain.label(x) + ", " + t.w_domain.label(w) + ")");
        grid[x][w] = outcome_from(o);
    }
    t.outcome_given_xw.resize(nx);
    for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t w = 0; w < nw; ++w) {
            if (!grid[x][w]) {
                throw ConfigError("mar spec: no outcome for (" + t.x_domain.label(x) + ", " + t.w_domain.label(w) + ")");
            }
            t.outcome_given_xw[x].push_back(*grid[x][w]);
        }
    }
    return make_mar(t);
}

inline PopulationModel population_from_cells(const json& j) {
    Domain xd = domain_from(j, "x_domain");
    Domain wd = domain_from(j, "w_domain");
    const std::size_t cells = xd.size() * wd.size() * 2;
    auto index = [&](const json& c) {
        const std::size_t x = xd.index_of(c.at("x").get<std::string>());
        const std::size_t w = wd.index_of(c.at("w").get<std::string>());
        const int z = c.at("z").get<int>();
        if (z != 0 && z != 1) throw ConfigError("population spec: z must be 0 or 1");
        return (x * wd.size() + w) * 2 + static_cast<std::size_t>(z);
    };
    std::vector<double> probs(cells, 0.0);
    std::vector<char> seen(cells, 0);
    for (const auto& c : j.at("cells")) {
        const std::size_t i = index(c);
        if (seen[i]) throw ConfigError("population spec: duplicate cell entry");
        seen[i] = 1;
        probs[i] = c.at("prob").get<double>();
    }
    std::vector<std::optional<OutcomeDist>> outcomes(cells);
    for (const auto& o : j.at("outcomes")) {
        const std::size_t i = index(o);
        if (outcomes[i]) throw ConfigError("population spec: duplicate outcome entry");
        outcomes[i] = outcome_from(o);
    }
    return PopulationModel(std::move(xd), std::move(wd), std::move(probs), std::move(outcomes));
}

}  // namespace detail

// Accepts either the explicit cell form or {"mar": {...}}.
inline PopulationModel population_from_json(const json& j) {
    try {
        if (j.contains("mar")) return detail::population_from_mar(j.at("mar"));
        return detail::population_from_cells(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("population spec: ") + e.what());
    }
}

inline json population_to_json(const PopulationModel& model) {
    json cells = json::array();
    json outcomes = json::array();
    model.for_each_cell([&](std::size_t x, std::size_t w, int z, double p) {
        const std::string& xl = model.x_domain().label(x);
        const std::string& wl = model.w_domain().label(w);
        if (p > 0.0) cells.push_back({{"x", xl}, {"w", wl}, {"z", z}, {"prob", p}});
        if (const OutcomeDist* o = model.outcome(x, w, z)) {
            outcomes.push_back({{"x", xl}, {"w", wl}, {"z", z}, {"support", o->support}, {"probs", o->probs}});
        }
    });
    return {{"x_domain", model.x_domain().labels()},
            {"w_domain", model.w_domain().labels()},
            {"cells", cells},
            {"outcomes", outcomes}};
}

// {"kind", "m_count", "rows": [{"x", "probs"}]}.  Rows may be omitted for kinds
// that can be derived from a model; see scheme_for_model.
inline ImputationScheme scheme_from_json(const json& j, const Domain& x_domain, const Domain& w_domain) {
    try {
        ImputationScheme s;
        s.kind = scheme_kind_from_string(j.at("kind").get<std::string>());
        s.m_count = j.value("m_count", std::size_t{1});
        s.g_table.assign(x_domain.size(), {});
        if (j.contains("rows")) {
            for (const auto& r : j.at("rows")) {
                const std::size_t x = x_domain.index_of(r.at("x").get<std::string>());
                auto probs = r.at("probs").get<std::vector<double>>();
                if (probs.size() != w_domain.size()) {
                    throw ConfigError("scheme row x=" + x_domain.label(x) + ": expected one probability per w label");
                }
                s.g_table[x] = std::move(probs);
            }
        }
        s.validate(x_domain.size(), w_domain.size());
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scheme spec: ") + e.what());
    }
}

inline json scheme_to_json(const ImputationScheme& s, const Domain& x_domain) {
    json rows = json::array();
    for (std::size_t x = 0; x < s.g_table.size(); ++x) {
        if (!s.g_table[x].empty()) rows.push_back({{"x", x_domain.label(x)}, {"probs", s.g_table[x]}});
    }
    return {{"kind", to_string(s.kind)}, {"m_count", s.m_count}, {"rows", rows}};
}

// Scheme for an experiment config: explicit rows when given, otherwise derived
// from the model.  "winner_take_all" is accepted as a kind and yields a
// deterministic scheme.
inline ImputationScheme scheme_for_model(const json& j, const PopulationModel& model) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        const std::size_t m = j.value("m_count", std::size_t{1});
        if (m < 1) throw ConfigError("scheme: m_count must be >= 1");
        if (!j.contains("rows")) {
            if (kind == "matched_truth") return scheme_from_truth(model, m);
            if (kind == "winner_take_all") return scheme_winner_take_all(model, m);
            if (kind == "hot_deck") return scheme_hot_deck(model, m);
            throw ConfigError("scheme of kind '" + kind + "' needs explicit rows");
        }
        if (kind == "winner_take_all") throw ConfigError("winner_take_all scheme takes no rows; use kind 'deterministic'");
        return scheme_from_json(j, model.x_domain(), model.w_domain());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scheme spec: ") + e.what());
    }
}

}  // namespace imputelab::io
