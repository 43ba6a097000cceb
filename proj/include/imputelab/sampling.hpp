#pragma once

// Random samples from a PopulationModel and imputation of the masked w values.
//
// Record i of a sample is drawn from StreamRng(seed, {sample, i}); imputation m
// of record i from StreamRng(seed, {impute, i, m}).  Output therefore depends only
// on (inputs, seed), never on the order in which records are processed.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "imputelab/alias_table.hpp"
#include "imputelab/error.hpp"
#include "imputelab/population.hpp"
#include "imputelab/rng.hpp"

namespace imputelab {

struct SampleRecord {
    double y = 0.0;
    std::size_t x = 0;
    int z = 1;
    std::optional<std::size_t> w;  // present iff z == 1

    bool operator==(const SampleRecord&) const = default;
};

struct Sample {
    Domain x_domain;
    Domain w_domain;
    std::vector<SampleRecord> records;
    std::string model_digest;
    std::uint64_t seed = 0;

    bool operator==(const Sample&) const = default;
};

enum class SchemeKind { random_conditional, deterministic, matched_truth, hot_deck };

inline const char* to_string(SchemeKind k) noexcept {
    switch (k) {
        case SchemeKind::random_conditional: return "random_conditional";
        case SchemeKind::deterministic: return "deterministic";
        case SchemeKind::matched_truth: return "matched_truth";
        case SchemeKind::hot_deck: return "hot_deck";
    }
    return "?";
}

inline SchemeKind scheme_kind_from_string(const std::string& s) {
    if (s == "random_conditional") return SchemeKind::random_conditional;
    if (s == "deterministic") return SchemeKind::deterministic;
    if (s == "matched_truth") return SchemeKind::matched_truth;
    if (s == "hot_deck") return SchemeKind::hot_deck;
    throw MalformedDistribution("unknown scheme kind '" + s + "'");
}

// Imputation law G_m(u | x), identical for every m = 1..m_count.
//
// g_table has one row per x label; an empty row means the scheme has no law
// for that x.  hot_deck schemes draw from donors at imputation time; their
// g_table (when filled) holds P(w | x, z = 1), the asymptotic donor law.
struct ImputationScheme {
    SchemeKind kind = SchemeKind::random_conditional;
    std::vector<std::vector<double>> g_table;
    std::size_t m_count = 1;

    [[nodiscard]] bool covers(std::size_t x) const noexcept { return x < g_table.size() && !g_table[x].empty(); }

    [[nodiscard]] double g(std::size_t x, std::size_t w) const {
        if (!covers(x)) throw UncoveredX("imputation scheme has no row for x index " + std::to_string(x));
        return g_table[x].at(w);
    }

    void validate(std::size_t nx, std::size_t nw) const {
        if (m_count < 1) throw MalformedDistribution("imputation scheme: m_count must be >= 1");
        if (g_table.size() > nx) throw MalformedDistribution("imputation scheme: more rows than x labels");
        for (std::size_t x = 0; x < g_table.size(); ++x) {
            if (g_table[x].empty()) continue;
            detail::check_simplex(g_table[x], nw, "imputation scheme row " + std::to_string(x));
            if (kind == SchemeKind::deterministic) {
                std::size_t positive = 0;
                for (double v : g_table[x]) positive += v > 0.0 ? 1 : 0;
                if (positive != 1) throw MalformedDistribution("deterministic scheme row is not a point mass");
            }
        }
    }
};

struct ImputedSample {
    std::shared_ptr<const Sample> base;
    std::size_t m_count = 1;
    std::vector<std::size_t> missing;  // record indices with z == 0, ascending
    std::vector<std::size_t> draws;    // missing.size() x m_count, row-major

    // w-label index imputed for the k-th missing record in imputation m (1-based).
    [[nodiscard]] std::size_t imputed(std::size_t k, std::size_t m) const { return draws[k * m_count + (m - 1)]; }

    bool operator==(const ImputedSample& o) const {
        return *base == *o.base && m_count == o.m_count && missing == o.missing && draws == o.draws;
    }
};

inline Sample draw_sample(const PopulationModel& model, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw DomainError("draw_sample: n must be >= 1");
    const AliasTable cells(model.cell_probs());
    std::vector<AliasTable> outcome_tables(model.cell_count());
    for (std::size_t c = 0; c < model.cell_count(); ++c) {
        if (model.cell_probs()[c] > 0.0) {
            const std::size_t z = c % 2;
            const std::size_t w = (c / 2) % model.w_domain().size();
            const std::size_t x = c / 2 / model.w_domain().size();
            outcome_tables[c] = AliasTable(model.outcome(x, w, static_cast<int>(z))->probs);
        }
    }
    Sample s{model.x_domain(), model.w_domain(), {}, model_digest(model), seed};
    s.records.resize(n);
    const std::size_t nw = model.w_domain().size();
    for (std::size_t i = 0; i < n; ++i) {
        StreamRng rng = make_stream(seed, StreamTag::sample, i);
        const std::size_t c = cells.sample(rng);
        const int z = static_cast<int>(c % 2);
        const std::size_t w = (c / 2) % nw;
        const std::size_t x = c / 2 / nw;
        const OutcomeDist* o = model.outcome(x, w, z);
        SampleRecord& r = s.records[i];
        r.y = o->support[outcome_tables[c].sample(rng)];
        r.x = x;
        r.z = z;
        r.w = z == 1 ? std::optional<std::size_t>(w) : std::nullopt;
    }
    return s;
}

inline ImputedSample impute(std::shared_ptr<const Sample> sample, const ImputationScheme& scheme,
                            std::uint64_t seed) {
    const std::size_t nx = sample->x_domain.size();
    const std::size_t nw = sample->w_domain.size();
    if (scheme.m_count < 1) throw MalformedDistribution("imputation scheme: m_count must be >= 1");
    ImputedSample out;
    out.m_count = scheme.m_count;
    for (std::size_t i = 0; i < sample->records.size(); ++i) {
        if (sample->records[i].z == 0) out.missing.push_back(i);
    }
    out.draws.resize(out.missing.size() * scheme.m_count);

    if (scheme.kind == SchemeKind::hot_deck) {
        std::vector<std::vector<std::size_t>> donors(nx);
        for (const auto& r : sample->records) {
            if (r.z == 1) donors[r.x].push_back(*r.w);
        }
        for (std::size_t k = 0; k < out.missing.size(); ++k) {
            const std::size_t i = out.missing[k];
            const auto& pool = donors[sample->records[i].x];
            if (pool.empty()) {
                throw UncoveredX("hot deck: no donor with x=" + sample->x_domain.label(sample->records[i].x));
            }
            for (std::size_t m = 0; m < scheme.m_count; ++m) {
                StreamRng rng = make_stream(seed, StreamTag::impute, i, m);
                out.draws[k * scheme.m_count + m] = pool[rng.uniform_index(pool.size())];
            }
        }
    } else {
        scheme.validate(nx, nw);
        std::vector<AliasTable> rows(nx);
        for (std::size_t x = 0; x < nx; ++x) {
            if (scheme.covers(x)) rows[x] = AliasTable(scheme.g_table[x]);
        }
        for (std::size_t k = 0; k < out.missing.size(); ++k) {
            const std::size_t i = out.missing[k];
            const std::size_t x = sample->records[i].x;
            if (!scheme.covers(x)) {
                throw UncoveredX("imputation scheme has no row for x=" + sample->x_domain.label(x));
            }
            for (std::size_t m = 0; m < scheme.m_count; ++m) {
                StreamRng rng = make_stream(seed, StreamTag::impute, i, m);
                out.draws[k * scheme.m_count + m] = rows[x].sample(rng);
            }
        }
    }
    out.base = std::move(sample);
    return out;
}

inline ImputedSample impute(const Sample& sample, const ImputationScheme& scheme, std::uint64_t seed) {
    return impute(std::make_shared<const Sample>(sample), scheme, seed);
}

namespace detail {
// P(w | x = xi, z in zs) for every x with positive mass on zs; empty rows otherwise.
inline std::vector<std::vector<double>> w_given_x_rows(const PopulationModel& model, std::optional<int> z) {
    const std::size_t nx = model.x_domain().size();
    const std::size_t nw = model.w_domain().size();
    std::vector<std::vector<double>> rows(nx);
    for (std::size_t x = 0; x < nx; ++x) {
        const Event given{x, std::nullopt, z};
        if (!(event_prob(model, given) > 0.0)) continue;
        rows[x].resize(nw);
        for (std::size_t w = 0; w < nw; ++w) rows[x][w] = cond_prob(model, Event{std::nullopt, w, std::nullopt}, given);
    }
    return rows;
}

inline void require_missing_rows_covered(const PopulationModel& model, const std::vector<std::vector<double>>& rows) {
    for (std::size_t x = 0; x < model.x_domain().size(); ++x) {
        if (rows[x].empty() && event_prob(model, Event{x, std::nullopt, 0}) > 0.0) {
            throw ZeroProbabilityEvent("no imputation row for x=" + model.x_domain().label(x));
        }
    }
}
}  // namespace detail

// G_m(u | x) = P(w | x).
inline ImputationScheme scheme_from_truth(const PopulationModel& model, std::size_t m_count) {
    auto rows = detail::w_given_x_rows(model, std::nullopt);
    detail::require_missing_rows_covered(model, rows);
    return {SchemeKind::matched_truth, std::move(rows), m_count};
}

// Point mass at argmax_w P(w | x); ties go to the earliest w label.
inline ImputationScheme scheme_winner_take_all(const PopulationModel& model, std::size_t m_count) {
    auto rows = detail::w_given_x_rows(model, std::nullopt);
    detail::require_missing_rows_covered(model, rows);
    for (auto& row : rows) {
        if (row.empty()) continue;
        std::size_t best = 0;
        for (std::size_t w = 1; w < row.size(); ++w) {
            if (row[w] > row[best]) best = w;
        }
        std::fill(row.begin(), row.end(), 0.0);
        row[best] = 1.0;
    }
    return {SchemeKind::deterministic, std::move(rows), m_count};
}

// Exact-x hot deck.  The table holds P(w | x, z = 1), the limiting donor law.
inline ImputationScheme scheme_hot_deck(const PopulationModel& model, std::size_t m_count) {
    auto rows = detail::w_given_x_rows(model, 1);
    detail::require_missing_rows_covered(model, rows);
    return {SchemeKind::hot_deck, std::move(rows), m_count};
}

}  // namespace imputelab
