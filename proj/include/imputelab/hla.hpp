#pragma once

// Donor/recipient HLA typing, mismatch counts, and the random-multiple-
// imputation logit experiment on synthetic typed pairs.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imputelab/alias_table.hpp"
#include "imputelab/error.hpp"
#include "imputelab/estimators.hpp"
#include "imputelab/logit.hpp"
#include "imputelab/parallel.hpp"
#include "imputelab/rng.hpp"

namespace imputelab {

using Antigen = int;

// Unordered antigen pair at one locus, stored with first <= second.
struct Genotype {
    Antigen first = 0;
    Antigen second = 0;

    static Genotype of(Antigen a, Antigen b) noexcept { return a <= b ? Genotype{a, b} : Genotype{b, a}; }

    auto operator<=>(const Genotype&) const = default;
};

enum Locus : std::size_t { kLocusA = 0, kLocusB = 1, kLocusDR = 2 };

struct HlaTyping {
    std::array<Genotype, 3> loci;

    auto operator<=>(const HlaTyping&) const = default;
};

struct TypedPair {
    HlaTyping donor;
    HlaTyping recipient;
    int y = 0;  // graft survival indicator

    bool operator==(const TypedPair&) const = default;
};

struct MismatchCovariates {
    int a_mm = 0;
    int b_mm = 0;
    int dr_mm = 0;

    bool operator==(const MismatchCovariates&) const = default;
};

// Number of distinct donor antigens the recipient does not carry.
inline int locus_mismatches(Genotype donor, Genotype recipient) noexcept {
    auto carried = [&](Antigen a) { return a == recipient.first || a == recipient.second; };
    int mm = carried(donor.first) ? 0 : 1;
    if (donor.second != donor.first && !carried(donor.second)) ++mm;
    return mm;
}

inline MismatchCovariates count_mismatches(const TypedPair& p) noexcept {
    return {locus_mismatches(p.donor.loci[kLocusA], p.recipient.loci[kLocusA]),
            locus_mismatches(p.donor.loci[kLocusB], p.recipient.loci[kLocusB]),
            locus_mismatches(p.donor.loci[kLocusDR], p.recipient.loci[kLocusDR])};
}

// Rows (1, a_mm, b_mm, dr_mm).
inline Eigen::MatrixXd design_matrix(std::span<const MismatchCovariates> covs) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(covs.size()), 4);
    for (std::size_t i = 0; i < covs.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        x(r, 0) = 1.0;
        x(r, 1) = covs[i].a_mm;
        x(r, 2) = covs[i].b_mm;
        x(r, 3) = covs[i].dr_mm;
    }
    return x;
}

inline LogitFit fit_logit(std::span<const MismatchCovariates> covs, std::span<const int> y,
                          const LogitOptions& opt = {}) {
    return fit_logit(design_matrix(covs), y, opt);
}

// ---------------------------------------------------------------------------
// Empirical P(DR genotype | A genotype, B genotype)

enum class Side { donor, recipient };

struct AbType {
    Genotype a;
    Genotype b;

    auto operator<=>(const AbType&) const = default;
};

inline AbType ab_type(const HlaTyping& t) noexcept { return {t.loci[kLocusA], t.loci[kLocusB]}; }
inline const HlaTyping& side_of(const TypedPair& p, Side s) noexcept { return s == Side::donor ? p.donor : p.recipient; }

struct DrRow {
    std::size_t count = 0;
    std::vector<Genotype> dr;  // ascending
    std::vector<double> probs;
};

struct DrTable {
    std::size_t min_count = 10;
    std::map<AbType, DrRow> rows;
    std::map<AbType, std::size_t> excluded;  // below min_count, with their counts

    [[nodiscard]] const DrRow* find(const AbType& t) const {
        auto it = rows.find(t);
        return it == rows.end() ? nullptr : &it->second;
    }
};

inline DrTable empirical_cond_dist(std::span<const TypedPair> pairs, Side side, std::size_t min_count = 10) {
    if (min_count < 1) throw DomainError("empirical_cond_dist: min_count must be >= 1");
    std::map<AbType, std::map<Genotype, std::size_t>> counts;
    for (const auto& p : pairs) {
        const HlaTyping& t = side_of(p, side);
        ++counts[ab_type(t)][t.loci[kLocusDR]];
    }
    DrTable table;
    table.min_count = min_count;
    for (const auto& [ab, by_dr] : counts) {
        std::size_t total = 0;
        for (const auto& [dr, c] : by_dr) total += c;
        if (total < min_count) {
            table.excluded[ab] = total;
            continue;
        }
        DrRow row;
        row.count = total;
        for (const auto& [dr, c] : by_dr) {
            row.dr.push_back(dr);
            row.probs.push_back(static_cast<double>(c) / static_cast<double>(total));
        }
        table.rows.emplace(ab, std::move(row));
    }
    return table;
}

// Point mass on the most frequent DR genotype of each row (ties: lowest genotype).
inline DrTable winner_take_all(const DrTable& table) {
    DrTable out = table;
    for (auto& [ab, row] : out.rows) {
        const auto best = static_cast<std::size_t>(std::max_element(row.probs.begin(), row.probs.end()) - row.probs.begin());
        row.dr = {row.dr[best]};
        row.probs = {1.0};
    }
    return out;
}

inline std::vector<TypedPair> restrict_to_covered(std::span<const TypedPair> pairs, const DrTable& donor,
                                                  const DrTable& recipient) {
    std::vector<TypedPair> out;
    for (const auto& p : pairs) {
        if (donor.find(ab_type(p.donor)) && recipient.find(ab_type(p.recipient))) out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic typing data

struct Haplotype {
    Antigen a = 0;
    Antigen b = 0;
    Antigen dr = 0;
    double freq = 0.0;
};

struct AlleleFreq {
    Antigen antigen = 0;
    double freq = 0.0;
};

// Haplotype frequencies f_A(a) f_B(b) [(1 - linkage) f_DR(dr) + linkage 1{dr = link(a, b)}]
// where link(a, b) is DR allele number (index(a) + index(b)) mod |DR|.  linkage = 0
// makes DR independent of (A, B); linkage = 1 makes it a function of them.
inline std::vector<Haplotype> linked_haplotypes(std::span<const AlleleFreq> a, std::span<const AlleleFreq> b,
                                                std::span<const AlleleFreq> dr, double linkage) {
    if (!(linkage >= 0.0 && linkage <= 1.0)) throw MalformedDistribution("linkage must lie in [0, 1]");
    for (auto table : {a, b, dr}) {
        std::vector<double> f;
        for (const auto& af : table) f.push_back(af.freq);
        detail::check_simplex(f, f.size(), "allele frequency table");
        if (f.empty()) throw MalformedDistribution("allele frequency table is empty");
    }
    std::vector<Haplotype> out;
    for (std::size_t ia = 0; ia < a.size(); ++ia)
        for (std::size_t ib = 0; ib < b.size(); ++ib)
            for (std::size_t id = 0; id < dr.size(); ++id) {
                const double linked = (ia + ib) % dr.size() == id ? 1.0 : 0.0;
                const double f = a[ia].freq * b[ib].freq * ((1.0 - linkage) * dr[id].freq + linkage * linked);
                out.push_back({a[ia].antigen, b[ib].antigen, dr[id].antigen, f});
            }
    return out;
}

struct HlaDgpConfig {
    std::vector<Haplotype> donor;
    std::vector<Haplotype> recipient;
};

inline constexpr double kDefaultLinkage = 0.4;

// Three A, three B and four DR antigens with skewed frequencies; the same
// haplotype table on both sides.
inline HlaDgpConfig default_hla_config(double linkage = kDefaultLinkage) {
    const std::vector<AlleleFreq> a{{1, 0.45}, {2, 0.35}, {3, 0.20}};
    const std::vector<AlleleFreq> b{{7, 0.40}, {8, 0.35}, {44, 0.25}};
    const std::vector<AlleleFreq> dr{{1, 0.30}, {4, 0.30}, {7, 0.20}, {15, 0.20}};
    auto h = linked_haplotypes(a, b, dr, linkage);
    return {h, h};
}

namespace detail {
inline AliasTable haplotype_sampler(const std::vector<Haplotype>& table) {
    std::vector<double> f;
    for (const auto& h : table) f.push_back(h.freq);
    detail::check_simplex(f, f.size(), "haplotype frequency table");
    return AliasTable(f);
}

inline HlaTyping genotype_from(const Haplotype& h1, const Haplotype& h2) {
    return {{Genotype::of(h1.a, h2.a), Genotype::of(h1.b, h2.b), Genotype::of(h1.dr, h2.dr)}};
}
}  // namespace detail

inline constexpr std::array<double, 4> kReferenceCoefficients{0.974, 0.036, -0.118, -0.163};

// Each side's genotype is two independent haplotype draws from that side's
// table; y ~ Bernoulli(logistic(c0 + c1 a_mm + c2 b_mm + c3 dr_mm)).
inline std::vector<TypedPair> synth_hla_dgp(const HlaDgpConfig& config, std::span<const double> coefficients,
                                            std::size_t n, std::uint64_t seed) {
    if (coefficients.size() != 4) throw DomainError("synth_hla_dgp: expected 4 coefficients");
    if (n < 1) throw DomainError("synth_hla_dgp: n must be >= 1");
    const AliasTable donor = detail::haplotype_sampler(config.donor);
    const AliasTable recipient = detail::haplotype_sampler(config.recipient);
    std::vector<TypedPair> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        StreamRng rng = make_stream(seed, StreamTag::hla_pairs, i);
        TypedPair& p = out[i];
        const auto& d1 = config.donor[donor.sample(rng)];
        const auto& d2 = config.donor[donor.sample(rng)];
        const auto& r1 = config.recipient[recipient.sample(rng)];
        const auto& r2 = config.recipient[recipient.sample(rng)];
        p.donor = detail::genotype_from(d1, d2);
        p.recipient = detail::genotype_from(r1, r2);
        const MismatchCovariates mm = count_mismatches(p);
        const double eta = coefficients[0] + coefficients[1] * mm.a_mm + coefficients[2] * mm.b_mm +
                           coefficients[3] * mm.dr_mm;
        p.y = rng.bernoulli(detail::logistic(eta)) ? 1 : 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// RMI experiment

struct RmiLogitReport {
    std::size_t repetitions = 0;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;  // across repetitions; zero when repetitions == 1
    std::vector<Eigen::VectorXd> per_repetition;
    std::size_t not_converged = 0;
};

// Each repetition redraws every donor and recipient DR genotype from the
// matching side's table given that side's (A, B) typing, recomputes dr_mm
// (a_mm and b_mm stay observed) and refits the logit.  Donor DR for repetition
// r, pair i uses stream {hla_impute, r, i, 0}; recipient DR uses {..., 1}.
inline RmiLogitReport run_rmi_experiment(std::span<const TypedPair> pairs, const DrTable& donor_table,
                                         const DrTable& recipient_table, std::size_t repetitions, std::uint64_t seed,
                                         const LogitOptions& opt = {}, std::size_t threads = 1) {
    if (repetitions < 1) throw DomainError("run_rmi_experiment: repetitions must be >= 1");
    std::map<AbType, AliasTable> donor_rows;
    std::map<AbType, AliasTable> recipient_rows;
    for (const auto& [ab, row] : donor_table.rows) donor_rows.emplace(ab, AliasTable(row.probs));
    for (const auto& [ab, row] : recipient_table.rows) recipient_rows.emplace(ab, AliasTable(row.probs));

    std::vector<const DrRow*> d_row(pairs.size());
    std::vector<const DrRow*> r_row(pairs.size());
    std::vector<const AliasTable*> d_alias(pairs.size());
    std::vector<const AliasTable*> r_alias(pairs.size());
    std::vector<int> y(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const AbType da = ab_type(pairs[i].donor);
        const AbType ra = ab_type(pairs[i].recipient);
        d_row[i] = donor_table.find(da);
        r_row[i] = recipient_table.find(ra);
        if (!d_row[i] || !r_row[i]) {
            throw UncoveredType("pair " + std::to_string(i) + ": (A, B) typing of the " +
                                (d_row[i] ? "recipient" : "donor") + " has no conditional DR row");
        }
        d_alias[i] = &donor_rows.at(da);
        r_alias[i] = &recipient_rows.at(ra);
        y[i] = pairs[i].y;
    }

    RmiLogitReport rep;
    rep.repetitions = repetitions;
    rep.per_repetition.resize(repetitions);
    std::vector<char> converged(repetitions, 0);
    parallel_for(repetitions, threads, [&](std::size_t r) {
        std::vector<MismatchCovariates> covs(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            StreamRng dr_d = make_stream(seed, StreamTag::hla_impute, r, i, 0);
            StreamRng dr_r = make_stream(seed, StreamTag::hla_impute, r, i, 1);
            const Genotype donor_dr = d_row[i]->dr[d_alias[i]->sample(dr_d)];
            const Genotype recip_dr = r_row[i]->dr[r_alias[i]->sample(dr_r)];
            covs[i] = count_mismatches(pairs[i]);
            covs[i].dr_mm = locus_mismatches(donor_dr, recip_dr);
        }
        const LogitFit fit = fit_logit(covs, y, opt);
        rep.per_repetition[r] = fit.coefficients;
        converged[r] = fit.converged ? 1 : 0;
    });

    const Eigen::Index k = rep.per_repetition.front().size();
    rep.mean.resize(k);
    rep.sd.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        std::vector<double> v;
        for (const auto& c : rep.per_repetition) v.push_back(c[j]);
        const MeanSd ms = mean_sd(v);
        rep.mean[j] = ms.mean;
        rep.sd[j] = ms.sd;
    }
    for (char c : converged) rep.not_converged += c ? 0 : 1;
    return rep;
}

// ---------------------------------------------------------------------------
// End-to-end pipeline

struct HlaExperimentConfig {
    HlaDgpConfig dgp = default_hla_config();
    std::array<double, 4> coefficients = kReferenceCoefficients;
    std::size_t n = 5045;
    std::size_t repetitions = 50;
    std::size_t min_count = 10;
    bool winner_take_all = false;
    LogitOptions logit;
};

struct HlaExperimentResult {
    std::vector<TypedPair> generated;  // input pairs, before the coverage filter
    std::vector<TypedPair> pairs;      // estimation sample: both sides' (A, B) covered
    DrTable donor_table;
    DrTable recipient_table;
    LogitFit true_fit;
    RmiLogitReport imputed;

    // |mean imputed DR coefficient| / |true-data DR coefficient|
    [[nodiscard]] double attenuation_ratio() const {
        return std::abs(imputed.mean[3]) / std::abs(true_fit.coefficients[3]);
    }
};

// Estimates P(DR | A, B) per side from `all`, keeps the pairs whose (A, B)
// typings reach min_count on both sides, fits the logit on the true
// mismatches, then runs RMI with the given imputation seed.  RMI is skipped
// when the true-data fit does not converge.
inline HlaExperimentResult run_hla_pipeline_on(std::span<const TypedPair> all, const HlaExperimentConfig& cfg,
                                               std::uint64_t imputation_seed, std::size_t threads = 1) {
    HlaExperimentResult res;
    res.generated.assign(all.begin(), all.end());
    res.donor_table = empirical_cond_dist(all, Side::donor, cfg.min_count);
    res.recipient_table = empirical_cond_dist(all, Side::recipient, cfg.min_count);
    res.pairs = restrict_to_covered(all, res.donor_table, res.recipient_table);
    if (res.pairs.empty()) throw UncoveredType("no pair has both (A, B) typings above min_count");

    std::vector<MismatchCovariates> covs;
    std::vector<int> y;
    for (const auto& p : res.pairs) {
        covs.push_back(count_mismatches(p));
        y.push_back(p.y);
    }
    res.true_fit = fit_logit(covs, y, cfg.logit);
    if (!res.true_fit.converged) return res;  // imputed.repetitions stays 0
    const DrTable donor = cfg.winner_take_all ? winner_take_all(res.donor_table) : res.donor_table;
    const DrTable recipient = cfg.winner_take_all ? winner_take_all(res.recipient_table) : res.recipient_table;
    res.imputed = run_rmi_experiment(res.pairs, donor, recipient, cfg.repetitions, imputation_seed, cfg.logit, threads);
    return res;
}

// Synthesizes cfg.n pairs from stream derive(seed, {hla_experiment, 0}) and runs
// the pipeline with imputation seed derive(seed, {hla_experiment, 1}).
inline HlaExperimentResult run_hla_pipeline(const HlaExperimentConfig& cfg, std::uint64_t seed,
                                            std::size_t threads = 1) {
    const auto tag = static_cast<std::uint64_t>(StreamTag::hla_experiment);
    const auto all = synth_hla_dgp(cfg.dgp, cfg.coefficients, cfg.n, derive_key(seed, {tag, 0}));
    return run_hla_pipeline_on(all, cfg, derive_key(seed, {tag, 1}), threads);
}

}  // namespace imputelab
