#pragma once

// Imputation estimates of E(y | x = xi, w = omega) and their probability limits.
//
// The finite-sample estimate pools the observed members of cell (xi, omega)
// with the missing-w records whose m-th imputation equals omega.  The plim_*
// functions give its limit as N grows under successively stronger assumptions:
//
//   general   imputation law may depend on (x, w)
//   random_x  u_m drawn from G_m(. | x) independently of (y, z)
//   mar       additionally (y, w) independent of z given x
//   matched   additionally G_m(. | x) = P(w | x)

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imputelab/error.hpp"
#include "imputelab/parallel.hpp"
#include "imputelab/population.hpp"
#include "imputelab/rng.hpp"
#include "imputelab/sampling.hpp"

namespace imputelab {

struct CellEstimate {
    std::size_t xi = 0;
    std::size_t omega = 0;
    std::size_t m = 1;
    std::size_t n_obs = 0;
    std::size_t n_imp = 0;
    double pi_hat = 0.0;
    double theta_hat = 0.0;
};

enum class Regime { general, random_x, mar, matched_mar };

inline const char* to_string(Regime r) noexcept {
    switch (r) {
        case Regime::general: return "general";
        case Regime::random_x: return "random_x";
        case Regime::mar: return "mar";
        case Regime::matched_mar: return "matched_mar";
    }
    return "?";
}

struct PlimEntry {
    std::size_t xi = 0;
    std::size_t omega = 0;
    std::size_t m = 1;
    Regime regime = Regime::general;
    double pi = 0.0;
    double theta = 0.0;
    double target_full = 0.0;    // E(y | xi, omega); NaN when P(xi, omega) = 0
    double target_coarse = 0.0;  // E(y | xi)
    double bias = 0.0;           // theta - target_full
};

namespace detail {

struct CellSums {
    std::size_t n_obs = 0;
    double obs_sum = 0.0;
    std::vector<std::size_t> n_imp;  // per m (0-based)
    std::vector<double> imp_sum;
};

inline CellSums cell_sums(const ImputedSample& imp, std::size_t xi, std::size_t omega) {
    const Sample& s = *imp.base;
    if (xi >= s.x_domain.size() || omega >= s.w_domain.size()) throw UnknownLabel("cell index out of range");
    CellSums c;
    c.n_imp.assign(imp.m_count, 0);
    c.imp_sum.assign(imp.m_count, 0.0);
    for (const auto& r : s.records) {
        if (r.z == 1 && r.x == xi && *r.w == omega) {
            ++c.n_obs;
            c.obs_sum += r.y;
        }
    }
    for (std::size_t k = 0; k < imp.missing.size(); ++k) {
        const SampleRecord& r = s.records[imp.missing[k]];
        if (r.x != xi) continue;
        const std::size_t* row = &imp.draws[k * imp.m_count];
        for (std::size_t m = 0; m < imp.m_count; ++m) {
            if (row[m] == omega) {
                ++c.n_imp[m];
                c.imp_sum[m] += r.y;
            }
        }
    }
    return c;
}

inline double nan() noexcept { return std::numeric_limits<double>::quiet_NaN(); }

inline double full_target(const PopulationModel& model, std::size_t xi, std::size_t omega) {
    const Event cell{xi, omega, std::nullopt};
    return event_prob(model, cell) > 0.0 ? cond_mean(model, cell) : nan();
}

inline void check_m(std::size_t m, std::size_t m_count) {
    if (m < 1 || m > m_count) {
        throw DomainError("imputation index m=" + std::to_string(m) + " outside 1.." + std::to_string(m_count));
    }
}

}  // namespace detail

// The m-th imputation estimate (m is 1-based).
inline CellEstimate estimate_eq1(const ImputedSample& imp, std::size_t xi, std::size_t omega, std::size_t m) {
    detail::check_m(m, imp.m_count);
    const auto c = detail::cell_sums(imp, xi, omega);
    CellEstimate e{xi, omega, m, c.n_obs, c.n_imp[m - 1], 0.0, 0.0};
    const std::size_t total = e.n_obs + e.n_imp;
    if (total == 0) {
        throw EmptyCell("imputation estimate undefined: cell (x=" + imp.base->x_domain.label(xi) +
                        ", w=" + imp.base->w_domain.label(omega) + ") is empty for m=" + std::to_string(m));
    }
    e.pi_hat = static_cast<double>(e.n_obs) / static_cast<double>(total);
    e.theta_hat = (c.obs_sum + c.imp_sum[m - 1]) / static_cast<double>(total);
    return e;
}

// Mean of the per-m estimates over the m with a non-empty cell.
inline double rmi_average(const ImputedSample& imp, std::size_t xi, std::size_t omega) {
    const auto c = detail::cell_sums(imp, xi, omega);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t m = 0; m < imp.m_count; ++m) {
        const std::size_t total = c.n_obs + c.n_imp[m];
        if (total == 0) continue;
        sum += (c.obs_sum + c.imp_sum[m]) / static_cast<double>(total);
        ++used;
    }
    if (used == 0) {
        throw EmptyCell("RMI average undefined: cell (x=" + imp.base->x_domain.label(xi) +
                        ", w=" + imp.base->w_domain.label(omega) + ") is empty for every m");
    }
    return sum / static_cast<double>(used);
}

// Law of the m-th imputation for a missing-w record: law(x, w_true)[u].
// Lets the general limit be evaluated for imputations that peek at w.
class ImputationLaw {
   public:
    ImputationLaw(std::size_t nx, std::size_t nw) : nx_(nx), nw_(nw), table_(nx * nw * nw, 0.0), covered_(nx * nw, 0) {}

    static ImputationLaw from_scheme(const ImputationScheme& scheme, std::size_t nx, std::size_t nw) {
        ImputationLaw law(nx, nw);
        for (std::size_t x = 0; x < nx; ++x) {
            if (!scheme.covers(x)) continue;
            for (std::size_t w = 0; w < nw; ++w) law.set_row(x, w, scheme.g_table[x]);
        }
        return law;
    }

    void set_row(std::size_t x, std::size_t w_true, std::span<const double> dist) {
        if (dist.size() != nw_) throw MalformedDistribution("imputation law row has wrong length");
        for (std::size_t u = 0; u < nw_; ++u) table_[(x * nw_ + w_true) * nw_ + u] = dist[u];
        covered_[x * nw_ + w_true] = 1;
    }

    [[nodiscard]] bool covers(std::size_t x, std::size_t w_true) const { return covered_.at(x * nw_ + w_true) != 0; }

    [[nodiscard]] double operator()(std::size_t x, std::size_t w_true, std::size_t u) const {
        return table_.at((x * nw_ + w_true) * nw_ + u);
    }

    [[nodiscard]] std::size_t nx() const noexcept { return nx_; }
    [[nodiscard]] std::size_t nw() const noexcept { return nw_; }

   private:
    std::size_t nx_;
    std::size_t nw_;
    std::vector<double> table_;
    std::vector<char> covered_;
};

// General limit: enumerate the model extended by the imputation law.
inline PlimEntry plim_general(const PopulationModel& model, const ImputationLaw& law, std::size_t xi,
                              std::size_t omega, std::size_t m = 1) {
    const std::size_t nw = model.w_domain().size();
    if (law.nx() != model.x_domain().size() || law.nw() != nw) {
        throw MalformedDistribution("imputation law does not match model domains");
    }
    const double p_obs = model.prob(xi, omega, 1);  // P(z=1, x=xi, w=omega)
    double p_imp = 0.0;                             // P(z=0, x=xi, u=omega)
    double y_imp = 0.0;
    for (std::size_t w = 0; w < nw; ++w) {
        const double pc = model.prob(xi, w, 0);
        if (!(pc > 0.0)) continue;
        if (!law.covers(xi, w)) {
            throw UncoveredX("imputation law has no row for x=" + model.x_domain().label(xi) +
                             ", w=" + model.w_domain().label(w));
        }
        const double q = pc * law(xi, w, omega);
        p_imp += q;
        y_imp += q * model.outcome(xi, w, 0)->mean();
    }
    const double denom = p_obs + p_imp;
    if (!(denom > 0.0)) {
        throw ZeroProbabilityEvent("limit undefined: P(z=1, x, w=omega) + P(z=0, x, u=omega) = 0");
    }
    PlimEntry e{xi, omega, m, Regime::general};
    e.pi = p_obs / denom;
    e.theta = 0.0;
    if (p_obs > 0.0) e.theta += model.outcome(xi, omega, 1)->mean() * e.pi;
    if (p_imp > 0.0) e.theta += (y_imp / p_imp) * (1.0 - e.pi);
    e.target_full = detail::full_target(model, xi, omega);
    e.target_coarse = cond_mean(model, Event{xi, std::nullopt, std::nullopt});
    e.bias = e.theta - e.target_full;
    return e;
}

inline PlimEntry plim_general(const PopulationModel& model, const ImputationScheme& scheme, std::size_t xi,
                              std::size_t omega, std::size_t m = 1) {
    detail::check_m(m, scheme.m_count);
    return plim_general(model, ImputationLaw::from_scheme(scheme, model.x_domain().size(), model.w_domain().size()),
                        xi, omega, m);
}

// Imputation conditions only on x.
inline PlimEntry plim_random_x(const PopulationModel& model, const ImputationScheme& scheme, std::size_t xi,
                               std::size_t omega, std::size_t m = 1) {
    detail::check_m(m, scheme.m_count);
    const Event given{xi, std::nullopt, std::nullopt};
    const double p1w = cond_prob(model, Event{std::nullopt, omega, 1}, given);
    const double p0 = cond_prob(model, Event{std::nullopt, std::nullopt, 0}, given);
    const double g = p0 > 0.0 ? scheme.g(xi, omega) : 0.0;
    const double denom = p1w + p0 * g;
    if (!(denom > 0.0)) {
        throw ZeroProbabilityEvent("limit undefined: P(z=1, w=omega | x) + P(z=0 | x) G(omega | x) = 0");
    }
    PlimEntry e{xi, omega, m, Regime::random_x};
    e.pi = p1w / denom;
    e.theta = 0.0;
    if (e.pi > 0.0) e.theta += cond_mean(model, Event{xi, omega, 1}) * e.pi;
    if (e.pi < 1.0) e.theta += cond_mean(model, Event{xi, std::nullopt, 0}) * (1.0 - e.pi);
    e.target_full = detail::full_target(model, xi, omega);
    e.target_coarse = cond_mean(model, given);
    e.bias = e.theta - e.target_full;
    return e;
}

inline void require_mar(const PopulationModel& model) {
    if (auto v = mar_violation(model, kUserTol)) throw NotMar("population is not MAR given x: " + *v);
}

// MAR given x, imputation conditions only on x: shrinkage toward E(y | x).
inline PlimEntry plim_mar(const PopulationModel& model, const ImputationScheme& scheme, std::size_t xi,
                          std::size_t omega, std::size_t m = 1) {
    detail::check_m(m, scheme.m_count);
    require_mar(model);
    const Event given{xi, std::nullopt, std::nullopt};
    const double pz1 = cond_prob(model, Event{std::nullopt, std::nullopt, 1}, given);
    const double pz0 = cond_prob(model, Event{std::nullopt, std::nullopt, 0}, given);
    const double pw = cond_prob(model, Event{std::nullopt, omega, std::nullopt}, given);
    const double g = pz0 > 0.0 ? scheme.g(xi, omega) : 0.0;
    const double denom = pz1 * pw + pz0 * g;
    if (!(denom > 0.0)) {
        throw ZeroProbabilityEvent("limit undefined: P(z=1|x) P(w|x) + P(z=0|x) G(w|x) = 0");
    }
    PlimEntry e{xi, omega, m, Regime::mar};
    e.pi = pz1 * pw / denom;
    e.target_full = detail::full_target(model, xi, omega);
    e.target_coarse = cond_mean(model, given);
    e.theta = 0.0;
    if (e.pi > 0.0) e.theta += e.target_full * e.pi;
    if (e.pi < 1.0) e.theta += e.target_coarse * (1.0 - e.pi);
    e.bias = e.theta - e.target_full;
    return e;
}

// MAR given x and G = P(w | x): pi = P(z=1 | x).
inline PlimEntry plim_matched(const PopulationModel& model, std::size_t xi, std::size_t omega, std::size_t m = 1) {
    require_mar(model);
    const Event given{xi, std::nullopt, std::nullopt};
    const double pz1 = cond_prob(model, Event{std::nullopt, std::nullopt, 1}, given);
    const double pz0 = cond_prob(model, Event{std::nullopt, std::nullopt, 0}, given);
    PlimEntry e{xi, omega, m, Regime::matched_mar};
    e.target_full = cond_mean(model, Event{xi, omega, std::nullopt});
    e.target_coarse = cond_mean(model, given);
    e.pi = pz1;
    e.theta = e.target_full * pz1 + e.target_coarse * pz0;
    e.bias = (e.target_coarse - e.target_full) * pz0;
    return e;
}

// Most specific limit whose assumptions hold for (model, scheme).
inline PlimEntry plim_auto(const PopulationModel& model, const ImputationScheme& scheme, std::size_t xi,
                           std::size_t omega, std::size_t m = 1) {
    if (is_mar(model, kUserTol)) {
        if (scheme.kind == SchemeKind::matched_truth) {
            detail::check_m(m, scheme.m_count);
            return plim_matched(model, xi, omega, m);
        }
        return plim_mar(model, scheme, xi, omega, m);
    }
    return plim_random_x(model, scheme, xi, omega, m);
}

struct ConvergenceRow {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double plim = 0.0;
    std::size_t runs = 0;  // seeds with a non-empty cell
};

// Sample mean and sample standard deviation, computed on data shifted by the
// first element so identical inputs give exactly zero spread.
struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

inline MeanSd mean_sd(std::span<const double> v) {
    if (v.empty()) return {detail::nan(), detail::nan()};
    const double k = v.front();
    double s = 0.0;
    double s2 = 0.0;
    for (double x : v) {
        s += x - k;
        s2 += (x - k) * (x - k);
    }
    const auto n = static_cast<double>(v.size());
    MeanSd out{k + s / n, 0.0};
    if (v.size() > 1) out.sd = std::sqrt(std::max(0.0, (s2 - s * s / n) / (n - 1.0)));
    return out;
}

// For each n: rmi_average over `seeds` independent (sample, imputation) draws.
// Draw (n_index, s) uses sample seed derive(master, {scan, n, s, 0}) and
// imputation seed derive(master, {scan, n, s, 1}).  Seeds whose cell is empty
// are skipped and not counted in `runs`.
inline std::vector<ConvergenceRow> convergence_scan(const PopulationModel& model, const ImputationScheme& scheme,
                                                    std::size_t xi, std::size_t omega,
                                                    std::span<const std::size_t> n_grid, std::size_t seeds,
                                                    std::uint64_t master_seed, std::size_t threads = 1) {
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
        if (n_grid[i] <= n_grid[i - 1]) throw DomainError("convergence_scan: n_grid must be increasing");
    }
    if (seeds < 1) throw DomainError("convergence_scan: seeds must be >= 1");
    const double plim = plim_auto(model, scheme, xi, omega).theta;
    const std::size_t jobs = n_grid.size() * seeds;
    std::vector<std::optional<double>> values(jobs);
    parallel_for(jobs, threads, [&](std::size_t j) {
        const std::size_t n = n_grid[j / seeds];
        const std::size_t s = j % seeds;
        const std::uint64_t tag = static_cast<std::uint64_t>(StreamTag::scan);
        auto sample = std::make_shared<const Sample>(draw_sample(model, n, derive_key(master_seed, {tag, n, s, 0})));
        const ImputedSample imp = impute(std::move(sample), scheme, derive_key(master_seed, {tag, n, s, 1}));
        try {
            values[j] = rmi_average(imp, xi, omega);
        } catch (const EmptyCell&) {
        }
    });
    std::vector<ConvergenceRow> rows;
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
        std::vector<double> v;
        for (std::size_t s = 0; s < seeds; ++s) {
            if (values[g * seeds + s]) v.push_back(*values[g * seeds + s]);
        }
        const MeanSd ms = mean_sd(v);
        rows.push_back({n_grid[g], ms.mean, ms.sd, plim, v.size()});
    }
    return rows;
}

}  // namespace imputelab
