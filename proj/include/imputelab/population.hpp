#pragma once

// Exact finite population distribution P(y, x, w, z).
//
// x and w range over finite labelled domains, z in {0, 1} flags whether w is
// observed, and y has a finite-support distribution in every cell.  All
// conditional quantities are computed by enumerating cells, so they are exact
// up to floating-point rounding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "imputelab/error.hpp"

namespace imputelab {

// Absolute tolerance for simplex and identity checks on exact computations.
inline constexpr double kIdentityTol = 1e-12;
// Absolute tolerance for validating user-supplied distributions.
inline constexpr double kUserTol = 1e-9;

class Domain {
   public:
    Domain() = default;

    explicit Domain(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) {
            throw MalformedDistribution("domain must have at least one label");
        }
        std::unordered_set<std::string_view> seen;
        for (const auto& l : labels_) {
            if (l.empty() || l.find_first_of(",\"\n\r") != std::string::npos) {
                throw MalformedDistribution("domain label '" + l + "' is empty or contains a CSV metacharacter");
            }
            if (!seen.insert(l).second) {
                throw MalformedDistribution("duplicate domain label '" + l + "'");
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] const std::string& label(std::size_t i) const { return labels_.at(i); }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view label) const noexcept {
        auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - labels_.begin());
    }

    [[nodiscard]] std::size_t index_of(std::string_view label) const {
        if (auto i = find(label)) return *i;
        throw UnknownLabel("unknown label '" + std::string(label) + "'");
    }

    bool operator==(const Domain&) const = default;

   private:
    std::vector<std::string> labels_;
};

struct OutcomeDist {
    std::vector<double> support;
    std::vector<double> probs;

    static OutcomeDist point_mass(double value) { return {{value}, {1.0}}; }

    void validate(double tol = kUserTol) const {
        if (support.empty() || support.size() != probs.size()) {
            throw MalformedDistribution("outcome distribution: support and probs must be non-empty and equal length");
        }
        double total = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) {
            if (!std::isfinite(support[i])) {
                throw MalformedDistribution("outcome distribution: non-finite support value");
            }
            if (!(probs[i] >= 0.0)) {
                throw MalformedDistribution("outcome distribution: negative probability");
            }
            total += probs[i];
        }
        if (std::abs(total - 1.0) > tol) {
            throw MalformedDistribution("outcome distribution: probabilities sum to " + std::to_string(total));
        }
    }

    [[nodiscard]] double mean() const noexcept {
        double m = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) m += support[i] * probs[i];
        return m;
    }

    [[nodiscard]] double min_value() const { return *std::min_element(support.begin(), support.end()); }
    [[nodiscard]] double max_value() const { return *std::max_element(support.begin(), support.end()); }

    // Probability mass per distinct support value.
    [[nodiscard]] std::map<double, double> masses() const {
        std::map<double, double> out;
        for (std::size_t i = 0; i < support.size(); ++i) out[support[i]] += probs[i];
        return out;
    }
};

// A conjunction of equality constraints on (x, w, z); unset fields are free.
struct Event {
    std::optional<std::size_t> x;
    std::optional<std::size_t> w;
    std::optional<int> z;

    [[nodiscard]] bool matches(std::size_t xi, std::size_t wi, int zi) const noexcept {
        return (!x || *x == xi) && (!w || *w == wi) && (!z || *z == zi);
    }
};

class PopulationModel {
   public:
    PopulationModel(Domain x_domain, Domain w_domain, std::vector<double> cell_probs,
                    std::vector<std::optional<OutcomeDist>> outcomes)
        : x_(std::move(x_domain)), w_(std::move(w_domain)), probs_(std::move(cell_probs)),
          outcomes_(std::move(outcomes)) {
        const std::size_t cells = x_.size() * w_.size() * 2;
        if (x_.size() == 0 || w_.size() == 0) {
            throw MalformedDistribution("population model: empty domain");
        }
        if (probs_.size() != cells || outcomes_.size() != cells) {
            throw MalformedDistribution("population model: cell table has wrong size");
        }
        double total = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
            if (!(probs_[c] >= 0.0) || !std::isfinite(probs_[c])) {
                throw MalformedDistribution("population model: negative or non-finite cell probability");
            }
            total += probs_[c];
            if (outcomes_[c]) {
                outcomes_[c]->validate();
            } else if (probs_[c] > 0.0) {
                throw MalformedDistribution("population model: positive-probability cell " + describe_cell(c) +
                                            " has no outcome distribution");
            }
        }
        if (std::abs(total - 1.0) > kUserTol) {
            throw MalformedDistribution("population model: cell probabilities sum to " + std::to_string(total));
        }
    }

    [[nodiscard]] const Domain& x_domain() const noexcept { return x_; }
    [[nodiscard]] const Domain& w_domain() const noexcept { return w_; }
    [[nodiscard]] std::size_t cell_count() const noexcept { return probs_.size(); }

    // Flat layout: ((x * |W|) + w) * 2 + z.
    [[nodiscard]] std::size_t cell_index(std::size_t x, std::size_t w, int z) const noexcept {
        return (x * w_.size() + w) * 2 + static_cast<std::size_t>(z);
    }
    [[nodiscard]] double prob(std::size_t x, std::size_t w, int z) const { return probs_.at(cell_index(x, w, z)); }
    [[nodiscard]] const std::vector<double>& cell_probs() const noexcept { return probs_; }

    // nullptr for zero-probability cells that were given no distribution.
    [[nodiscard]] const OutcomeDist* outcome(std::size_t x, std::size_t w, int z) const {
        const auto& o = outcomes_.at(cell_index(x, w, z));
        return o ? &*o : nullptr;
    }

    [[nodiscard]] std::string describe_cell(std::size_t c) const {
        const std::size_t z = c % 2;
        const std::size_t w = (c / 2) % w_.size();
        const std::size_t x = c / 2 / w_.size();
        return "(x=" + x_.label(x) + ", w=" + w_.label(w) + ", z=" + std::to_string(z) + ")";
    }

    // Visit every cell as (x, w, z, probability).
    template <class F>
    void for_each_cell(F&& f) const {
        for (std::size_t x = 0; x < x_.size(); ++x)
            for (std::size_t w = 0; w < w_.size(); ++w)
                for (int z = 0; z <= 1; ++z) f(x, w, z, probs_[cell_index(x, w, z)]);
    }

   private:
    Domain x_;
    Domain w_;
    std::vector<double> probs_;
    std::vector<std::optional<OutcomeDist>> outcomes_;
};

inline double event_prob(const PopulationModel& model, const Event& event) {
    double p = 0.0;
    model.for_each_cell([&](std::size_t x, std::size_t w, int z, double pc) {
        if (event.matches(x, w, z)) p += pc;
    });
    return p;
}

inline std::string describe_event(const PopulationModel& model, const Event& e) {
    std::string s;
    auto add = [&](const std::string& part) { s += (s.empty() ? "" : ", ") + part; };
    if (e.x) add("x=" + model.x_domain().label(*e.x));
    if (e.w) add("w=" + model.w_domain().label(*e.w));
    if (e.z) add("z=" + std::to_string(*e.z));
    return "{" + s + "}";
}

// E(y | condition).
inline double cond_mean(const PopulationModel& model, const Event& condition) {
    double mass = 0.0;
    double weighted = 0.0;
    model.for_each_cell([&](std::size_t x, std::size_t w, int z, double pc) {
        if (pc > 0.0 && condition.matches(x, w, z)) {
            mass += pc;
            weighted += pc * model.outcome(x, w, z)->mean();
        }
    });
    if (!(mass > 0.0)) {
        throw ZeroProbabilityEvent("E(y | " + describe_event(model, condition) + ") undefined: event has probability 0");
    }
    return weighted / mass;
}

// P(event | given).  Constraints that contradict each other give 0.
inline double cond_prob(const PopulationModel& model, const Event& event, const Event& given) {
    const double denom = event_prob(model, given);
    if (!(denom > 0.0)) {
        throw ZeroProbabilityEvent("P(. | " + describe_event(model, given) + ") undefined: event has probability 0");
    }
    double num = 0.0;
    model.for_each_cell([&](std::size_t x, std::size_t w, int z, double pc) {
        if (given.matches(x, w, z) && event.matches(x, w, z)) num += pc;
    });
    return num / denom;
}

// Inputs for a population that is MAR conditional on x.
struct MarTables {
    Domain x_domain;
    Domain w_domain;
    std::vector<double> x_dist;                              // P(x = xi)
    std::vector<std::vector<double>> w_given_x;              // [xi][omega] = P(w = omega | x = xi)
    std::vector<double> z_given_x;                           // P(z = 1 | x = xi)
    std::vector<std::vector<OutcomeDist>> outcome_given_xw;  // [xi][omega]
};

namespace detail {
inline void check_simplex(const std::vector<double>& p, std::size_t expected, const std::string& what) {
    if (p.size() != expected) {
        throw MalformedDistribution(what + ": expected " + std::to_string(expected) + " entries, got " +
                                    std::to_string(p.size()));
    }
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw MalformedDistribution(what + ": negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > kUserTol) {
        throw MalformedDistribution(what + ": entries sum to " + std::to_string(total));
    }
}
}  // namespace detail

// Builds P(x) P(w|x) P(z|x) with the outcome law shared across z.
inline PopulationModel make_mar(const MarTables& t) {
    const std::size_t nx = t.x_domain.size();
    const std::size_t nw = t.w_domain.size();
    detail::check_simplex(t.x_dist, nx, "x_dist");
    if (t.w_given_x.size() != nx || t.z_given_x.size() != nx || t.outcome_given_xw.size() != nx) {
        throw MalformedDistribution("make_mar: tables must have one row per x label");
    }
    std::vector<double> probs(nx * nw * 2, 0.0);
    std::vector<std::optional<OutcomeDist>> outcomes(nx * nw * 2);
    for (std::size_t x = 0; x < nx; ++x) {
        const std::string row = "row x=" + t.x_domain.label(x);
        detail::check_simplex(t.w_given_x[x], nw, "w_given_x " + row);
        const double pz1 = t.z_given_x[x];
        if (!(pz1 >= 0.0 && pz1 <= 1.0)) throw MalformedDistribution("z_given_x " + row + ": not in [0, 1]");
        if (t.outcome_given_xw[x].size() != nw) {
            throw MalformedDistribution("outcome_given_xw " + row + ": expected one entry per w label");
        }
        for (std::size_t w = 0; w < nw; ++w) {
            const double pxw = t.x_dist[x] * t.w_given_x[x][w];
            for (int z = 0; z <= 1; ++z) {
                const std::size_t c = (x * nw + w) * 2 + static_cast<std::size_t>(z);
                probs[c] = pxw * (z == 1 ? pz1 : 1.0 - pz1);
                outcomes[c] = t.outcome_given_xw[x][w];
            }
        }
    }
    return PopulationModel(t.x_domain, t.w_domain, std::move(probs), std::move(outcomes));
}

// Returns a description of the first MAR violation found, or nullopt when the
// joint law of (y, w) given x does not depend on z (within tol).
inline std::optional<std::string> mar_violation(const PopulationModel& model, double tol = kUserTol) {
    const std::size_t nx = model.x_domain().size();
    const std::size_t nw = model.w_domain().size();
    for (std::size_t x = 0; x < nx; ++x) {
        double px[2] = {0.0, 0.0};
        for (std::size_t w = 0; w < nw; ++w)
            for (int z = 0; z <= 1; ++z) px[z] += model.prob(x, w, z);
        if (!(px[0] > 0.0) || !(px[1] > 0.0)) continue;  // one side empty: vacuous
        const std::string& xl = model.x_domain().label(x);
        for (std::size_t w = 0; w < nw; ++w) {
            const double pw1 = model.prob(x, w, 1) / px[1];
            const double pw0 = model.prob(x, w, 0) / px[0];
            const std::string& wl = model.w_domain().label(w);
            if (std::abs(pw1 - pw0) > tol) {
                std::ostringstream os;
                os << "P(z=1, w=" << wl << " | x=" << xl << ") != P(z=1 | x=" << xl << ") * P(w=" << wl
                   << " | x=" << xl << "): P(w|x,z=1)=" << pw1 << " but P(w|x,z=0)=" << pw0;
                return os.str();
            }
            std::map<double, double> joint[2];
            for (int z = 0; z <= 1; ++z) {
                const double pw = z == 1 ? pw1 : pw0;
                if (!(model.prob(x, w, z) > 0.0)) continue;
                for (const auto& [v, q] : model.outcome(x, w, z)->masses()) joint[z][v] += pw * q;
            }
            std::map<double, std::pair<double, double>> both;
            for (int z = 0; z <= 1; ++z)
                for (const auto& [v, q] : joint[z]) (z == 1 ? both[v].first : both[v].second) += q;
            for (const auto& [v, pq] : both) {
                if (std::abs(pq.first - pq.second) > tol) {
                    std::ostringstream os;
                    os << "P(y | x=" << xl << ", w=" << wl << ", z=1) != P(y | x=" << xl << ", w=" << wl
                       << ", z=0): mass at y=" << v << " is " << pq.first << " vs " << pq.second;
                    return os.str();
                }
            }
        }
    }
    return std::nullopt;
}

inline bool is_mar(const PopulationModel& model, double tol = kUserTol) { return !mar_violation(model, tol); }

// Stable FNV-1a digest of the model's labels, probabilities and outcome tables.
inline std::string model_digest(const PopulationModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    auto feed_str = [&](const std::string& s) { feed(s.data(), s.size() + 1); };
    for (const auto& l : model.x_domain().labels()) feed_str(l);
    feed_str("|");
    for (const auto& l : model.w_domain().labels()) feed_str(l);
    model.for_each_cell([&](std::size_t x, std::size_t w, int z, double pc) {
        feed(&pc, sizeof pc);
        if (const OutcomeDist* o = model.outcome(x, w, z)) {
            for (double v : o->support) feed(&v, sizeof v);
            for (double v : o->probs) feed(&v, sizeof v);
        }
    });
    static constexpr char hex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    return out;
}

}  // namespace imputelab
