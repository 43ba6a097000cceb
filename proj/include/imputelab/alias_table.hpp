#pragma once

// Walker/Vose alias table for O(1) categorical draws.
//
// Zero-weight categories are left out of the table entirely, so they are never
// drawn regardless of rounding in the construction.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "imputelab/error.hpp"
#include "imputelab/rng.hpp"

namespace imputelab {

class AliasTable {
   public:
    AliasTable() = default;

    explicit AliasTable(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw MalformedDistribution("alias table: negative or non-finite weight");
            }
            total += w;
        }
        if (!(total > 0.0)) {
            throw MalformedDistribution("alias table: weights sum to zero");
        }
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] > 0.0) {
                category_.push_back(i);
            }
        }
        const std::size_t k = category_.size();
        accept_.assign(k, 1.0);
        alias_.assign(k, 0);

        std::vector<double> scaled(k);
        std::vector<std::size_t> small;
        std::vector<std::size_t> large;
        for (std::size_t j = 0; j < k; ++j) {
            scaled[j] = weights[category_[j]] * static_cast<double>(k) / total;
            (scaled[j] < 1.0 ? small : large).push_back(j);
        }
        while (!small.empty() && !large.empty()) {
            const std::size_t s = small.back();
            small.pop_back();
            const std::size_t l = large.back();
            accept_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        // Leftovers on either list are 1 up to rounding.
        for (std::size_t j : small) accept_[j] = 1.0;
        for (std::size_t j : large) accept_[j] = 1.0;
    }

    [[nodiscard]] bool empty() const noexcept { return category_.empty(); }

    std::size_t sample(StreamRng& rng) const noexcept {
        const auto j = static_cast<std::size_t>(rng.uniform_index(category_.size()));
        const double u = rng.uniform01();
        return category_[u < accept_[j] ? j : alias_[j]];
    }

   private:
    std::vector<std::size_t> category_;
    std::vector<double> accept_;
    std::vector<std::size_t> alias_;
};

}  // namespace imputelab
