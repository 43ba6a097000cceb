#pragma once

// Identification bounds on P(y = 1 | x, w = omega) for binary y when only
// P(y = 1 | x) and P(w = omega | x) are known.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "imputelab/error.hpp"

namespace imputelab {

struct BoundsInput {
    double p_y = 0.0;  // P(y = 1 | x = xi)
    double p_w = 1.0;  // P(w = omega | x = xi)
};

struct BoundsResult {
    double lo_raw = 0.0;
    double hi_raw = 0.0;
    double lo = 0.0;
    double hi = 1.0;
    bool lower_informative = false;
    bool upper_informative = false;
};

inline void validate(const BoundsInput& in) {
    if (!(in.p_y >= 0.0 && in.p_y <= 1.0)) {
        throw DomainError("p_y=" + std::to_string(in.p_y) + " is outside [0, 1]");
    }
    if (in.p_w == 0.0) {
        throw DomainError("p_w=0: P(y=1 | x, w) is undefined when P(w | x) = 0");
    }
    if (!(in.p_w > 0.0 && in.p_w <= 1.0)) {
        throw DomainError("p_w=" + std::to_string(in.p_w) + " is outside (0, 1]");
    }
}

inline BoundsResult binary_bounds(const BoundsInput& in) {
    validate(in);
    BoundsResult r;
    r.lo_raw = (in.p_y - (1.0 - in.p_w)) / in.p_w;
    r.hi_raw = in.p_y / in.p_w;
    r.lo = std::max(r.lo_raw, 0.0);
    r.hi = std::min(r.hi_raw, 1.0);
    r.lower_informative = r.lo > 0.0;
    r.upper_informative = r.hi < 1.0;
    return r;
}

struct SharpnessResult {
    double achieved_lo = 0.0;
    double achieved_hi = 0.0;
    std::size_t points = 0;  // grid distributions checked
};

namespace detail {

// Joint of (y, w == omega) as (q11, q01, q10, q00): first index y, second
// index 1 when w = omega.
using Joint4 = std::array<double, 4>;

// Vertices of {q >= 0 : q11 + q01 = p_w, q11 + q10 = p_y, sum q = 1}, found by
// zeroing each coordinate in turn and solving the remaining 3x3 system.
inline std::vector<Joint4> consistent_vertices(const BoundsInput& in) {
    constexpr double a[3][4] = {{1, 1, 0, 0}, {1, 0, 1, 0}, {1, 1, 1, 1}};
    const double b[3] = {in.p_w, in.p_y, 1.0};
    std::vector<Joint4> out;
    for (std::size_t zero = 0; zero < 4; ++zero) {
        double m[3][4];
        for (std::size_t r = 0; r < 3; ++r) {
            std::size_t c2 = 0;
            for (std::size_t c = 0; c < 4; ++c) {
                if (c != zero) m[r][c2++] = a[r][c];
            }
            m[r][3] = b[r];
        }
        bool singular = false;
        for (std::size_t col = 0; col < 3 && !singular; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < 3; ++r) {
                if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
            }
            if (std::abs(m[piv][col]) < 1e-14) {
                singular = true;
                break;
            }
            for (std::size_t c = 0; c < 4; ++c) std::swap(m[col][c], m[piv][c]);
            for (std::size_t r = 0; r < 3; ++r) {
                if (r == col) continue;
                const double f = m[r][col] / m[col][col];
                for (std::size_t c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
            }
        }
        if (singular) continue;
        Joint4 q{};
        std::size_t k = 0;
        bool feasible = true;
        for (std::size_t c = 0; c < 4; ++c) {
            if (c == zero) continue;
            q[c] = m[k][3] / m[k][k];
            ++k;
            if (q[c] < -1e-15) feasible = false;
            q[c] = std::max(q[c], 0.0);
        }
        if (feasible) out.push_back(q);
    }
    return out;
}

}  // namespace detail

// Enumerates joint distributions of (y, 1{w = omega}) consistent with the
// inputs on a cell-centred grid of `grid` points along the segment of all
// consistent joints, and reports the range of P(y = 1 | w = omega) attained.
// The grid excludes the segment's endpoints, so the attained range approaches
// the bounds from inside at rate 1/grid.
inline SharpnessResult bounds_sharpness_check(const BoundsInput& in, std::size_t grid) {
    validate(in);
    if (grid < 100) throw DomainError("bounds_sharpness_check: grid must be >= 100");
    const auto vertices = detail::consistent_vertices(in);
    if (vertices.empty()) throw DomainError("no joint distribution is consistent with the inputs");
    auto by_q11 = [](const detail::Joint4& u, const detail::Joint4& v) { return u[0] < v[0]; };
    const detail::Joint4 v0 = *std::min_element(vertices.begin(), vertices.end(), by_q11);
    const detail::Joint4 v1 = *std::max_element(vertices.begin(), vertices.end(), by_q11);

    SharpnessResult r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0};
    for (std::size_t k = 0; k < grid; ++k) {
        const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(grid);
        detail::Joint4 q{};
        for (std::size_t c = 0; c < 4; ++c) q[c] = v0[c] + t * (v1[c] - v0[c]);
        const bool nonneg = std::all_of(q.begin(), q.end(), [](double v) { return v >= -1e-15; });
        const bool consistent = std::abs(q[0] + q[1] - in.p_w) < 1e-12 && std::abs(q[0] + q[2] - in.p_y) < 1e-12 &&
                                std::abs(q[0] + q[1] + q[2] + q[3] - 1.0) < 1e-12;
        if (!nonneg || !consistent) continue;
        const double cond = q[0] / (q[0] + q[1]);
        r.achieved_lo = std::min(r.achieved_lo, cond);
        r.achieved_hi = std::max(r.achieved_hi, cond);
        ++r.points;
    }
    if (r.points == 0) throw DomainError("sharpness grid produced no consistent distribution");
    return r;
}

}  // namespace imputelab
