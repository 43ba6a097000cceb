#pragma once

// CSV forms of samples, imputations, limit reports, scans, bounds and typed pairs.

#include <array>
#include <string>
#include <vector>

#include "imputelab/bounds.hpp"
#include "imputelab/estimators.hpp"
#include "imputelab/hla.hpp"
#include "imputelab/io/csv.hpp"
#include "imputelab/sampling.hpp"

namespace imputelab::io {

inline std::string sample_to_csv(const Sample& s) {
    CsvWriter out({"y", "x", "z", "w"});
    for (const auto& r : s.records) {
        out.row({format_double(r.y), s.x_domain.label(r.x), std::to_string(r.z),
                 r.w ? s.w_domain.label(*r.w) : std::string()});
    }
    return out.str();
}

inline Sample sample_from_csv(std::string_view text, const Domain& x_domain, const Domain& w_domain) {
    const CsvTable t = parse_csv(text);
    const std::size_t cy = t.column("y"), cx = t.column("x"), cz = t.column("z"), cw = t.column("w");
    Sample s{x_domain, w_domain, {}, {}, 0};
    for (const auto& row : t.rows) {
        SampleRecord r;
        r.y = parse_double(row[cy]);
        r.x = x_domain.index_of(row[cx]);
        const auto z = parse_u64(row[cz]);
        if (z > 1) throw ConfigError("sample CSV: z must be 0 or 1");
        r.z = static_cast<int>(z);
        if (r.z == 1) {
            if (row[cw].empty()) throw ConfigError("sample CSV: w missing on a z=1 record");
            r.w = w_domain.index_of(row[cw]);
        } else if (!row[cw].empty()) {
            throw ConfigError("sample CSV: w present on a z=0 record");
        }
        s.records.push_back(r);
    }
    return s;
}

// Long format: one row per (missing record, m); record is the 0-based row index.
inline std::string imputations_to_csv(const ImputedSample& imp) {
    CsvWriter out({"record", "m", "u"});
    for (std::size_t k = 0; k < imp.missing.size(); ++k) {
        for (std::size_t m = 1; m <= imp.m_count; ++m) {
            out.row({std::to_string(imp.missing[k]), std::to_string(m), imp.base->w_domain.label(imp.imputed(k, m))});
        }
    }
    return out.str();
}

inline std::string plim_to_csv(const std::vector<PlimEntry>& entries, const Domain& x_domain, const Domain& w_domain) {
    CsvWriter out({"xi", "omega", "m", "regime", "pi", "theta", "target_full", "target_coarse", "bias"});
    for (const auto& e : entries) {
        out.row({x_domain.label(e.xi), w_domain.label(e.omega), std::to_string(e.m), to_string(e.regime),
                 format_double(e.pi), format_double(e.theta), format_double(e.target_full),
                 format_double(e.target_coarse), format_double(e.bias)});
    }
    return out.str();
}

inline std::string convergence_to_csv(const std::vector<ConvergenceRow>& rows) {
    CsvWriter out({"n", "mean", "sd", "plim"});
    for (const auto& r : rows) {
        out.row({std::to_string(r.n), format_double(r.mean), format_double(r.sd), format_double(r.plim)});
    }
    return out.str();
}

inline std::vector<std::string> bounds_header() {
    return {"p_y", "p_w", "lo_raw", "hi_raw", "lo", "hi", "lower_informative", "upper_informative"};
}

inline std::vector<std::string> bounds_row(const BoundsInput& in, const BoundsResult& r) {
    return {format_double(in.p_y), format_double(in.p_w), format_double(r.lo_raw), format_double(r.hi_raw),
            format_double(r.lo),   format_double(r.hi),   r.lower_informative ? "true" : "false",
            r.upper_informative ? "true" : "false"};
}

inline std::vector<BoundsInput> bounds_inputs_from_csv(std::string_view text) {
    const CsvTable t = parse_csv(text);
    const std::size_t cy = t.column("p_y"), cw = t.column("p_w");
    std::vector<BoundsInput> out;
    for (const auto& row : t.rows) out.push_back({parse_double(row[cy]), parse_double(row[cw])});
    return out;
}

inline const std::array<std::string, 13>& pairs_header() {
    static const std::array<std::string, 13> h{"donor_a1", "donor_a2", "donor_b1",  "donor_b2",  "donor_dr1",
                                               "donor_dr2", "recip_a1", "recip_a2", "recip_b1", "recip_b2",
                                               "recip_dr1", "recip_dr2", "y"};
    return h;
}

inline std::string pairs_to_csv(std::span<const TypedPair> pairs) {
    const auto& h = pairs_header();
    CsvWriter out(std::vector<std::string>(h.begin(), h.end()));
    for (const auto& p : pairs) {
        std::vector<std::string> row;
        for (const HlaTyping* t : {&p.donor, &p.recipient}) {
            for (const Genotype& g : t->loci) {
                row.push_back(std::to_string(g.first));
                row.push_back(std::to_string(g.second));
            }
        }
        row.push_back(std::to_string(p.y));
        out.row(row);
    }
    return out.str();
}

inline std::vector<TypedPair> pairs_from_csv(std::string_view text) {
    const CsvTable t = parse_csv(text);
    std::array<std::size_t, 13> col{};
    for (std::size_t i = 0; i < 13; ++i) col[i] = t.column(pairs_header()[i]);
    auto antigen = [](const std::string& s) {
        const double v = parse_double(s);
        if (v != static_cast<double>(static_cast<Antigen>(v))) throw ConfigError("pairs CSV: antigen must be an integer");
        return static_cast<Antigen>(v);
    };
    std::vector<TypedPair> out;
    for (const auto& row : t.rows) {
        TypedPair p;
        std::size_t c = 0;
        for (HlaTyping* typing : {&p.donor, &p.recipient}) {
            for (Genotype& g : typing->loci) {
                g = Genotype::of(antigen(row[col[c]]), antigen(row[col[c + 1]]));
                c += 2;
            }
        }
        const auto y = parse_u64(row[col[12]]);
        if (y > 1) throw ConfigError("pairs CSV: y must be 0 or 1");
        p.y = static_cast<int>(y);
        out.push_back(p);
    }
    return out;
}

}  // namespace imputelab::io
