#ifndef NCOT_REPORT_HPP
#define NCOT_REPORT_HPP

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace ncot {

/// Outcome of a sampled inequality check. Convention: passed <=> worst_margin >= -tolerance.
struct CheckReport {
    struct Row {
        std::string label;
        std::map<std::string, double> values;
    };

    std::string name;
    bool passed = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    double tolerance = 0.0;
    std::map<std::string, double> witness;
    std::vector<Row> rows;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::string note;

    /// Records one evaluated point; keeps the worst one as witness.
    void record(double margin, std::map<std::string, double> at, std::string label = {})
    {
        ++samples;
        at["margin"] = margin;
        rows.push_back({std::move(label), at});
        if (margin < worst_margin) {
            worst_margin = margin;
            witness = std::move(at);
        }
        passed = worst_margin >= -tolerance;
    }

    void merge(const CheckReport& other)
    {
        for (const auto& r : other.rows)
            rows.push_back(r);
        samples += other.samples;
        if (other.worst_margin < worst_margin) {
            worst_margin = other.worst_margin;
            witness = other.witness;
        }
        passed = passed && other.passed;
    }
};

} // namespace ncot

#endif // NCOT_REPORT_HPP
