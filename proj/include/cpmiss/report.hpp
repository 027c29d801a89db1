#pragma once

#include "cpmiss/harness.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cpmiss {

/// One line of a coverage table.
struct StatsRow {
    std::string method;
    std::string group;
    GroupStats stats;
};

/// Rows of `report` in method-major, group order.
std::vector<StatsRow> report_rows(const EvalReport& report);

/// Header `method,group,coverage,mean_length,n_points,n_infinite`; coverage and
/// length at 6 decimals.
void write_stats_csv(std::ostream& out, const std::vector<StatsRow>& rows);

inline void write_report_csv(std::ostream& out, const EvalReport& report) {
    write_stats_csv(out, report_rows(report));
}

/// Structured report with the configuration and seed echoed, full precision.
std::string report_json(const EvalReport& report, const ExperimentConfig& cfg);

/// Per-point records: `rep,method,group,mask,y_true,lower,upper,flag` at full precision.
void write_points_csv(std::ostream& out, const std::vector<PointRecord>& points);

} // namespace cpmiss
