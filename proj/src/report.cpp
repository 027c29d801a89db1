#include "cpmiss/report.hpp"

#include "cpmiss/csv.hpp"

#include <json.hpp>

#include <cmath>
#include <ostream>

namespace cpmiss {

using nlohmann::json;

std::vector<StatsRow> report_rows(const EvalReport& report) {
    std::vector<StatsRow> rows;
    for (Method m : report.methods) {
        for (const auto& g : report.groups) {
            if (!report.has(m, g)) continue;
            rows.push_back({to_string(m), g, report.at(m, g)});
        }
    }
    return rows;
}

void write_stats_csv(std::ostream& out, const std::vector<StatsRow>& rows) {
    out << "method,group,coverage,mean_length,n_points,n_infinite\n";
    for (const auto& r : rows) {
        out << csv_escape(r.method) << ',' << csv_escape(r.group) << ',' << format_fixed(r.stats.coverage()) << ','
            << format_fixed(r.stats.mean_length()) << ',' << r.stats.n_points << ',' << r.stats.n_infinite << '\n';
    }
}

namespace {

json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

json config_json(const ExperimentConfig& cfg) {
    json methods = json::array();
    for (Method m : cfg.methods) methods.push_back(to_string(m));
    return {
        {"experiment",
         {{"reps", cfg.reps},
          {"seed", cfg.master_seed},
          {"alpha", cfg.alpha},
          {"rho", cfg.rho},
          {"methods", methods},
          {"grouping", to_string(cfg.grouping)},
          {"include_all_missing_group", cfg.include_all_missing_group},
          {"group_attempt_budget", cfg.group_attempt_budget}}},
        {"sizes",
         {{"train", cfg.sizes.n_train},
          {"calib", cfg.sizes.n_calib},
          {"test_marginal", cfg.sizes.n_test_marginal},
          {"test_per_group", cfg.sizes.n_test_per_group}}},
        {"dgp",
         {{"d", cfg.dgp.d},
          {"beta", cfg.dgp.beta},
          {"mu", cfg.dgp.mu},
          {"phi", cfg.dgp.phi},
          {"noise_sd", cfg.dgp.noise_sd}}},
        {"ampute",
         {{"mechanism", to_string(cfg.ampute.mechanism)},
          {"rate", cfg.ampute.rate},
          {"maskable", cfg.ampute.maskable_columns},
          {"mnar_steepness", cfg.ampute.mnar_steepness},
          {"pilot_size", cfg.pilot_size}}},
    };
}

} // namespace

std::string report_json(const EvalReport& report, const ExperimentConfig& cfg) {
    json cells = json::array();
    for (const auto& r : report_rows(report)) {
        cells.push_back({{"method", r.method},
                         {"group", r.group},
                         {"coverage", number_or_null(r.stats.coverage())},
                         {"mean_length", number_or_null(r.stats.mean_length())},
                         {"n_points", r.stats.n_points},
                         {"n_covered", r.stats.n_covered},
                         {"n_infinite", r.stats.n_infinite},
                         {"finite_length_sum", r.stats.finite_length_sum}});
    }
    json doc = {
        {"seed", cfg.master_seed},
        {"reps", report.reps},
        {"groups", report.groups},
        {"cells", cells},
        {"warnings", report.warnings},
        {"config", config_json(cfg)},
    };
    return doc.dump(2) + "\n";
}

void write_points_csv(std::ostream& out, const std::vector<PointRecord>& points) {
    out << "rep,method,group,mask,y_true,lower,upper,flag\n";
    for (const auto& p : points) {
        out << p.rep << ',' << to_string(p.method) << ',' << csv_escape(p.group) << ',' << p.mask.str() << ','
            << format_full(p.y) << ',' << format_full(p.lower) << ',' << format_full(p.upper) << ','
            << to_string(p.flag) << '\n';
    }
}

} // namespace cpmiss
