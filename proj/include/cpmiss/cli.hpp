#pragma once

#include "cpmiss/conformal.hpp"
#include "cpmiss/csv.hpp"
#include "cpmiss/report.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cpmiss::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUser = 2;

/// Entry point of the `cpmiss` tool: synth-bench, predict and audit.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct PredictOptions {
    std::filesystem::path train;
    std::filesystem::path query;
    Method method = Method::CP;
    double alpha = 0.1;
    double rho = 0.99;
    std::string na_token = "NA";
    /// Response column; defaults to "y" when present, else the last column.
    std::optional<std::string> response;
    /// Fraction of the training rows used for fitting; the rest calibrates.
    double train_fraction = 2.0 / 3.0;
    /// Shuffle rows before splitting; rows keep file order otherwise.
    std::optional<std::uint64_t> shuffle_seed;
    std::optional<double> bandwidth;
};

struct PredictRow {
    std::size_t row = 0;
    Mask mask;
    PredictionInterval interval;
    std::optional<double> y_true;
};

/// Fits on the first part of the training file, calibrates on the rest and
/// returns one interval per query row. Throws DataError on schema problems.
std::vector<PredictRow> predict(const PredictOptions& options, std::vector<std::string>* warnings = nullptr);

/// `row,mask,center,lower,upper,flag[,y_true]` at full precision.
void write_predictions_csv(std::ostream& out, const std::vector<PredictRow>& rows);

/// Empirical coverage and mean finite length from rows of
/// (y_true, lower, upper, mask columns). The mask is read from a `mask`
/// column when present, otherwise from every column not in
/// {y_true, lower, upper, row, center, flag, method, group, rep}. Without
/// `group_column` the groups are "mar" (all rows) and one per mask; with it,
/// the distinct values of that column. A `method` column splits the table by
/// method. Throws DataError listing the line numbers of malformed rows.
std::vector<StatsRow> audit_intervals(const CsvTable& table, const std::optional<std::string>& group_column = {});

} // namespace cpmiss::cli
