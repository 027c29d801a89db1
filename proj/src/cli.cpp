#include "cpmiss/cli.hpp"

#include "cpmiss/config.hpp"
#include "cpmiss/error.hpp"
#include "cpmiss/harness.hpp"
#include "cpmiss/models.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace cpmiss::cli {

namespace {

std::string join_lines(const std::vector<std::size_t>& lines) {
    std::string s;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(lines[i]);
    }
    return s;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path.string() + "'");
    f << contents;
    if (!f) throw DataError("write failed for '" + path.string() + "'");
}

struct ParsedTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::optional<double>>> rows;
};

ParsedTable parse_table(const CsvTable& raw, const std::string& na_token, const std::string& what) {
    ParsedTable out;
    out.header = raw.header;
    std::vector<std::size_t> bad;
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto& fields = raw.rows[r];
        if (fields.size() != raw.header.size()) {
            bad.push_back(raw.line_numbers[r]);
            continue;
        }
        std::vector<std::optional<double>> row(fields.size());
        try {
            for (std::size_t j = 0; j < fields.size(); ++j) row[j] = parse_numeric_cell(fields[j], na_token);
        } catch (const DataError&) {
            bad.push_back(raw.line_numbers[r]);
            continue;
        }
        out.rows.push_back(std::move(row));
    }
    if (!bad.empty()) throw DataError(what + ": malformed rows at lines " + join_lines(bad));
    return out;
}

} // namespace

std::vector<PredictRow> predict(const PredictOptions& options, std::vector<std::string>* warnings) {
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie in (0, 1)");
    }
    const ParsedTable train_tab = parse_table(read_csv_file(options.train), options.na_token, options.train.string());
    const CsvTable query_raw = read_csv_file(options.query);
    const ParsedTable query_tab = parse_table(query_raw, options.na_token, options.query.string());

    const auto& header = train_tab.header;
    if (header.size() < 2) throw DataError("training CSV needs at least one feature and a response column");
    std::size_t response_col = header.size() - 1;
    if (options.response) {
        auto it = std::find(header.begin(), header.end(), *options.response);
        if (it == header.end()) throw DataError("response column '" + *options.response + "' not in training CSV");
        response_col = static_cast<std::size_t>(it - header.begin());
    } else if (auto it = std::find(header.begin(), header.end(), "y"); it != header.end()) {
        response_col = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j != response_col) feature_cols.push_back(j);
    }
    const std::size_t d = feature_cols.size();

    // Query schema: every feature by name, optionally the response, nothing else.
    std::vector<std::size_t> query_feature_cols;
    for (auto j : feature_cols) {
        auto it = std::find(query_tab.header.begin(), query_tab.header.end(), header[j]);
        if (it == query_tab.header.end()) {
            throw DataError("schema mismatch: query CSV lacks feature column '" + header[j] + "'");
        }
        query_feature_cols.push_back(static_cast<std::size_t>(it - query_tab.header.begin()));
    }
    std::optional<std::size_t> query_response_col;
    for (std::size_t j = 0; j < query_tab.header.size(); ++j) {
        const auto& name = query_tab.header[j];
        if (name == header[response_col]) {
            query_response_col = j;
        } else if (std::find(query_feature_cols.begin(), query_feature_cols.end(), j) == query_feature_cols.end()) {
            throw DataError("schema mismatch: unexpected query column '" + name + "'");
        }
    }

    std::vector<MaskedSample> samples;
    for (std::size_t r = 0; r < train_tab.rows.size(); ++r) {
        const auto& row = train_tab.rows[r];
        if (!row[response_col]) throw DataError("training row " + std::to_string(r + 1) + " has no response");
        std::vector<std::optional<double>> x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = row[feature_cols[k]];
        samples.emplace_back(std::move(x), row[response_col]);
    }
    if (samples.size() < 2) throw DataError("training CSV needs at least two rows (fit and calibration)");

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (options.shuffle_seed) {
        Rng rng = make_stream(*options.shuffle_seed, 0, StreamPurpose::Split);
        std::shuffle(order.begin(), order.end(), rng);
    }
    auto n_fit = static_cast<std::size_t>(std::llround(options.train_fraction * static_cast<double>(samples.size())));
    n_fit = std::clamp<std::size_t>(n_fit, 1, samples.size() - 1);
    MaskedDataset fit_set(d);
    MaskedDataset calib_set(d);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_fit ? fit_set : calib_set).push_back(samples[order[i]]);
    }
    for (std::size_t k = 0; k < d; ++k) {
        if (!fit_set.column_ranges()[k].any_observed && warnings) {
            warnings->push_back("column '" + header[feature_cols[k]] +
                                "' is entirely missing in the fitting rows; imputing 0");
        }
    }

    const bool quantile = uses_quantile_pipeline(options.method);
    const FittedPipeline pipeline =
        fit_pipeline(fit_set, quantile ? RegressorKind::QuantilePair : RegressorKind::LeastSquares, options.alpha);
    EngineSettings settings;
    settings.alpha = options.alpha;
    settings.rho = options.rho;
    settings.bandwidth = options.bandwidth;
    ConformalEngine engine(quantile ? nullptr : &pipeline, quantile ? &pipeline : nullptr, fit_set, calib_set,
                           settings);

    std::vector<PredictRow> out;
    for (std::size_t r = 0; r < query_tab.rows.size(); ++r) {
        const auto& row = query_tab.rows[r];
        std::vector<std::optional<double>> x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = row[query_feature_cols[k]];
        MaskedSample s(std::move(x));
        PredictRow pr;
        pr.row = r;
        pr.mask = s.mask();
        pr.interval = engine.predict(options.method, s);
        if (query_response_col) pr.y_true = row[*query_response_col];
        out.push_back(std::move(pr));
    }
    return out;
}

void write_predictions_csv(std::ostream& out, const std::vector<PredictRow>& rows) {
    const bool with_y = std::any_of(rows.begin(), rows.end(), [](const PredictRow& r) { return r.y_true.has_value(); });
    out << "row,mask,center,lower,upper,flag" << (with_y ? ",y_true" : "") << '\n';
    for (const auto& r : rows) {
        out << r.row << ',' << r.mask.str() << ',' << format_full(r.interval.center) << ','
            << format_full(r.interval.lower()) << ',' << format_full(r.interval.upper()) << ','
            << to_string(r.interval.flag);
        if (with_y) out << ',' << (r.y_true ? format_full(*r.y_true) : "NA");
        out << '\n';
    }
}

std::vector<StatsRow> audit_intervals(const CsvTable& table, const std::optional<std::string>& group_column) {
    const auto y_col = table.column("y_true");
    const auto lo_col = table.column("lower");
    const auto hi_col = table.column("upper");
    if (!y_col || !lo_col || !hi_col) throw DataError("audit input needs y_true, lower and upper columns");
    const auto method_col = table.column("method");
    std::optional<std::size_t> group_col;
    if (group_column) {
        group_col = table.column(*group_column);
        if (!group_col) throw DataError("group column '" + *group_column + "' not found");
    }
    const auto mask_col = table.column("mask");
    std::vector<std::size_t> bit_cols;
    if (!mask_col) {
        static const std::set<std::string> reserved = {"y_true", "lower", "upper", "row", "center",
                                                       "flag",   "method", "group", "rep"};
        for (std::size_t j = 0; j < table.header.size(); ++j) {
            if (!reserved.count(table.header[j]) && (!group_col || j != *group_col)) bit_cols.push_back(j);
        }
    }

    std::vector<std::string> method_order;
    std::map<std::string, std::vector<std::string>> group_order;
    std::map<std::pair<std::string, std::string>, GroupStats> cells;
    std::vector<std::size_t> bad;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& f = table.rows[r];
        if (f.size() != table.header.size()) {
            bad.push_back(table.line_numbers[r]);
            continue;
        }
        std::optional<double> y, lo, hi;
        std::string mask_label;
        try {
            y = parse_numeric_cell(f[*y_col], "");
            lo = parse_numeric_cell(f[*lo_col], "");
            hi = parse_numeric_cell(f[*hi_col], "");
            if (!y || !lo || !hi || *lo > *hi) throw DataError("bad interval");
            if (mask_col) {
                mask_label = "[" + Mask::parse(std::string_view(f[*mask_col])).str() + "]";
            } else if (!bit_cols.empty()) {
                std::string bits;
                for (auto j : bit_cols) {
                    const auto v = parse_numeric_cell(f[j], "");
                    if (!v || (*v != 0.0 && *v != 1.0)) throw DataError("bad mask bit");
                    bits.push_back(*v == 1.0 ? '1' : '0');
                }
                mask_label = "[" + bits + "]";
            }
        } catch (const Error&) {
            bad.push_back(table.line_numbers[r]);
            continue;
        }

        const std::string method = method_col ? f[*method_col] : std::string("all");
        if (!group_order.count(method)) method_order.push_back(method);
        auto& groups = group_order[method];

        auto add = [&](const std::string& g) {
            if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
            auto& st = cells[{method, g}];
            ++st.n_points;
            if (*lo <= *y && *y <= *hi) ++st.n_covered;
            if (std::isinf(*lo) || std::isinf(*hi)) {
                ++st.n_infinite;
            } else {
                st.finite_length_sum += *hi - *lo;
            }
        };
        if (group_col) {
            add(f[*group_col]);
        } else {
            add(kMarginalGroup);
            if (!mask_label.empty()) add(mask_label);
        }
    }
    if (!bad.empty()) throw DataError("malformed rows at lines " + join_lines(bad));

    std::vector<StatsRow> rows;
    for (const auto& m : method_order) {
        auto groups = group_order[m];
        if (!group_col) {
            // marginal first, masks sorted
            std::sort(groups.begin() + 1, groups.end());
        }
        for (const auto& g : groups) rows.push_back({m, g, cells[{m, g}]});
    }
    return rows;
}

namespace {

struct SynthBenchArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> rho;
    std::optional<std::string> methods;
    std::optional<std::size_t> reps;
    std::optional<std::size_t> workers;
    std::optional<std::string> mechanism;
    std::optional<std::size_t> n_train, n_calib, n_test, n_per_group;
    std::vector<std::string> sets;
    std::string out = ".";
    bool dump_points = false;
};

int synth_bench(const SynthBenchArgs& a, std::ostream& out, std::ostream& err) {
    ConfigFile file = ConfigFile::load(a.config);
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        file.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    auto set_num = [&](const char* key, const auto& v) {
        if (v) file.set(key, std::to_string(*v));
    };
    if (a.seed) file.set("experiment.seed", std::to_string(*a.seed));
    if (a.alpha) file.set("experiment.alpha", format_full(*a.alpha));
    if (a.rho) file.set("experiment.rho", format_full(*a.rho));
    if (a.methods) file.set("experiment.methods", "\"" + *a.methods + "\"");
    if (a.mechanism) file.set("ampute.mechanism", "\"" + *a.mechanism + "\"");
    set_num("experiment.reps", a.reps);
    set_num("experiment.workers", a.workers);
    set_num("sizes.train", a.n_train);
    set_num("sizes.calib", a.n_calib);
    set_num("sizes.test_marginal", a.n_test);
    set_num("sizes.test_per_group", a.n_per_group);

    ExperimentConfig cfg = experiment_from_config(file);
    cfg.keep_points = a.dump_points;
    const EvalReport report = run_experiment(cfg);

    const std::filesystem::path dir(a.out);
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_report_csv(csv, report);
    write_file(dir / "report.csv", csv.str());
    write_file(dir / "report.json", report_json(report, cfg));
    if (a.dump_points) {
        std::ostringstream pts;
        write_points_csv(pts, report.points);
        write_file(dir / "points.csv", pts.str());
    }
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    out << "wrote " << (dir / "report.csv").string() << " and " << (dir / "report.json").string() << '\n';
    return kExitOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Conformal prediction intervals with missing covariates"};
    app.require_subcommand(1);

    SynthBenchArgs sb;
    auto* bench = app.add_subcommand("synth-bench", "Monte-Carlo coverage benchmark on synthetic data");
    bench->add_option("--config", sb.config, "Experiment config file")->required();
    bench->add_option("--seed", sb.seed, "Master seed");
    bench->add_option("--alpha", sb.alpha, "Miscoverage level");
    bench->add_option("--rho", sb.rho, "Decay of the nonexchangeable weights");
    bench->add_option("--methods", sb.methods, "Comma-separated subset of cp,cqr,cqr_mda_exact,nexcp,lcp");
    bench->add_option("--reps", sb.reps, "Repetitions");
    bench->add_option("--workers", sb.workers, "Worker threads");
    bench->add_option("--mechanism", sb.mechanism, "MCAR, MAR or MNAR");
    bench->add_option("--n-train", sb.n_train, "Training set size");
    bench->add_option("--n-calib", sb.n_calib, "Calibration set size");
    bench->add_option("--n-test", sb.n_test, "Marginal test set size");
    bench->add_option("--n-per-group", sb.n_per_group, "Test points per mask group");
    bench->add_option("--set", sb.sets, "Override any config key: section.key=value");
    bench->add_option("--out", sb.out, "Output directory");
    bench->add_flag("--dump-points", sb.dump_points, "Also write per-point records to points.csv");

    PredictOptions po;
    std::string method_name = "cp";
    std::string predict_out;
    auto* pred = app.add_subcommand("predict", "Prediction intervals for query rows of a CSV");
    pred->add_option("--train", po.train, "Training CSV (features and response)")->required();
    pred->add_option("--query", po.query, "Query CSV (features, NAs allowed)")->required();
    pred->add_option("--method", method_name, "cp, cqr, cqr_mda_exact, nexcp or lcp");
    pred->add_option("--alpha", po.alpha, "Miscoverage level");
    pred->add_option("--rho", po.rho, "Decay of the nonexchangeable weights");
    pred->add_option("--na-token", po.na_token, "Missing-value marker");
    pred->add_option("--response", po.response, "Response column (default: 'y' or the last column)");
    pred->add_option("--train-fraction", po.train_fraction, "Share of rows used for fitting");
    pred->add_option("--shuffle-seed", po.shuffle_seed, "Shuffle rows before the split");
    pred->add_option("--bandwidth", po.bandwidth, "Kernel bandwidth for lcp");
    pred->add_option("--out", predict_out, "Output CSV (default stdout)");

    std::string intervals;
    std::string audit_out;
    std::optional<std::string> group_column;
    auto* aud = app.add_subcommand("audit", "Empirical coverage of stored intervals");
    aud->add_option("--intervals", intervals, "CSV with y_true, lower, upper and mask columns")->required();
    aud->add_option("--group-column", group_column, "Group by this column instead of the mask");
    aud->add_option("--out", audit_out, "Output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUser;
    }

    try {
        if (bench->parsed()) {
            return synth_bench(sb, out, err);
        }
        if (pred->parsed()) {
            po.method = parse_method(method_name);
            std::vector<std::string> warnings;
            const auto rows = predict(po, &warnings);
            for (const auto& w : warnings) err << "warning: " << w << '\n';
            std::ostringstream csv;
            write_predictions_csv(csv, rows);
            if (predict_out.empty()) {
                out << csv.str();
            } else {
                write_file(predict_out, csv.str());
            }
            return kExitOk;
        }
        if (aud->parsed()) {
            const auto rows = audit_intervals(read_csv_file(intervals), group_column);
            std::ostringstream csv;
            write_stats_csv(csv, rows);
            if (audit_out.empty()) {
                out << csv.str();
            } else {
                write_file(audit_out, csv.str());
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}

} // namespace cpmiss::cli
