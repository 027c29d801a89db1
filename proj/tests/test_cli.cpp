#include "cpmiss/cli.hpp"
#include "cpmiss/config.hpp"
#include "cpmiss/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace cpmiss;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cpmiss_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    args.insert(args.begin(), "cpmiss");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

CsvTable table_from(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
    const auto file = ConfigFile::parse(R"(
# comment
[experiment]
reps = 3   # trailing
methods = ["cp", "lcp"]
include_all_missing_group = true

[dgp]
d = 5
beta = [1, 2, 3, 4, 5.5]

[ampute]
mechanism = "mnar"
)");
    CHECK(file.find("experiment.reps")->as_uint("experiment.reps") == 3);
    const auto cfg = experiment_from_config(file);
    CHECK(cfg.reps == 3);
    CHECK(cfg.methods == std::vector<Method>{Method::CP, Method::LCP});
    CHECK(cfg.include_all_missing_group);
    CHECK(cfg.dgp.d == 5);
    CHECK(cfg.dgp.beta.back() == 5.5);
    CHECK(cfg.ampute.mechanism == Mechanism::MNAR);
    CHECK(cfg.ampute.maskable_columns.size() == 5);
    CHECK(cfg.grouping == Grouping::ByPatternSize);

    CHECK_THROWS_AS(experiment_from_config(ConfigFile::parse("[experiment]\nbogus = 1\n")), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("[experiment]\nreps = 1\nreps = 2\n"), ConfigError);
    try {
        ConfigFile::parse("[a]\nx = 1\ny = [1, 2\n");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("config overrides replace file values") {
    auto file = ConfigFile::parse("[experiment]\nreps = 3\nseed = 1\n");
    file.set("experiment.reps", "9");
    file.set("experiment.methods", "cp,nexcp");
    const auto cfg = experiment_from_config(file);
    CHECK(cfg.reps == 9);
    CHECK(cfg.methods == std::vector<Method>{Method::CP, Method::NexCP});
}

TEST_CASE("numeric CSV round trip keeps values and NA positions") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    NumericTable t;
    t.header = {"a", "b", "c"};
    for (int i = 0; i < 200; ++i) {
        std::vector<std::optional<double>> row(3);
        for (auto& v : row) {
            if (rng() % 5 == 0) continue;
            v = n01(rng) * std::pow(10.0, double(int(rng() % 20) - 10));
        }
        t.rows.push_back(row);
    }
    const auto dir = scratch_dir("roundtrip");
    {
        std::ofstream f(dir / "t.csv");
        write_numeric_csv(f, t, "NA");
    }
    const auto back = read_numeric_csv(dir / "t.csv", "NA");
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            REQUIRE(back.rows[i][j].has_value() == t.rows[i][j].has_value());
            if (t.rows[i][j]) {
                CHECK(std::abs(*back.rows[i][j] - *t.rows[i][j]) <= 1e-12 * std::abs(*t.rows[i][j]));
            }
        }
    }
}

TEST_CASE("NA handling in cells") {
    CHECK_FALSE(parse_numeric_cell("  NA ", "NA").has_value());
    CHECK_FALSE(parse_numeric_cell("", "NA").has_value());
    CHECK_FALSE(parse_numeric_cell("?", "?").has_value());
    CHECK(*parse_numeric_cell(" 1.5", "NA") == 1.5);
    CHECK(std::isinf(*parse_numeric_cell("inf", "NA")));
    CHECK_THROWS_AS(parse_numeric_cell("abc", "NA"), DataError);
}

TEST_CASE("audit on trivial tables") {
    const auto all = cli::audit_intervals(table_from("y_true,lower,upper,x1,x2\n0,-1,1,0,1\n2,1,3,1,0\n"));
    REQUIRE(all.size() == 3);
    CHECK(all[0].group == "mar");
    for (const auto& r : all) CHECK(r.stats.coverage() == 1.0);

    const auto half = cli::audit_intervals(
        table_from("y_true,lower,upper,mask\n0,-1,1,00\n5,-1,1,00\n0,-1,inf,10\n5,-1,1,10\n"));
    REQUIRE(half.size() == 3);
    for (const auto& r : half) CHECK(r.stats.coverage() == 0.5);
    CHECK(half[0].stats.n_infinite == 1);
    CHECK(half[0].stats.mean_length() == doctest::Approx(2.0));

    const auto grouped =
        cli::audit_intervals(table_from("y_true,lower,upper,grp\n0,-1,1,a\n5,-1,1,b\n0,-1,1,b\n"), "grp");
    REQUIRE(grouped.size() == 2);
    CHECK(grouped[0].group == "a");
    CHECK(grouped[1].stats.coverage() == 0.5);
}

TEST_CASE("audit rejects malformed rows with their line numbers") {
    try {
        cli::audit_intervals(table_from("y_true,lower,upper,mask\n0,-1,1,00\n0,x,1,00\n0,-1\n0,2,1,00\n"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("3, 4, 5") != std::string::npos);
    }
}

TEST_CASE("audit agrees with an independent recount on a 1000-row fixture") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    std::ostringstream csv;
    csv << "method,y_true,lower,upper,mask\n";
    std::map<std::string, std::pair<int, int>> counts;
    std::map<std::string, double> lengths;
    for (int i = 0; i < 1000; ++i) {
        const std::string method = i % 2 ? "cp" : "lcp";
        const double y = n01(rng);
        const double c = 0.3 * n01(rng);
        const double h = 1.0 + 0.5 * std::abs(n01(rng));
        const std::string mask = std::to_string(rng() % 2) + std::to_string(rng() % 2);
        csv << method << ',' << format_full(y) << ',' << format_full(c - h) << ',' << format_full(c + h) << ','
            << mask << '\n';
        const bool cov = c - h <= y && y <= c + h;
        for (const std::string& g : {std::string("mar"), "[" + mask + "]"}) {
            auto& cnt = counts[method + "/" + g];
            ++cnt.first;
            cnt.second += cov;
            lengths[method + "/" + g] += (c + h) - (c - h);
        }
    }
    const auto rows = cli::audit_intervals(table_from(csv.str()));
    CHECK(rows.size() == counts.size());
    for (const auto& r : rows) {
        const auto key = r.method + "/" + r.group;
        CHECK(r.stats.n_points == std::size_t(counts.at(key).first));
        CHECK(r.stats.n_covered == std::size_t(counts.at(key).second));
        CHECK(r.stats.finite_length_sum == doctest::Approx(lengths.at(key)).epsilon(1e-12));
    }
}

TEST_CASE("predict reproduces a hand-traced nonexchangeable interval") {
    const auto dir = scratch_dir("predict");
    // Rows 1-3 fit y = x exactly; rows 4-5 calibrate.
    write_text(dir / "train.csv", "x,y\n0,0\n1,1\n2,2\nNA,3\n4,4.5\n");
    write_text(dir / "query.csv", "x\nNA\n3\n");
    cli::PredictOptions opt;
    opt.train = dir / "train.csv";
    opt.query = dir / "query.csv";
    opt.method = Method::NexCP;
    opt.alpha = 0.5;
    const auto rows = cli::predict(opt);
    REQUIRE(rows.size() == 2);
    // Missing x imputes to the fit mean 1. Both calibration rows are available,
    // scores 2 (same mask, weight 1) and 3.5 (weight 0.99), test weight 1:
    // cumulative 1/2.99 < 0.5 at 2, 1.99/2.99 >= 0.5 at 3.5.
    CHECK(rows[0].mask.str() == "1");
    CHECK(rows[0].interval.center == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rows[0].interval.lower() == doctest::Approx(-2.5).epsilon(1e-12));
    CHECK(rows[0].interval.upper() == doctest::Approx(4.5).epsilon(1e-12));
    // Observed x = 3: only row 5 is available, score 0.5 with weight 1 of 2.
    CHECK(rows[1].interval.lower() == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(rows[1].interval.upper() == doctest::Approx(3.5).epsilon(1e-12));

    opt.alpha = 0.7;
    CHECK(cli::predict(opt)[0].interval.upper() == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("predict degenerate and error paths") {
    const auto dir = scratch_dir("predict_err");
    write_text(dir / "train.csv", "a,b,y\n1,2,3\n2,1,3\n3,3,6\n4,NA,4\n5,1,6\n2,2,4\n");
    write_text(dir / "query.csv", "a,b\n1,1\nNA,NA\n");
    cli::PredictOptions opt;
    opt.train = dir / "train.csv";
    opt.query = dir / "query.csv";
    opt.method = Method::NexCP;
    const auto rows = cli::predict(opt);
    // No calibration row has both entries missing or finer: [11] is reachable by
    // every row, so it is finite only when enough cases exist; alpha 0.1 with two
    // calibration rows is infinite either way.
    CHECK(rows[1].interval.infinite());

    write_text(dir / "q_only_missing.csv", "a,b\nNA,2\n");
    write_text(dir / "t_no_missing_a.csv", "a,b,y\n1,2,3\n2,1,3\n3,3,6\n4,2,4\n5,1,6\n2,2,4\n");
    opt.train = dir / "t_no_missing_a.csv";
    opt.query = dir / "q_only_missing.csv";
    opt.alpha = 0.5;
    const auto r2 = cli::predict(opt);
    CHECK_FALSE(r2[0].interval.infinite());

    write_text(dir / "bad_schema.csv", "a,c\n1,2\n");
    opt.query = dir / "bad_schema.csv";
    CHECK_THROWS_AS(cli::predict(opt), DataError);

    write_text(dir / "all_na.csv", "a,b,y\n1,NA,3\n2,NA,3\n3,NA,6\n4,NA,4\n");
    write_text(dir / "q2.csv", "a,b\n1,NA\n");
    opt.train = dir / "all_na.csv";
    opt.query = dir / "q2.csv";
    std::vector<std::string> warnings;
    cli::predict(opt, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("'b'") != std::string::npos);
}

TEST_CASE("cp prediction is centred at the pipeline prediction") {
    const auto dir = scratch_dir("predict_cp");
    std::ostringstream train;
    train << "x,y\n";
    for (int i = 0; i < 30; ++i) train << i << ',' << 2 * i + 1 << '\n';
    write_text(dir / "train.csv", train.str());
    write_text(dir / "query.csv", "x,y\n10,19\n");
    cli::PredictOptions opt;
    opt.train = dir / "train.csv";
    opt.query = dir / "query.csv";
    const auto rows = cli::predict(opt);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].y_true.has_value());
    CHECK(*rows[0].y_true == 19.0);
    CHECK(rows[0].interval.center == doctest::Approx(21.0).epsilon(1e-9));
    CHECK(rows[0].interval.half_width == doctest::Approx(0.0).epsilon(1e-9));
    std::ostringstream out;
    cli::write_predictions_csv(out, rows);
    CHECK(out.str().rfind("row,mask,center,lower,upper,flag,y_true\n", 0) == 0);
}

TEST_CASE("exit codes") {
    const auto dir = scratch_dir("exit");
    CHECK(run_cli({}) == cli::kExitUser);
    CHECK(run_cli({"frobnicate"}) == cli::kExitUser);
    CHECK(run_cli({"synth-bench"}) == cli::kExitUser);
    CHECK(run_cli({"synth-bench", "--config", (dir / "missing.toml").string()}) == cli::kExitUser);
    write_text(dir / "bad.toml", "[experiment]\nreps = -1\n");
    CHECK(run_cli({"synth-bench", "--config", (dir / "bad.toml").string()}) == cli::kExitUser);
    write_text(dir / "unknown.toml", "[experiment]\nwhat = 1\n");
    CHECK(run_cli({"synth-bench", "--config", (dir / "unknown.toml").string()}) == cli::kExitUser);
    write_text(dir / "bad.csv", "y_true,lower,upper\n1,2\n");
    std::string err;
    CHECK(run_cli({"audit", "--intervals", (dir / "bad.csv").string()}, nullptr, &err) == cli::kExitUser);
    CHECK(err.find("2") != std::string::npos);
    CHECK(run_cli({"predict", "--train", "nope.csv", "--query", "nope.csv", "--method", "lcp"}) == cli::kExitUser);
    CHECK(run_cli({"predict", "--train", "a", "--query", "b", "--method", "magic"}) == cli::kExitUser);
    CHECK(run_cli({"--help"}) == cli::kExitOk);
}

TEST_CASE("synth-bench writes deterministic reports") {
    const auto a = scratch_dir("bench_a");
    const auto b = scratch_dir("bench_b");
    const std::string cfg = std::string(CPMISS_SOURCE_DIR) + "/configs/minimal.toml";
    REQUIRE(run_cli({"synth-bench", "--config", cfg, "--out", a.string(), "--dump-points"}) == cli::kExitOk);
    REQUIRE(run_cli({"synth-bench", "--config", cfg, "--out", b.string(), "--workers", "2"}) == cli::kExitOk);
    CHECK(fs::exists(a / "report.json"));
    CHECK(fs::exists(a / "points.csv"));
    CHECK(read_text(a / "report.csv") == read_text(b / "report.csv"));
    const auto csv = read_text(a / "report.csv");
    CHECK(csv.rfind("method,group,coverage,mean_length,n_points,n_infinite\n", 0) == 0);
    CHECK(csv.find("cp,mar,") != std::string::npos);
    CHECK(csv.find("nexcp,[110],") != std::string::npos);

    // Audit of the point dump reproduces the marginal coverage in the report.
    std::string audit_out;
    REQUIRE(run_cli({"audit", "--intervals", (a / "points.csv").string(), "--group-column", "group"}, &audit_out) ==
            cli::kExitOk);
    const auto report_rows = table_from(csv);
    const auto audit_rows = table_from(audit_out);
    CHECK(report_rows.rows.size() == audit_rows.rows.size());
    for (std::size_t i = 0; i < report_rows.rows.size(); ++i) CHECK(report_rows.rows[i] == audit_rows.rows[i]);
}

TEST_CASE("unreachable groups are reported, not fatal") {
    const auto dir = scratch_dir("unreach");
    write_text(dir / "c.toml",
               "[experiment]\nreps = 1\nmethods = [\"cp\"]\ninclude_all_missing_group = true\n"
               "group_attempt_budget = 2000\n[sizes]\ntrain = 60\ncalib = 30\ntest_marginal = 50\n"
               "test_per_group = 40\n[dgp]\nd = 3\n[ampute]\nmechanism = \"mcar\"\nrate = 0.05\n");
    std::string err;
    CHECK(run_cli({"synth-bench", "--config", (dir / "c.toml").string(), "--out", dir.string()}, nullptr, &err) ==
          cli::kExitOk);
    const auto json = read_text(dir / "report.json");
    CHECK(json.find("[111] dropped") != std::string::npos);
    CHECK(read_text(dir / "report.csv").find("[111]") == std::string::npos);
}

}
