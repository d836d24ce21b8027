#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "esd/cli.hpp"
#include "esd/config.hpp"
#include "esd/csv.hpp"
#include "generators.hpp"

#ifndef ESD_FIXTURE_DIR
#error "ESD_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace esd {
namespace {

namespace fs = std::filesystem;

const fs::path kDefaultParams = fs::path(ESD_FIXTURE_DIR) / "default_params.json";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("esd-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                             "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "esdsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string metadata_value(const ParsedCsv& csv, const std::string& key) {
    for (const auto& m : csv.metadata) {
        if (m.rfind(key + "=", 0) == 0) return m.substr(key.size() + 1);
    }
    return {};
}

TEST(Config, EmptyModelBlockGivesDefaults) {
    const RunConfig cfg = parse_config(R"({"model": {}})");
    EXPECT_EQ(cfg.model, ModelParams{});
    EXPECT_EQ(cfg.model.a1, 0.8);
    EXPECT_EQ(cfg.model.W, 10.0);
    EXPECT_EQ(cfg.model.d2, 0.5);
    EXPECT_EQ(cfg.noise.sigma, Vector4d(0.10, 0.10, 0.08, 0.12));
    EXPECT_EQ(cfg.sim.x0, State(2.0, 1.0, 0.5, 0.5));
    EXPECT_EQ(cfg.convergence.dt_list, (std::vector<double>{0.02, 0.01, 0.005}));
}

TEST(Config, FixtureMatchesDefaults) {
    const RunConfig cfg = load_config(kDefaultParams);
    EXPECT_EQ(cfg.model, ModelParams{});
    EXPECT_EQ(cfg.noise.sigma, NoiseIntensities{}.sigma);
    EXPECT_EQ(config_hash(cfg), config_hash(RunConfig{}));
}

TEST(Config, SupplyCapViolationNamesConstraint) {
    try {
        parse_config(R"({"model": {"N": 12}})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("N < W required"), std::string::npos);
    }
}

TEST(Config, UnknownKeyIsNamed) {
    try {
        parse_config(R"({"model": {"a1": 0.8, "gamma": 1}})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("model.gamma"), std::string::npos);
    }
    EXPECT_THROW(parse_config(R"({"plots": true})"), ConfigError);
}

TEST(Config, ParseErrorReportsLine) {
    try {
        parse_config("{\n  \"model\": {\n    \"a1\": ,\n  }\n}");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Config, TypeAndRangeErrors) {
    EXPECT_THROW(parse_config(R"({"sim": {"dt": "small"}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"sim": {"scheme": "rk4"}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"noise": {"sigma": [0.1, 0.1, 0.1]}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"noise": {"sigma": [0.1, -0.1, 0.1, 0.1]}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"convergence": {"dt_list": [0.01, 0.02]}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"sim": {"t_end": 1.0, "dt": 0.3}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"moments": {"p": 1}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"ensemble": {"n_paths": -3}})"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, CanonicalJsonRoundTrips) {
    testing::Gen gen(51);
    for (int i = 0; i < 50; ++i) {
        RunConfig cfg;
        cfg.model = gen.params();
        cfg.noise = gen.noise();
        cfg.sim.seed = static_cast<std::uint64_t>(gen.uniform(0, 1e15));
        cfg.sim.scheme = i % 2 ? Scheme::Milstein : Scheme::EulerMaruyama;
        cfg.persistence.spec.eta = gen.uniform(0.1, 3.0);
        const std::string text = config_to_json(cfg);
        const RunConfig back = parse_config(text);
        EXPECT_EQ(back.model, cfg.model);
        EXPECT_EQ(back.noise.sigma, cfg.noise.sigma);
        EXPECT_EQ(config_to_json(back), text);
        EXPECT_EQ(config_hash(back), config_hash(cfg));
    }
}

TEST(Config, HashIgnoresThreadsOnly) {
    RunConfig a;
    RunConfig b = a;
    b.threads = 7;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.sim.seed = 43;
    EXPECT_NE(config_hash(a), config_hash(b));
    RunConfig c = a;
    c.model.a1 = 0.81;
    EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Csv, DoublesRoundTripExactly) {
    testing::Gen gen(52);
    for (int i = 0; i < 2000; ++i) {
        const double v = gen.uniform(-1, 1) * std::pow(10.0, gen.uniform(-300, 300));
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(std::nan("")), "nan");
    EXPECT_EQ(format_double(-INFINITY), "-inf");
}

TEST(Csv, WriteThenReadRoundTrips) {
    TempDir dir;
    testing::Gen gen(53);
    CsvArtifact a;
    a.path = dir.path() / "table.csv";
    a.metadata = {"seed=42", "config_hash=0123456789abcdef"};
    a.header = {"name", "x", "y"};
    std::vector<std::pair<double, double>> values;
    for (int i = 0; i < 100; ++i) {
        values.emplace_back(gen.uniform(-1e6, 1e6), gen.log_uniform(1e-200, 1e200));
        a.rows.push_back({"row" + std::to_string(i), format_double(values.back().first), format_double(values.back().second)});
    }
    write_csv(a);
    const ParsedCsv back = read_csv(a.path);
    EXPECT_EQ(back.metadata, a.metadata);
    EXPECT_EQ(back.header, a.header);
    ASSERT_EQ(back.rows.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        EXPECT_EQ(std::stod(back.rows[i][1]), values[i].first);
        EXPECT_EQ(std::stod(back.rows[i][2]), values[i].second);
    }
    for (const auto& entry : fs::directory_iterator(dir.path())) EXPECT_EQ(entry.path().filename(), "table.csv");
}

TEST(Csv, EmptyTrailingCellSurvives) {
    const ParsedCsv p = parse_csv("a,b,c\n1,2,\n");
    ASSERT_EQ(p.rows.size(), 1u);
    EXPECT_EQ(p.rows[0], (std::vector<std::string>{"1", "2", ""}));
}

TEST(Csv, RowWidthMismatchAndBadPathFail) {
    CsvArtifact a;
    a.path = "/nonexistent-dir/out.csv";
    a.header = {"a", "b"};
    a.rows = {{"1"}};
    EXPECT_THROW(render_csv(a), IoError);
    a.rows = {{"1", "2"}};
    EXPECT_THROW(write_csv(a), IoError);
}

TEST(Cli, EquilibriaDefaultParams) {
    TempDir dir;
    const CliRun r = run({"equilibria", "--config", kDefaultParams.string(), "--out", dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const ParsedCsv csv = read_csv(dir.path() / "equilibria.csv");
    EXPECT_EQ(csv.header, (std::vector<std::string>{"branch", "X1", "X2", "X3", "X4", "feasible", "residual", "reason"}));
    ASSERT_EQ(csv.rows.size(), 3u);
    EXPECT_EQ(csv.rows[0][0], "trivial");
    EXPECT_EQ(csv.rows[0][5], "true");
    for (int i : {1, 2}) {
        EXPECT_EQ(csv.rows[i][5], "false");
        EXPECT_FALSE(csv.rows[i][7].empty());
    }
    EXPECT_NE(csv.rows[1][7].find("no sign change"), std::string::npos);
    EXPECT_NE(csv.rows[2][7].find("negative discriminant"), std::string::npos);
    EXPECT_EQ(metadata_value(csv, "config_hash").size(), 16u);
    EXPECT_EQ(metadata_value(csv, "seed"), "42");
}

TEST(Cli, StabilityAtOrigin) {
    TempDir dir;
    const CliRun r = run({"stability", "--config", kDefaultParams.string(), "--at", "origin", "--out", dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const ParsedCsv csv = read_csv(dir.path() / "stability.csv");
    ASSERT_EQ(csv.rows.size(), 1u);
    const auto& row = csv.rows[0];
    auto col = [&](const std::string& name) {
        const auto it = std::find(csv.header.begin(), csv.header.end(), name);
        return row[static_cast<std::size_t>(it - csv.header.begin())];
    };
    EXPECT_EQ(col("spectral_verdict"), "unstable");
    EXPECT_EQ(col("lmi_feasible"), "false");
    EXPECT_NEAR(std::stod(col("eig1_re")), 0.15 + std::sqrt(0.3975), 1e-12);
    EXPECT_NEAR(std::stod(col("eig2_re")), -0.42, 1e-12);
    EXPECT_NEAR(std::stod(col("eig3_re")), 0.15 - std::sqrt(0.3975), 1e-12);
    EXPECT_NEAR(std::stod(col("eig4_re")), -0.6, 1e-12);
}

TEST(Cli, StabilityOnInfeasibleBranchIsUsageError) {
    TempDir dir;
    const CliRun r = run({"stability", "--at", "no-import", "--out", dir.path().string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("no feasible equilibrium"), std::string::npos);
}

TEST(Cli, SimulateIsByteIdenticalAndSized) {
    TempDir a, b;
    const std::vector<std::string> common = {"simulate", "--dt", "0.01", "--t-end", "50", "--seed", "7"};
    auto args_a = common, args_b = common;
    args_a.insert(args_a.end(), {"--out", a.path().string()});
    args_b.insert(args_b.end(), {"--out", b.path().string()});
    ASSERT_EQ(run(args_a).code, 0);
    ASSERT_EQ(run(args_b).code, 0);
    const std::string ta = slurp(a.path() / "trajectory.csv");
    EXPECT_EQ(ta, slurp(b.path() / "trajectory.csv"));
    const ParsedCsv csv = parse_csv(ta);
    EXPECT_EQ(csv.header, (std::vector<std::string>{"t", "X1", "X2", "X3", "X4", "clamps"}));
    EXPECT_EQ(csv.rows.size(), 5001u);
    EXPECT_EQ(metadata_value(csv, "seed"), "7");
    EXPECT_EQ(csv.rows.back()[0], "50");
}

TEST(Cli, SeedPrecedence) {
    TempDir dir;
    ::setenv(kSeedEnvVar, "99", 1);
    ASSERT_EQ(run({"simulate", "--t-end", "1", "--out", dir.path().string()}).code, 0);
    EXPECT_EQ(metadata_value(read_csv(dir.path() / "trajectory.csv"), "seed"), "99");
    ASSERT_EQ(run({"simulate", "--t-end", "1", "--seed", "5", "--out", dir.path().string()}).code, 0);
    EXPECT_EQ(metadata_value(read_csv(dir.path() / "trajectory.csv"), "seed"), "5");
    ::setenv(kSeedEnvVar, "not-a-number", 1);
    EXPECT_EQ(run({"simulate", "--t-end", "1", "--out", dir.path().string()}).code, 1);
    ::unsetenv(kSeedEnvVar);
    ASSERT_EQ(run({"simulate", "--t-end", "1", "--out", dir.path().string()}).code, 0);
    EXPECT_EQ(metadata_value(read_csv(dir.path() / "trajectory.csv"), "seed"), "42");
}

TEST(Cli, ExitCodes) {
    TempDir dir;
    const std::string out = dir.path().string();
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"simulate", "--bogus"}).code, 1);
    EXPECT_EQ(run({"simulate", "--scheme", "rk4", "--out", out}).code, 1);
    EXPECT_EQ(run({"simulate", "--dt", "0.3", "--t-end", "1", "--out", out}).code, 1);
    EXPECT_EQ(run({"simulate", "--config", "/nonexistent.json", "--out", out}).code, 1);
    EXPECT_EQ(run({"simulate", "--help"}).code, 0);

    const fs::path bad = dir.path() / "bad.json";
    std::ofstream(bad) << R"({"model": {"N": 12}})";
    const CliRun r = run({"equilibria", "--config", bad.string(), "--out", out});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("N < W required"), std::string::npos);

    const fs::path hot = dir.path() / "hot.json";
    std::ofstream(hot) << R"({"sim": {"x0": [1e9, 1e9, 1e9, 1e9]}})";
    const CliRun blow = run({"simulate", "--config", hot.string(), "--dt", "1", "--t-end", "10", "--positivity", "none",
                             "--out", out});
    EXPECT_EQ(blow.code, 2);
    EXPECT_NE(blow.err.find("blow-up"), std::string::npos);
}

TEST(Cli, EverySubcommandWritesItsSchema) {
    TempDir dir;
    const std::string out = dir.path().string();
    const std::vector<std::pair<std::vector<std::string>, std::string>> cases = {
        {{"ensemble", "--t-end", "2", "--paths", "8"}, "ensemble.csv"},
        {{"converge", "--t-end", "1", "--paths", "8"}, "convergence.csv"},
        {{"weak-error", "--t-end", "1", "--paths", "8", "--phi", "X3"}, "weak_error.csv"},
        {{"moments", "--t-end", "2", "--paths", "8", "--p", "3"}, "moments.csv"},
        {{"persistence", "--t-end", "2", "--paths", "8"}, "persistence.csv"},
        {{"sensitivity", "--t-end", "1", "--paths", "4", "--dt", "0.05"}, "sensitivity.csv"},
    };
    for (auto [args, file] : cases) {
        args.insert(args.end(), {"--out", out, "--threads", "2"});
        const CliRun r = run(args);
        ASSERT_EQ(r.code, 0) << args[0] << ": " << r.err;
        const ParsedCsv csv = read_csv(dir.path() / file);
        EXPECT_FALSE(csv.rows.empty()) << file;
        for (const auto& row : csv.rows) EXPECT_EQ(row.size(), csv.header.size()) << file;
        EXPECT_EQ(metadata_value(csv, "command"), args[0]);
    }
    const ParsedCsv conv = read_csv(dir.path() / "convergence.csv");
    EXPECT_EQ(conv.rows.size(), 6u);
    EXPECT_EQ(read_csv(dir.path() / "ensemble.csv").header.size(), 17u);
    EXPECT_EQ(read_csv(dir.path() / "sensitivity.csv").rows.size(), 39u);
    EXPECT_EQ(read_csv(dir.path() / "weak_error.csv").rows[0][1], "X3");
}

}  // namespace
}  // namespace esd
