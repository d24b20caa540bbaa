#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <geobound/geobound.hpp>

using namespace geobound;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("geobound_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

/// Small, fast training settings shared by the harness tests.
Config tiny(const std::string& kind) {
    return Config::parse("[experiment]\nkind = " + kind +
                         "\n[geometry]\nd = 3\nkappa = 0\ndomain_radius = 1.0\nD = 5\n"
                         "[sampling]\nn = 64\nseeds = 1\ntest_factor = 2\n"
                         "[net]\nhidden_width = 8\nepochs = 3\nbatch = 8\nB = 1\n");
}

std::string golden(const std::string& kind) {
    std::ifstream in(fs::path(GEOBOUND_TEST_DATA) / "golden" / (kind + ".columns"));
    std::string line;
    std::getline(in, line);
    return line;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

}  // namespace

TEST(Config, ParsesSectionsAndOverrides) {
    auto c = Config::parse("# comment\n[geometry]\nd = 3\nkappa = -1, 0, 1\n; other\n[net]\nloss = hinge\n");
    EXPECT_EQ(c.get_int("geometry.d", 0), 3);
    EXPECT_EQ(c.get_doubles("geometry.kappa", {}), (std::vector<double>{-1, 0, 1}));
    c.apply_override("geometry.d=5");
    EXPECT_EQ(c.get_int("geometry.d", 0), 5);
    EXPECT_EQ(c.echo(), "[geometry]\nd = 5\nkappa = -1, 0, 1\n[net]\nloss = hinge\n");
}

TEST(Config, Errors) {
    EXPECT_THROW(Config::parse("[geometry\nd = 3\n"), ConfigError);
    EXPECT_THROW(Config::parse("[g]\njust text\n"), ConfigError);
    const auto c = Config::parse("[g]\nd = three\n");
    EXPECT_THROW(c.get_int("g.d", 0), ConfigError);
    Config o;
    EXPECT_THROW(o.apply_override("nothing"), ConfigError);
    EXPECT_THROW(Config::load("/nonexistent/config.ini"), ConfigError);
}

TEST(Config, ConstantsOverride) {
    Config c;
    apply_constants_overrides(c, "c_pack=2, big_o_scale=0.5");
    const auto k = parse_constants(c);
    EXPECT_EQ(k.c_pack, 2.0);
    EXPECT_EQ(k.big_o_scale, 0.5);
    EXPECT_EQ(k.c_dudley_b, 12.0);
    Config bad;
    apply_constants_overrides(bad, "c_pak=2");
    EXPECT_THROW(parse_constants(bad), ConfigError);
    Config neg;
    apply_constants_overrides(neg, "delta=1.5");
    EXPECT_THROW(parse_constants(neg), ConfigError);
}

TEST(ExperimentConfig, Validation) {
    auto c = tiny("synthetic_decay");
    EXPECT_NO_THROW(validate(parse_experiment(c)));
    c.set("sampling.n", "100, 50");
    EXPECT_THROW(validate(parse_experiment(c)), ConfigError);
    c.set("sampling.n", "100");
    c.set("sampling.seeds", "");
    EXPECT_THROW(validate(parse_experiment(c)), ConfigError);
    EXPECT_THROW(parse_experiment(c, std::string("nonsense")), ConfigError);

    auto a = tiny("curvature_ablation");
    EXPECT_THROW(validate(parse_experiment(a)), ConfigError);  // single kappa
    a.set("geometry.kappa", "-1, 0");
    EXPECT_NO_THROW(validate(parse_experiment(a)));

    auto e = tiny("embedding_geometry");
    e.set("inputs.files", "/definitely/missing.csv");
    EXPECT_THROW(validate(parse_experiment(e)), ConfigError);
}

TEST(Io, SampleRoundTrip) {
    const auto dir = scratch("sample");
    const auto g = SpaceFormGeometry::ball(2, -1.0, 1.0);
    auto s = make_task(embed_ambient(sample_uniform_ball(g, 30, 4), 6, 5), Task::regression, 6);
    write_sample(dir / "s.csv", s);
    const auto back = read_sample(dir / "s.csv");
    EXPECT_TRUE(back.ambient == s.ambient);
    EXPECT_TRUE(back.intrinsic == s.intrinsic);
    EXPECT_TRUE(back.labels == s.labels);
    EXPECT_EQ(back.geometry.vol, g.vol);
    const auto side = json::parse(read_text(dir / "s.json"));
    for (const char* key : {"d", "kappa", "inj", "vol", "domain_radius", "seed"}) EXPECT_TRUE(side.contains(key));
    EXPECT_EQ(read_text(dir / "s.csv").substr(0, 24), "x0,x1,x2,x3,x4,x5,label\n");
}

TEST(Io, PointCsvWithoutHeader) {
    const auto dir = scratch("points");
    write_text(dir / "p.csv", "# generated\n1,2\n3,4.5\n");
    const auto pc = read_points_csv(dir / "p.csv");
    EXPECT_EQ(pc.X.rows(), 2);
    EXPECT_EQ(pc.X(1, 1), 4.5);
    EXPECT_EQ(pc.labels.size(), 0);
}

TEST(Io, ReportCsvColumnOrder) {
    const auto g = SpaceFormGeometry::ball(3, -1.0, 1.0);
    const auto r = evaluate_bounds(g, FunctionClassSpec{}, 1e4, 100, BoundConstants{});
    const auto csv = report_to_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), golden("bound_report"));
    const auto j = report_to_json(r);
    EXPECT_EQ(j.at("gen_bound").get<double>(), r.gen_bound);
}

TEST(Io, NetCheckpointRoundTrip) {
    TrainConfig c;
    c.hidden_width = 6;
    c.epochs = 2;
    c.batch = 4;
    Points X = Points::Random(20, 3);
    Eigen::VectorXd y = Eigen::VectorXd::Random(20);
    const auto net = train(X, y, c).net;
    const auto back = net_from_json(json::parse(net_to_json(net).dump()));
    EXPECT_TRUE(back.W1 == net.W1);
    EXPECT_TRUE(back.b1 == net.b1);
    EXPECT_TRUE(back.W2 == net.W2);
    EXPECT_EQ(back.b2, net.b2);
    EXPECT_EQ(back.target_norm, net.target_norm);
}

TEST(Harness, SingleCellDecay) {
    const auto e = parse_experiment(tiny("synthetic_decay"));
    const auto t = run_synthetic_decay(e);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0].back(), "ok");
    EXPECT_EQ(t.rows[0][t.column_index("seed")], "1");
}

TEST(Harness, SchemasMatchGoldenFiles) {
    auto d = tiny("synthetic_decay");
    EXPECT_EQ(join(run_synthetic_decay(parse_experiment(d)).columns), golden("synthetic_decay"));
    auto a = tiny("curvature_ablation");
    a.set("geometry.kappa", "-1, 0");
    EXPECT_EQ(join(run_curvature_ablation(parse_experiment(a)).columns), golden("curvature_ablation"));
    auto e = tiny("embedding_geometry");
    EXPECT_EQ(join(run_embedding_geometry(parse_experiment(e)).columns), golden("embedding_geometry"));
    auto b = tiny("bound_eval");
    b.set("sampling.n", "1000");
    EXPECT_EQ(join(run_bound_eval(parse_experiment(b)).columns), golden("bound_eval"));
}

TEST(Harness, PoisonedCellIsIsolated) {
    auto c = tiny("synthetic_decay");
    c.set("sampling.n", "2, 64");
    c.set("geometry.domain_radius", "0.5");
    c.set("net.batch", "2");
    const auto t = run_synthetic_decay(parse_experiment(c));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][t.column_index("n")], "2");
    EXPECT_EQ(t.rows[0].back().rfind("error:", 0), 0u);
    EXPECT_NE(t.rows[0].back().find("n is too small"), std::string::npos);
    EXPECT_EQ(t.rows[1].back(), "ok");
    EXPECT_EQ(t.failed_rows(), 1u);

    // Same healthy cell run alone gives the same row.
    c.set("sampling.n", "64");
    const auto alone = run_synthetic_decay(parse_experiment(c));
    EXPECT_EQ(alone.rows[0], t.rows[1]);
}

TEST(Harness, RowsSortedByKappaNSeed) {
    auto c = tiny("synthetic_decay");
    c.set("geometry.kappa", "1, -1, 0");
    c.set("sampling.n", "40, 64");
    c.set("sampling.seeds", "2, 1");
    const auto t = run_synthetic_decay(parse_experiment(c));
    ASSERT_EQ(t.rows.size(), 12u);
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        auto key = [&](std::size_t r) {
            return std::make_tuple(std::stod(t.rows[r][1]), std::stoll(t.rows[r][4]), std::stoll(t.rows[r][5]));
        };
        EXPECT_LT(key(i - 1), key(i));
    }
}

TEST(Harness, DeterministicCsv) {
    auto c = tiny("synthetic_decay");
    c.set("geometry.kappa", "-1, 0");
    c.set("sampling.seeds", "1, 2");
    const auto e = parse_experiment(c);
    auto a = run_synthetic_decay(e), b = run_synthetic_decay(e);
    a.config_echo = b.config_echo = c.echo();
    EXPECT_EQ(a.to_csv(), b.to_csv());
    auto single = e;
    single.threads = 1;
    auto s = run_synthetic_decay(single);
    s.config_echo = c.echo();
    EXPECT_EQ(s.to_csv(), a.to_csv());
}

TEST(Harness, AblationPsiColumnPassesThrough) {
    auto c = tiny("curvature_ablation");
    c.set("geometry.kappa", "-2, -1, 0, 1");
    c.set("net.target_norm", "1.5");
    const auto t = run_curvature_ablation(parse_experiment(c));
    for (const auto& r : t.rows) EXPECT_EQ(std::stod(r[t.column_index("psi")]), psi(std::stod(r[0]), 2.25));
}

TEST(Harness, AblationSummary) {
    ExperimentConfig e;
    e.seeds = {1, 2, 3};
    e.bootstrap = 50;
    ResultsTable t;
    t.columns = {"kappa", "seed", "gap", "status"};
    for (double k : {-2.0, -1.0, 0.0})
        for (int s = 1; s <= 3; ++s)
            t.rows.push_back({format_double(k), std::to_string(s), format_double(-k + 0.01 * s), "ok"});
    const auto s = summarize_ablation(e, t);
    EXPECT_EQ(s.bootstrap_ordered, 50);
    EXPECT_DOUBLE_EQ(s.spearman_negative, 1.0);
    EXPECT_EQ(s.median_gap.size(), 3u);
}

TEST(Harness, EmptyEmbeddingListGivesHeaderOnly) {
    const auto t = run_embedding_geometry(parse_experiment(tiny("embedding_geometry")));
    EXPECT_TRUE(t.rows.empty());
    EXPECT_EQ(t.failed_rows(), 0u);
    const auto csv = t.to_csv();
    EXPECT_EQ(csv.substr(csv.rfind("dataset")), golden("embedding_geometry") + "\n");
}

TEST(Harness, EmbeddingFileErrorIsRecorded) {
    const auto dir = scratch("embed");
    write_text(dir / "bad.csv", "x0,x1\n1,2\n3,4\n");
    auto c = tiny("embedding_geometry");
    c.set("inputs.files", (dir / "bad.csv").string());
    const auto t = run_embedding_geometry(parse_experiment(c));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][0], "bad");
    EXPECT_EQ(t.rows[0].back().rfind("error:", 0), 0u);
}

TEST(BoundEval, FlatRowHasNoCurvatureTerm) {
    auto c = tiny("bound_eval");
    c.set("sampling.n", "1000");
    std::vector<BoundReport> reports;
    const auto t = run_bound_eval(parse_experiment(c), &reports);
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_EQ(reports[0].psi, 0.0);
    EXPECT_EQ(reports[0].log_cover_manifold,
              std::log(reports[0].geometry.vol / (unit_ball_volume(3) * std::pow(reports[0].eps / 2, 3))));
}

TEST(BoundEval, BaselineScalesWithDoublingN) {
    auto c = tiny("bound_eval");
    c.set("sampling.n", "1000, 2000, 4000");
    const auto t = run_bound_eval(parse_experiment(c));
    const auto col = t.column_index("euclidean_rademacher");
    for (std::size_t i = 1; i < t.rows.size(); ++i)
        EXPECT_NEAR(std::stod(t.rows[i][col]) / std::stod(t.rows[i - 1][col]), 1 / std::sqrt(2.0), 1e-15);
}

TEST(BoundEval, MatchesDirectLibraryCalls) {
    auto c = tiny("bound_eval");
    c.set("geometry.kappa", "-1");
    c.set("geometry.domain_radius", "2");
    c.set("sampling.n", "10000");
    const auto t = run_bound_eval(parse_experiment(c));
    const auto g = SpaceFormGeometry::ball(3, -1.0, 2.0);
    const auto direct = evaluate_bounds(g, FunctionClassSpec{}, 1e4, 5, BoundConstants{});
    EXPECT_EQ(t.rows[0][t.column_index("rademacher")], format_double(direct.rademacher));
    EXPECT_EQ(t.rows[0][t.column_index("gen_bound")], format_double(direct.gen_bound));
    EXPECT_EQ(t.rows[0][t.column_index("improvement_pct")], format_double(direct.improvement_pct));
}

TEST(PlotData, OneFilePerGroupPlusManifest) {
    ResultsTable t;
    t.columns = {"kappa", "n", "gap", "status"};
    for (const char* k : {"-1", "0", "1"})
        for (const char* n : {"1000", "100"}) t.rows.push_back({k, n, std::string("0.") + n, "ok"});
    const auto dir = scratch("plot");
    const auto series = emit_plot_data(t, "n", "gap", "kappa", dir, "p");
    ASSERT_EQ(series.size(), 3u);
    EXPECT_TRUE(fs::exists(dir / "p_manifest.json"));
    EXPECT_EQ(read_text(series[0].file), "n,gap\n100,0.100\n1000,0.1000\n");
    const auto manifest = json::parse(read_text(dir / "p_manifest.json"));
    EXPECT_EQ(manifest.at("series").size(), 3u);
    EXPECT_EQ(manifest.at("x"), "n");
}

TEST(PlotData, SingleRowAndRoundTrip) {
    ResultsTable t;
    t.kind = "x";
    t.columns = {"kappa", "n", "gap", "status"};
    t.rows.push_back({"0", "64", "0.125", "ok"});
    const auto dir = scratch("plot1");
    write_text(dir / "t.csv", t.to_csv());
    const auto back = read_results_csv(dir / "t.csv");
    EXPECT_EQ(back.columns, t.columns);
    EXPECT_EQ(back.rows, t.rows);
    const auto s = emit_plot_data(back, "n", "gap", "", dir, "q");
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].points, 1u);
    const auto series = read_results_csv(s[0].file);
    EXPECT_EQ(series.rows[0], (std::vector<std::string>{"64", "0.125"}));
}

TEST(PlotData, UnknownColumn) {
    ResultsTable t;
    t.columns = {"a", "b"};
    EXPECT_THROW(emit_plot_data(t, "a", "zzz", "", scratch("plot2")), UnknownColumnError);
}

TEST(Stats, SpearmanAndSlope) {
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 25, 100}), 1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {3, 2, 1}), -1.0);
    EXPECT_NEAR(ols_slope({0, 1, 2}, {1, -1, -3}), -2.0, 1e-15);
    EXPECT_EQ(median({3, 1, 2}), 2.0);
}

TEST(Cli, ExitCodes) {
    const std::string cli = GEOBOUND_CLI;
    const auto dir = scratch("cli");
    auto run = [&](const std::string& args) {
        const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
        return WEXITSTATUS(status);
    };
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("experiment nonsense"), 2);
    write_text(dir / "bad.ini", "[sampling]\nn = 100, 10\n");
    EXPECT_EQ(run("experiment bound_eval --config " + (dir / "bad.ini").string() + " --run-dir " +
                  (dir / "r0").string()),
              2);
    write_text(dir / "mixed.ini", "[geometry]\nd = 3\nkappa = 0\ndomain_radius = 0.5\n[sampling]\nn = 2, 1000\n");
    EXPECT_EQ(run("experiment bound_eval --config " + (dir / "mixed.ini").string() + " --run-dir " +
                  (dir / "r1").string()),
              3);
    write_text(dir / "dead.ini", "[geometry]\nd = 3\nkappa = 0\ndomain_radius = 0.5\n[sampling]\nn = 2\n");
    EXPECT_EQ(run("experiment bound_eval --config " + (dir / "dead.ini").string() + " --run-dir " +
                  (dir / "r2").string()),
              4);
    EXPECT_EQ(run("bound --d 3 --kappa -1 --n 10000 --constants c_pack=2"), 0);
    EXPECT_TRUE(fs::exists(dir / "r1" / "manifest.json"));
    const auto m = json::parse(read_text(dir / "r1" / "manifest.json"));
    EXPECT_EQ(m.at("failed_rows"), 1);
    EXPECT_EQ(m.at("exit_code"), 3);
}
