// geobound command-line driver.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <geobound/geobound.hpp>

namespace fs = std::filesystem;
using namespace geobound;

namespace {

enum Exit { ok = 0, config_error = 2, partial = 3, failure = 4 };

struct Common {
    std::vector<std::string> sets;
    std::string constants;

    Config config(const std::string& path = {}) const {
        Config c = path.empty() ? Config{} : Config::load(path);
        for (const auto& s : sets) c.apply_override(s);
        if (!constants.empty()) apply_constants_overrides(c, constants);
        return c;
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--set", c.sets, "Override a config key (section.key=value); repeatable");
    app->add_option("--constants", c.constants, "Bound constants, e.g. c_pack=2,big_o_scale=0.5");
}

Task parse_task(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "classification") return Task::classification;
    throw ConfigError("task must be regression or classification");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curvature-aware covering, Rademacher and generalization bounds on space forms"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // sample
    auto* sample = app.add_subcommand("sample", "Sample a geodesic ball, embed it and label it");
    int s_d = 2, s_D = 0;
    double s_kappa = 0.0, s_radius = 1.0, s_noise = 0.1, s_flip = 0.05;
    long long s_n = 1000;
    Seed s_seed = 0;
    std::string s_task, s_out;
    sample->add_option("--d", s_d, "Intrinsic dimension")->capture_default_str();
    sample->add_option("--kappa", s_kappa, "Curvature")->capture_default_str();
    sample->add_option("--radius", s_radius, "Geodesic radius of the working ball")->capture_default_str();
    sample->add_option("--n", s_n, "Number of points")->capture_default_str();
    sample->add_option("--D", s_D, "Ambient dimension (0 keeps model coordinates)");
    sample->add_option("--seed", s_seed)->capture_default_str();
    sample->add_option("--task", s_task, "regression or classification (unlabeled when omitted)");
    sample->add_option("--noise", s_noise, "Regression noise sigma")->capture_default_str();
    sample->add_option("--flip", s_flip, "Classification flip probability")->capture_default_str();
    sample->add_option("--out", s_out, "Output CSV (a JSON sidecar is written next to it)")->required();

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Estimate intrinsic dimension and curvature of a point cloud");
    std::string e_in, e_out;
    EstimateOptions e_opt;
    estimate->add_option("--input", e_in, "Point-cloud CSV")->required()->check(CLI::ExistingFile);
    estimate->add_option("--k", e_opt.k, "Neighbors in the geodesic graph")->capture_default_str();
    estimate->add_option("--n-triangles", e_opt.n_triangles)->capture_default_str();
    estimate->add_option("--seed", e_opt.seed)->capture_default_str();
    estimate->add_option("--discard", e_opt.discard_fraction, "TwoNN discard fraction")->capture_default_str();
    estimate->add_option("--max-graph-points", e_opt.max_graph_points)->capture_default_str();
    estimate->add_option("--out", e_out, "Write the estimate JSON here instead of stdout");

    // bound
    auto* bound = app.add_subcommand("bound", "Evaluate all bounds for one configuration");
    Common b_common;
    add_common(bound, b_common);
    int b_d = 3, b_D = 100;
    double b_kappa = 0.0, b_radius = 1.0, b_n = 1000;
    std::optional<double> b_inj, b_vol, b_eps;
    FunctionClassSpec b_spec;
    std::string b_format = "json";
    bound->add_option("--d", b_d)->capture_default_str();
    bound->add_option("--kappa", b_kappa)->capture_default_str();
    bound->add_option("--radius", b_radius, "Geodesic radius of the working ball")->capture_default_str();
    bound->add_option("--inj", b_inj, "Injectivity radius override");
    bound->add_option("--vol", b_vol, "Volume override");
    bound->add_option("--L", b_spec.L)->capture_default_str();
    bound->add_option("--B", b_spec.B)->capture_default_str();
    bound->add_option("--L-loss", b_spec.L_loss)->capture_default_str();
    bound->add_option("--n", b_n)->capture_default_str();
    bound->add_option("--D", b_D, "Ambient dimension for the baseline")->capture_default_str();
    bound->add_option("--eps", b_eps, "Covering radius for the reported covering numbers (default n^(-1/d))");
    bound->add_option("--format", b_format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

    // train
    auto* trainc = app.add_subcommand("train", "Train a spectrally normalized net on a labeled sample");
    std::string t_train, t_test, t_out, t_loss = "squared";
    TrainConfig t_cfg;
    Common t_common;
    add_common(trainc, t_common);
    trainc->add_option("--train", t_train, "Labeled training CSV")->required()->check(CLI::ExistingFile);
    trainc->add_option("--test", t_test, "Labeled test CSV; reports the gap and bounds")->check(CLI::ExistingFile);
    trainc->add_option("--width", t_cfg.hidden_width)->capture_default_str();
    trainc->add_option("--epochs", t_cfg.epochs)->capture_default_str();
    trainc->add_option("--batch", t_cfg.batch)->capture_default_str();
    trainc->add_option("--lr", t_cfg.step_size)->capture_default_str();
    trainc->add_option("--target-norm", t_cfg.target_norm)->capture_default_str();
    trainc->add_option("--B", t_cfg.B)->capture_default_str();
    trainc->add_option("--loss", t_loss)->check(CLI::IsMember({"squared", "hinge"}))->capture_default_str();
    trainc->add_option("--seed", t_cfg.seed)->capture_default_str();
    trainc->add_option("--out", t_out, "Checkpoint JSON")->required();

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run an experiment from a config file");
    std::string x_kind, x_config, x_out = "runs", x_run_dir;
    unsigned x_threads = 0;
    Common x_common;
    add_common(exp, x_common);
    exp->add_option("kind", x_kind, "synthetic_decay, embedding_geometry, curvature_ablation or bound_eval")
        ->required()
        ->check(CLI::IsMember(experiment_kinds()));
    exp->add_option("--config", x_config, "INI config file")->check(CLI::ExistingFile);
    exp->add_option("--out-dir", x_out, "Parent of the timestamped run directory")->capture_default_str();
    exp->add_option("--run-dir", x_run_dir, "Write into exactly this directory");
    exp->add_option("--threads", x_threads, "Worker threads (0 = GEOBOUND_THREADS or all cores)");

    // plotdata
    auto* plot = app.add_subcommand("plotdata", "Split a results CSV into per-group plot series");
    std::string p_table, p_x, p_y, p_group, p_out = ".", p_prefix = "plot";
    plot->add_option("--table", p_table, "Results CSV")->required()->check(CLI::ExistingFile);
    plot->add_option("--x", p_x)->required();
    plot->add_option("--y", p_y)->required();
    plot->add_option("--group", p_group, "Column to split series on");
    plot->add_option("--out-dir", p_out)->capture_default_str();
    plot->add_option("--prefix", p_prefix)->capture_default_str();

    // fixtures
    auto* fix = app.add_subcommand("fixtures", "Write the bundled point-cloud fixtures as CSV");
    std::string f_out = "fixtures";
    fix->add_option("--out-dir", f_out)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*sample) {
            const auto g = SpaceFormGeometry::ball(s_d, s_kappa, s_radius);
            auto smp = sample_uniform_ball(g, s_n, s_seed);
            if (s_D > 0) smp = embed_ambient(std::move(smp), s_D, mix_seed(s_seed, 2));
            if (!s_task.empty()) {
                TaskOptions to;
                to.noise_sigma = s_noise;
                to.flip_probability = s_flip;
                smp = make_task(std::move(smp), parse_task(s_task), mix_seed(s_seed, 3), to);
            }
            write_sample(s_out, smp);
            return ok;
        }
        if (*estimate) {
            const auto cloud = read_points_csv(e_in);
            const auto est = estimate_geometry(cloud.X, e_opt);
            const auto text = estimate_to_json(est).dump(2) + "\n";
            if (e_out.empty())
                std::cout << text;
            else
                write_text(e_out, text);
            return ok;
        }
        if (*bound) {
            const auto constants = parse_constants(b_common.config());
            const auto g = SpaceFormGeometry::ball(b_d, b_kappa, b_radius, b_inj, b_vol);
            const auto report = evaluate_bounds(g, b_spec, b_n, b_D, constants, b_eps);
            std::cout << (b_format == "json" ? report_to_json(report).dump(2) + "\n" : report_to_csv(report));
            return ok;
        }
        if (*trainc) {
            const auto constants = parse_constants(t_common.config());
            t_cfg.loss = parse_loss(t_loss);
            const auto tr = read_points_csv(t_train);
            if (tr.labels.size() != tr.X.rows()) throw ConfigError(t_train + ": training file has no labels");
            const auto result = train(tr.X, tr.labels, t_cfg);
            write_text(t_out, net_to_json(result.net).dump(1) + "\n");
            if (!t_test.empty()) {
                const auto te = read_points_csv(t_test);
                if (te.labels.size() != te.X.rows()) throw ConfigError(t_test + ": test file has no labels");
                const auto side = sidecar_path(t_train);
                if (!fs::exists(side)) throw ConfigError("gap report needs the geometry sidecar " + side.string());
                const auto g = geometry_from_json(json::parse(read_text(side)));
                const auto rec = measure_gap(result.net, tr.X, tr.labels, te.X, te.labels, t_cfg.loss, g,
                                             class_spec_for(t_cfg), constants);
                std::cout << json{{"n_train", rec.n_train},
                                  {"n_test", rec.n_test},
                                  {"train_risk", rec.train_risk},
                                  {"test_risk", rec.test_risk},
                                  {"gap", rec.gap},
                                  {"bound_curvature", rec.bound_curvature},
                                  {"bound_euclidean", rec.bound_euclidean}}
                                 .dump(2)
                          << "\n";
            }
            return ok;
        }
        if (*exp) {
            Config cfg = x_common.config(x_config);
            cfg.set("experiment.kind", x_kind);
            if (x_threads > 0) cfg.set("experiment.threads", std::to_string(x_threads));
            auto e = parse_experiment(cfg);
            if (!x_config.empty()) e.base_dir = fs::path(x_config).parent_path();
            if (e.base_dir.empty()) e.base_dir = ".";
            validate(e);
            const fs::path dir = !x_run_dir.empty()
                                     ? fs::path(x_run_dir)
                                     : fs::path(x_out) / (x_kind + "_" + utc_timestamp("%Y%m%dT%H%M%SZ"));
            const auto outcome = run_experiment(cfg, e, dir);
            for (const auto& r : outcome.table.rows)
                if (r.back().rfind("error", 0) == 0) std::cerr << "cell failed: " << r.back() << "\n";
            std::cout << outcome.run_dir.string() << "\n";
            return outcome.exit_code;
        }
        if (*plot) {
            const auto table = read_results_csv(p_table);
            for (const auto& s : emit_plot_data(table, p_x, p_y, p_group, p_out, p_prefix))
                std::cout << s.file.string() << "\n";
            return ok;
        }
        if (*fix) {
            for (const auto& f : bundled_fixtures()) {
                std::string body;
                for (Eigen::Index j = 0; j < f.points.cols(); ++j) body += (j ? ",x" : "x") + std::to_string(j);
                body += "\n";
                for (Eigen::Index i = 0; i < f.points.rows(); ++i) {
                    for (Eigen::Index j = 0; j < f.points.cols(); ++j)
                        body += (j ? "," : "") + format_double(f.points(i, j));
                    body += "\n";
                }
                write_text(fs::path(f_out) / (f.name + ".csv"), body);
                std::cout << (fs::path(f_out) / (f.name + ".csv")).string() << "\n";
            }
            return ok;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
    return ok;
}
