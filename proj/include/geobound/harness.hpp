#pragma once

// Experiment orchestration: configuration, the experiment kinds, results
// tables, plot data and run manifests.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "config.hpp"
#include "error.hpp"
#include "estimate.hpp"
#include "fixtures.hpp"
#include "io.hpp"
#include "lipnet.hpp"
#include "parallel.hpp"
#include "spaceform.hpp"

namespace geobound {

inline constexpr const char* kVersion = "0.1.0";

/// splitmix64 step, used to derive independent per-cell seeds.
inline Seed mix_seed(Seed a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Results tables

struct ResultsTable {
    std::string kind;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> notes;  // extra metadata echoed as comments
    std::string config_echo;

    std::size_t column_index(const std::string& name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) throw UnknownColumnError("unknown column '" + name + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    std::size_t failed_rows() const {
        if (columns.empty() || columns.back() != "status") return 0;
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) {
            return r.back().rfind("error", 0) == 0;
        }));
    }

    /// Comment header (version, kind, notes, resolved config), column header, rows.
    std::string to_csv() const {
        std::string out = "# geobound " + std::string(kVersion) + "\n# kind = " + kind + "\n";
        for (const auto& [k, v] : notes) out += "# " + k + " = " + v + "\n";
        if (!config_echo.empty()) {
            out += "# config:\n";
            std::istringstream in(config_echo);
            std::string line;
            while (std::getline(in, line)) out += "#   " + line + "\n";
        }
        for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
        out += "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
            out += "\n";
        }
        return out;
    }
};

/// Parses a results CSV (comment lines skipped, first row is the header).
inline ResultsTable read_results_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    ResultsTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("# kind = ");
            if (pos == 0) t.kind = line.substr(9);
            continue;
        }
        auto cells = split_csv_line(line);
        if (t.columns.empty())
            t.columns = std::move(cells);
        else
            t.rows.push_back(std::move(cells));
    }
    if (t.columns.empty()) throw std::runtime_error(path.string() + ": no header row");
    return t;
}

inline std::string error_cell(const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return "error:" + msg;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Ordinary least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : std::nan("");
}

// ---------------------------------------------------------------------------
// Configuration

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"synthetic_decay", "embedding_geometry", "curvature_ablation",
                                                "bound_eval"};
    return kinds;
}

struct ExperimentConfig {
    std::string kind;
    std::filesystem::path base_dir = ".";  // relative input paths resolve against this

    int d = 3;
    std::vector<double> kappas{1.0, 0.0, -1.0};
    double domain_radius = 1.5;
    int D = 100;

    std::vector<long long> n_values{100, 316, 1000, 3162, 10000};
    std::vector<long long> seeds{1};
    int test_factor = 10;

    Task task = Task::regression;
    TaskOptions task_options;
    TrainConfig net;

    FunctionClassSpec spec;
    BoundConstants constants;
    bool calibrate_big_o_scale = false;

    EstimateOptions estimate;
    std::vector<std::string> inputs;

    std::vector<long long> grid_d{3};
    std::vector<double> grid_L{1.0};
    std::vector<double> grid_B{1.0};

    unsigned threads = 0;
    int bootstrap = 10;
    Seed bootstrap_seed = 2024;
};

/// BoundConstants from the [constants] section; unset keys keep their defaults.
inline BoundConstants parse_constants(const Config& c) {
    static const std::set<std::string> known{"c_pack", "c_dudley_a", "c_dudley_b", "big_o_scale", "delta",
                                             "calibrate_big_o_scale"};
    for (const auto& k : c.keys())
        if (k.rfind("constants.", 0) == 0 && !known.count(k.substr(10)))
            throw ConfigError("unknown constant '" + k.substr(10) + "'");
    BoundConstants b;
    b.c_pack = c.get_double("constants.c_pack", b.c_pack);
    b.c_dudley_a = c.get_double("constants.c_dudley_a", b.c_dudley_a);
    b.c_dudley_b = c.get_double("constants.c_dudley_b", b.c_dudley_b);
    b.big_o_scale = c.get_double("constants.big_o_scale", b.big_o_scale);
    b.delta = c.get_double("constants.delta", b.delta);
    try {
        b.validate();
    } catch (const DomainError& err) {
        throw ConfigError(err.what());
    }
    return b;
}

/// Applies a "--constants c_pack=2,big_o_scale=0.5" style list to the
/// [constants] section.
inline void apply_constants_overrides(Config& c, const std::string& list) {
    std::istringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        c.apply_override("constants." + item);
    }
}

inline ExperimentConfig parse_experiment(const Config& c, std::optional<std::string> kind = std::nullopt) {
    ExperimentConfig e;
    e.kind = kind ? *kind : c.get("experiment.kind", "");
    if (std::find(experiment_kinds().begin(), experiment_kinds().end(), e.kind) == experiment_kinds().end())
        throw ConfigError("unknown experiment kind '" + e.kind + "'");
    e.threads = static_cast<unsigned>(c.get_int("experiment.threads", 0));

    e.d = static_cast<int>(c.get_int("geometry.d", e.d));
    e.kappas = c.get_doubles("geometry.kappa", e.kappas);
    e.domain_radius = c.get_double("geometry.domain_radius", e.domain_radius);
    e.D = static_cast<int>(c.get_int("geometry.D", e.D));

    e.n_values = c.get_ints("sampling.n", e.n_values);
    e.seeds = c.get_ints("sampling.seeds", e.seeds);
    e.test_factor = static_cast<int>(c.get_int("sampling.test_factor", e.test_factor));

    const auto task = c.get("task.task", "regression");
    if (task == "regression")
        e.task = Task::regression;
    else if (task == "classification")
        e.task = Task::classification;
    else
        throw ConfigError("task.task must be regression or classification");
    e.task_options.noise_sigma = c.get_double("task.noise_sigma", e.task_options.noise_sigma);
    e.task_options.flip_probability = c.get_double("task.flip_probability", e.task_options.flip_probability);

    e.net.hidden_width = static_cast<int>(c.get_int("net.hidden_width", e.net.hidden_width));
    e.net.epochs = static_cast<int>(c.get_int("net.epochs", e.net.epochs));
    e.net.batch = static_cast<int>(c.get_int("net.batch", e.net.batch));
    e.net.step_size = c.get_double("net.step_size", e.net.step_size);
    e.net.target_norm = c.get_double("net.target_norm", e.net.target_norm);
    e.net.B = c.get_double("net.B", e.net.B);
    e.net.power_iters = static_cast<int>(c.get_int("net.power_iters", e.net.power_iters));
    e.net.warm_iters = static_cast<int>(c.get_int("net.warm_iters", e.net.warm_iters));
    try {
        e.net.loss = parse_loss(c.get("net.loss", e.task == Task::regression ? "squared" : "hinge"));
    } catch (const DomainError& err) {
        throw ConfigError(err.what());
    }

    e.spec.L = c.get_double("class.L", e.spec.L);
    e.spec.B = c.get_double("class.B", e.spec.B);
    e.spec.L_loss = c.get_double("class.L_loss", e.spec.L_loss);

    e.constants = parse_constants(c);
    const auto cal = c.get("constants.calibrate_big_o_scale", "false");
    if (cal != "true" && cal != "false") throw ConfigError("constants.calibrate_big_o_scale must be true or false");
    e.calibrate_big_o_scale = cal == "true";

    e.estimate.k = static_cast<int>(c.get_int("estimate.k", e.estimate.k));
    e.estimate.n_triangles = static_cast<int>(c.get_int("estimate.n_triangles", e.estimate.n_triangles));
    e.estimate.seed = static_cast<Seed>(c.get_int("estimate.seed", 0));
    e.estimate.discard_fraction = c.get_double("estimate.discard_fraction", e.estimate.discard_fraction);
    e.estimate.max_graph_points =
        static_cast<std::size_t>(c.get_int("estimate.max_graph_points", static_cast<long long>(e.estimate.max_graph_points)));
    e.inputs = c.get_strings("inputs.files");

    e.grid_d = c.get_ints("grid.d", e.grid_d);
    e.grid_L = c.get_doubles("grid.L", e.grid_L);
    e.grid_B = c.get_doubles("grid.B", e.grid_B);

    e.bootstrap = static_cast<int>(c.get_int("summary.bootstrap", e.bootstrap));
    e.bootstrap_seed = static_cast<Seed>(c.get_int("summary.bootstrap_seed", static_cast<long long>(e.bootstrap_seed)));
    return e;
}

inline void validate(const ExperimentConfig& e) {
    if (e.seeds.empty()) throw ConfigError("sampling.seeds must list at least one seed");
    if (e.n_values.empty()) throw ConfigError("sampling.n must list at least one sample size");
    for (std::size_t i = 1; i < e.n_values.size(); ++i)
        if (e.n_values[i] <= e.n_values[i - 1]) throw ConfigError("sampling.n must be strictly increasing");
    for (long long n : e.n_values)
        if (n < 1) throw ConfigError("sampling.n values must be positive");
    if (e.kappas.empty()) throw ConfigError("geometry.kappa must list at least one curvature");
    if (e.d < 1) throw ConfigError("geometry.d must be >= 1");
    if (!(e.domain_radius > 0.0)) throw ConfigError("geometry.domain_radius must be positive");
    if (e.test_factor < 1) throw ConfigError("sampling.test_factor must be >= 1");
    if (e.kind == "curvature_ablation" && e.kappas.size() < 2)
        throw ConfigError("curvature_ablation needs at least two curvature values");
    if (e.kind == "embedding_geometry")
        for (const auto& in : e.inputs) {
            if (in.rfind("fixture:", 0) == 0) continue;
            const std::filesystem::path p = std::filesystem::path(in).is_absolute() ? std::filesystem::path(in) : e.base_dir / in;
            if (!std::filesystem::exists(p)) throw ConfigError("input file does not exist: " + p.string());
        }
    if (e.kind == "synthetic_decay" || e.kind == "curvature_ablation") {
        if (e.D < e.d + 1) throw ConfigError("geometry.D must be at least d + 1");
        if (e.bootstrap < 1) throw ConfigError("summary.bootstrap must be positive");
    }
}

// ---------------------------------------------------------------------------
// Plot data

struct PlotSeries {
    std::string group;
    std::filesystem::path file;
    std::size_t points = 0;
};

/// One CSV (x,y sorted by x) per distinct value of `group` (all rows when
/// group is empty) plus a JSON manifest. Rows with an empty x or y cell are
/// skipped.
inline std::vector<PlotSeries> emit_plot_data(const ResultsTable& t, const std::string& x, const std::string& y,
                                              const std::string& group, const std::filesystem::path& dir,
                                              const std::string& prefix = "plot") {
    const auto xi = t.column_index(x), yi = t.column_index(y);
    const std::optional<std::size_t> gi = group.empty() ? std::nullopt : std::optional(t.column_index(group));
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> series;
    std::vector<std::string> order;
    for (const auto& r : t.rows) {
        if (r.size() != t.columns.size() || r[xi].empty() || r[yi].empty()) continue;
        const std::string g = gi ? r[*gi] : "all";
        if (!series.count(g)) order.push_back(g);
        series[g].emplace_back(r[xi], r[yi]);
    }
    auto numeric_less = [](const std::string& a, const std::string& b) {
        char *ea = nullptr, *eb = nullptr;
        const double va = std::strtod(a.c_str(), &ea), vb = std::strtod(b.c_str(), &eb);
        if (*ea == '\0' && *eb == '\0' && va != vb) return va < vb;
        return a < b;
    };
    std::sort(order.begin(), order.end(), numeric_less);

    std::filesystem::create_directories(dir);
    std::vector<PlotSeries> out;
    json manifest = {{"x", x}, {"y", y}, {"group_by", group}, {"series", json::array()}};
    for (const auto& g : order) {
        auto pts = series[g];
        std::stable_sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) { return numeric_less(a.first, b.first); });
        std::string safe = g;
        for (char& c : safe)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
        const std::string name = prefix + (group.empty() ? "" : "_" + group + "_" + safe) + ".csv";
        std::string body = x + "," + y + "\n";
        for (const auto& [a, b] : pts) body += a + "," + b + "\n";
        write_text(dir / name, body);
        out.push_back({g, dir / name, pts.size()});
        manifest["series"].push_back({{"group", g}, {"file", name}, {"points", pts.size()}});
    }
    write_text(dir / (prefix + "_manifest.json"), manifest.dump(2) + "\n");
    return out;
}

// ---------------------------------------------------------------------------
// Training cells

struct GapCell {
    GapRecord record;
    double psi = 0.0;
};

/// Sample, embed, label, train and measure one (kappa, n, seed) cell. The
/// sampling, embedding and label seeds depend on (seed, n) only, so the same
/// seed yields coupled samples across curvatures.
inline GapCell run_gap_cell(const ExperimentConfig& e, double kappa, long long n, long long seed) {
    const auto g = SpaceFormGeometry::ball(e.d, kappa, e.domain_radius);
    const auto base = static_cast<Seed>(seed);
    const auto nn = static_cast<std::uint64_t>(n);
    auto s = sample_uniform_ball(g, n * (1 + e.test_factor), mix_seed(mix_seed(base, nn), 1));
    s = embed_ambient(std::move(s), e.D, mix_seed(base, 2));
    s = make_task(std::move(s), e.task, mix_seed(mix_seed(base, nn), 3), e.task_options);

    const Points Xtr = s.ambient.topRows(n), Xte = s.ambient.bottomRows(s.size() - n);
    const Eigen::VectorXd ytr = s.labels.head(n), yte = s.labels.tail(s.size() - n);
    TrainConfig tc = e.net;
    tc.seed = mix_seed(mix_seed(base, nn), 4);
    const auto trained = train(Xtr, ytr, tc);
    const auto spec = class_spec_for(tc);
    GapCell cell;
    cell.record = measure_gap(trained.net, Xtr, ytr, Xte, yte, tc.loss, g, spec, e.constants);
    cell.record.seed = base;
    cell.psi = psi(kappa, spec.L);
    return cell;
}

inline double explicit_rate(double n, int d, double psi_value) {
    return std::pow(n, -1.0 / d) * std::log(n) + psi_value;
}

// ---------------------------------------------------------------------------
// Experiments

inline ResultsTable run_synthetic_decay(const ExperimentConfig& e) {
    validate(e);
    struct Cell {
        double kappa;
        long long n, seed;
    };
    std::vector<Cell> cells;
    for (double k : e.kappas)
        for (long long n : e.n_values)
            for (long long s : e.seeds) cells.push_back({k, n, s});
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
        return std::tie(a.kappa, a.n, a.seed) < std::tie(b.kappa, b.n, b.seed);
    });

    std::vector<std::optional<GapCell>> results(cells.size());
    std::vector<std::string> errors(cells.size());
    parallel_for(cells.size(), e.threads, [&](std::size_t i) {
        try {
            results[i] = run_gap_cell(e, cells[i].kappa, cells[i].n, cells[i].seed);
        } catch (const std::exception& ex) {
            errors[i] = error_cell(ex);
        }
    });

    const double L = e.net.target_norm * e.net.target_norm;
    double scale = e.constants.big_o_scale;
    if (e.calibrate_big_o_scale) {
        double best = 0.0;
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (results[i] && cells[i].kappa == 0.0)
                best = std::max(best, results[i]->record.gap /
                                          explicit_rate(static_cast<double>(cells[i].n), e.d, 0.0));
        if (best > 0.0) scale = best;
    }

    ResultsTable t;
    t.kind = "synthetic_decay";
    t.columns = {"kind", "kappa", "d", "D", "n", "seed", "gap", "bound_curvature", "bound_euclidean",
                 "predicted_rate", "train_risk", "test_risk", "status"};
    t.notes.emplace_back("big_o_scale_predicted_rate", format_double(scale));
    t.notes.emplace_back("big_o_scale_calibrated", e.calibrate_big_o_scale ? "true" : "false");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        std::vector<std::string> row{"synthetic_decay", format_double(c.kappa), std::to_string(e.d),
                                     std::to_string(e.D), std::to_string(c.n), std::to_string(c.seed)};
        if (results[i]) {
            const auto& r = results[i]->record;
            const double rate = scale * explicit_rate(static_cast<double>(c.n), e.d, psi(c.kappa, L));
            for (double v : {r.gap, r.bound_curvature, r.bound_euclidean, rate, r.train_risk, r.test_risk})
                row.push_back(format_double(v));
            row.push_back("ok");
        } else {
            row.insert(row.end(), 6, "");
            row.push_back(errors[i]);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

struct AblationSummary {
    std::vector<double> kappas;
    std::vector<double> median_gap;
    double spearman_negative = std::nan("");  // corr(-kappa, median gap) over kappa <= 0
    int bootstrap = 0;
    int bootstrap_ordered = 0;  // resamples with median gap nonincreasing in kappa over kappa <= 0
};

/// Paired bootstrap over seeds: each resample draws seeds with replacement
/// and reuses the same draw for every curvature.
inline AblationSummary summarize_ablation(const ExperimentConfig& e, const ResultsTable& t) {
    AblationSummary s;
    const auto ki = t.column_index("kappa"), si = t.column_index("seed"), gi = t.column_index("gap");
    std::map<double, std::map<long long, double>> gaps;
    for (const auto& r : t.rows)
        if (!r[gi].empty()) gaps[std::stod(r[ki])][std::stoll(r[si])] = std::stod(r[gi]);
    std::vector<double> neg_k, neg_gap;
    for (const auto& [k, by_seed] : gaps) {
        std::vector<double> v;
        for (const auto& [seed, g] : by_seed) v.push_back(g);
        s.kappas.push_back(k);
        s.median_gap.push_back(median(v));
        if (k <= 0.0) {
            neg_k.push_back(-k);
            neg_gap.push_back(s.median_gap.back());
        }
    }
    if (neg_k.size() >= 2) s.spearman_negative = spearman(neg_k, neg_gap);

    std::vector<double> neg_kappas;
    for (double k : s.kappas)
        if (k <= 0.0) neg_kappas.push_back(k);  // ascending: most negative first
    std::mt19937_64 rng(e.bootstrap_seed);
    std::uniform_int_distribution<std::size_t> pick(0, e.seeds.size() - 1);
    s.bootstrap = e.bootstrap;
    for (int b = 0; b < e.bootstrap; ++b) {
        std::vector<long long> draw;
        for (std::size_t i = 0; i < e.seeds.size(); ++i) draw.push_back(e.seeds[pick(rng)]);
        std::vector<double> med;
        bool complete = true;
        for (double k : neg_kappas) {
            std::vector<double> v;
            for (long long sd : draw) {
                const auto it = gaps[k].find(sd);
                if (it == gaps[k].end()) {
                    complete = false;
                    break;
                }
                v.push_back(it->second);
            }
            med.push_back(median(v));
        }
        if (!complete || med.size() < 2) continue;
        bool ordered = true;
        for (std::size_t i = 1; i < med.size(); ++i) ordered = ordered && med[i - 1] >= med[i];
        if (ordered) ++s.bootstrap_ordered;
    }
    return s;
}

inline json ablation_summary_to_json(const AblationSummary& s) {
    return {{"kappa", s.kappas},
            {"median_gap", s.median_gap},
            {"spearman_neg_kappa_vs_median_gap", std::isnan(s.spearman_negative) ? json(nullptr) : json(s.spearman_negative)},
            {"bootstrap_resamples", s.bootstrap},
            {"bootstrap_ordered", s.bootstrap_ordered}};
}

inline ResultsTable run_curvature_ablation(const ExperimentConfig& e) {
    validate(e);
    const long long n = e.n_values.front();
    std::vector<std::pair<double, long long>> cells;
    for (double k : e.kappas)
        for (long long s : e.seeds) cells.emplace_back(k, s);
    std::sort(cells.begin(), cells.end());

    std::vector<std::optional<GapCell>> results(cells.size());
    std::vector<std::string> errors(cells.size());
    parallel_for(cells.size(), e.threads, [&](std::size_t i) {
        try {
            results[i] = run_gap_cell(e, cells[i].first, n, cells[i].second);
        } catch (const std::exception& ex) {
            errors[i] = error_cell(ex);
        }
    });

    ResultsTable t;
    t.kind = "curvature_ablation";
    t.columns = {"kappa", "seed", "gap", "psi", "bound_curvature", "n", "train_risk", "test_risk", "status"};
    const double L = e.net.target_norm * e.net.target_norm;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::vector<std::string> row{format_double(cells[i].first), std::to_string(cells[i].second)};
        if (results[i]) {
            const auto& r = results[i]->record;
            row.push_back(format_double(r.gap));
            row.push_back(format_double(psi(cells[i].first, L)));
            row.push_back(format_double(r.bound_curvature));
            row.push_back(std::to_string(n));
            row.push_back(format_double(r.train_risk));
            row.push_back(format_double(r.test_risk));
            row.push_back("ok");
        } else {
            row.insert(row.end(), 6, "");
            row.push_back(errors[i]);
        }
        t.rows.push_back(std::move(row));
    }
    const auto summary = summarize_ablation(e, t);
    t.notes.emplace_back("spearman_neg_kappa_vs_median_gap", format_double(summary.spearman_negative));
    t.notes.emplace_back("bootstrap_ordered", std::to_string(summary.bootstrap_ordered) + "/" +
                                                  std::to_string(summary.bootstrap));
    return t;
}

struct EmbeddingRow {
    std::string dataset;
    GeometryEstimate estimate;
    BoundReport report;
};

/// Loads "fixture:<name>" from the bundled fixtures, anything else as a CSV path.
inline Points load_input(const ExperimentConfig& e, const std::string& input) {
    if (input.rfind("fixture:", 0) == 0) {
        const auto name = input.substr(8);
        for (auto& f : bundled_fixtures())
            if (f.name == name) return f.points;
        throw std::runtime_error("unknown fixture '" + name + "'");
    }
    const std::filesystem::path p = std::filesystem::path(input).is_absolute() ? std::filesystem::path(input) : e.base_dir / input;
    return read_points_csv(p).X;
}

inline std::string dataset_name(const std::string& input) {
    if (input.rfind("fixture:", 0) == 0) return input.substr(8);
    return std::filesystem::path(input).stem().string();
}

inline ResultsTable run_embedding_geometry(const ExperimentConfig& e, std::vector<EmbeddingRow>* details = nullptr) {
    validate(e);
    std::vector<std::optional<EmbeddingRow>> results(e.inputs.size());
    std::vector<std::string> errors(e.inputs.size());
    // Inputs run one after another; each estimate already spreads its
    // Dijkstra sources over the worker pool.
    for (std::size_t i = 0; i < e.inputs.size(); ++i) {
        try {
            const Points X = load_input(e, e.inputs[i]);
            EstimateOptions opt = e.estimate;
            opt.threads = e.threads;
            EmbeddingRow row;
            row.dataset = dataset_name(e.inputs[i]);
            row.estimate = estimate_geometry(X, opt);
            row.report = evaluate_bounds(row.estimate.geometry(), e.spec, static_cast<double>(X.rows()),
                                         static_cast<int>(X.cols()), e.constants);
            results[i] = std::move(row);
        } catch (const std::exception& ex) {
            errors[i] = error_cell(ex);
        }
    }
    ResultsTable t;
    t.kind = "embedding_geometry";
    t.columns = {"dataset", "D", "d_hat", "kappa_hat", "improvement_pct", "n", "status"};
    for (std::size_t i = 0; i < e.inputs.size(); ++i) {
        if (results[i]) {
            const auto& r = *results[i];
            t.rows.push_back({r.dataset, std::to_string(r.report.D), format_double(r.estimate.d_hat),
                              format_double(r.estimate.kappa_hat), format_double(r.report.improvement_pct),
                              std::to_string(r.estimate.n_points), "ok"});
            if (details) details->push_back(r);
        } else {
            t.rows.push_back({dataset_name(e.inputs[i]), "", "", "", "", "", errors[i]});
        }
    }
    return t;
}

inline ResultsTable run_bound_eval(const ExperimentConfig& e, std::vector<BoundReport>* reports = nullptr) {
    validate(e);
    struct Cell {
        long long d;
        double kappa, L, B;
        long long n;
    };
    std::vector<Cell> cells;
    for (long long d : e.grid_d)
        for (double k : e.kappas)
            for (double L : e.grid_L)
                for (double B : e.grid_B)
                    for (long long n : e.n_values) cells.push_back({d, k, L, B, n});
    std::vector<std::optional<BoundReport>> results(cells.size());
    std::vector<std::string> errors(cells.size());
    parallel_for(cells.size(), e.threads, [&](std::size_t i) {
        try {
            const auto& c = cells[i];
            const auto g = SpaceFormGeometry::ball(static_cast<int>(c.d), c.kappa, e.domain_radius);
            FunctionClassSpec spec = e.spec;
            spec.L = c.L;
            spec.B = c.B;
            results[i] = evaluate_bounds(g, spec, static_cast<double>(c.n), e.D, e.constants);
        } catch (const std::exception& ex) {
            errors[i] = error_cell(ex);
        }
    });
    ResultsTable t;
    t.kind = "bound_eval";
    t.columns = report_csv_columns();
    t.columns.push_back("status");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (results[i]) {
            auto row = report_csv_cells(*results[i]);
            row.push_back("ok");
            t.rows.push_back(std::move(row));
            if (reports) reports->push_back(*results[i]);
        } else {
            const auto& c = cells[i];
            std::vector<std::string> row{std::to_string(c.d), std::to_string(e.D), format_double(c.kappa),
                                         format_double(c.L),  format_double(c.B),  format_double(e.spec.L_loss),
                                         std::to_string(c.n), format_double(e.constants.delta)};
            row.insert(row.end(), 5, "");
            row.push_back(errors[i]);
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Runs

inline std::string utc_timestamp(const char* fmt) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, fmt);
    return ss.str();
}

struct RunOutcome {
    int exit_code = 0;
    std::filesystem::path run_dir;
    ResultsTable table;
};

/// Runs one experiment and writes <kind>.csv, plot data, summaries and
/// manifest.json into run_dir. Exit code 0 when every row succeeded, 3 when
/// some failed, 4 when all failed.
inline RunOutcome run_experiment(const Config& cfg, const ExperimentConfig& e, const std::filesystem::path& run_dir) {
    RunOutcome out;
    out.run_dir = run_dir;
    std::filesystem::create_directories(run_dir);
    std::vector<std::string> files;
    json extra = json::object();

    if (e.kind == "synthetic_decay") {
        out.table = run_synthetic_decay(e);
    } else if (e.kind == "curvature_ablation") {
        out.table = run_curvature_ablation(e);
        extra["summary"] = ablation_summary_to_json(summarize_ablation(e, out.table));
    } else if (e.kind == "embedding_geometry") {
        std::vector<EmbeddingRow> details;
        out.table = run_embedding_geometry(e, &details);
        for (const auto& d : details) {
            const auto name = d.dataset + "_diagnostics.json";
            write_text(run_dir / name,
                       json{{"dataset", d.dataset}, {"estimate", estimate_to_json(d.estimate)},
                            {"bounds", report_to_json(d.report)}}
                               .dump(2) +
                           "\n");
            files.push_back(name);
        }
    } else {
        std::vector<BoundReport> reports;
        out.table = run_bound_eval(e, &reports);
        json arr = json::array();
        for (const auto& r : reports) arr.push_back(report_to_json(r));
        write_text(run_dir / "bound_eval.json", arr.dump(2) + "\n");
        files.push_back("bound_eval.json");
    }
    out.table.config_echo = cfg.echo();
    const auto csv_name = e.kind + ".csv";
    write_text(run_dir / csv_name, out.table.to_csv());
    files.insert(files.begin(), csv_name);

    if (e.kind == "synthetic_decay") {
        for (const auto& s : emit_plot_data(out.table, "n", "gap", "kappa", run_dir / "plots", "gap_vs_n"))
            files.push_back("plots/" + s.file.filename().string());
        files.push_back("plots/gap_vs_n_manifest.json");
    } else if (e.kind == "curvature_ablation") {
        for (const auto& s : emit_plot_data(out.table, "kappa", "gap", "", run_dir / "plots", "gap_vs_kappa"))
            files.push_back("plots/" + s.file.filename().string());
        files.push_back("plots/gap_vs_kappa_manifest.json");
    }

    const auto failed = out.table.failed_rows();
    const auto total = out.table.rows.size();
    out.exit_code = failed == 0 ? 0 : (failed == total ? 4 : 3);
    json manifest = {{"toolkit", "geobound"},
                     {"version", kVersion},
                     {"kind", e.kind},
                     {"timestamp", utc_timestamp("%Y-%m-%dT%H:%M:%SZ")},
                     {"config", cfg.echo()},
                     {"files", files},
                     {"rows", total},
                     {"failed_rows", failed},
                     {"exit_code", out.exit_code}};
    for (auto& [k, v] : extra.items()) manifest[k] = v;
    write_text(run_dir / "manifest.json", manifest.dump(2) + "\n");
    return out;
}

}  // namespace geobound
