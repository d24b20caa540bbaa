#pragma once

// File formats: point-cloud CSV (+ JSON sidecar), bound reports, geometry
// estimates and network checkpoints.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bounds.hpp"
#include "error.hpp"
#include "estimate.hpp"
#include "lipnet.hpp"
#include "spaceform.hpp"
#include "types.hpp"

namespace geobound {

using json = nlohmann::json;

/// Decimal with 17 significant digits (round-trips every double).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline json geometry_to_json(const SpaceFormGeometry& g) {
    return {{"d", g.d}, {"kappa", g.kappa}, {"inj", g.inj}, {"vol", g.vol}, {"domain_radius", g.domain_radius}};
}

inline SpaceFormGeometry geometry_from_json(const json& j) {
    SpaceFormGeometry g;
    g.d = j.at("d").get<int>();
    g.kappa = j.at("kappa").get<double>();
    g.inj = j.at("inj").get<double>();
    g.vol = j.at("vol").get<double>();
    g.domain_radius = j.at("domain_radius").get<double>();
    return g;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    return p;
}

// ---------------------------------------------------------------------------
// Samples

/// Writes the ambient points (intrinsic when not embedded) as CSV with header
/// x0..x{D-1},label, and the geometry plus intrinsic coordinates to the JSON
/// sidecar next to it.
inline void write_sample(const std::filesystem::path& csv, const ManifoldSample& s) {
    const Points& P = s.has_ambient() ? s.ambient : s.intrinsic;
    std::string out;
    for (Eigen::Index j = 0; j < P.cols(); ++j) out += "x" + std::to_string(j) + ",";
    out += "label\n";
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        for (Eigen::Index j = 0; j < P.cols(); ++j) out += format_double(P(i, j)) + ",";
        if (s.has_labels()) out += format_double(s.labels(i));
        out += "\n";
    }
    write_text(csv, out);

    json side = geometry_to_json(s.geometry);
    side["seed"] = s.seed;
    side["ambient_dim"] = s.has_ambient() ? s.ambient_dim : 0;
    side["n"] = s.size();
    json rows = json::array();
    for (Eigen::Index i = 0; i < s.intrinsic.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < s.intrinsic.cols(); ++j) r.push_back(s.intrinsic(i, j));
        rows.push_back(std::move(r));
    }
    side["intrinsic"] = std::move(rows);
    write_text(sidecar_path(csv), side.dump(1) + "\n");
}

struct PointCloud {
    Points X;
    Eigen::VectorXd labels;  // empty when the file has no label values
    std::vector<std::string> columns;
    std::size_t n_comment_lines = 0;
};

/// Reads a numeric CSV. Lines starting with '#' are skipped; a first row
/// with non-numeric cells is a header; a column named "label" is split off.
inline PointCloud read_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    PointCloud pc;
    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    int label_col = -1;
    bool header_seen = false;
    std::string line;
    std::size_t lineno = 0;
    auto parse = [&](const std::string& cell, double& v) {
        if (cell.empty()) return false;
        char* end = nullptr;
        v = std::strtod(cell.c_str(), &end);
        return end && *end == '\0';
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            ++pc.n_comment_lines;
            continue;
        }
        const auto cells = split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            double v;
            bool numeric = true;
            for (const auto& c : cells) numeric = numeric && parse(c, v);
            if (!numeric) {
                pc.columns = cells;
                for (std::size_t j = 0; j < cells.size(); ++j)
                    if (cells[j] == "label") label_col = static_cast<int>(j);
                continue;
            }
        }
        std::vector<double> row;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            double v = 0.0;
            if (static_cast<int>(j) == label_col) {
                if (parse(cells[j], v)) labels.push_back(v);
                continue;
            }
            if (!parse(cells[j], v))
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" +
                                         cells[j] + "'");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty()) throw std::runtime_error(path.string() + ": no numeric rows");
    pc.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            pc.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    if (labels.size() == rows.size())
        pc.labels = Eigen::Map<Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
    return pc;
}

/// Reads a sample written by write_sample (CSV plus sidecar).
inline ManifoldSample read_sample(const std::filesystem::path& csv) {
    const auto pc = read_points_csv(csv);
    const auto side = json::parse(read_text(sidecar_path(csv)));
    ManifoldSample s;
    s.geometry = geometry_from_json(side);
    s.seed = side.value("seed", Seed{0});
    const auto& rows = side.at("intrinsic");
    s.intrinsic.resize(static_cast<Eigen::Index>(rows.size()), s.geometry.model_dim());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            s.intrinsic(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
    s.ambient = pc.X;
    s.ambient_dim = static_cast<int>(pc.X.cols());
    s.labels = pc.labels;
    return s;
}

// ---------------------------------------------------------------------------
// Bound reports

inline json constants_to_json(const BoundConstants& c) {
    return {{"c_pack", c.c_pack},
            {"c_dudley_a", c.c_dudley_a},
            {"c_dudley_b", c.c_dudley_b},
            {"big_o_scale", c.big_o_scale},
            {"delta", c.delta}};
}

inline json spec_to_json(const FunctionClassSpec& s) { return {{"L", s.L}, {"B", s.B}, {"L_loss", s.L_loss}}; }

inline json report_to_json(const BoundReport& r) {
    return {{"geometry", geometry_to_json(r.geometry)},
            {"class", spec_to_json(r.spec)},
            {"constants", constants_to_json(r.constants)},
            {"n", r.n},
            {"D", r.D},
            {"eps", r.eps},
            {"log_cover_manifold", r.log_cover_manifold},
            {"log_cover_class", r.log_cover_class},
            {"log_cover_class_closed_form", r.log_cover_class_closed_form},
            {"rademacher", r.rademacher},
            {"rademacher_asymptotic", r.rademacher_asymptotic},
            {"gen_bound", r.gen_bound},
            {"gen_bound_explicit", r.gen_bound_explicit},
            {"euclidean_rademacher", r.euclidean_rademacher},
            {"euclidean_gen_bound", r.euclidean_gen_bound},
            {"ambient_gen_bound_explicit", r.ambient_gen_bound_explicit},
            {"improvement_pct", r.improvement_pct},
            {"psi", r.psi},
            {"quadrature_converged", r.quadrature_converged}};
}

inline const std::vector<std::string>& report_csv_columns() {
    static const std::vector<std::string> cols{"d",     "D",          "kappa",     "L",
                                               "B",     "L_loss",     "n",         "delta",
                                               "rademacher", "gen_bound", "euclidean_rademacher",
                                               "euclidean_gen_bound", "improvement_pct"};
    return cols;
}

inline std::vector<std::string> report_csv_cells(const BoundReport& r) {
    return {std::to_string(r.geometry.d),   std::to_string(r.D),           format_double(r.geometry.kappa),
            format_double(r.spec.L),        format_double(r.spec.B),       format_double(r.spec.L_loss),
            format_double(r.n),             format_double(r.constants.delta), format_double(r.rademacher),
            format_double(r.gen_bound),     format_double(r.euclidean_rademacher),
            format_double(r.euclidean_gen_bound), format_double(r.improvement_pct)};
}

/// Header plus one row.
inline std::string report_to_csv(const BoundReport& r) {
    std::string out;
    const auto& cols = report_csv_columns();
    const auto cells = report_csv_cells(r);
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += "\n";
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    return out + "\n";
}

// ---------------------------------------------------------------------------
// Geometry estimates

inline json estimate_to_json(const GeometryEstimate& e) {
    return {{"d_hat", e.d_hat},
            {"kappa_hat", e.kappa_hat},
            {"kappa_used", e.kappa_used},
            {"n_points", e.n_points},
            {"n_graph_points", e.n_graph_points},
            {"k_graph", e.k_graph},
            {"n_triangles", e.n_triangles},
            {"n_duplicates", e.n_duplicates},
            {"domain_radius", e.domain_radius},
            {"inj", e.inj},
            {"inj_note", "surrogate: inj = domain_radius = max graph distance / 2"},
            {"vol", e.vol},
            {"seed", e.seed},
            {"residuals", e.residuals}};
}

// ---------------------------------------------------------------------------
// Network checkpoints

inline json matrix_to_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols)
            throw std::runtime_error("checkpoint: ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c)
            M(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
    }
    return M;
}

inline json net_to_json(const LipschitzNet& net) {
    return {{"input_dim", net.input_dim()},
            {"hidden", net.hidden()},
            {"W1", matrix_to_json(net.W1)},
            {"b1", matrix_to_json(net.b1)},
            {"W2", matrix_to_json(net.W2)},
            {"b2", net.b2},
            {"sigma1", net.sigma1},
            {"sigma2", net.sigma2},
            {"target_norm", net.target_norm},
            {"B", net.B},
            {"seed", net.seed}};
}

inline LipschitzNet net_from_json(const json& j) {
    LipschitzNet net;
    net.W1 = matrix_from_json(j.at("W1"));
    net.b1 = matrix_from_json(j.at("b1")).col(0);
    net.W2 = matrix_from_json(j.at("W2"));
    net.b2 = j.at("b2").get<double>();
    net.sigma1 = j.at("sigma1").get<double>();
    net.sigma2 = j.at("sigma2").get<double>();
    net.target_norm = j.at("target_norm").get<double>();
    net.B = j.at("B").get<double>();
    net.seed = j.at("seed").get<Seed>();
    if (net.b1.size() != net.W1.rows() || net.W2.cols() != net.W1.rows() || net.W2.rows() != 1)
        throw DimensionError("checkpoint: inconsistent layer shapes");
    return net;
}

}  // namespace geobound
