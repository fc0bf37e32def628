#include "qsb/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qsb {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

Json vector_to_json(const Vector& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vector vector_from_json(const Json& j, const std::string& where) {
    if (!j.is_array()) throw std::invalid_argument(where + ": expected an array");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument(where + ": expected a 2d array");
    Matrix m(j.size(), j[0].size());
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != j[0].size())
            throw std::invalid_argument(where + ": ragged rows in matrix");
        for (std::size_t c = 0; c < j[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return m;
}

const Json& require(const Json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key))
        throw std::invalid_argument(where + ": missing required field '" + key + "'");
    return j.at(key);
}

}  // namespace

Json gaussian_to_json(const Gaussian& g) {
    return Json{{"mean", vector_to_json(g.mean)}, {"cov", matrix_to_json(g.cov.mat())}};
}

Gaussian gaussian_from_json(const Json& j) {
    return Gaussian(vector_from_json(require(j, "mean", "gaussian"), "gaussian.mean"),
                    SpdMatrix(matrix_from_json(require(j, "cov", "gaussian"), "gaussian.cov")));
}

Json mixture_to_json(const GaussianMixture& mix) {
    Json comps = Json::array();
    for (const Gaussian& g : mix.components) comps.push_back(gaussian_to_json(g));
    return Json{{"dim", mix.dim()},
                {"weights", vector_to_json(mix.weights)},
                {"components", std::move(comps)}};
}

GaussianMixture mixture_from_json(const Json& j) {
    const Json& comps = require(j, "components", "mixture");
    std::vector<Gaussian> components;
    components.reserve(comps.size());
    for (const Json& c : comps) components.push_back(gaussian_from_json(c));
    GaussianMixture mix(vector_from_json(require(j, "weights", "mixture"), "mixture.weights"),
                        std::move(components));
    if (j.contains("dim") && j.at("dim").get<Eigen::Index>() != mix.dim())
        throw std::invalid_argument("mixture: dim field does not match component dimension");
    return mix;
}

Json bridge_to_json(const CoupledMixtureBridge& bridge) {
    Json start = Json::array();
    Json end = Json::array();
    for (const Gaussian& g : bridge.start) start.push_back(gaussian_to_json(g));
    for (const Gaussian& g : bridge.end) end.push_back(gaussian_to_json(g));
    return Json{{"dim", bridge.dim()},
                {"beta", bridge.beta},
                {"weights", vector_to_json(bridge.weights)},
                {"start", std::move(start)},
                {"end", std::move(end)},
                {"component_betas", vector_to_json(bridge.component_betas)}};
}

CoupledMixtureBridge bridge_from_json(const Json& j) {
    std::vector<Gaussian> start, end;
    for (const Json& c : require(j, "start", "bridge")) start.push_back(gaussian_from_json(c));
    for (const Json& c : require(j, "end", "bridge")) end.push_back(gaussian_from_json(c));
    const Vector weights = vector_from_json(require(j, "weights", "bridge"), "bridge.weights");
    const double beta = require(j, "beta", "bridge").get<double>();
    Vector betas;
    if (j.contains("component_betas")) {
        betas = vector_from_json(j.at("component_betas"), "bridge.component_betas");
    } else {
        betas = Vector::Constant(weights.size(), beta);
    }
    return CoupledMixtureBridge(weights, std::move(start), std::move(end), beta, betas);
}

Json environment_to_json(const Environment& env) {
    Json obstacles = Json::array();
    for (const Ellipse& e : env.obstacles)
        obstacles.push_back(Json{{"center", {e.center.x(), e.center.y()}},
                                 {"semi_axes", {e.a, e.b}}});
    return Json{{"bounds",
                 {{"min", {env.bounds.min.x(), env.bounds.min.y()}},
                  {"max", {env.bounds.max.x(), env.bounds.max.y()}}}},
                {"obstacles", std::move(obstacles)}};
}

Environment environment_from_json(const Json& j) {
    const Json& b = require(j, "bounds", "environment");
    const Json& bmin = require(b, "min", "environment.bounds");
    const Json& bmax = require(b, "max", "environment.bounds");
    Environment env;
    env.bounds.min = Eigen::Vector2d(bmin.at(0).get<double>(), bmin.at(1).get<double>());
    env.bounds.max = Eigen::Vector2d(bmax.at(0).get<double>(), bmax.at(1).get<double>());
    if ((env.bounds.max - env.bounds.min).minCoeff() <= 0.0)
        throw std::invalid_argument("environment: bounds are empty");
    if (j.contains("obstacles")) {
        for (const Json& o : j.at("obstacles")) {
            const Json& center = require(o, "center", "obstacle");
            const Json& axes = require(o, "semi_axes", "obstacle");
            Ellipse e;
            e.center = Eigen::Vector2d(center.at(0).get<double>(), center.at(1).get<double>());
            e.a = axes.at(0).get<double>();
            e.b = axes.at(1).get<double>();
            if (e.a <= 0.0 || e.b <= 0.0)
                throw std::invalid_argument("obstacle: semi-axes must be positive");
            env.obstacles.push_back(e);
        }
    }
    return env;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& rows) {
    if (header.size() != static_cast<std::size_t>(rows.cols()))
        throw std::invalid_argument("write_csv: header width does not match data");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "'");
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < rows.cols(); ++c)
            out << (c ? "," : "") << format_double(rows(r, c));
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_csv: write to '" + path + "' failed");
}

Matrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string field;
        bool numeric = true;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(field, &pos);
                while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos])))
                    ++pos;
                if (pos != field.size()) { numeric = false; break; }
                row.push_back(v);
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) { first = false; continue; }  // header row
            throw std::runtime_error("read_csv: non-numeric value in '" + path + "': " + line);
        }
        first = false;
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("read_csv: ragged rows in '" + path + "'");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("read_csv: no data rows in '" + path + "'");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows.front().size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_text: cannot open '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write_text: write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_text: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json load_json(const std::string& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& err) {
        throw std::runtime_error("failed to parse JSON file '" + path + "': " + err.what());
    }
}

}  // namespace qsb
