#include "sdm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "sdm/errors.hpp"

namespace sdm {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

IngestReport ingest(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  const std::vector<std::string> expected{"station_id", "x1", "x2", "time", "value"};
  if (split_csv(line) != expected) {
    throw DataError(path.string() + ":1: header must be station_id,x1,x2,time,value");
  }

  struct Station {
    Point site;
    std::unordered_map<std::string, double> values;
    std::unordered_set<std::string> seen;
  };
  std::vector<std::string> station_order, time_order;
  std::unordered_map<std::string, Station> stations;
  std::set<std::string> seen_times;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (f.size() != 5) throw DataError(where + "expected 5 fields");
    double x1 = 0.0, x2 = 0.0, value = 0.0;
    if (f[0].empty() || f[3].empty()) throw DataError(where + "empty station id or time label");
    if (!parse_double(f[1], x1) || !parse_double(f[2], x2)) throw DataError(where + "bad coordinate");
    const bool missing = f[4].empty() || f[4] == "NA" || f[4] == "NaN" || f[4] == "nan";
    if (!missing && !parse_double(f[4], value)) throw DataError(where + "bad value");
    auto [it, inserted] = stations.try_emplace(f[0], Station{Point(x1, x2), {}, {}});
    if (inserted) {
      station_order.push_back(f[0]);
    } else if (it->second.site != Point(x1, x2)) {
      throw DataError(where + "station " + f[0] + " has inconsistent coordinates");
    }
    if (!it->second.seen.insert(f[3]).second) {
      throw DataError(where + "duplicate row for station " + f[0] + ", time " + f[3]);
    }
    if (!missing) it->second.values.emplace(f[3], value);
    if (seen_times.insert(f[3]).second) time_order.push_back(f[3]);
  }

  IngestReport report;
  std::vector<std::string> kept;
  for (const auto& id : station_order) {
    if (stations.at(id).values.size() == time_order.size()) {
      kept.push_back(id);
    } else {
      report.dropped.push_back(id);
    }
  }
  if (kept.size() < 4) throw DataError(path.string() + ": fewer than 4 stations with complete observations");
  if (time_order.size() < 2) throw DataError(path.string() + ": need at least 2 time periods");

  Dataset& d = report.data;
  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto t = static_cast<Eigen::Index>(time_order.size());
  d.sites.resize(n, 2);
  d.replicates.resize(n, t);
  d.ids = kept;
  d.times = time_order;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Station& s = stations.at(kept[i]);
    d.sites.row(i) = s.site.transpose();
    for (Eigen::Index k = 0; k < t; ++k) d.replicates(i, k) = s.values.at(time_order[k]);
  }
  d.validate();
  return report;
}

void write_long_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "station_id,x1,x2,time,value\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const std::string id = data.ids.empty() ? "s" + std::to_string(i) : data.ids[i];
    for (Eigen::Index k = 0; k < data.t(); ++k) {
      const std::string time = data.times.empty() ? std::to_string(k + 1) : data.times[k];
      out << id << ',' << format_double(data.sites(i, 0)) << ',' << format_double(data.sites(i, 1)) << ','
          << time << ',' << format_double(data.replicates(i, k)) << '\n';
    }
  }
}

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
    c.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<double> Config::get_optional(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second == "inf") return std::numeric_limits<double>::infinity();
  double v;
  if (!parse_double(it->second, v)) throw DataError("config key " + key + ": not a number");
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  return get_optional(key).value_or(fallback);
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long v;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("config key " + key + ": not an integer");
  return v;
}

namespace {

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd rows_matrix(const json& rows, Eigen::Index r, Eigen::Index c, const char* what) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != r) {
    throw DataError(std::string("model file: ") + what + " has the wrong number of rows");
  }
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows.at(i);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw DataError(std::string("model file: ") + what + " has the wrong number of columns");
    }
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(j).get<double>();
  }
  return m;
}

}  // namespace

void write_model(const ModelFile& file, const std::filesystem::path& path) {
  const DeformModel& m = file.model;
  const KnotGrid& g = m.grid;
  json j;
  j["schema"] = "sdm-model";
  j["version"] = kModelSchemaVersion;
  j["domain"] = {g.lower(Axis::X1), g.upper(Axis::X1), g.lower(Axis::X2), g.upper(Axis::X2)};
  j["k1"] = g.count(Axis::X1);
  j["k2"] = g.count(Axis::X2);
  j["theta1"] = matrix_rows(m.coef.theta1);
  j["theta2"] = matrix_rows(m.coef.theta2);
  j["sigma2"] = m.cov.sigma2;
  j["phi"] = m.cov.phi;
  j["nugget"] = m.cov.nugget;
  j["epsilon"] = m.epsilon;
  j["mean"] = m.mean;
  const FitDiagnostics& d = m.diagnostics;
  j["diagnostics"] = {{"loglik", d.loglik}, {"stress", d.stress},     {"margin", d.margin},
                      {"step", d.step},             {"start", d.start},         {"start_loglik", d.start_loglik},
                      {"iterations", d.iterations}, {"selected", d.selected},
                      {"converged", d.converged},   {"cov_warning", d.cov_warning}};
  j["data"] = {{"ids", file.data.ids},
               {"times", file.data.times},
               {"sites", matrix_rows(file.data.sites)},
               {"values", matrix_rows(file.data.replicates)}};
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

ModelFile read_model(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": not a model file (" + e.what() + ")");
  }
  try {
    if (j.value("schema", "") != "sdm-model") throw DataError(path.string() + ": not an sdm model file");
    const int version = j.at("version").get<int>();
    if (version != kModelSchemaVersion) {
      throw DataError(path.string() + ": unsupported model schema version " + std::to_string(version));
    }
    const auto dom = j.at("domain").get<std::vector<double>>();
    if (dom.size() != 4) throw DataError("model file: domain needs 4 bounds");
    const int k1 = j.at("k1").get<int>(), k2 = j.at("k2").get<int>();
    KnotGrid grid(dom[0], dom[1], dom[2], dom[3], k1, k2);
    CoefPair coef{rows_matrix(j.at("theta1"), k1, k2, "theta1"), rows_matrix(j.at("theta2"), k1, k2, "theta2")};
    CovParams cov{j.at("sigma2").get<double>(), j.at("phi").get<double>(), j.at("nugget").get<double>()};
    cov.validate();

    Dataset data;
    const json& jd = j.at("data");
    data.ids = jd.at("ids").get<std::vector<std::string>>();
    data.times = jd.at("times").get<std::vector<std::string>>();
    const auto n = static_cast<Eigen::Index>(data.ids.size());
    const auto t = static_cast<Eigen::Index>(data.times.size());
    data.sites = rows_matrix(jd.at("sites"), n, 2, "sites");
    data.replicates = rows_matrix(jd.at("values"), n, t, "values");
    data.validate();

    FitDiagnostics diag;
    const json& jg = j.at("diagnostics");
    diag.loglik = jg.at("loglik").get<std::vector<double>>();
    diag.stress = jg.at("stress").get<std::vector<double>>();
    diag.margin = jg.at("margin").get<std::vector<double>>();
    diag.step = jg.value("step", std::vector<double>{});
    diag.start = jg.value("start", std::string{});
    diag.start_loglik = jg.value("start_loglik", std::vector<double>{});
    diag.iterations = jg.at("iterations").get<int>();
    diag.selected = jg.at("selected").get<int>();
    diag.converged = jg.at("converged").get<bool>();
    diag.cov_warning = jg.at("cov_warning").get<bool>();

    DeformModel model{grid, std::move(coef), cov, j.at("epsilon").get<double>(), j.at("mean").get<double>(),
                      data.sites, std::move(diag)};
    return {std::move(model), std::move(data)};
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed model file (" + e.what() + ")");
  } catch (const ArgumentError& e) {
    throw DataError(path.string() + ": invalid model parameters (" + e.what() + ")");
  }
}

Coords read_points(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"x1", "x2"}) {
    throw DataError(path.string() + ":1: header must be x1,x2");
  }
  std::vector<Point> pts;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    double a, b;
    if (f.size() != 2 || !parse_double(f[0], a) || !parse_double(f[1], b)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected two numbers");
    }
    pts.emplace_back(a, b);
  }
  Coords out(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return out;
}

void write_deformed_grid(const DeformationMap& map, int g, const std::filesystem::path& path) {
  if (g < 2) throw ArgumentError("write_deformed_grid: need g >= 2");
  const KnotGrid& grid = map.grid();
  std::ofstream out = open_output(path);
  out << "gx1,gx2,dx1,dx2\n";
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) {
      const Point x(grid.lower(Axis::X1) + (grid.upper(Axis::X1) - grid.lower(Axis::X1)) * a / (g - 1),
                    grid.lower(Axis::X2) + (grid.upper(Axis::X2) - grid.lower(Axis::X2)) * b / (g - 1));
      const Point y = map(x);
      out << format_double(x.x()) << ',' << format_double(x.y()) << ',' << format_double(y.x()) << ','
          << format_double(y.y()) << '\n';
    }
  }
}

}  // namespace sdm
