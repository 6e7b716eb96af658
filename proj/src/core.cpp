#include "ebnf/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace ebnf {

void EngineConfig::validate() const {
  if (!(rho > 0)) throw ValidationError("rho must be > 0", errc::bad_config);
  if (!(fd_step_cap > 0)) throw ValidationError("fd_step_cap must be > 0", errc::bad_config);
  if (grid_size_S < 2) throw ValidationError("grid_size_S must be >= 2", errc::bad_config);
  if (!(grid_halfwidth_cw > 0)) throw ValidationError("grid_halfwidth_cw must be > 0", errc::bad_config);
  if (!(newton_tol > 0)) throw ValidationError("newton_tol must be > 0", errc::bad_config);
  if (newton_max_iter < 1) throw ValidationError("newton_max_iter must be >= 1", errc::bad_config);
  if (!(maxent_slack >= 0)) throw ValidationError("maxent_slack must be >= 0", errc::bad_config);
  if (!(bisect_tol > 0)) throw ValidationError("bisect_tol must be > 0", errc::bad_config);
  if (!(interval_guard >= 0)) throw ValidationError("interval_guard must be >= 0", errc::bad_config);
  if (!(alpha > 0 && alpha < 1)) throw ValidationError("alpha must be in (0,1)", errc::bad_config);
  if (delta < 0) throw ValidationError("delta must be >= 0", errc::bad_config);
  for (std::size_t i = 0; i < mgf_points.size(); ++i) {
    if (mgf_points[i] == 0.0)
      throw ValidationError("mgf_points must exclude 0", errc::bad_config);
    if (i > 0 && !(mgf_points[i] > mgf_points[i - 1]))
      throw ValidationError("mgf_points must be strictly increasing", errc::bad_config);
  }
  if (grid_size_S < 2 + static_cast<int>(mgf_points.size()))
    throw ValidationError("grid_size_S must be >= 2 + number of mgf_points", errc::bad_config);
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse number '" + s + "' for " + what, errc::parse);
  }
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), what));
  return out;
}

}  // namespace

void apply_config_override(EngineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "rho") cfg.rho = parse_double(value, key);
  else if (key == "fd_step_cap") cfg.fd_step_cap = parse_double(value, key);
  else if (key == "grid_size_S") cfg.grid_size_S = static_cast<int>(parse_double(value, key));
  else if (key == "grid_halfwidth_cw") cfg.grid_halfwidth_cw = parse_double(value, key);
  else if (key == "mgf_points") cfg.mgf_points = parse_double_list(value, key);
  else if (key == "newton_tol") cfg.newton_tol = parse_double(value, key);
  else if (key == "newton_max_iter") cfg.newton_max_iter = static_cast<int>(parse_double(value, key));
  else if (key == "maxent_slack") cfg.maxent_slack = parse_double(value, key);
  else if (key == "bisect_tol") cfg.bisect_tol = parse_double(value, key);
  else if (key == "interval_guard") cfg.interval_guard = parse_double(value, key);
  else if (key == "alpha") cfg.alpha = parse_double(value, key);
  else if (key == "delta") cfg.delta = parse_double(value, key);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  else throw ValidationError("unknown config key '" + key + "'", errc::bad_config);
}

EngineConfig parse_config_text(const std::string& text) {
  EngineConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + " is not 'key = value'",
                            errc::bad_config);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    // allow quoted values, e.g. mgf_points = "-0.3, -0.2"
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    apply_config_override(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

EngineConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path, errc::parse);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

Dataset validate_dataset(const std::vector<RawRow>& raw) {
  if (raw.empty()) throw ValidationError("dataset is empty", errc::validation);
  Dataset data;
  data.observations.reserve(raw.size());
  std::unordered_set<std::string> seen;
  for (const auto& [id, x, s2, k] : raw) {
    if (!seen.insert(id).second)
      throw ValidationError("duplicate id '" + id + "'", errc::duplicate_id);
    if (!std::isfinite(x))
      throw ValidationError("non-finite x for id '" + id + "'", errc::bad_value);
    if (!std::isfinite(s2) || s2 <= 0)
      throw ValidationError("s2 must be finite and > 0 for id '" + id + "'", errc::bad_value);
    if (!std::isfinite(k) || k <= 0)
      throw ValidationError("k must be finite and > 0 for id '" + id + "'", errc::bad_value);
    data.observations.push_back({id, x, s2, k});
  }
  data.homogeneous_k = std::all_of(
      data.observations.begin(), data.observations.end(),
      [&](const Observation& o) { return o.k == data.observations.front().k; });
  return data;
}

void require_k_above_two(const Dataset& data) {
  std::string bad;
  for (const auto& o : data.observations)
    if (o.k <= 2) bad += (bad.empty() ? "" : ", ") + o.id;
  if (!bad.empty())
    throw ValidationError("shrinkage requires k > 2; offending ids: " + bad, errc::bad_value);
}

// ---- CSV -------------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file " + path, errc::parse);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') { field += '"'; in.get(); }
        else in_quotes = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(field); field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && in.peek() == '\n') in.get();
      row.push_back(field); field.clear();
      rows.push_back(row); row.clear();
    } else {
      field += c;
    }
  }
  if (in_quotes) throw ValidationError("unterminated quote in " + path, errc::parse);
  if (!field.empty() || !row.empty()) {
    row.push_back(field);
    rows.push_back(row);
  }
  if (!any) throw ValidationError("empty file " + path, errc::parse);
  // drop comment lines (schema headers start with '#')
  std::erase_if(rows, [](const std::vector<std::string>& r) {
    return !r.empty() && !r[0].empty() && r[0][0] == '#';
  });
  return rows;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

Dataset read_dataset_csv(const std::string& path) {
  auto rows = read_csv(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"id", "x", "s2", "k"})
    throw ValidationError("expected header id,x,s2,k in " + path, errc::parse);
  std::vector<RawRow> raw;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4)
      throw ValidationError("row " + std::to_string(i + 1) + " has " +
                                std::to_string(rows[i].size()) + " fields, expected 4",
                            errc::parse);
    raw.emplace_back(rows[i][0], parse_double(rows[i][1], "x"), parse_double(rows[i][2], "s2"),
                     parse_double(rows[i][3], "k"));
  }
  return validate_dataset(raw);
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path, errc::parse);
  out << "# ebnf-schema v1\n";
  out << "id,x,s2,k\n";
  out.precision(17);
  for (const auto& o : data.observations)
    out << csv_escape(o.id) << ',' << o.x << ',' << o.s2 << ',' << o.k << '\n';
}

}  // namespace ebnf
