#include "topost/case_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <sstream>

#include "topost/errors.hpp"

namespace topost {

namespace {

struct MatrixRow {
  std::size_t line;
  std::vector<double> values;
};

struct RawCase {
  std::optional<double> base_mva;
  std::map<std::string, std::vector<MatrixRow>> matrices;
  std::map<std::string, std::size_t> matrix_line;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<double> parse_numbers(std::string_view chunk, std::size_t line) {
  std::vector<double> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw ParseError(line, "not a number: '" + token + "'");
    out.push_back(v);
    token.clear();
  };
  for (char c : chunk) {
    if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

RawCase scan(std::string_view text, std::vector<std::string>* warnings) {
  RawCase raw;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  std::string open_matrix;
  bool in_cell = false;
  while (std::getline(in, line)) {
    ++number;
    if (auto pct = line.find('%'); pct != std::string::npos) line.erase(pct);
    std::string body = trim(line);
    if (body.empty()) continue;

    if (in_cell) {
      if (body.find('}') != std::string::npos) in_cell = false;
      continue;
    }
    if (!open_matrix.empty()) {
      bool closes = false;
      if (auto close = body.find(']'); close != std::string::npos) {
        closes = true;
        body.erase(close);
      }
      std::stringstream rows(body);
      std::string chunk;
      while (std::getline(rows, chunk, ';')) {
        auto values = parse_numbers(chunk, number);
        if (!values.empty()) raw.matrices[open_matrix].push_back({number, std::move(values)});
      }
      if (closes) open_matrix.clear();
      continue;
    }
    if (body.rfind("function", 0) == 0) continue;
    if (body.rfind("mpc.", 0) != 0) {
      throw ParseError(number, "unexpected statement '" + body + "'");
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(number, "expected assignment");
    const std::string field = trim(std::string_view(body).substr(4, eq - 4));
    std::string rhs = trim(std::string_view(body).substr(eq + 1));
    if (field == "version") {
      if (rhs.find('2') == std::string::npos) {
        throw Error(ErrorKind::unsupported_feature, "line " + std::to_string(number) +
                                                        ": only MATPOWER case format version 2 is supported");
      }
    } else if (field == "baseMVA") {
      if (!rhs.empty() && rhs.back() == ';') rhs.pop_back();
      auto values = parse_numbers(rhs, number);
      if (values.size() != 1) throw ParseError(number, "baseMVA expects one number");
      raw.base_mva = values.front();
    } else if (!rhs.empty() && rhs.front() == '[') {
      open_matrix = field;
      raw.matrix_line[field] = number;
      raw.matrices[field];
      std::string rest = rhs.substr(1);
      bool closes = false;
      if (auto close = rest.find(']'); close != std::string::npos) {
        closes = true;
        rest.erase(close);
      }
      std::stringstream rows(rest);
      std::string chunk;
      while (std::getline(rows, chunk, ';')) {
        auto values = parse_numbers(chunk, number);
        if (!values.empty()) raw.matrices[field].push_back({number, std::move(values)});
      }
      if (closes) open_matrix.clear();
    } else if (!rhs.empty() && rhs.front() == '{') {
      in_cell = rhs.find('}') == std::string::npos;
      if (warnings) warnings->push_back("ignored field mpc." + field);
    } else if (warnings) {
      warnings->push_back("ignored field mpc." + field);
    }
  }
  if (!open_matrix.empty()) throw ParseError(number, "matrix mpc." + open_matrix + " is not closed");
  return raw;
}

const std::vector<MatrixRow>& require_matrix(const RawCase& raw, const std::string& name, std::size_t last_line) {
  auto it = raw.matrices.find(name);
  if (it == raw.matrices.end()) throw ParseError(last_line, "missing mpc." + name + " table");
  return it->second;
}

std::string number_id(double v, std::size_t line) {
  if (v != std::floor(v) || v < 0 || v > 1e12) throw ParseError(line, "bus number must be a non-negative integer");
  return std::to_string(static_cast<long long>(v));
}

}  // namespace

Grid parse_matpower(std::string_view text, std::vector<std::string>* warnings) {
  const RawCase raw = scan(text, warnings);
  const std::size_t last_line = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) + 1;
  if (!raw.base_mva) throw ParseError(last_line, "missing mpc.baseMVA");
  const double base = *raw.base_mva;
  if (!(base > 0.0)) throw ParseError(last_line, "baseMVA must be positive");
  for (const auto& [name, rows] : raw.matrices) {
    if (name != "bus" && name != "gen" && name != "branch" && warnings) {
      warnings->push_back("ignored table mpc." + name);
    }
  }

  std::vector<Bus> buses;
  std::vector<double> load;
  std::map<std::string, BusIndex> by_number;
  std::optional<BusIndex> slack;
  bool shunts = false;
  for (const auto& row : require_matrix(raw, "bus", last_line)) {
    if (row.values.size() < 3) throw ParseError(row.line, "bus row needs at least bus_i, type, Pd");
    const auto id = number_id(row.values[0], row.line);
    if (by_number.contains(id)) throw ParseError(row.line, "duplicate bus " + id);
    const int type = static_cast<int>(row.values[1]);
    if (type == 4) {
      throw Error(ErrorKind::unsupported_feature, "line " + std::to_string(row.line) + ": isolated bus " + id +
                                                      " (type 4) is not supported");
    }
    if (type < 1 || type > 3) throw ParseError(row.line, "invalid bus type " + std::to_string(type));
    if (type == 3) {
      if (slack) throw ParseError(row.line, "second reference bus (type 3) " + id);
      slack = buses.size();
    }
    if (row.values.size() > 4 && row.values[4] != 0.0) shunts = true;
    by_number[id] = buses.size();
    buses.push_back(Bus{id, "sub_" + id});
    load.push_back(row.values[2]);
  }
  if (buses.empty()) throw ParseError(raw.matrix_line.at("bus"), "bus table is empty");
  if (!slack) throw ParseError(raw.matrix_line.at("bus"), "no reference bus (type 3)");

  std::vector<double> generation(buses.size(), 0.0);
  if (auto it = raw.matrices.find("gen"); it != raw.matrices.end()) {
    for (const auto& row : it->second) {
      if (row.values.size() < 2) throw ParseError(row.line, "gen row needs at least bus, Pg");
      const auto id = number_id(row.values[0], row.line);
      auto bus = by_number.find(id);
      if (bus == by_number.end()) throw ParseError(row.line, "generator at unknown bus " + id);
      const bool in_service = row.values.size() < 8 || row.values[7] > 0.0;
      if (in_service) generation[bus->second] += row.values[1];
    }
  } else {
    throw ParseError(last_line, "missing mpc.gen table");
  }

  std::vector<Branch> branches;
  std::map<std::string, int> parallel;
  bool ac_fields = false;
  for (const auto& row : require_matrix(raw, "branch", last_line)) {
    if (row.values.size() < 4) throw ParseError(row.line, "branch row needs at least fbus, tbus, r, x");
    const auto f = number_id(row.values[0], row.line);
    const auto t = number_id(row.values[1], row.line);
    auto from = by_number.find(f);
    auto to = by_number.find(t);
    if (from == by_number.end() || to == by_number.end()) {
      throw ParseError(row.line, "branch " + f + "-" + t + " references an unknown bus");
    }
    if (from->second == to->second) throw ParseError(row.line, "branch " + f + "-" + t + " is a self loop");
    const double x = row.values[3];
    if (x == 0.0 || !std::isfinite(x)) {
      throw Error(ErrorKind::unsupported_feature, "line " + std::to_string(row.line) + ": branch " + f + "-" + t +
                                                      " has zero reactance");
    }
    if (row.values[2] != 0.0 || (row.values.size() > 4 && row.values[4] != 0.0) ||
        (row.values.size() > 8 && row.values[8] != 0.0 && row.values[8] != 1.0) ||
        (row.values.size() > 9 && row.values[9] != 0.0)) {
      ac_fields = true;
    }
    const bool status = row.values.size() < 11 || row.values[10] > 0.0;
    std::string id = "l_" + f + "-" + t;
    const int k = ++parallel[id];
    if (k > 1) id += "#" + std::to_string(k);
    branches.push_back(Branch{id, from->second, to->second, 1.0 / x,
                              status ? BranchStatus::connected : BranchStatus::disconnected});
  }
  if (warnings) {
    if (ac_fields) warnings->push_back("ignored AC branch fields (r, b, tap ratio, phase shift)");
    if (shunts) warnings->push_back("ignored bus shunts (Gs, Bs)");
  }

  std::vector<Injection> injections;
  double balance = 0.0;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    injections.push_back(Injection{"inj_" + buses[i].id, i, (generation[i] - load[i]) / base});
    if (i != *slack) balance += injections.back().p;
  }
  injections[*slack].p = -balance;

  Grid grid(std::move(buses), std::move(branches), std::move(injections), *slack, base);
  const auto comps = connected_components(grid);
  if (comps.count > 1) {
    throw Error(ErrorKind::grid_disconnected,
                "case has " + std::to_string(comps.count) + " islands; only single-island grids are supported");
  }
  return grid;
}

Grid read_matpower(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::parse_error, "cannot open case file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_matpower(buf.str(), warnings);
}

std::string write_matpower(const Grid& grid, std::string_view name) {
  for (const auto& sub : grid.substations()) {
    if (sub.split()) {
      throw Error(ErrorKind::unsupported_feature, "cannot export split substation '" + sub.id + "' to MATPOWER");
    }
  }
  for (const auto& bus : grid.buses()) {
    if (bus.id.empty() || bus.id.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorKind::unsupported_feature, "bus id '" + bus.id + "' is not a MATPOWER bus number");
    }
  }
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  const auto p = grid.bus_injections();
  std::ostringstream out;
  out << "function mpc = " << name << "\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << num(grid.base_mva()) << ";\n";
  out << "%\tbus_i\ttype\tPd\n";
  out << "mpc.bus = [\n";
  for (std::size_t i = 0; i < grid.bus_count(); ++i) {
    out << "\t" << grid.buses()[i].id << "\t" << (i == grid.slack() ? 3 : 1) << "\t"
        << num(-p[i] * grid.base_mva()) << ";\n";
  }
  out << "];\n";
  out << "mpc.gen = [\n];\n";
  out << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\n";
  out << "mpc.branch = [\n";
  for (const auto& br : grid.branches()) {
    out << "\t" << grid.buses()[br.from].id << "\t" << grid.buses()[br.to].id << "\t0\t" << num(1.0 / br.susceptance)
        << "\t0\t0\t0\t0\t0\t0\t" << (br.connected() ? 1 : 0) << ";\n";
  }
  out << "];\n";
  return out.str();
}

namespace {

using nlohmann::json;

Error schema(const std::string& message) { return Error(ErrorKind::schema_error, message); }

const json& member(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw schema(where + ": missing \"" + key + "\"");
  return *it;
}

std::string string_member(const json& obj, const char* key, const std::string& where) {
  const auto& v = member(obj, key, where);
  if (!v.is_string()) throw schema(where + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

TopologyChange change_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw schema(where + ": change must be an object");
  const auto kind = string_member(j, "kind", where);
  if (kind == "disconnect") return Disconnect{string_member(j, "branch", where)};
  if (kind == "reconnect") return Reconnect{string_member(j, "branch", where)};
  if (kind == "merge") return Merge{string_member(j, "substation", where)};
  if (kind == "split") {
    Split s{string_member(j, "substation", where), {}};
    const auto& list = member(j, "busbar2", where);
    if (!list.is_array()) throw schema(where + ": \"busbar2\" must be an array");
    for (const auto& t : list) {
      if (t.is_object() && t.contains("branch") && t.size() == 1 && t["branch"].is_string()) {
        s.busbar2.push_back({TerminalKind::branch, t["branch"].get<std::string>()});
      } else if (t.is_object() && t.contains("injection") && t.size() == 1 && t["injection"].is_string()) {
        s.busbar2.push_back({TerminalKind::injection, t["injection"].get<std::string>()});
      } else {
        throw schema(where + ": busbar2 terminals are {\"branch\": id} or {\"injection\": id}");
      }
    }
    return s;
  }
  throw schema(where + ": unknown change kind '" + kind + "'");
}

json change_to_json(const TopologyChange& change) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Disconnect>) {
          return {{"kind", "disconnect"}, {"branch", c.branch}};
        } else if constexpr (std::is_same_v<T, Reconnect>) {
          return {{"kind", "reconnect"}, {"branch", c.branch}};
        } else if constexpr (std::is_same_v<T, Split>) {
          json terms = json::array();
          for (const auto& t : c.busbar2) {
            terms.push_back({{t.kind == TerminalKind::branch ? "branch" : "injection", t.element}});
          }
          return {{"kind", "split"}, {"substation", c.substation}, {"busbar2", terms}};
        } else {
          return {{"kind", "merge"}, {"substation", c.substation}};
        }
      },
      change);
}

ChangeSet changes_from_json(const json& doc, const char* key) {
  ChangeSet out;
  auto it = doc.find(key);
  if (it == doc.end()) return out;
  if (!it->is_array()) throw schema(std::string("\"") + key + "\" must be an array");
  for (std::size_t i = 0; i < it->size(); ++i) {
    out.push_back(change_from_json((*it)[i], std::string(key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void require_known(const Grid& grid, const TopologyChange& change) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Disconnect> || std::is_same_v<T, Reconnect>) {
          (void)grid.branch_index(c.branch);
        } else {
          (void)grid.substation(c.substation);
          if constexpr (std::is_same_v<T, Split>) {
            for (const auto& t : c.busbar2) {
              if (t.kind == TerminalKind::branch) {
                (void)grid.branch_index(t.element);
              } else if (!grid.find_injection(t.element)) {
                throw Error(ErrorKind::unknown_id, "unknown injection '" + t.element + "'");
              }
            }
          }
        }
      },
      change);
}

}  // namespace

ScenarioFile parse_scenario(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw schema(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw schema("scenario must be a JSON object");
  ScenarioFile s;
  const auto& version = member(doc, "version", "scenario");
  if (!version.is_number_integer() || version.get<int>() != 1) throw schema("scenario: unsupported version");
  s.version = 1;
  if (doc.contains("name")) s.name = string_member(doc, "name", "scenario");
  if (doc.contains("case")) s.case_path = string_member(doc, "case", "scenario");
  s.reference = changes_from_json(doc, "reference");
  s.changes = changes_from_json(doc, "changes");
  if (auto it = doc.find("contingencies"); it != doc.end()) {
    if (it->is_string() && it->get<std::string>() == "all") {
      s.all_contingencies = true;
    } else if (it->is_array()) {
      for (const auto& c : *it) {
        if (!c.is_string()) throw schema("contingencies: branch ids must be strings");
        s.contingencies.push_back(c.get<std::string>());
      }
    } else {
      throw schema("contingencies must be \"all\" or an array of branch ids");
    }
  }
  if (auto it = doc.find("options"); it != doc.end()) {
    if (!it->is_object()) throw schema("options must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_number()) throw schema("options." + key + " must be a number");
      const double v = value.get<double>();
      if (!(v > 0.0)) throw schema("options." + key + " must be positive");
      if (key == "tolerance") {
        s.options.tolerance = v;
      } else if (key == "independence_filter") {
        s.options.independence_filter = v;
      } else {
        throw schema("unknown option '" + key + "'");
      }
    }
  }
  for (const auto& key : {"reference", "changes"}) {
    try {
      require_distinct_targets(std::string(key) == "reference" ? s.reference : s.changes);
    } catch (const Error& e) {
      throw schema(std::string(key) + ": " + e.what());
    }
  }
  return s;
}

void resolve_scenario(const ScenarioFile& scenario, const Grid& grid) {
  for (const auto& c : scenario.reference) require_known(grid, c);
  for (const auto& c : scenario.changes) require_known(grid, c);
  for (const auto& id : scenario.contingencies) (void)grid.branch_index(id);
}

ScenarioFile load_scenario(std::string_view json_text, const Grid& grid) {
  auto s = parse_scenario(json_text);
  resolve_scenario(s, grid);
  return s;
}

std::string scenario_to_json(const ScenarioFile& scenario) {
  json doc;
  doc["version"] = scenario.version;
  if (!scenario.name.empty()) doc["name"] = scenario.name;
  if (!scenario.case_path.empty()) doc["case"] = scenario.case_path;
  if (!scenario.reference.empty()) {
    doc["reference"] = json::array();
    for (const auto& c : scenario.reference) doc["reference"].push_back(change_to_json(c));
  }
  doc["changes"] = json::array();
  for (const auto& c : scenario.changes) doc["changes"].push_back(change_to_json(c));
  if (scenario.all_contingencies) {
    doc["contingencies"] = "all";
  } else if (!scenario.contingencies.empty()) {
    doc["contingencies"] = scenario.contingencies;
  }
  json options;
  options["tolerance"] = scenario.options.tolerance;
  if (scenario.options.independence_filter) options["independence_filter"] = *scenario.options.independence_filter;
  doc["options"] = options;
  return doc.dump(2);
}

LoadedScenario read_scenario(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& case_override) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::schema_error, "cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto scenario = parse_scenario(buf.str());
  std::filesystem::path case_path;
  if (case_override) {
    case_path = *case_override;
  } else if (!scenario.case_path.empty()) {
    case_path = path.parent_path() / scenario.case_path;
  } else {
    throw schema("scenario names no case and none was given");
  }
  if (scenario.name.empty()) scenario.name = path.stem().string();
  Grid grid = read_matpower(case_path);
  resolve_scenario(scenario, grid);
  Grid reference = apply_change_set(grid, scenario.reference);
  return LoadedScenario{std::move(scenario), std::move(grid), std::move(reference)};
}

std::vector<std::string> scenario_contingencies(const ScenarioFile& scenario, const Grid& target) {
  if (!scenario.all_contingencies) return scenario.contingencies;
  std::vector<std::string> out;
  for (const auto& br : target.branches()) {
    if (br.connected()) out.push_back(br.id);
  }
  return out;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

void write_flow_csv(std::ostream& out, const std::vector<FlowRow>& rows) {
  out << "case,branch,method,flow,abs_diff\n";
  for (const auto& r : rows) {
    out << r.case_label << ',' << r.branch << ',' << r.method << ',' << format_number(r.flow) << ','
        << format_number(r.abs_diff) << '\n';
  }
}

void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "case,method,seconds\n";
  for (const auto& r : rows) out << r.case_label << ',' << r.method << ',' << format_number(r.seconds) << '\n';
}

}  // namespace topost
