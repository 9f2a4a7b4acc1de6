#include "snapkit/io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace snapkit {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

// ---------- CSV ----------

void write_waveform_csv(const std::filesystem::path& path, const PulseWaveform& pulse) {
  auto out = open_out(path);
  out << "t_ns,I,Q\n";
  const double dt = pulse.dt();
  for (int k = 0; k < pulse.size(); ++k) {
    double t_ns = (k + 0.5) * dt * 1e9;
    out << t_ns << "," << pulse.samples(k).real() << "," << pulse.samples(k).imag() << "\n";
  }
}

void write_wigner_csv(const std::filesystem::path& path, const WignerGrid& grid) {
  auto out = open_out(path);
  out << "re_alpha,im_alpha,value\n";
  for (int k = 0; k < static_cast<int>(grid.points.size()); ++k)
    out << grid.points[k].real() << "," << grid.points[k].imag() << "," << grid.values(k)
        << "\n";
}

WignerGrid read_wigner_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open wigner csv: " + path.string());
  WignerGrid grid;
  std::vector<double> values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("re_alpha", 0) == 0)) continue;
    std::istringstream row(line);
    double re, im, v;
    char c1, c2;
    if (!(row >> re >> c1 >> im >> c2 >> v) || c1 != ',' || c2 != ',')
      throw ConfigError("malformed wigner csv row at " + path.string() + ":" +
                        std::to_string(lineno));
    std::string rest;
    if (row >> rest)
      throw ConfigError("trailing data in wigner csv row at " + path.string() + ":" +
                        std::to_string(lineno));
    grid.points.emplace_back(re, im);
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError("wigner csv has no data rows: " + path.string());
  grid.values = Eigen::Map<RealVector>(values.data(), static_cast<int>(values.size()));
  return grid;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepCurve& curve) {
  auto out = open_out(path);
  out << "offset,observable,in_span\n";
  for (int k = 0; k < static_cast<int>(curve.offsets.size()); ++k) {
    bool in = curve.offsets[k] >= curve.span_low && curve.offsets[k] <= curve.span_high;
    out << curve.offsets[k] << "," << curve.values[k] << "," << (in ? 1 : 0) << "\n";
  }
}

// ---------- JSON ----------

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open json: " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& err) {
    throw ConfigError("json parse error in " + path.string() + ": " + err.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

Json wigner_metadata(const WignerGrid& grid) {
  return Json{{"schema", "snapkit.wigner.v1"},
              {"scale", grid.scale},
              {"shots", grid.shots},
              {"seed", grid.seed},
              {"extent", grid.extent},
              {"side", grid.side},
              {"points", grid.points.size()}};
}

// ---------- report schemas ----------

std::filesystem::path schema_dir() {
  if (const char* env = std::getenv("SNAPKIT_SCHEMA_DIR")) return env;
#ifdef SNAPKIT_SCHEMA_DIR
  return SNAPKIT_SCHEMA_DIR;
#else
  return "schemas";
#endif
}

namespace {

// Validator for the subset of JSON Schema the shipped schemas use:
// type, properties, required, additionalProperties, items, enum.
void validate_node(const Json& schema, const Json& node, const std::string& where) {
  if (schema.contains("enum")) {
    for (const auto& v : schema["enum"])
      if (v == node) return;
    throw ConfigError("schema violation at " + where + ": value not in enum");
  }
  if (schema.contains("type")) {
    const std::string type = schema["type"];
    bool ok = (type == "object" && node.is_object()) || (type == "array" && node.is_array()) ||
              (type == "string" && node.is_string()) ||
              (type == "number" && node.is_number()) ||
              (type == "integer" && node.is_number_integer()) ||
              (type == "boolean" && node.is_boolean()) || (type == "null" && node.is_null());
    if (!ok)
      throw ConfigError("schema violation at " + where + ": expected " + type + ", got " +
                        std::string(node.type_name()));
  }
  if (schema.contains("required"))
    for (const auto& key : schema["required"])
      if (!node.contains(key.get<std::string>()))
        throw ConfigError("schema violation at " + where + ": missing required key '" +
                          key.get<std::string>() + "'");
  if (schema.contains("properties")) {
    const auto& props = schema["properties"];
    for (auto it = props.begin(); it != props.end(); ++it)
      if (node.contains(it.key())) validate_node(it.value(), node[it.key()], where + "/" + it.key());
    if (schema.value("additionalProperties", true) == false)
      for (auto it = node.begin(); it != node.end(); ++it)
        if (!props.contains(it.key()))
          throw ConfigError("schema violation at " + where + ": unexpected key '" + it.key() +
                            "'");
  }
  if (schema.contains("items") && node.is_array())
    for (int k = 0; k < static_cast<int>(node.size()); ++k)
      validate_node(schema["items"], node[k], where + "/" + std::to_string(k));
}

}  // namespace

void validate_report(const Json& report) {
  if (!report.is_object() || !report.contains("schema") || !report["schema"].is_string())
    throw ConfigError("report is missing its 'schema' tag");
  const std::string tag = report["schema"];  // snapkit.<name>.v<k>
  if (tag.rfind("snapkit.", 0) != 0) throw ConfigError("unknown schema namespace: " + tag);
  const auto file = schema_dir() / (tag.substr(8) + ".json");
  if (!std::filesystem::exists(file)) throw ConfigError("no schema shipped for " + tag);
  validate_node(read_json(file), report, "#");
}

void write_report(const std::filesystem::path& path, const Json& report) {
  validate_report(report);
  write_json(path, report);
}

}  // namespace snapkit
