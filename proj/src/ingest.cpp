#include "urbanfuse/ingest.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string at_line(const fs::path& path, std::size_t line) {
  return path.filename().string() + " line " + std::to_string(line) + ": ";
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

json taxonomy_to_json(const LabelTaxonomy& taxonomy) {
  json issues = json::array();
  for (const auto& issue : taxonomy.issue_classes()) {
    issues.push_back({{"name", issue}, {"main", taxonomy.main_name_of_issue(issue)}});
  }
  return {{"main_classes", taxonomy.main_classes()}, {"issue_classes", issues}};
}

LabelTaxonomy taxonomy_from_json(const json& j) {
  std::vector<std::pair<std::string, std::string>> issues;
  for (const auto& item : j.at("issue_classes")) {
    issues.emplace_back(item.at("name").get<std::string>(), item.at("main").get<std::string>());
  }
  return LabelTaxonomy(j.at("main_classes").get<std::vector<std::string>>(), std::move(issues));
}

LabelTaxonomy infer_taxonomy(const std::vector<Report>& reports) {
  std::vector<std::string> mains;
  std::vector<std::pair<std::string, std::string>> issues;
  std::unordered_set<std::string> seen_main;
  std::unordered_map<std::string, std::string> issue_parent;
  for (const auto& r : reports) {
    if (seen_main.insert(r.main_class).second) mains.push_back(r.main_class);
    auto [it, inserted] = issue_parent.emplace(r.issue_class, r.main_class);
    if (inserted) {
      issues.emplace_back(r.issue_class, r.main_class);
    } else if (it->second != r.main_class) {
      throw Error(ErrorCode::validation, "issue class '" + r.issue_class +
                                             "' appears under main classes '" + it->second +
                                             "' and '" + r.main_class + "'");
    }
  }
  return LabelTaxonomy(std::move(mains), std::move(issues));
}

double json_number(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw Error(ErrorCode::parse, std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

void require_header(const fs::path& path, std::istream& in, const std::vector<std::string>& expected,
                    std::vector<std::string>* header_out = nullptr) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::format, path.string() + ": missing header");
  strip_cr(line);
  auto header = split_csv_line(line);
  if (header.size() < expected.size() ||
      !std::equal(expected.begin(), expected.end(), header.begin())) {
    throw Error(ErrorCode::format, path.string() + ": unexpected header '" + line + "'");
  }
  if (header_out) *header_out = std::move(header);
}

double field_double(const fs::path& path, std::size_t line, const std::string& text,
                    const char* what) {
  try {
    return parse_double(text);
  } catch (const Error&) {
    throw Error(ErrorCode::parse, at_line(path, line) + "bad " + what + " '" + text + "'");
  }
}

LocalDateTime field_time(const fs::path& path, std::size_t line, const std::string& text) {
  try {
    return LocalDateTime::parse(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, at_line(path, line) + e.what());
  }
}

void check_coords(const fs::path& path, std::size_t line, double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0)) {
    throw Error(ErrorCode::format, at_line(path, line) + "coordinates out of range");
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error(ErrorCode::format, "cannot format double");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::parse, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::parse, "unterminated quote in CSV line");
  fields.push_back(std::move(current));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

LabelTaxonomy load_taxonomy(const fs::path& path) {
  auto in = open_in(path);
  try {
    return taxonomy_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

void save_taxonomy(const LabelTaxonomy& taxonomy, const fs::path& path) {
  auto out = open_out(path);
  out << taxonomy_to_json(taxonomy).dump(2) << '\n';
}

Dataset load_reports(const fs::path& path, const std::optional<fs::path>& taxonomy_sidecar) {
  auto in = open_in(path);
  std::optional<LabelTaxonomy> taxonomy;
  if (taxonomy_sidecar) taxonomy = load_taxonomy(*taxonomy_sidecar);
  std::vector<Report> reports;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw Error(ErrorCode::parse, "record is not a JSON object");
      if (j.contains("taxonomy")) {
        if (!reports.empty()) throw Error(ErrorCode::parse, "taxonomy record must come first");
        if (!taxonomy) taxonomy = taxonomy_from_json(j.at("taxonomy"));
        continue;
      }
      Report r;
      r.id = j.at("id").get<std::string>();
      r.text = j.contains("text") && !j.at("text").is_null() ? j.at("text").get<std::string>() : "";
      r.timestamp = LocalDateTime::parse(j.at("timestamp").get<std::string>());
      r.lat = json_number(j, "lat");
      r.lon = json_number(j, "lon");
      r.main_class = j.at("main_class").get<std::string>();
      r.issue_class = j.at("issue_class").get<std::string>();
      if (j.contains("image_ref") && !j.at("image_ref").is_null()) {
        r.image_ref = j.at("image_ref").get<std::string>();
      }
      reports.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse, at_line(path, line_no) + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::parse, at_line(path, line_no) + e.what());
    }
  }
  Dataset dataset{std::move(reports), taxonomy ? std::move(*taxonomy) : LabelTaxonomy{}};
  if (!taxonomy) dataset.taxonomy = dataset.reports.empty() ? LabelTaxonomy{} : infer_taxonomy(dataset.reports);
  const auto report = validate_dataset(dataset);
  if (!report.ok()) throw Error(ErrorCode::validation, path.string() + ": " + report.summary());
  return dataset;
}

void save_reports(const Dataset& dataset, const fs::path& path) {
  auto out = open_out(path);
  out << json{{"taxonomy", taxonomy_to_json(dataset.taxonomy)}}.dump() << '\n';
  for (const auto& r : dataset.reports) {
    json j = {{"id", r.id},
              {"text", r.text},
              {"timestamp", r.timestamp.to_iso()},
              {"lat", r.lat},
              {"lon", r.lon},
              {"main_class", r.main_class},
              {"issue_class", r.issue_class}};
    if (r.image_ref) j["image_ref"] = *r.image_ref;
    out << j.dump() << '\n';
  }
}

std::vector<GeoObject> load_geo_objects(const fs::path& path) {
  auto in = open_in(path);
  require_header(path, in, {"object_type", "lat", "lon"});
  std::vector<GeoObject> objects;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw Error(ErrorCode::parse, at_line(path, line_no) + "expected 3 fields");
    GeoObject o{f[0], field_double(path, line_no, f[1], "lat"), field_double(path, line_no, f[2], "lon")};
    if (o.object_type.empty()) throw Error(ErrorCode::format, at_line(path, line_no) + "empty object type");
    check_coords(path, line_no, o.lat, o.lon);
    objects.push_back(std::move(o));
  }
  return objects;
}

void save_geo_objects(const std::vector<GeoObject>& objects, const fs::path& path) {
  auto out = open_out(path);
  out << "object_type,lat,lon\n";
  for (const auto& o : objects) {
    out << csv_escape(o.object_type) << ',' << format_double(o.lat) << ',' << format_double(o.lon) << '\n';
  }
}

std::vector<HistoricalEvent> load_historical_events(const fs::path& path) {
  auto in = open_in(path);
  require_header(path, in, {"issue_type", "lat", "lon", "timestamp"});
  std::vector<HistoricalEvent> events;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw Error(ErrorCode::parse, at_line(path, line_no) + "expected 4 fields");
    HistoricalEvent e{f[0], field_double(path, line_no, f[1], "lat"),
                      field_double(path, line_no, f[2], "lon"), field_time(path, line_no, f[3])};
    if (e.issue_type.empty()) throw Error(ErrorCode::format, at_line(path, line_no) + "empty issue type");
    check_coords(path, line_no, e.lat, e.lon);
    events.push_back(std::move(e));
  }
  return events;
}

void save_historical_events(const std::vector<HistoricalEvent>& events, const fs::path& path) {
  auto out = open_out(path);
  out << "issue_type,lat,lon,timestamp\n";
  for (const auto& e : events) {
    out << csv_escape(e.issue_type) << ',' << format_double(e.lat) << ',' << format_double(e.lon)
        << ',' << e.timestamp.to_iso() << '\n';
  }
}

WeatherTable load_weather(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> header;
  require_header(path, in, {"timestamp"}, &header);
  WeatherTable table;
  table.column_names.assign(header.begin() + 1, header.end());
  std::set<std::int64_t> hours;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::parse, at_line(path, line_no) + "expected " +
                                        std::to_string(header.size()) + " fields");
    }
    WeatherRow row{field_time(path, line_no, f[0]).truncated_to_hour(), {}};
    if (!hours.insert(row.timestamp.hour_key()).second) {
      throw Error(ErrorCode::format, at_line(path, line_no) + "duplicate weather hour " +
                                         row.timestamp.to_iso().substr(0, 16));
    }
    for (std::size_t c = 1; c < f.size(); ++c) {
      const double v = field_double(path, line_no, f[c], "weather value");
      if (!std::isfinite(v)) throw Error(ErrorCode::format, at_line(path, line_no) + "non-finite weather value");
      row.values.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const WeatherRow& a, const WeatherRow& b) { return a.timestamp < b.timestamp; });
  return table;
}

void save_weather(const WeatherTable& weather, const fs::path& path) {
  auto out = open_out(path);
  out << "timestamp";
  for (const auto& c : weather.column_names) out << ',' << csv_escape(c);
  out << '\n';
  for (const auto& row : weather.rows) {
    out << row.timestamp.to_iso();
    for (double v : row.values) out << ',' << format_double(v);
    out << '\n';
  }
}

void check_visual_entry(const VisualFeatureEntry& entry) {
  if (entry.vector.size() != kVisualDims) {
    throw Error(ErrorCode::format, "visual entry '" + entry.report_id + "' has " +
                                       std::to_string(entry.vector.size()) + " values, expected " +
                                       std::to_string(kVisualDims));
  }
  for (double v : entry.vector) {
    if (!std::isfinite(v)) throw Error(ErrorCode::format, "visual entry '" + entry.report_id + "' is not finite");
  }
  if (entry.concepts.size() < 2) {
    throw Error(ErrorCode::format, "visual entry '" + entry.report_id + "' needs at least two concepts");
  }
  for (std::size_t i = 0; i < entry.concepts.size(); ++i) {
    const double p = entry.concepts[i].prob;
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::format, "visual entry '" + entry.report_id + "' has concept prob outside [0,1]");
    }
    if (i > 0 && p > entry.concepts[i - 1].prob) {
      throw Error(ErrorCode::format, "visual entry '" + entry.report_id + "' concepts not sorted by prob");
    }
  }
}

VisualTable load_visual_features(const fs::path& path, std::vector<std::string>* failed) {
  auto in = open_in(path);
  VisualTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    VisualFeatureEntry entry;
    try {
      const json j = json::parse(line);
      entry.report_id = j.at("report_id").get<std::string>();
      if (j.contains("error") && !j.contains("vector")) {
        if (failed) failed->push_back(entry.report_id);
        continue;
      }
      entry.vector = j.at("vector").get<std::vector<double>>();
      for (const auto& c : j.at("concepts")) {
        entry.concepts.push_back({c.at("label").get<std::string>(), c.at("prob").get<double>()});
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse, at_line(path, line_no) + e.what());
    }
    try {
      check_visual_entry(entry);
    } catch (const Error& e) {
      throw Error(ErrorCode::format, at_line(path, line_no) + e.what());
    }
    const std::string id = entry.report_id;
    if (!table.emplace(id, std::move(entry)).second) {
      throw Error(ErrorCode::format, at_line(path, line_no) + "duplicate report id '" + id + "'");
    }
  }
  return table;
}

void save_visual_features(const VisualTable& table, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& [id, entry] : table) {
    check_visual_entry(entry);
    out << "{\"concepts\":[";
    for (std::size_t i = 0; i < entry.concepts.size(); ++i) {
      if (i) out << ',';
      out << "{\"label\":" << json(entry.concepts[i].label).dump()
          << ",\"prob\":" << format_double(entry.concepts[i].prob) << '}';
    }
    out << "],\"report_id\":" << json(id).dump() << ",\"vector\":[";
    for (std::size_t i = 0; i < entry.vector.size(); ++i) {
      if (i) out << ',';
      out << format_double(entry.vector[i]);
    }
    out << "]}\n";
  }
}

NodeEmbeddings load_embeddings(const fs::path& path) {
  auto in = open_in(path);
  NodeEmbeddings emb;
  std::vector<double> values;
  std::size_t dims = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    std::size_t start = 0;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::parse, at_line(path, line_no) + "no vector");
    emb.node_ids.push_back(line.substr(0, tab));
    std::size_t count = 0;
    start = tab + 1;
    while (true) {
      tab = line.find('\t', start);
      const std::string_view field(line.data() + start,
                                   (tab == std::string::npos ? line.size() : tab) - start);
      try {
        values.push_back(parse_double(field));
      } catch (const Error&) {
        throw Error(ErrorCode::parse, at_line(path, line_no) + "bad value '" + std::string(field) + "'");
      }
      ++count;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (dims == 0) dims = count;
    if (count != dims) throw Error(ErrorCode::format, at_line(path, line_no) + "inconsistent width");
  }
  emb.matrix = Matrix(emb.node_ids.size(), dims, std::move(values));
  return emb;
}

void save_embeddings(const NodeEmbeddings& embeddings, const fs::path& path) {
  auto out = open_out(path);
  for (std::size_t r = 0; r < embeddings.node_ids.size(); ++r) {
    out << embeddings.node_ids[r];
    for (double v : embeddings.matrix.row(r)) out << '\t' << format_double(v);
    out << '\n';
  }
}

FeatureBlock load_block(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::format, path.string() + ": empty block file");
  strip_cr(line);
  auto split_tabs = [](const std::string& s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = s.find('\t', start);
      parts.push_back(s.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return parts;
  };
  const auto meta = split_tabs(line);
  if (meta.size() != 3 || meta[0] != "#block") throw Error(ErrorCode::format, path.string() + ": bad block preamble");
  if (!std::getline(in, line)) throw Error(ErrorCode::format, path.string() + ": missing header");
  strip_cr(line);
  auto header = split_tabs(line);
  if (header.empty() || header[0] != "report_id") throw Error(ErrorCode::format, path.string() + ": bad header");
  std::vector<std::string> columns(header.begin() + 1, header.end());
  if (columns.size() == 1 && columns[0].empty()) columns.clear();
  std::vector<std::string> ids;
  std::vector<double> values;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != columns.size() + 1) {
      throw Error(ErrorCode::format, at_line(path, line_no) + "row width mismatch");
    }
    ids.push_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c) values.push_back(field_double(path, line_no, fields[c], "value"));
  }
  Matrix matrix(ids.size(), columns.size(), std::move(values));
  return FeatureBlock(meta[1], block_kind_from_string(meta[2]), std::move(ids), std::move(matrix),
                      std::move(columns));
}

void save_block(const FeatureBlock& block, const fs::path& path) {
  auto out = open_out(path);
  out << "#block\t" << block.name() << '\t' << to_string(block.kind()) << '\n';
  out << "report_id";
  for (const auto& c : block.column_names()) out << '\t' << c;
  out << '\n';
  for (std::size_t r = 0; r < block.rows(); ++r) {
    out << block.report_ids()[r];
    for (double v : block.matrix().row(r)) out << '\t' << format_double(v);
    out << '\n';
  }
}

}  // namespace urbanfuse
