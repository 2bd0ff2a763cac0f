#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "canopyscan/common/errors.hpp"
#include "canopyscan/ingest/ingest.hpp"
#include "json.hpp"

namespace canopyscan::ingest {

InventoryFormat inventory_format_from_string(const std::string& s) {
  if (s == "csv") return InventoryFormat::csv;
  if (s == "geojson") return InventoryFormat::geojson;
  throw ConfigError("unknown inventory format '" + s + "' (expected csv or geojson)");
}

std::string normalize_genus(const std::string& genus) {
  std::string out;
  std::size_t b = genus.find_first_not_of(" \t");
  std::size_t e = genus.find_last_not_of(" \t");
  if (b == std::string::npos) return out;
  for (std::size_t i = b; i <= e; ++i) {
    const auto c = static_cast<unsigned char>(genus[i]);
    // only the first letter is capitalised: "quercus RUBRA" -> "Quercus rubra"
    out.push_back(static_cast<char>(out.empty() ? std::toupper(c) : std::tolower(c)));
  }
  return out;
}

namespace {

struct CsvRow {
  int line = 0;
  std::vector<std::string> fields;
};

// RFC 4180-style splitter: quoted fields may contain commas, doubled quotes
// and newlines. Each row remembers the physical line it starts on.
std::vector<CsvRow> split_csv(const std::string& text) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false, any = false;
  int line = 1;
  row.line = 1;
  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{};
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!any) row.line = line, any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') field.push_back('"'), ++i;
        else quoted = false;
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') quoted = true;
    else if (c == ',') end_field();
    else if (c == '\r') continue;
    else if (c == '\n') {
      end_row();
      ++line;
    } else field.push_back(c);
  }
  if (any || !field.empty() || !row.fields.empty()) end_row();
  return rows;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc{} && ptr == t.data() + t.size() && std::isfinite(out);
}

// Shared row validation; returns an error message or empty.
std::string check_record(TreeRecord& r) {
  if (r.tree_id.empty()) return "missing tree_id";
  if (std::abs(r.latitude) > 90.0) return "latitude out of range";
  if (std::abs(r.longitude) > 180.0) return "longitude out of range";
  r.genus = normalize_genus(r.genus);
  if (r.genus.empty()) return "missing genus";
  if (r.species && trim(*r.species).empty()) r.species.reset();
  return {};
}

}  // namespace

InventoryResult parse_csv_inventory(const std::string& text) {
  const auto rows = split_csv(text);
  if (rows.empty()) throw FormatError("inventory CSV has no header");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    std::string name = trim(rows[0].fields[i]);
    if (i == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name = name.substr(3);  // BOM
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    col[name] = i;
  }
  for (const char* need : {"tree_id", "latitude", "longitude", "genus"})
    if (!col.count(need)) throw FormatError(std::string("inventory CSV lacks required column '") + need + "'");
  const bool has_species = col.count("species") > 0;

  InventoryResult out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto field = [&](const char* name) -> std::string {
      const std::size_t i = col.at(name);
      return i < row.fields.size() ? row.fields[i] : std::string{};
    };
    TreeRecord rec;
    rec.tree_id = trim(field("tree_id"));
    if (!parse_double(field("latitude"), rec.latitude)) {
      out.errors.push_back({row.line, "unparseable latitude '" + field("latitude") + "'"});
      continue;
    }
    if (!parse_double(field("longitude"), rec.longitude)) {
      out.errors.push_back({row.line, "unparseable longitude '" + field("longitude") + "'"});
      continue;
    }
    rec.genus = field("genus");
    if (has_species) rec.species = trim(field("species"));
    if (auto err = check_record(rec); !err.empty()) {
      out.errors.push_back({row.line, err});
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

InventoryResult parse_geojson_inventory(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("inventory GeoJSON: ") + e.what());
  }
  if (!j.is_object() || j.value("type", "") != "FeatureCollection" || !j.contains("features") ||
      !j["features"].is_array())
    throw FormatError("inventory GeoJSON must be a FeatureCollection");

  InventoryResult out;
  int n = 0;
  for (const auto& f : j["features"]) {
    ++n;
    try {
      const auto& props = f.at("properties");
      const auto& geom = f.at("geometry");
      if (geom.at("type").get<std::string>() != "Point") {
        out.errors.push_back({n, "geometry is not a Point"});
        continue;
      }
      TreeRecord rec;
      const auto& id = props.contains("tree_id") ? props["tree_id"] : f.at("id");
      rec.tree_id = id.is_string() ? id.get<std::string>() : id.dump();
      rec.longitude = geom.at("coordinates").at(0).get<double>();
      rec.latitude = geom.at("coordinates").at(1).get<double>();
      rec.genus = props.value("genus", std::string{});
      if (props.contains("species") && props["species"].is_string()) rec.species = props["species"].get<std::string>();
      if (auto err = check_record(rec); !err.empty()) {
        out.errors.push_back({n, err});
        continue;
      }
      out.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({n, std::string("malformed feature: ") + e.what()});
    }
  }
  return out;
}

InventoryResult load_tree_inventory(const std::filesystem::path& path, InventoryFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open inventory " + path.string());
  const std::string text(std::istreambuf_iterator<char>(in), {});
  return format == InventoryFormat::csv ? parse_csv_inventory(text) : parse_geojson_inventory(text);
}

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kRadius = 6371008.8;
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * kDeg, dlon = (lon2 - lon1) * kDeg;
  const double s1 = std::sin(dlat / 2), s2 = std::sin(dlon / 2);
  const double a = s1 * s1 + std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) * s2 * s2;
  return 2.0 * kRadius * std::asin(std::min(1.0, std::sqrt(a)));
}

MatchResult match_trees_to_images(std::span<const TreeRecord> trees, std::span<const StreetImageRecord> images,
                                  double max_radius_m) {
  if (!(max_radius_m > 0.0)) throw ConfigError("match radius must be positive");
  MatchResult out;
  for (const auto& t : trees) {
    const StreetImageRecord* best = nullptr;
    double best_d = 0.0;
    for (const auto& img : images) {
      const double d = haversine_m(t.latitude, t.longitude, img.latitude, img.longitude);
      if (d > max_radius_m) continue;
      if (!best || d < best_d || (d == best_d && img.image_id < best->image_id)) best = &img, best_d = d;
    }
    if (best) out.assignments.push_back({t.tree_id, best->image_id, best_d});
    else out.unmatched.push_back(t.tree_id);
  }
  return out;
}

}  // namespace canopyscan::ingest
