#pragma once

// File formats: long-format station CSV, flat key=value config files, the
// JSON model file, and plot-ready CSV writers.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdm/estimation.hpp"

namespace sdm {

inline constexpr int kModelSchemaVersion = 1;

struct IngestReport {
  Dataset data;
  std::vector<std::string> dropped;  // stations missing at least one period
};

/// Reads `station_id,x1,x2,time,value` rows; keeps stations observed in
/// every period. Throws DataError (with line numbers) on malformed input,
/// duplicate (station, time) rows, or fewer than 4 complete stations.
IngestReport ingest(const std::filesystem::path& path);

/// Writes a dataset back in the long format.
void write_long_csv(const Dataset& data, const std::filesystem::path& path);

/// Flat `key = value` text, `#` comments. Unknown keys are kept.
class Config {
 public:
  Config() = default;
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::optional<double> get_optional(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Everything `predict` needs: the fitted model plus the data it conditions on.
struct ModelFile {
  DeformModel model;
  Dataset data;
};

void write_model(const ModelFile& file, const std::filesystem::path& path);
/// Throws DataError on unknown schema versions or malformed content.
ModelFile read_model(const std::filesystem::path& path);

/// Reads a `x1,x2` CSV of prediction points.
Coords read_points(const std::filesystem::path& path);

/// Full-precision (17 significant digits) rendering used by every writer.
std::string format_double(double v);

/// Regular g x g grid of G-points over the model domain and their D-images,
/// as `gx1,gx2,dx1,dx2` rows.
void write_deformed_grid(const DeformationMap& map, int g, const std::filesystem::path& path);

}  // namespace sdm
