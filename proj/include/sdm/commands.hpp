#pragma once

// Command implementations behind the `sdm` executable. Each command is
// deterministic given its seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdm/fields.hpp"
#include "sdm/io.hpp"

namespace sdm {

/// Simulation-study settings read from a config file.
struct StudySettings {
  int grid_n = 11;  // sites per axis on [0,1]^2
  CovParams cov{1.0, 0.25, 1.0};
  int replicates = 100;
  double swirl_strength = 1.5;
  double swirl_radius = 0.35;
  FitConfig fit;
  std::uint64_t seed = 1;

  static StudySettings from_config(const Config& c);
  SwirlMap swirl() const { return SwirlMap{Point(0.5, 0.5), swirl_strength, swirl_radius}; }
};

/// Regular g x g sites on [0,1]^2, x1 varying fastest.
Coords unit_grid_sites(int g);

/// Simulated study data with the true deformation and covariance.
struct StudyData {
  Dataset data;
  Coords truth_deformed;
  Eigen::MatrixXd truth_cov;  // without nugget on the diagonal
};
StudyData simulate_study(const StudySettings& s);

/// Upper-triangle (i < j) entries of a square matrix.
std::vector<double> upper_entries(const Eigen::MatrixXd& m);

/// Regression of estimated on true entries.
struct EntryComparison {
  double slope = 0.0;
  double intercept = 0.0;
  double correlation = 0.0;
  double mse = 0.0;
};
EntryComparison compare_entries(const std::vector<double>& truth, const std::vector<double>& estimate);

/// Covariance (no nugget) implied at the sites by a fitted model.
Eigen::MatrixXd model_covariance(const DeformModel& model);

/// Writes data.csv, truth_map.csv (x1,x2,y1,y2) and truth_cov.csv (i,j,cov).
StudyData cmd_simulate(const Config& config, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed);

struct EstimateOptions {
  std::filesystem::path data;
  int k = 4;
  std::optional<double> epsilon;
  std::optional<double> tol;
  std::optional<int> max_outer;
  std::filesystem::path out;
  std::optional<std::filesystem::path> grid_out;  // default <out stem>_grid.csv
  int grid_points = 21;
};

/// Ingests, fits, writes the model file and the deformed-grid CSV.
ModelFile cmd_estimate(const EstimateOptions& o);

struct PredictOptions {
  std::filesystem::path model;
  std::filesystem::path grid;
  std::string time;
  std::filesystem::path out;
  int draws = 0;
  std::uint64_t seed = 1;
};

/// Kriging mean/variance at the grid points (`x1,x2,mean,variance`); with
/// draws > 0 also writes <out stem>_draws.csv.
KrigingResult cmd_predict(const PredictOptions& o);

struct CompareRow {
  std::string method;   // "bdef" or "sg_tps"
  int k = 0;            // B-spline K, or the K whose K^2 the TPS dof matches
  double lambda = 0.0;  // TPS smoothing parameter (0 for bdef)
  double dof = 0.0;
  EntryComparison stats;
  double min_jacobian = 0.0;  // bdef only
  bool folds = false;         // numeric sign change of |J| (TPS only)
};

/// Fits both estimators on one simulated data set for K in {4, 6, 8};
/// TPS rows are skipped when K^2 is not below the number of sites.
std::vector<CompareRow> cmd_compare(const Config& config, const std::filesystem::path& out_dir);

}  // namespace sdm
