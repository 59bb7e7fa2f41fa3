#include "sdm/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "sdm/errors.hpp"
#include "sdm/scaling.hpp"
#include "sdm/smoothers.hpp"

namespace sdm {

StudySettings StudySettings::from_config(const Config& c) {
  StudySettings s;
  s.grid_n = static_cast<int>(c.get_int("grid_n", s.grid_n));
  s.cov.sigma2 = c.get_double("sigma2", s.cov.sigma2);
  s.cov.phi = c.get_double("phi", s.cov.phi);
  s.cov.nugget = c.get_double("nugget", s.cov.nugget);
  s.replicates = static_cast<int>(c.get_int("T", s.replicates));
  s.swirl_strength = c.get_double("swirl_strength", s.swirl_strength);
  s.swirl_radius = c.get_double("swirl_radius", s.swirl_radius);
  s.seed = static_cast<std::uint64_t>(c.get_int("seed", static_cast<long long>(s.seed)));
  s.fit.k1 = static_cast<int>(c.get_int("k1", s.fit.k1));
  s.fit.k2 = static_cast<int>(c.get_int("k2", s.fit.k2));
  s.fit.epsilon = c.get_optional("epsilon");
  s.fit.tol = c.get_double("tol", s.fit.tol);
  s.fit.max_outer = static_cast<int>(c.get_int("max_outer", s.fit.max_outer));
  s.fit.ridge = c.get_optional("ridge");
  s.fit.seed = s.seed;
  s.cov.validate();
  if (s.grid_n < 2) throw DataError("config: grid_n must be >= 2");
  if (s.replicates < 2) throw DataError("config: T must be >= 2");
  return s;
}

Coords unit_grid_sites(int g) {
  Coords x(g * g, 2);
  for (int b = 0; b < g; ++b) {
    for (int a = 0; a < g; ++a) {
      x.row(a + g * b) << static_cast<double>(a) / (g - 1), static_cast<double>(b) / (g - 1);
    }
  }
  return x;
}

StudyData simulate_study(const StudySettings& s) {
  StudyData out;
  Dataset& d = out.data;
  d.sites = unit_grid_sites(s.grid_n);
  const AnalyticMap truth(s.swirl());
  out.truth_deformed = truth.apply(d.sites);
  d.replicates = simulate_grf(out.truth_deformed, s.cov, s.replicates, s.seed);
  for (Eigen::Index i = 0; i < d.sites.rows(); ++i) d.ids.push_back("s" + std::to_string(i + 1));
  for (int t = 0; t < s.replicates; ++t) d.times.push_back(std::to_string(t + 1));
  out.truth_cov = cross_covariance(out.truth_deformed, out.truth_deformed, s.cov);
  return out;
}

std::vector<double> upper_entries(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

EntryComparison compare_entries(const std::vector<double>& truth, const std::vector<double>& estimate) {
  if (truth.size() != estimate.size() || truth.size() < 2) throw ArgumentError("compare_entries: size mismatch");
  const double n = static_cast<double>(truth.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    mx += truth[k];
    my += estimate[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0, mse = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double dx = truth[k] - mx, dy = estimate[k] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    mse += (estimate[k] - truth[k]) * (estimate[k] - truth[k]);
  }
  EntryComparison c;
  c.slope = sxx > 0 ? sxy / sxx : 0.0;
  c.intercept = my - c.slope * mx;
  c.correlation = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  c.mse = mse / n;
  return c;
}

Eigen::MatrixXd model_covariance(const DeformModel& model) {
  const Coords y = model.map().apply(model.sites);
  return cross_covariance(y, y, model.cov);
}

StudyData cmd_simulate(const Config& config, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed) {
  StudySettings s = StudySettings::from_config(config);
  if (seed) s.seed = *seed;
  StudyData study = simulate_study(s);
  std::filesystem::create_directories(out_dir);
  write_long_csv(study.data, out_dir / "data.csv");

  std::ofstream map(out_dir / "truth_map.csv");
  map << "x1,x2,y1,y2\n";
  for (Eigen::Index i = 0; i < study.data.n(); ++i) {
    map << format_double(study.data.sites(i, 0)) << ',' << format_double(study.data.sites(i, 1)) << ','
        << format_double(study.truth_deformed(i, 0)) << ',' << format_double(study.truth_deformed(i, 1)) << '\n';
  }
  std::ofstream cov(out_dir / "truth_cov.csv");
  cov << "i,j,cov\n";
  for (Eigen::Index i = 0; i < study.data.n(); ++i) {
    for (Eigen::Index j = i; j < study.data.n(); ++j) {
      const double v = study.truth_cov(i, j) + (i == j ? s.cov.nugget : 0.0);
      cov << i + 1 << ',' << j + 1 << ',' << format_double(v) << '\n';
    }
  }
  if (!map || !cov) throw DataError("simulate: failed writing truth files under " + out_dir.string());
  return study;
}

ModelFile cmd_estimate(const EstimateOptions& o) {
  IngestReport report = ingest(o.data);
  for (const auto& id : report.dropped) {
    std::cerr << "dropped station " << id << " (incomplete periods)\n";
  }
  FitConfig fc;
  fc.k1 = fc.k2 = o.k;
  fc.epsilon = o.epsilon;
  if (o.tol) fc.tol = *o.tol;
  if (o.max_outer) fc.max_outer = *o.max_outer;
  ModelFile file{fit(report.data, fc), report.data};
  write_model(file, o.out);
  std::filesystem::path grid_out = o.grid_out.value_or(
      o.out.parent_path() / (o.out.stem().string() + "_grid.csv"));
  write_deformed_grid(file.model.map(), o.grid_points, grid_out);
  return file;
}

KrigingResult cmd_predict(const PredictOptions& o) {
  const ModelFile file = read_model(o.model);
  const auto& times = file.data.times;
  const auto it = std::find(times.begin(), times.end(), o.time);
  if (it == times.end()) throw DataError("predict: time label '" + o.time + "' not in the model data");
  const Eigen::VectorXd z = file.data.replicates.col(it - times.begin());
  const Coords pts = read_points(o.grid);
  const KrigingResult kr = krige(file.model, z, pts);

  if (o.out.has_parent_path()) std::filesystem::create_directories(o.out.parent_path());
  std::ofstream out(o.out);
  if (!out) throw DataError("cannot write " + o.out.string());
  out << "x1,x2,mean,variance\n";
  for (Eigen::Index k = 0; k < pts.rows(); ++k) {
    out << format_double(pts(k, 0)) << ',' << format_double(pts(k, 1)) << ',' << format_double(kr.mean[k]) << ','
        << format_double(kr.variance[k]) << '\n';
  }
  if (o.draws > 0) {
    const Eigen::MatrixXd draws = conditional_simulate(file.model, z, pts, o.draws, o.seed);
    std::ofstream dr(o.out.parent_path() / (o.out.stem().string() + "_draws.csv"));
    dr << "x1,x2";
    for (int d = 0; d < o.draws; ++d) dr << ",draw_" << d + 1;
    dr << '\n';
    for (Eigen::Index k = 0; k < pts.rows(); ++k) {
      dr << format_double(pts(k, 0)) << ',' << format_double(pts(k, 1));
      for (int d = 0; d < o.draws; ++d) dr << ',' << format_double(draws(k, d));
      dr << '\n';
    }
  }
  return kr;
}

namespace {

void write_scatter(const std::filesystem::path& path, const std::vector<double>& truth,
                   const std::vector<double>& est) {
  std::ofstream out(path);
  out << "true,estimated\n";
  for (std::size_t k = 0; k < truth.size(); ++k) out << format_double(truth[k]) << ',' << format_double(est[k]) << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace

std::vector<CompareRow> cmd_compare(const Config& config, const std::filesystem::path& out_dir) {
  const StudySettings s = StudySettings::from_config(config);
  const StudyData study = simulate_study(s);
  const Dataset& data = study.data;
  const std::vector<double> truth = upper_entries(study.truth_cov);
  std::filesystem::create_directories(out_dir);

  std::vector<CompareRow> rows;
  for (int k : {4, 6, 8}) {
    FitConfig fc = s.fit;
    fc.k1 = fc.k2 = k;
    const DeformModel model = fit(data, fc);
    const std::vector<double> est = upper_entries(model_covariance(model));
    write_scatter(out_dir / ("scatter_bdef_k" + std::to_string(k) + ".csv"), truth, est);
    CompareRow row;
    row.method = "bdef";
    row.k = k;
    row.dof = static_cast<double>(k * k);
    row.stats = compare_entries(truth, est);
    row.min_jacobian = min_jacobian(model.map());
    rows.push_back(row);
  }

  const DispersionMatrix disp = sample_dispersions(data.replicates);
  const Eigen::MatrixXd centered = data.centered();
  for (int k : {4, 6, 8}) {
    const double dof = static_cast<double>(k * k);
    if (dof >= static_cast<double>(data.n())) continue;
    const double lambda = tps_lambda_for_dof(data.sites, dof);
    const CoordinateSmoother smoother = [&](const Coords& y) { return fit_tps(data.sites, y, lambda).apply(data.sites); };
    const SgResult sg = sg_initialize(disp, data.sites, smoother, {s.fit.sg_max_iter, s.fit.sg_tol});
    const TpsModel tps = fit_tps(data.sites, sg.configuration, lambda);
    const Coords y = tps.apply(data.sites);
    CovParams cov;
    try {
      cov = cov_from_variogram(fit_variogram(pairwise_distances(y), disp.upper()).model);
      cov.nugget = std::max(cov.nugget, 1e-6 * cov.sigma2);
    } catch (const FitError&) {
      cov = CovParams{1.0, 0.3, 1.0};
    }
    cov = step_cov_coords(centered, y, cov).cov;
    const std::vector<double> est = upper_entries(cross_covariance(y, y, cov));
    write_scatter(out_dir / ("scatter_sg_tps_k" + std::to_string(k) + ".csv"), truth, est);
    CompareRow row;
    row.method = "sg_tps";
    row.k = k;
    row.lambda = lambda;
    row.dof = tps_effective_dof(data.sites, lambda);
    row.stats = compare_entries(truth, est);
    row.min_jacobian = std::numeric_limits<double>::quiet_NaN();
    row.folds = tps_folds(tps, 0.0, 1.0, 0.0, 1.0, 100);
    rows.push_back(row);
  }

  std::ofstream rep(out_dir / "report.csv");
  rep << "method,k,lambda,dof,slope,intercept,correlation,mse,min_jacobian,folds\n";
  for (const auto& r : rows) {
    rep << r.method << ',' << r.k << ',' << format_double(r.lambda) << ',' << format_double(r.dof) << ','
        << format_double(r.stats.slope) << ',' << format_double(r.stats.intercept) << ','
        << format_double(r.stats.correlation) << ',' << format_double(r.stats.mse) << ','
        << (std::isnan(r.min_jacobian) ? std::string("NA") : format_double(r.min_jacobian)) << ','
        << (r.folds ? 1 : 0) << '\n';
  }
  return rows;
}

}  // namespace sdm
