#include "weylma/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "weylma/geometry.hpp"
#include "weylma/oracles.hpp"
#include "weylma/util.hpp"

namespace weylma {

using nlohmann::json;

// --- config -------------------------------------------------------------------

void SolveConfig::validate() const {
  if (k_list.empty()) throw ConfigError("config: k_list must be nonempty");
  for (std::size_t i = 1; i < k_list.size(); ++i)
    if (!(k_list[i] > k_list[i - 1]))
      throw ConfigError("config: k_list must be strictly increasing");
  for (double k : k_list)
    if (!(k > 0.0)) throw ConfigError("config: k values must be positive");
  if (m_schedule.size() != k_list.size())
    throw ConfigError("config: m_schedule must match k_list length");
  for (int m : m_schedule)
    if (m < 2) throw ConfigError("config: m values must be >= 2");
  if (!(tol > 1e-12 && tol < 1e-2))
    throw ConfigError("config: tol must lie in (1e-12, 1e-2)");
  if (grid_resolution < 16)
    throw ConfigError("config: grid_resolution must be >= 16");
  if (!(overflow_radius > 0.0 && overflow_radius <= 700.0))
    throw ConfigError("config: overflow_radius out of range");
  if (!(eps_wall > 0.0 && eps_wall < 1.0))
    throw ConfigError("config: eps_wall out of range");
  if (!reg_one_over_k && reg_fixed < 0.0)
    throw ConfigError("config: fixed regularization must be >= 0");
  if (!(root_scale > 0.0)) throw ConfigError("config: root_scale must be > 0");
  if (group == "custom" && custom_roots.empty())
    throw ConfigError("config: custom group needs custom_roots");
}

RootSystem SolveConfig::make_roots() const {
  try {
    if (group == "custom") return RootSystem::custom(custom_roots, root_scale);
    return RootSystem::catalog(group, root_scale);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

DensitySpec SolveConfig::make_spec(double eps) const {
  try {
    return DensitySpec(make_roots(), InvariantExpr::parse(u_expr), eps,
                       overflow_radius);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

namespace {

json config_to_json(const SolveConfig& c) {
  json j;
  j["group"] = c.group;
  if (!c.custom_roots.empty()) {
    json roots = json::array();
    for (const Vec& r : c.custom_roots) {
      json row = json::array();
      for (Eigen::Index i = 0; i < r.size(); ++i) row.push_back(r[i]);
      roots.push_back(row);
    }
    j["custom_roots"] = roots;
  }
  j["root_scale"] = c.root_scale;
  j["u"] = c.u_expr;
  j["k_list"] = c.k_list;
  j["m_schedule"] = c.m_schedule;
  j["grid_resolution"] = c.grid_resolution;
  j["lump_resolution"] = c.lump_resolution;
  j["balance_resolution"] = c.balance_resolution;
  j["tol"] = c.tol;
  j["seed"] = c.seed;
  j["overflow_radius"] = c.overflow_radius;
  j["eps_wall"] = c.eps_wall;
  if (c.reg_one_over_k)
    j["regularization"] = "one_over_k";
  else
    j["regularization"] = c.reg_fixed;
  j["max_iter"] = c.max_iter;
  return j;
}

SolveConfig config_from_json(const json& j) {
  SolveConfig c;
  try {
    if (j.contains("group")) c.group = j.at("group").get<std::string>();
    if (j.contains("custom_roots")) {
      for (const auto& row : j.at("custom_roots")) {
        Vec r(static_cast<Eigen::Index>(row.size()));
        Eigen::Index i = 0;
        for (const auto& v : row) r[i++] = v.get<double>();
        c.custom_roots.push_back(r);
      }
      if (c.group != "custom" && !c.custom_roots.empty()) c.group = "custom";
    }
    if (j.contains("root_scale")) c.root_scale = j.at("root_scale").get<double>();
    if (j.contains("u")) c.u_expr = j.at("u").get<std::string>();
    if (j.contains("k_list"))
      c.k_list = j.at("k_list").get<std::vector<double>>();
    if (j.contains("m_schedule"))
      c.m_schedule = j.at("m_schedule").get<std::vector<int>>();
    if (j.contains("grid_resolution"))
      c.grid_resolution = j.at("grid_resolution").get<int>();
    if (j.contains("lump_resolution"))
      c.lump_resolution = j.at("lump_resolution").get<int>();
    if (j.contains("balance_resolution"))
      c.balance_resolution = j.at("balance_resolution").get<int>();
    if (j.contains("tol")) c.tol = j.at("tol").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("overflow_radius"))
      c.overflow_radius = j.at("overflow_radius").get<double>();
    if (j.contains("eps_wall")) c.eps_wall = j.at("eps_wall").get<double>();
    if (j.contains("regularization")) {
      const auto& reg = j.at("regularization");
      if (reg.is_string()) {
        if (reg.get<std::string>() != "one_over_k")
          throw ConfigError("config: unknown regularization policy");
        c.reg_one_over_k = true;
      } else {
        c.reg_one_over_k = false;
        c.reg_fixed = reg.get<double>();
      }
    }
    if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

SolveConfig config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return config_from_json(j);
}

SolveConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_string(buffer.str());
}

std::string config_to_json_string(const SolveConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

// --- artifact -------------------------------------------------------------------

TargetCloud StageRecord::rebuild_cloud() const {
  TargetCloud cloud;
  cloud.points = points;
  cloud.masses = masses;
  cloud.orbit_of = orbit_of;
  int orbit_count = 0;
  for (int o : orbit_of) orbit_count = std::max(orbit_count, o + 1);
  cloud.orbits.assign(static_cast<std::size_t>(orbit_count), {});
  for (std::size_t j = 0; j < orbit_of.size(); ++j)
    cloud.orbits[static_cast<std::size_t>(orbit_of[j])].push_back(
        static_cast<int>(j));
  cloud.total_mass = pairwise_sum(masses);
  cloud.radius = R;
  return cloud;
}

ConvexPotential StageRecord::rebuild_potential() const {
  return build_potential(rebuild_cloud(), power_weights);
}

namespace {

json stage_to_json(const StageRecord& s) {
  json j;
  j["k"] = s.k;
  j["eps"] = s.eps;
  j["R"] = s.R;
  json pts = json::array();
  for (const Vec& p : s.points)
    for (Eigen::Index i = 0; i < p.size(); ++i) pts.push_back(p[i]);
  j["points"] = pts;
  j["masses"] = s.masses;
  j["power_weights"] = s.power_weights;
  j["orbit_of"] = s.orbit_of;
  j["diagnostics"] = {
      {"max_rel_cell_residual", s.max_rel_cell_residual},
      {"iterations", s.iterations},
      {"empty_cells", s.empty_cells},
      {"duality_gap_estimate", s.duality_gap_estimate},
      {"per_point_max_residual", s.per_point_max_residual},
      {"orbit_mass_spread", s.orbit_mass_spread},
  };
  j["sup_diff_prev"] = s.sup_diff_prev;
  j["lipschitz_bound"] = s.lipschitz_bound;
  return j;
}

StageRecord stage_from_json(const json& j, int dim) {
  StageRecord s;
  s.k = j.at("k").get<double>();
  s.eps = j.at("eps").get<double>();
  s.R = j.at("R").get<double>();
  const std::vector<double> flat = j.at("points").get<std::vector<double>>();
  if (flat.size() % static_cast<std::size_t>(dim) != 0)
    throw ConfigError("artifact: point array length mismatch");
  for (std::size_t i = 0; i < flat.size(); i += static_cast<std::size_t>(dim)) {
    Vec p(dim);
    for (int d = 0; d < dim; ++d) p[d] = flat[i + static_cast<std::size_t>(d)];
    s.points.push_back(p);
  }
  s.masses = j.at("masses").get<std::vector<double>>();
  s.power_weights = j.at("power_weights").get<std::vector<double>>();
  s.orbit_of = j.at("orbit_of").get<std::vector<int>>();
  const json& d = j.at("diagnostics");
  s.max_rel_cell_residual = d.at("max_rel_cell_residual").get<double>();
  s.iterations = d.at("iterations").get<int>();
  s.empty_cells = d.at("empty_cells").get<int>();
  s.duality_gap_estimate = d.at("duality_gap_estimate").get<double>();
  s.per_point_max_residual = d.at("per_point_max_residual").get<double>();
  s.orbit_mass_spread = d.at("orbit_mass_spread").get<double>();
  s.sup_diff_prev = j.at("sup_diff_prev").get<double>();
  s.lipschitz_bound = j.at("lipschitz_bound").get<double>();
  return s;
}

}  // namespace

std::string artifact_to_json_string(const RunArtifact& artifact) {
  json j;
  j["version"] = artifact.version;
  j["kind"] = artifact.kind;
  j["config"] = config_to_json(artifact.config);
  json stages = json::array();
  for (const StageRecord& s : artifact.stages) stages.push_back(stage_to_json(s));
  j["stages"] = stages;
  return j.dump(2) + "\n";
}

RunArtifact artifact_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("artifact: parse error: ") + e.what());
  }
  RunArtifact artifact;
  try {
    artifact.version = j.at("version").get<std::string>();
    artifact.kind = j.at("kind").get<std::string>();
    artifact.config = config_from_json(j.at("config"));
    const int dim = artifact.config.make_roots().rank();
    for (const auto& sj : j.at("stages"))
      artifact.stages.push_back(stage_from_json(sj, dim));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("artifact: malformed: ") + e.what());
  }
  return artifact;
}

void save_artifact(const RunArtifact& artifact, const std::string& path) {
  write_file_atomic(path, artifact_to_json_string(artifact));
}

RunArtifact load_artifact(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("artifact: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return artifact_from_json_string(buffer.str());
}

// --- solve ---------------------------------------------------------------------

RunArtifact run_solve(const SolveConfig& config) {
  config.validate();
  const DensitySpec base = config.make_spec(0.0);

  SequenceOptions options;
  options.grid_resolution = config.grid_resolution;
  options.lump_resolution = config.lump_resolution;
  options.tol = config.tol;
  options.max_iter = config.max_iter;
  options.seed = config.seed;
  options.one_over_k = config.reg_one_over_k;
  options.fixed_eps = config.reg_fixed;
  options.balance_resolution = config.balance_resolution;

  std::vector<SequenceStage> stages;
  try {
    stages = solve_sequence(base, config.k_list, config.m_schedule, options);
  } catch (const std::exception& e) {
    throw SolverError(std::string("solve failed: ") + e.what());
  }

  RunArtifact artifact;
  artifact.config = config;
  for (const SequenceStage& stage : stages) {
    StageRecord record;
    record.k = stage.k;
    record.eps = stage.eps;
    record.R = stage.R;
    record.points = stage.cloud.points;
    record.masses = stage.cloud.masses;
    record.power_weights = stage.power_weights;
    record.orbit_of = stage.cloud.orbit_of;
    record.max_rel_cell_residual = stage.diagnostics.max_rel_cell_residual;
    record.iterations = stage.diagnostics.iterations;
    record.empty_cells = stage.diagnostics.empty_cells;
    record.duality_gap_estimate = stage.diagnostics.duality_gap_estimate;
    record.per_point_max_residual = stage.diagnostics.per_point_max_residual;
    record.orbit_mass_spread = stage.diagnostics.orbit_mass_spread;
    record.sup_diff_prev = stage.sup_diff_prev;
    record.lipschitz_bound = stage.lipschitz_bound;
    artifact.stages.push_back(std::move(record));
  }
  return artifact;
}

RunArtifact make_synthetic_su2_artifact(double radius) {
  if (!(radius > 0.0 && radius <= 350.0))
    throw ConfigError("synthetic artifact: radius out of (0, 350]");
  RunArtifact artifact;
  artifact.kind = "synthetic_su2";
  artifact.config.group = "A1";
  artifact.config.k_list = {radius};
  artifact.config.m_schedule = {2};
  artifact.config.reg_one_over_k = false;
  artifact.config.reg_fixed = 0.0;
  StageRecord record;
  record.k = radius;
  record.eps = 0.0;
  record.R = su2_profile(radius).kp;
  artifact.stages.push_back(std::move(record));
  return artifact;
}

// --- verify --------------------------------------------------------------------

namespace {

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2]
               : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double default_stencil_radius(int dim, double R, int m_total,
                              std::size_t group_order) {
  if (dim == 1) return 2.0 * R * std::pow(m_total, -0.6);
  return 3.0 * R *
         std::pow(static_cast<double>(group_order) / m_total, 1.0 / dim);
}

}  // namespace

VerifySummary verify_artifact(const RunArtifact& artifact, int samples,
                              double stencil_radius, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("verify: samples must be >= 1");
  if (artifact.stages.empty())
    throw ConfigError("verify: artifact has no stages");
  const RootSystem rs = artifact.config.make_roots();
  const int dim = rs.rank();
  const StageRecord& stage = artifact.stages.back();
  const bool synthetic = artifact.kind == "synthetic_su2";
  const DensitySpec spec = artifact.config.make_spec(stage.eps);

  ConvexPotential potential;
  SourceGrid grid;
  double w = stencil_radius;
  VerifySummary summary;

  if (synthetic) {
    if (dim != 1) throw ConfigError("verify: synthetic artifact must be rank 1");
    if (w <= 0.0) w = 0.0;  // analytic derivatives; no stencil needed
  } else {
    potential = stage.rebuild_potential();
    grid = SourceGrid::build(spec, stage.k, artifact.config.grid_resolution);
    if (w <= 0.0)
      w = default_stencil_radius(dim, stage.R,
                                 static_cast<int>(stage.points.size()),
                                 rs.group_order());
    // Reproduce the stored residual diagnostic from the reloaded weights.
    TargetCloud cloud = stage.rebuild_cloud();
    AssignResult res = assign_cells(cloud, stage.power_weights, grid, false);
    double worst = 0.0;
    std::vector<double> nu_orbit(cloud.orbit_count(), 0.0),
        m_orbit(cloud.orbit_count(), 0.0);
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      nu_orbit[static_cast<std::size_t>(cloud.orbit_of[j])] += cloud.masses[j];
      m_orbit[static_cast<std::size_t>(cloud.orbit_of[j])] += res.masses[j];
    }
    for (std::size_t A = 0; A < cloud.orbit_count(); ++A)
      worst = std::max(worst, std::abs(nu_orbit[A] - m_orbit[A]) / nu_orbit[A]);
    summary.diagnostics_gap = std::abs(worst - stage.max_rel_cell_residual);
  }

  const double wall_clearance = artifact.config.eps_wall + w;
  const double r_max = synthetic ? 0.95 * stage.k : 0.9 * stage.k - 1.5 * w;
  if (!(r_max > wall_clearance))
    throw VerifyDomainError(
        "verify: no admissible samples inside the solved ball with this "
        "stencil radius");

  std::vector<std::string> header;
  for (int d = 0; d < dim; ++d) header.push_back("x" + std::to_string(d));
  header.insert(header.end(),
                {"defect", "defect_over_median", "cartan_pd", "dmu_positive",
                 "submersion_positive", "invariance_residual", "fit_residual",
                 "slope_spread"});
  CsvWriter csv(header);

  struct Row {
    Vec x;
    double defect;
    PositivityVerdict verdict;
    double invariance;
    double fit_residual;
    double slope_spread;
  };
  std::vector<Row> rows;
  Rng rng(seed ^ artifact.config.seed);

  for (int s = 0; s < samples; ++s) {
    Vec x(dim);
    bool found = false;
    for (int attempt = 0; attempt < 100000; ++attempt) {
      double n2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        x[d] = rng.uniform(-1.0, 1.0);
        n2 += x[d] * x[d];
      }
      if (n2 > 1.0) continue;
      x *= r_max;
      if (x.norm() < wall_clearance) continue;
      if (rs.wall_distance(x) < wall_clearance) continue;
      found = true;
      break;
    }
    if (!found)
      throw VerifyDomainError("verify: could not place samples in the chamber");

    Row row;
    row.x = x;
    if (synthetic) {
      const double t = std::abs(x[0]);
      const Su2Profile p = su2_profile(t);
      Vec grad(1);
      grad[0] = x[0] >= 0.0 ? p.kp : -p.kp;
      Mat hess(1, 1);
      hess(0, 0) = p.kpp;
      const SpectralMetric sm = spectral_data(rs, x, grad, hess);
      row.defect = ricci_defect(sm, spec.u_value(x));
      row.verdict = positivity_check(sm);
      row.invariance = 0.0;  // analytic profile is even in x
      for (const Mat& g : rs.group_elements()) {
        const Vec image = g * x;
        const double here = su2_profile(std::abs(x[0])).kp;
        const double there = su2_profile(std::abs(image[0])).kp;
        row.invariance = std::max(row.invariance, std::abs(here - there));
      }
      row.fit_residual = 0.0;
      row.slope_spread = 0.0;
    } else {
      const QuadraticFit fit = fit_local_quadratic(potential, x, w);
      const SpectralMetric sm = spectral_data(rs, x, fit.grad, fit.hess);
      row.defect = ricci_defect(sm, spec.u_value(x));
      row.verdict = positivity_check(sm);
      double inv = 0.0;
      const double base_value = potential.value(x);
      for (const Mat& g : rs.group_elements())
        inv = std::max(inv, std::abs(potential.value(g * x) - base_value));
      row.invariance = inv;
      row.fit_residual = fit.fit_residual;
      row.slope_spread = fit.slope_spread;
    }
    rows.push_back(std::move(row));
  }

  std::vector<double> defects;
  for (const Row& row : rows) defects.push_back(row.defect);
  summary.median_defect = median_of(defects);
  summary.samples = static_cast<int>(rows.size());
  for (const Row& row : rows) {
    const double normalized =
        summary.median_defect != 0.0 ? row.defect / summary.median_defect : 0.0;
    summary.defect_spread =
        std::max(summary.defect_spread, std::abs(normalized - 1.0));
    summary.max_invariance_residual =
        std::max(summary.max_invariance_residual, row.invariance);
    summary.all_positive = summary.all_positive && row.verdict.ok();
    std::vector<double> cells;
    for (int d = 0; d < dim; ++d) cells.push_back(row.x[d]);
    cells.insert(cells.end(),
                 {row.defect, normalized,
                  row.verdict.cartan_pd ? 1.0 : 0.0,
                  row.verdict.dmu_positive ? 1.0 : 0.0,
                  row.verdict.submersion_positive ? 1.0 : 0.0,
                  row.invariance, row.fit_residual, row.slope_spread});
    csv.add_row(cells);
  }
  summary.csv = csv.str();
  return summary;
}

// --- oracle sweeps ----------------------------------------------------------------

std::string oracle_su2_csv(double t_max, int samples) {
  if (!(t_max > 0.0) || samples < 2)
    throw ConfigError("oracle su2: need t_max > 0 and samples >= 2");
  const RootSystem rs = RootSystem::catalog("A1");
  CsvWriter csv({"t", "u", "f", "kp", "kpp", "lambda0", "lambda_plus",
                 "lambda_minus", "defect", "potential"});
  for (int i = 1; i <= samples; ++i) {
    const double t = t_max * i / samples;
    const Su2Profile p = su2_profile(t);
    const Su2Eigenvalues eig = su2_eigenvalues(t);
    Vec x(1), grad(1);
    x[0] = t;
    grad[0] = p.kp;
    Mat hess(1, 1);
    hess(0, 0) = p.kpp;
    const double defect =
        ricci_defect(spectral_data(rs, x, grad, hess), 0.0);
    csv.add_row({t, p.u, p.f, p.kp, p.kpp, eig.lambda0, eig.lambda_plus,
                 eig.lambda_minus, defect, su2_potential(t)});
  }
  return csv.str();
}

std::string oracle_heisenberg_csv(int n, const std::string& profile,
                                  int samples) {
  if (n < 1 || samples < 2)
    throw ConfigError("oracle heisenberg: need n >= 1 and samples >= 2");
  std::function<double(double)> f;
  if (profile == "constant") {
    f = [](double) { return 1.0; };
  } else if (profile == "ricci-flat") {
    f = heisenberg_ricci_flat_profile(n);
  } else if (profile == "random") {
    Rng rng(42);
    const double c0 = 0.5 + 0.5 * rng.uniform();
    const double c1 = 0.1 * (2.0 * rng.uniform() - 1.0) * c0;
    const double c2 = 0.1 * (2.0 * rng.uniform() - 1.0) * c0;
    const double c3 = 0.1 * (2.0 * rng.uniform() - 1.0) * c0;
    f = [c0, c1, c2, c3](double t) {
      return c0 + t * (c1 + t * (c2 + t * c3));
    };
  } else {
    throw ConfigError("oracle heisenberg: unknown profile " + profile);
  }
  CsvWriter csv({"t", "numeric_re", "numeric_im", "formula", "difference"});
  for (int i = 0; i < samples; ++i) {
    const double t = -0.98 + 1.96 * i / (samples - 1.0);
    const HeisenbergResult r = heisenberg_det(n, f, t);
    csv.add_row({t, r.numeric.real(), r.numeric.imag(), r.formula,
                 r.difference});
  }
  return csv.str();
}

std::string oracle_canonical_csv(const std::string& group, double t_max,
                                 int samples) {
  if (!(t_max > 0.0) || samples < 2)
    throw ConfigError("oracle canonical: need t_max > 0 and samples >= 2");
  RootSystem rs = [&group] {
    try {
      return RootSystem::catalog(group);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("oracle canonical: ") + e.what());
    }
  }();
  // Chamber-interior ray direction.
  Vec dir = Vec::Zero(rs.rank());
  for (const Vec& a : rs.positive_roots()) dir += a / a.norm();
  dir /= dir.norm();

  std::vector<std::string> header = {"t", "cartan_identity_deviation",
                                     "defect"};
  for (std::size_t r = 0; r < rs.positive_roots().size(); ++r) {
    header.push_back("h_root" + std::to_string(r));
    header.push_back("phi_root" + std::to_string(r));
  }
  CsvWriter csv(header);
  for (int i = 1; i <= samples; ++i) {
    const double t = t_max * i / samples;
    const SpectralMetric sm = canonical_example(rs, t * dir);
    const MetricReport report = metric_eigenvalues(sm);
    const double dev =
        (report.cartan_block - Mat::Identity(rs.rank(), rs.rank()))
            .cwiseAbs()
            .maxCoeff();
    std::vector<double> row = {t, dev, report.defect};
    for (std::size_t r = 0; r < rs.positive_roots().size(); ++r) {
      row.push_back(report.horizontal[r]);
      row.push_back(sm.roots[r].phi);
    }
    csv.add_row(row);
  }
  return csv.str();
}

}  // namespace weylma
