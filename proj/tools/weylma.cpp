#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "weylma/pipeline.hpp"
#include "weylma/util.hpp"

namespace {

int cmd_solve(const std::string& config_path, const std::string& out_path) {
  const weylma::SolveConfig config = weylma::load_config(config_path);
  const weylma::RunArtifact artifact = weylma::run_solve(config);
  weylma::save_artifact(artifact, out_path);
  std::printf("# %-8s %-12s %-14s %-14s %-6s %-12s\n", "k", "R_k", "residual",
              "sup_diff_prev", "iters", "lipschitz");
  for (const weylma::StageRecord& s : artifact.stages)
    std::printf("  %-8.4g %-12.8g %-14.4e %-14.4e %-6d %-12.6g\n", s.k, s.R,
                s.max_rel_cell_residual, s.sup_diff_prev, s.iterations,
                s.lipschitz_bound);
  std::printf("artifact written to %s\n", out_path.c_str());
  return 0;
}

int cmd_verify(const std::string& artifact_path, int samples,
               double stencil_radius, const std::string& out_path) {
  const weylma::RunArtifact artifact = weylma::load_artifact(artifact_path);
  const weylma::VerifySummary summary =
      weylma::verify_artifact(artifact, samples, stencil_radius);
  weylma::write_file_atomic(out_path, summary.csv);
  std::printf("samples              %d\n", summary.samples);
  std::printf("median defect        %.12g\n", summary.median_defect);
  std::printf("defect spread        %.4e\n", summary.defect_spread);
  std::printf("max invariance       %.4e\n", summary.max_invariance_residual);
  std::printf("all positive         %s\n", summary.all_positive ? "yes" : "no");
  std::printf("diagnostics gap      %.4e\n", summary.diagnostics_gap);
  std::printf("report written to %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant Kahler metrics with prescribed Ricci form on "
               "complexified compact groups: Weyl-invariant Monge-Ampere "
               "solver and verifier"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "run the constructive solver");
  std::string config_path, out_path;
  solve->add_option("--config", config_path, "JSON config file")->required();
  solve->add_option("--out", out_path, "artifact output path")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "verify a run artifact");
  std::string artifact_path, verify_out;
  int samples = 200;
  double stencil = 0.0;
  verify->add_option("--artifact", artifact_path, "artifact path")->required();
  verify->add_option("--samples", samples, "number of sample points");
  verify->add_option("--stencil", stencil,
                     "stencil radius for derivative fits (0: automatic)");
  verify->add_option("--out", verify_out, "CSV output path")->required();

  // oracle
  auto* oracle = app.add_subcommand("oracle", "closed-form oracle sweeps");
  std::string oracle_name, oracle_out, profile = "ricci-flat",
                            group = "A2", synthetic_out;
  double t_max = 3.0;
  int oracle_samples = 50;
  int heis_n = 1;
  oracle->add_option("name", oracle_name, "su2 | heisenberg | canonical")
      ->required();
  oracle->add_option("--tmax", t_max, "sweep endpoint");
  oracle->add_option("--samples", oracle_samples, "number of rows");
  oracle->add_option("--n", heis_n, "Heisenberg parameter (dim = 2n+1)");
  oracle->add_option("--f", profile,
                     "Heisenberg profile: constant | ricci-flat | random");
  oracle->add_option("--group", group, "root system for canonical sweep");
  oracle->add_option("--out", oracle_out, "CSV output path")->required();
  oracle->add_option("--artifact", synthetic_out,
                     "also emit a closed-form-backed artifact (su2 only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (solve->parsed()) return cmd_solve(config_path, out_path);
    if (verify->parsed())
      return cmd_verify(artifact_path, samples, stencil, verify_out);
    if (oracle->parsed()) {
      std::string csv;
      if (oracle_name == "su2") {
        csv = weylma::oracle_su2_csv(t_max, oracle_samples);
        if (!synthetic_out.empty())
          weylma::save_artifact(weylma::make_synthetic_su2_artifact(t_max),
                                synthetic_out);
      } else if (oracle_name == "heisenberg") {
        csv = weylma::oracle_heisenberg_csv(heis_n, profile, oracle_samples);
      } else if (oracle_name == "canonical") {
        csv = weylma::oracle_canonical_csv(group, t_max, oracle_samples);
      } else {
        throw weylma::ConfigError("unknown oracle: " + oracle_name);
      }
      weylma::write_file_atomic(oracle_out, csv);
      std::printf("table written to %s\n", oracle_out.c_str());
      return 0;
    }
  } catch (const weylma::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const weylma::SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 3;
  } catch (const weylma::VerifyDomainError& e) {
    std::fprintf(stderr, "verification domain error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
