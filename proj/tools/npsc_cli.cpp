// Benchmark CLI: trains shallow ReLU networks on the registered function
// approximation and PDE problems and writes per-epoch metrics as CSV.
#include <cstdio>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "npsc/harness.hpp"
#include "npsc/kernels.hpp"
#include "npsc/parallel.hpp"

namespace {

using nlohmann::json;

// Flags override config-file values: only unseen options are overwritten.
void apply_config_file(const CLI::App& cmd, const std::string& path,
                       npsc::ExperimentConfig& config) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  json j = json::parse(in);
  auto unseen = [&](const char* flag) { return cmd.get_option(flag)->count() == 0; };
  if (j.contains("problem") && unseen("--problem")) config.problem = j["problem"];
  if (j.contains("algo") && unseen("--algo")) config.algo = j["algo"];
  if (j.contains("neurons") && unseen("--neurons")) config.neurons = j["neurons"];
  if (j.contains("epochs") && unseen("--epochs")) config.epochs = j["epochs"];
  if (j.contains("seeds") && unseen("--seeds")) config.seeds = j["seeds"];
  if (j.contains("master_seed") && unseen("--master-seed"))
    config.master_seed = j["master_seed"];
  if (j.contains("quad_points") && unseen("--quad-points"))
    config.quad_points = j["quad_points"];
  if (j.contains("precond") && unseen("--precond")) config.precond = j["precond"];
  if (j.contains("out") && unseen("--out")) config.out = j["out"];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neuron-wise parallel subspace correction trainer and benchmarks"};
  app.require_subcommand(1);

  int threads = 0;
  std::string kernels_backend;
  app.add_option("--threads", threads, "Worker count (default: hardware)");
  app.add_option("--kernels", kernels_backend, "Kernel backend: auto|scalar|avx2|neon");

  npsc::ExperimentConfig config;
  std::string config_file;
  CLI::App* cmd_run = app.add_subcommand("run", "Train one experiment over seeds");
  cmd_run->add_option("--problem", config.problem,
                      "Problem id: illcond|ex1|ex2|ex3|ex4|ex5|ex6");
  cmd_run->add_option("--algo", config.algo, "Algorithm: npsc|gd|adam|lsgd");
  cmd_run->add_option("--neurons", config.neurons, "Network width n");
  cmd_run->add_option("--epochs", config.epochs, "Training epochs T");
  cmd_run->add_option("--seeds", config.seeds, "Number of random initializations");
  cmd_run->add_option("--master-seed", config.master_seed, "Master RNG seed");
  cmd_run->add_option("--quad-points", config.quad_points,
                      "Quadrature points N (0 = problem default)");
  cmd_run->add_option("--precond", config.precond,
                      "Linear-layer preconditioner: full|diag|none");
  cmd_run->add_option("--out", config.out, "CSV output base path");
  cmd_run->add_option("--config", config_file, "JSON config file (flags override)");

  int ill_n = 32, ill_iters = 10000;
  std::string ill_out;
  CLI::App* cmd_ill = app.add_subcommand(
      "illcond", "Fixed-node quadratic demonstration (GD and Adam)");
  cmd_ill->add_option("--neurons", ill_n, "Network width n (<= 256)");
  cmd_ill->add_option("--iters", ill_iters, "Iterations");
  cmd_ill->add_option("--out", ill_out, "CSV output path")->required();

  std::string table_problem = "ex2", table_out;
  bool table_baselines = false;
  CLI::App* cmd_table = app.add_subcommand(
      "precond-table", "Linear-solver iteration counts on fixed-node systems");
  cmd_table->add_option("--problem", table_problem, "ex2 or ex3");
  cmd_table->add_option("--out", table_out, "CSV output path")->required();
  cmd_table->add_flag("--with-gd-adam", table_baselines,
                      "Also measure GD/Adam iteration counts (slow)");

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) npsc::set_worker_count(threads);
  if (!kernels_backend.empty() && !npsc::kernels::select_backend(kernels_backend.c_str())) {
    std::fprintf(stderr, "kernel backend '%s' is not available on this machine\n",
                 kernels_backend.c_str());
    return 1;
  }

  try {
    if (cmd_run->parsed()) {
      if (!config_file.empty()) apply_config_file(*cmd_run, config_file, config);
      npsc::RunSummary summary = npsc::run(config);
      for (const std::string& f : summary.files) std::printf("wrote %s\n", f.c_str());
      std::printf("final rel_energy_err (median over %d seed%s): %.6g\n",
                  config.seeds, config.seeds == 1 ? "" : "s",
                  summary.median_rel_err.back());
    } else if (cmd_ill->parsed()) {
      npsc::IllcondResult res = npsc::illcond_demo(ill_n, ill_iters);
      std::FILE* fp = std::fopen(ill_out.c_str(), "wb");
      if (!fp) throw std::runtime_error("cannot open CSV for writing: " + ill_out);
      std::fprintf(fp, "iter,gd_rel_err,adam_rel_err,kappa_M\n");
      for (std::size_t i = 0; i < res.gd_rel_err.size(); ++i)
        std::fprintf(fp, "%zu,%.17g,%.17g,%.17g\n", i + 1, res.gd_rel_err[i],
                     res.adam_rel_err[i], res.kappa);
      std::fclose(fp);
      std::printf("wrote %s (kappa = %.6g)\n", ill_out.c_str(), res.kappa);
    } else if (cmd_table->parsed()) {
      std::vector<npsc::PrecondTableRow> rows =
          npsc::precond_table(table_problem, table_baselines);
      std::FILE* fp = std::fopen(table_out.c_str(), "wb");
      if (!fp) throw std::runtime_error("cannot open CSV for writing: " + table_out);
      if (table_baselines) {
        std::fprintf(fp, "n,gd_iters,adam_iters,cg_iters,pcg_iters\n");
        for (const auto& r : rows)
          std::fprintf(fp, "%d,%ld,%ld,%d,%d\n", r.n, r.gd_iters, r.adam_iters,
                       r.cg_iters, r.pcg_iters);
      } else {
        std::fprintf(fp, "n,cg_iters,pcg_iters\n");
        for (const auto& r : rows)
          std::fprintf(fp, "%d,%d,%d\n", r.n, r.cg_iters, r.pcg_iters);
      }
      std::fclose(fp);
      std::printf("wrote %s\n", table_out.c_str());
      for (const auto& r : rows)
        std::printf("n=%3d  cg=%5d  pcg=%d\n", r.n, r.cg_iters, r.pcg_iters);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
