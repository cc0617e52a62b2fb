// Command-line front end: run, plan, verify, table.

#include "ncopt/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace ncopt;
using namespace ncopt::harness;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoCertificate = 2;

int cmd_run(const std::string& path) {
  const RunConfig cfg = load_run_config(path);
  const RunOutcome out = execute_run(cfg);
  for (const SeedOutcome& s : out.seeds) {
    std::cout << "seed " << s.seed << ": " << s.trace.algorithm << " iterations=" << s.trace.iterations
              << " final_phi=" << s.trace.final_phi;
    if (cfg.algorithm != "bcd_baseline")
      std::cout << " cert=" << s.trace.certificate.value << " passed=" << (s.trace.certificate.passed ? "true" : "false");
    std::cout << '\n';
  }
  for (const auto& f : out.files) std::cout << "wrote " << f.string() << '\n';
  return out.all_certified() ? kExitOk : kExitNoCertificate;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
  const VerifyResult r = run_verify(suite, seed);
  for (const std::string& line : r.lines) std::cout << line << '\n';
  std::cout << suite << ": checks=" << r.checks << " violations=" << r.violations << ' ' << r.metric_name << '='
            << r.metric << (r.passed() ? " PASS" : " FAIL") << '\n';
  if (!r.passed() && !r.counterexample.is_null()) std::cout << "counterexample: " << r.counterexample.dump() << '\n';
  return r.passed() ? kExitOk : kExitNoCertificate;
}

void write_to(const std::string& file, const std::function<void(std::ostream&)>& emit) {
  emit(std::cout);
  if (file.empty()) return;
  const std::filesystem::path dir = output_dir("");
  const std::filesystem::path path = std::filesystem::path(file).is_absolute() ? std::filesystem::path(file) : dir / file;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  emit(os);
  std::cerr << "wrote " << path.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional-gradient and powered-prox methods for nonconvex composite problems"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Execute a JSON run config");
  run->add_option("config", config_path, "Path to the config file")->required();

  PlanParams pp;
  std::vector<double> plan_eps;
  auto* plan = app.add_subcommand("plan", "Print iteration counts for a grid of eps values");
  plan->add_option("--formula", pp.formula, "alg1 | concave | multiblock | alg3 | alg4")
      ->check(CLI::IsMember({"alg1", "concave", "multiblock", "alg3", "alg4"}));
  plan->add_option("--gap", pp.gap, "Phi(x1) - Phi*");
  plan->add_option("--diam", pp.diam, "p-norm diameter (largest block for multiblock)");
  plan->add_option("--diam-under", pp.diam_under, "Smallest block diameter (multiblock guard)");
  plan->add_option("--diam2", pp.diam2, "Euclidean diameter (smoothing schedule)");
  plan->add_option("--lambda", pp.lambda, "Descent constant");
  plan->add_option("-p,--p", pp.p, "Power p > 1");
  plan->add_option("--sigma", pp.sigma, "Oracle noise level");
  plan->add_option("--M", pp.M, "Gradient bound of the nonsmooth term");
  plan->add_option("--eps", plan_eps, "Target eps (repeatable); default 1e-1 1e-2 1e-3");
  std::string plan_out;
  plan->add_option("--out", plan_out, "Also write the table to this CSV file");

  std::string suite;
  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "Run a property-verification suite");
  verify->add_option("suite", suite, "power_monotonicity | prox_stability | smoothing_sandwich | stationarity_equivalence | oracle_equiv | descent_constant | bounds")->required();
  verify->add_option("--seed", verify_seed, "Random seed");

  std::string style;
  Table1Options t1;
  Table2Options t2;
  int dim_n = -1, dim_m = -1, instances = 10;
  std::uint64_t table_seed = 1;
  double eps = -1.0, gamma = t2.gamma;
  long max_iters = -1;
  bool timing = false;
  std::string table_out;
  auto* table = app.add_subcommand("table", "Run a benchmark table");
  table->add_option("style", style, "table1 | table2")->required()->check(CLI::IsMember({"table1", "table2"}));
  table->add_option("--d", t1.d, "Tensor order (table1)");
  table->add_option("--n", dim_n, "Dimension n (default 8 for table1, 20 for table2)");
  table->add_option("--m", dim_m, "Rows m of the discriminant instance (table2, default 2n)");
  table->add_option("--instances", instances, "Number of instances");
  table->add_option("--seed", table_seed, "Seed of the first instance");
  table->add_option("--lambda", t1.lambda, "Descent constant (table1)");
  table->add_option("--rho", t1.rho, "L1 weight (table1)");
  table->add_option("--gamma", gamma, "Penalty weight (table2)");
  table->add_option("--eps", eps, "Certificate target (default 1e-3 for table1, 1e-4 for table2)");
  table->add_option("--max-iters", max_iters, "Iteration cap (default 2000 for table1)");
  table->add_flag("--timing", timing, "Record wall-clock times");
  table->add_option("--out", table_out, "Also write the table to this CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*plan) {
      if (plan_eps.empty()) plan_eps = {1e-1, 1e-2, 1e-3};
      write_to(plan_out, [&](std::ostream& os) { write_plan_table(os, pp, plan_eps); });
      return kExitOk;
    }
    if (*verify) {
      const auto& names = verify_suites();
      if (std::find(names.begin(), names.end(), suite) == names.end()) {
        std::cerr << "error: unknown suite '" << suite << "'\n";
        return kExitConfig;
      }
      return cmd_verify(suite, verify_seed);
    }
    if (*table) {
      if (style == "table1") {
        t1.n = dim_n > 0 ? dim_n : t1.n;
        t1.instances = instances;
        t1.seed = table_seed;
        if (eps > 0.0) t1.eps = eps;
        if (max_iters > 0) t1.max_iters = max_iters;
        t1.timing = timing;
        const auto rows = run_table1(t1);
        write_to(table_out, [&](std::ostream& os) { write_table1_csv(os, rows); });
        std::cerr << table1_summary(rows).dump() << '\n';
      } else {
        t2.n = dim_n > 0 ? dim_n : t2.n;
        t2.m = dim_m > 0 ? dim_m : 2 * t2.n;
        t2.instances = instances;
        t2.seed = table_seed;
        t2.gamma = gamma;
        if (eps > 0.0) t2.eps = eps;
        if (max_iters > 0) t2.max_iters = max_iters;
        t2.timing = timing;
        const auto rows = run_table2(t2);
        write_to(table_out, [&](std::ostream& os) { write_table2_csv(os, rows); });
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
