#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "soficlab/experiment.hpp"

// Exit codes: 0 ok, 1 a hard assertion failed, 2 invalid spec or
// parameters, 3 a search budget ran out.
int main(int argc, char** argv) {
  CLI::App app{"soficlab: sofic and amenable entropy experiments on subshifts"};
  std::string spec_path;
  unsigned workers = 1;
  std::uint64_t budget = 0;
  std::string out_dir;
  bool validate_only = false;
  app.add_option("--spec", spec_path, "Experiment spec (JSON)")->required();
  app.add_option("--workers", workers, "Worker threads; never changes output bytes")->check(CLI::Range(1u, 1024u));
  app.add_option("--budget-nodes", budget, "Search node budget per count");
  app.add_option("--out", out_dir, "Output directory (default: $SOFICLAB_OUT or .)");
  app.add_flag("--validate", validate_only, "Check the experiment file and exit");
  CLI11_PARSE(app, argc, argv);

  soficlab::Experiment ex = [&] {
    try {
      return soficlab::load_experiment(spec_path);
    } catch (const soficlab::spec_error& e) {
      std::cerr << "error: " << (e.field().empty() ? "" : e.field() + ": ") << e.what();
      if (e.line() > 0) std::cerr << " (line " << e.line() << ")";
      std::cerr << "\n";
      std::exit(2);
    }
  }();
  if (validate_only) {
    std::cout << "valid: task " << ex.task << ", spec_hash fnv1a64:" << ex.hash << "\n";
    return 0;
  }

  soficlab::RunOptions opt;
  opt.workers = workers;
  if (budget > 0) opt.budget_nodes = budget;
  if (!out_dir.empty()) opt.out_dir = out_dir;
  else if (const char* env = std::getenv("SOFICLAB_OUT"); env && *env) opt.out_dir = env;

  soficlab::RunResult res;
  try {
    res = soficlab::run_experiment(ex, opt);
  } catch (const soficlab::argument_error& e) {
    std::cerr << "error: invalid parameters for task " << ex.task << ": " << e.what() << "\n";
    return 2;
  } catch (const soficlab::unsupported_error& e) {
    std::cerr << "error: unsupported: " << e.what() << "\n";
    return 2;
  }
  for (const auto& f : res.files) std::cout << "wrote " << f.string() << "\n";
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& a : res.failed_assertions) std::cerr << "assertion failed: " << a << "\n";
  if (res.budget_exhausted) {
    std::cerr << "error: budget exhausted in " << *res.budget_exhausted << "\n";
    return 3;
  }
  return res.failed_assertions.empty() ? 0 : 1;
}
