// Command-line front end: one subcommand per experiment, CSV table to --out
// and a JSON summary next to it.

#include "sgld/experiments.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
  std::size_t replicates = 0;
  unsigned threads = 1;
  bool print_defaults = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sgld::ConfigError("cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string summary_path(const std::string& out) {
  std::filesystem::path p(out);
  return p.extension() == ".csv" ? p.replace_extension(".json").string() : out + ".json";
}

int run(const sgld::ExperimentEntry& e, const Options& o) {
  if (o.print_defaults) {
    std::cout << e.defaults();
    return 0;
  }
  sgld::RunContext ctx{o.seed, o.replicates, o.threads};
  sgld::ExperimentResult res;
  try {
    res = e.run(o.config.empty() ? std::string() : read_file(o.config), ctx);
  } catch (const sgld::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::domain_error& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  }
  const std::string out = o.out.empty() ? e.name + ".csv" : o.out;
  {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    sgld::write_csv(f, res.table);
  }
  res.summary["config_file"] = o.config;
  {
    std::ofstream f(summary_path(out));
    if (!f) throw std::runtime_error("cannot write " + summary_path(out));
    f << res.summary.dump(2) << "\n";
  }
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  if (res.status == sgld::ExitStatus::Infeasible) {
    std::cerr << e.name << ": infeasible or every replicate diverged\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-step SGLD, mSGLD and Euler experiments"};
  app.require_subcommand(1);
  Options opt;
  std::vector<std::pair<CLI::App*, const sgld::ExperimentEntry*>> subs;
  for (const auto& e : sgld::experiments()) {
    CLI::App* sub = app.add_subcommand(e.name, e.description);
    sub->add_option("--config", opt.config, "config file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--out", opt.out, "output CSV path (summary goes to the .json next to it)");
    sub->add_option("--replicates", opt.replicates, "replicates, overriding the config")->check(CLI::PositiveNumber);
    sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
    sub->add_flag("--print-defaults", opt.print_defaults, "print the default config and exit");
    subs.emplace_back(sub, &e);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  try {
    for (const auto& [sub, e] : subs)
      if (sub->parsed()) return run(*e, opt);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
