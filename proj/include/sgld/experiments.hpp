#pragma once

// Registry of the experiment subcommands.

#include "sgld/experiments/bias_sweep.hpp"
#include "sgld/experiments/common.hpp"
#include "sgld/experiments/cost_minimize.hpp"
#include "sgld/experiments/grow_n.hpp"
#include "sgld/experiments/logistic.hpp"
#include "sgld/experiments/mse_sweep.hpp"
#include "sgld/experiments/weak_order.hpp"

#include <functional>
#include <sstream>

namespace sgld {

/// Defaults overlaid with the config text (empty = defaults), validated.
template <class Config>
Config load_config(const std::string& text, const std::string& section) {
  Config cfg;
  ConfigSchema schema;
  cfg.register_params(schema);
  std::istringstream in(text);
  schema.load(in, section);
  schema.validate();
  return cfg;
}

template <class Config>
std::string config_defaults(const std::string& section) {
  Config cfg;
  ConfigSchema schema;
  cfg.register_params(schema);
  return schema.defaults_text(section);
}

struct ExperimentEntry {
  std::string name;
  std::string description;
  std::function<std::string()> defaults;
  /// Runs from config text (the contents of --config, or empty).
  std::function<ExperimentResult(const std::string&, const RunContext&)> run;
};

namespace detail {

template <class Config, class Run>
ExperimentEntry make_entry(std::string name, std::string description, Run run) {
  ExperimentEntry e;
  e.name = name;
  e.description = std::move(description);
  e.defaults = [name] { return config_defaults<Config>(name); };
  e.run = [name, run](const std::string& text, const RunContext& ctx) {
    return run(load_config<Config>(text, name), ctx);
  };
  return e;
}

}  // namespace detail

inline const std::vector<ExperimentEntry>& experiments() {
  static const std::vector<ExperimentEntry> list{
      detail::make_entry<BiasSweepConfig>("bias-sweep", "asymptotic bias of theta^2 against r for Euler, SGLD, mSGLD",
                                          run_bias_sweep),
      detail::make_entry<MseSweepConfig>("mse-sweep", "MSE of the theta^2 average against steps and passes",
                                         run_mse_sweep),
      detail::make_entry<CostMinimizeConfig>("cost-minimize", "minimal M n subject to MSE <= eps^2",
                                             run_cost_minimize),
      detail::make_entry<GrowNConfig>("grow-n", "dataset-averaged MSE and ERE as N grows", run_grow_n),
      detail::make_entry<LogisticConfig>("logistic", "logistic regression posterior-mean MSE, SGLD vs mSGLD",
                                         run_logistic),
      detail::make_entry<WeakOrderConfig>("weak-order", "Euler bias coefficient on the OU process", run_weak_order),
  };
  return list;
}

inline const ExperimentEntry& find_experiment(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return e;
  throw std::invalid_argument("unknown experiment " + name);
}

}  // namespace sgld
