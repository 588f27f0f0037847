#pragma once

// Experiment configuration files: a TOML subset with [sections] and
// `key = value` lines, where a value is a number, a quoted string, a
// boolean, or a flat [list] of those. '#' starts a comment.
//
//   [dataset]  path, label_column, feature_columns, exclude_columns
//   [split]    ratio
//   [grid]     m, delta, seeds
//   [attack]   fraction
//   [model]    ridge, ridge_enabled, nu, bs_proximal, bs_gradient_tol, bs_max_iter
//   [solver]   eps, kappa, sigma, step_beta, gamma1, gamma2, angle_rho,
//              min_step, eta, stall_window, max_iter, refine_steps
//   (top level) name, jobs

#include "advreg/sweep.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace advreg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relative dataset paths are resolved against `base_directory` when given.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>",
                              const std::string& base_directory = "");
ExperimentConfig load_config(const std::string& path);

/// Applies one "section.key=value" override, e.g. "solver.eps=1e-8" or
/// "grid.m=1,2,3". Unquoted text that is not a number or boolean is taken as
/// a string. The caller re-validates once all overrides are in.
void apply_setting(ExperimentConfig& cfg, const std::string& assignment);

/// "1,2,5" -> {1, 2, 5}.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace advreg
