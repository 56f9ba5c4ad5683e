// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Run configuration read by `exam train`.
 *
 * The file is a JSON object. `profile` picks a base (`multiclass-paper`,
 * `multilabel-paper` or `toy`); every other key overrides one field. Unknown
 * keys are rejected. Relative paths resolve against the config file's
 * directory.
 */
#ifndef EXAM_CONFIG_HPP
#define EXAM_CONFIG_HPP

#include "exam/metrics.hpp"
#include "exam/model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exam {

struct RunConfig {
  std::string profile = "multiclass-paper";
  ModelConfig model; ///< vocab_size is filled in after the vocabulary is built

  double learning_rate = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  std::optional<double> grad_clip; ///< unset: 5.0 for GRU, off otherwise
  double weight_decay = 0.0;
  std::size_t min_count = 5;
  double val_fraction = 0.10;
  LogBase log_base = LogBase::natural;

  std::filesystem::path train_path;
  std::filesystem::path validation_path; ///< empty: split from train
  std::filesystem::path test_path;       ///< optional
  std::filesystem::path checkpoint_dir;
  std::vector<std::string> class_names;

  double effective_grad_clip() const;
  /// Field-level checks, including that the data files exist.
  void validate() const;
};

/// Base settings of a named profile; throws ConfigError for unknown names.
RunConfig profile_defaults(std::string_view name);

RunConfig parse_run_config(std::string_view json_text,
                           const std::filesystem::path &base_dir = {});
RunConfig load_run_config(const std::filesystem::path &path);

/// Applies EXAM_SEED when it is set in the environment.
void apply_seed_override(RunConfig &config);

} // namespace exam

#endif // EXAM_CONFIG_HPP
