// SPDX-License-Identifier: Apache-2.0
/**
 * @file   cli.hpp
 * @brief  Subcommands behind the `exam` executable.
 *
 * Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.
 */
#ifndef EXAM_CLI_HPP
#define EXAM_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <string>

namespace exam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Trains per the config. Writes the best checkpoint plus report.json into
/// checkpoint_dir; when validation is split off the training file, the split
/// is saved there too as validation.csv / validation.tsv.
int run_train(const std::filesystem::path &config, std::ostream &out,
              std::ostream &err);
/// Prints the evaluation summary JSON for a data file.
int run_eval(const std::filesystem::path &checkpoint,
             const std::filesystem::path &data, std::ostream &out,
             std::ostream &err);
/// Prints the top-5 classes with probabilities for one text.
int run_predict(const std::filesystem::path &checkpoint,
                const std::string &text, std::ostream &out, std::ostream &err);
/// Writes the interaction record of one text as JSON.
int run_export_interaction(const std::filesystem::path &checkpoint,
                           const std::string &text,
                           const std::filesystem::path &out_path,
                           std::ostream &out, std::ostream &err);

int main(int argc, char **argv);

} // namespace exam::cli

#endif // EXAM_CLI_HPP
