// SPDX-License-Identifier: Apache-2.0
/**
 * @file   checkpoint.hpp
 * @brief  On-disk model format.
 *
 * A checkpoint is a directory holding
 *   meta.json   - model kind, task, every dimension, class names and a
 *                 manifest of {name, shape, offset} in declaration order,
 *                 offset counted in bytes into weights.bin
 *   weights.bin - all parameters as little-endian float32, manifest order
 *   vocab.txt   - one token per line, line index = id
 */
#ifndef EXAM_CHECKPOINT_HPP
#define EXAM_CHECKPOINT_HPP

#include "exam/model.hpp"
#include "exam/text_data.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace exam {

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::filesystem::path &dir,
                     const Model<float> &model, const Vocabulary &vocab,
                     std::span<const std::string> class_names);

struct LoadedCheckpoint {
  Model<float> model;
  Vocabulary vocab;
  std::vector<std::string> class_names;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path &dir);

} // namespace exam

#endif // EXAM_CHECKPOINT_HPP
