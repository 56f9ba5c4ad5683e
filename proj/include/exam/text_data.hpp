// SPDX-License-Identifier: Apache-2.0
/**
 * @file   text_data.hpp
 * @brief  Tokenizer, vocabulary, dataset readers, splitting and batching.
 */
#ifndef EXAM_TEXT_DATA_HPP
#define EXAM_TEXT_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace exam {

enum class Task { multiclass, multilabel };

std::string to_string(Task task);
Task parse_task(std::string_view name);

/// Malformed input file; what() carries the path and line.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid settings handed to a data routine.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Lowercases ASCII letters and splits punctuation off as standalone tokens.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
public:
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kUnkId = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Ids are handed out by descending frequency, ties in lexicographic order.
  static Vocabulary build(const std::vector<std::vector<std::string>> &corpus,
                          std::size_t min_count = 1);
  static Vocabulary load(const std::filesystem::path &path);
  void save(const std::filesystem::path &path) const;

  std::size_t size() const { return id_to_token_.size(); }
  std::int32_t id(std::string_view token) const;
  const std::string &token(std::int32_t id) const;
  bool contains(std::string_view token) const;

private:
  void add(std::string token);

  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Which end of the sequence gets padding, and which end survives truncation.
struct SequencePolicy {
  enum class Side { prefix, suffix };
  Side pad_side = Side::suffix;
  Side keep = Side::prefix; ///< prefix keeps the first n tokens

  static SequencePolicy for_task(Task task);
};

using LabelSet = std::vector<std::int32_t>; ///< sorted, unique

struct Instance {
  std::vector<std::int32_t> ids;  ///< exactly n entries
  std::variant<std::int32_t, LabelSet> label;
  std::vector<std::string> tokens; ///< aligned with ids, "<pad>" on padding

  std::int32_t class_index() const { return std::get<std::int32_t>(label); }
  const LabelSet &label_set() const { return std::get<LabelSet>(label); }
  bool is_padding(std::size_t position) const {
    return ids[position] == Vocabulary::kPadId;
  }
};

std::vector<std::int32_t> encode(std::span<const std::string> tokens,
                                 const Vocabulary &vocab, std::size_t length,
                                 SequencePolicy policy);

/// Encodes tokens and keeps the surviving strings aligned with the ids.
Instance make_instance(std::span<const std::string> tokens,
                       std::variant<std::int32_t, LabelSet> label,
                       const Vocabulary &vocab, std::size_t length,
                       SequencePolicy policy);

struct LabeledText {
  std::variant<std::int32_t, LabelSet> label;
  std::string text;
};

/// Rows of "class","title","description"[,...] with a 1-based class index.
/// Extra fields are appended to the text.
std::vector<LabeledText> load_multiclass_csv(const std::filesystem::path &path,
                                             std::size_t num_classes);
/// Lines of text<TAB>comma separated 0-based label ids.
std::vector<LabeledText> load_multilabel_tsv(const std::filesystem::path &path,
                                             std::size_t num_classes);
std::vector<LabeledText> load_dataset(const std::filesystem::path &path,
                                      Task task, std::size_t num_classes);
/// Writes records in the on-disk format of the given task.
void save_dataset(const std::filesystem::path &path, Task task,
                  std::span<const LabeledText> records);

/// Splits one CSV record into fields. Exposed for tests.
std::vector<std::string> parse_csv_record(std::string_view record);

template <typename Item> struct Split {
  std::vector<Item> train;
  std::vector<Item> validation;
};

/// Deterministic shuffled split; validation gets round(fraction * size).
template <typename Item>
Split<Item> split_train_validation(std::vector<Item> data, double val_fraction,
                                   std::uint64_t seed);

/// Index batches over `count` items for one epoch; the order is reshuffled
/// from a seed derived from (seed, epoch). The last batch may be short.
std::vector<std::vector<std::size_t>>
epoch_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
              std::size_t epoch);

struct DatasetSplit {
  std::vector<Instance> train;
  std::vector<Instance> validation;
  std::vector<Instance> test;
};

} // namespace exam

#endif // EXAM_TEXT_DATA_HPP
