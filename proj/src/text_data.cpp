// SPDX-License-Identifier: Apache-2.0
#include "exam/text_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace exam {

std::string to_string(Task task) {
  return task == Task::multiclass ? "multiclass" : "multilabel";
}

Task parse_task(std::string_view name) {
  if (name == "multiclass")
    return Task::multiclass;
  if (name == "multilabel")
    return Task::multilabel;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty())
      tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      current.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

void Vocabulary::add(std::string token) {
  const auto id = static_cast<std::int32_t>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
}

Vocabulary
Vocabulary::build(const std::vector<std::vector<std::string>> &corpus,
                  std::size_t min_count) {
  if (min_count < 1)
    throw ConfigError("min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto &doc : corpus)
    for (const auto &tok : doc)
      ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto &[tok, n] : counts)
    if (n >= min_count && tok != kPadToken && tok != kUnkToken)
      ranked.emplace_back(tok, n);
  std::sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary vocab;
  for (auto &entry : ranked)
    vocab.add(std::move(entry.first));
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    lines.push_back(std::move(line));
  }
  if (lines.size() < 2 || lines[0] != kPadToken || lines[1] != kUnkToken)
    throw DataError("vocabulary " + path.string() +
                    " must start with <pad> and <unk>");
  Vocabulary vocab;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (vocab.contains(lines[i]))
      throw DataError("duplicate token '" + lines[i] + "' at line " +
                      std::to_string(i + 1) + " of " + path.string());
    vocab.add(std::move(lines[i]));
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write vocabulary " + path.string());
  for (const auto &tok : id_to_token_)
    out << tok << '\n';
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string &Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw std::out_of_range("token id " + std::to_string(id));
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) != 0;
}

SequencePolicy SequencePolicy::for_task(Task task) {
  // Multi-label questions keep their last words and are left padded so the
  // recurrent encoder ends on real tokens.
  if (task == Task::multilabel)
    return {Side::prefix, Side::suffix};
  return {Side::suffix, Side::prefix};
}

namespace {

std::span<const std::string> truncated(std::span<const std::string> tokens,
                                       std::size_t length,
                                       SequencePolicy policy) {
  if (tokens.size() <= length)
    return tokens;
  if (policy.keep == SequencePolicy::Side::prefix)
    return tokens.first(length);
  return tokens.last(length);
}

} // namespace

std::vector<std::int32_t> encode(std::span<const std::string> tokens,
                                 const Vocabulary &vocab, std::size_t length,
                                 SequencePolicy policy) {
  return make_instance(tokens, std::int32_t{0}, vocab, length, policy).ids;
}

Instance make_instance(std::span<const std::string> tokens,
                       std::variant<std::int32_t, LabelSet> label,
                       const Vocabulary &vocab, std::size_t length,
                       SequencePolicy policy) {
  if (length < 1)
    throw ConfigError("sequence length must be >= 1");
  const auto kept = truncated(tokens, length, policy);
  const std::size_t pad = length - kept.size();
  const std::size_t offset =
      policy.pad_side == SequencePolicy::Side::prefix ? pad : 0;
  Instance inst;
  inst.label = std::move(label);
  inst.ids.assign(length, Vocabulary::kPadId);
  inst.tokens.assign(length, std::string(Vocabulary::kPadToken));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    inst.ids[offset + i] = vocab.id(kept[i]);
    inst.tokens[offset + i] = kept[i];
  }
  return inst;
}

std::vector<std::string> parse_csv_record(std::string_view record) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool in_quotes = false;
  for (std::size_t i = 0; i < record.size(); ++i) {
    const char ch = record[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < record.size() && record[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && field.empty() && !quoted) {
      in_quotes = quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      quoted = false;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (in_quotes)
    throw DataError("unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

namespace {

bool quotes_balanced(const std::string &record) {
  return std::count(record.begin(), record.end(), '"') % 2 == 0;
}

std::int64_t parse_integer(const std::string &text) {
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != text.size())
    throw std::invalid_argument("not an integer: '" + text + "'");
  return value;
}

std::string where(const std::filesystem::path &path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

} // namespace

std::vector<LabeledText> load_multiclass_csv(const std::filesystem::path &path,
                                             std::size_t num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open " + path.string());
  std::vector<LabeledText> rows;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    const std::size_t start = ++line_no;
    std::string record = line;
    // Quoted fields may span physical lines.
    while (!quotes_balanced(record) && std::getline(in, line)) {
      ++line_no;
      record += '\n';
      record += line;
    }
    if (record.empty() || record == "\r")
      continue;
    std::vector<std::string> fields;
    try {
      fields = parse_csv_record(record);
    } catch (const DataError &e) {
      throw DataError(where(path, start) + e.what());
    }
    if (fields.size() < 3)
      throw DataError(where(path, start) + "expected 3 fields, found " +
                      std::to_string(fields.size()));
    std::int64_t cls = 0;
    try {
      cls = parse_integer(fields[0]);
    } catch (const std::invalid_argument &e) {
      throw DataError(where(path, start) + e.what());
    }
    if (cls < 1 || cls > static_cast<std::int64_t>(num_classes))
      throw DataError(where(path, start) + "class " + std::to_string(cls) +
                      " outside [1, " + std::to_string(num_classes) + "]");
    std::string text = fields[1];
    for (std::size_t i = 2; i < fields.size(); ++i)
      text += " " + fields[i];
    rows.push_back({static_cast<std::int32_t>(cls - 1), std::move(text)});
  }
  return rows;
}

std::vector<LabeledText> load_multilabel_tsv(const std::filesystem::path &path,
                                             std::size_t num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open " + path.string());
  std::vector<LabeledText> rows;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw DataError(where(path, line_no) + "missing tab separator");
    const std::string labels = line.substr(tab + 1);
    if (labels.empty())
      throw DataError(where(path, line_no) + "empty label field");
    LabelSet set;
    std::stringstream ss(labels);
    for (std::string item; std::getline(ss, item, ',');) {
      std::int64_t id = 0;
      try {
        id = parse_integer(item);
      } catch (const std::invalid_argument &e) {
        throw DataError(where(path, line_no) + e.what());
      }
      if (id < 0 || id >= static_cast<std::int64_t>(num_classes))
        throw DataError(where(path, line_no) + "label " + std::to_string(id) +
                        " outside [0, " + std::to_string(num_classes) + ")");
      set.push_back(static_cast<std::int32_t>(id));
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    rows.push_back({std::move(set), line.substr(0, tab)});
  }
  return rows;
}

std::vector<LabeledText> load_dataset(const std::filesystem::path &path,
                                      Task task, std::size_t num_classes) {
  return task == Task::multiclass ? load_multiclass_csv(path, num_classes)
                                  : load_multilabel_tsv(path, num_classes);
}

void save_dataset(const std::filesystem::path &path, Task task,
                  std::span<const LabeledText> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write " + path.string());
  for (const auto &r : records) {
    if (task == Task::multiclass) {
      std::string text;
      for (char ch : r.text) {
        if (ch == '"')
          text += '"';
        text += ch;
      }
      out << '"' << std::get<std::int32_t>(r.label) + 1 << "\",\"\",\""
          << text << "\"\n";
    } else {
      const auto &set = std::get<LabelSet>(r.label);
      out << r.text << '\t';
      for (std::size_t i = 0; i < set.size(); ++i)
        out << (i ? "," : "") << set[i];
      out << '\n';
    }
  }
}

namespace {

void shuffle_indices(std::vector<std::size_t> &order, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace

template <typename Item>
Split<Item> split_train_validation(std::vector<Item> data, double val_fraction,
                                   std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("val_fraction must lie in (0, 1), got " +
                      std::to_string(val_fraction));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_indices(order, mix(seed, 0));
  const auto n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(data.size())));
  Split<Item> out;
  out.validation.reserve(n_val);
  out.train.reserve(data.size() - n_val);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_val ? out.validation : out.train)
        .push_back(std::move(data[order[i]]));
  return out;
}

template Split<LabeledText>
split_train_validation(std::vector<LabeledText>, double, std::uint64_t);
template Split<Instance> split_train_validation(std::vector<Instance>, double,
                                                std::uint64_t);

std::vector<std::vector<std::size_t>>
epoch_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
              std::size_t epoch) {
  if (batch_size < 1)
    throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_indices(order, mix(seed, epoch + 1));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

} // namespace exam
