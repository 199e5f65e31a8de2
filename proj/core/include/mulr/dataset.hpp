#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mulr {

// Sorted, duplicate-free list of type indices into TypeSystem::types().
using TypeSet = std::vector<int>;

// The type inventory plus its parent forest.
class TypeSystem {
 public:
  TypeSystem() = default;

  // `parents[i]` is the index of the parent of type i, or -1 for a root.
  // Throws DataError on duplicate names, out-of-range parents or cycles.
  TypeSystem(std::vector<std::string> types, std::vector<int> parents);

  // Two-column `child<TAB>parent` rows; a single-column row declares a root
  // type. Types are numbered in order of first appearance.
  static TypeSystem load(const std::filesystem::path &path);
  static TypeSystem parse(std::string_view content, const std::string &source = "<hierarchy>");
  std::string serialize() const;

  std::size_t size() const { return types_.size(); }
  const std::vector<std::string> &types() const { return types_; }
  const std::string &name(int t) const { return types_[t]; }
  int parent(int t) const { return parents_[t]; }
  std::optional<int> find(std::string_view name) const;
  // Throws DataError naming the type when absent.
  int index(std::string_view name) const;

 private:
  std::vector<std::string> types_;
  std::vector<int> parents_;
  std::unordered_map<std::string, int> index_;
};

struct EntityRecord {
  std::string id;
  std::vector<std::string> names;
  TypeSet gold_types;
  std::int64_t corpus_frequency = 0;

  bool operator==(const EntityRecord &) const = default;
};

struct DatasetSplit {
  std::vector<EntityRecord> train;
  std::vector<EntityRecord> dev;
  std::vector<EntityRecord> test;

  bool operator==(const DatasetSplit &) const = default;
};

inline constexpr std::size_t kMaxTrainNames = 3;

// Dataset TSV: `#train` / `#dev` / `#test` section markers, rows
// `id<TAB>name1|name2|name3<TAB>t1,t2,...<TAB>frequency`. Names are listed
// most frequent first; dev/test keep the first, train up to three.
DatasetSplit load_dataset(const std::filesystem::path &path, const TypeSystem &types);
DatasetSplit parse_dataset(std::string_view content, const TypeSystem &types,
                           const std::string &source = "<dataset>");
std::string serialize_dataset(const DatasetSplit &split, const TypeSystem &types);
void save_dataset(const std::filesystem::path &path, const DatasetSplit &split,
                  const TypeSystem &types);

// Checks record and split invariants; throws DataError.
void validate(const DatasetSplit &split, const TypeSystem &types);

// Smallest superset of the gold types closed under `parent`.
EntityRecord close_under_parents(const EntityRecord &e, const TypeSystem &ts);
DatasetSplit close_under_parents(const DatasetSplit &split, const TypeSystem &ts);

// Words used to decide known vs unknown: whitespace tokens, case-folded.
std::vector<std::string> name_words(std::string_view name);

inline constexpr std::int64_t kHeadMinFrequency = 101;  // frequency > 100
inline constexpr std::int64_t kTailMaxFrequency = 4;    // frequency < 5

// Index lists into DatasetSplit::test.
struct EntitySlices {
  std::vector<std::size_t> all;
  std::vector<std::size_t> head;
  std::vector<std::size_t> tail;
  std::vector<std::size_t> known;
  std::vector<std::size_t> unknown;
};

EntitySlices slice_entities(const DatasetSplit &split);

}  // namespace mulr
