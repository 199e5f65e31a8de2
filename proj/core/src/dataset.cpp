#include "mulr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_set>

#include "mulr/error.hpp"
#include "mulr/io.hpp"
#include "mulr/text.hpp"

namespace mulr {

using io::lines_of;
using io::read_file;

TypeSystem::TypeSystem(std::vector<std::string> types, std::vector<int> parents)
    : types_(std::move(types)), parents_(std::move(parents)) {
  if (parents_.size() != types_.size()) {
    throw DataError("type system: parent list size does not match type count");
  }
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].empty()) throw DataError("type system: empty type name");
    if (!index_.emplace(types_[i], static_cast<int>(i)).second) {
      throw DataError("type system: duplicate type '" + types_[i] + "'");
    }
    if (parents_[i] < -1 || parents_[i] >= static_cast<int>(types_.size())) {
      throw DataError("type system: parent index out of range for '" + types_[i] + "'");
    }
  }
  // A walk up from any node longer than |T| steps means a cycle.
  for (std::size_t i = 0; i < types_.size(); ++i) {
    int t = static_cast<int>(i);
    for (std::size_t steps = 0; t != -1; ++steps) {
      if (steps > types_.size()) {
        throw DataError("type system: parent cycle through '" + types_[i] + "'");
      }
      t = parents_[t];
    }
  }
}

TypeSystem TypeSystem::load(const std::filesystem::path &path) {
  return parse(read_file(path), path.string());
}

TypeSystem TypeSystem::parse(std::string_view content, const std::string &source) {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> idx;
  std::vector<std::pair<std::string, std::string>> edges;
  auto intern = [&](const std::string &n) {
    auto [it, inserted] = idx.emplace(n, static_cast<int>(names.size()));
    if (inserted) names.push_back(n);
    return it->second;
  };
  auto lines = lines_of(content);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string line = text::trim(lines[ln]);
    if (line.empty() || line[0] == '#') continue;
    auto cols = text::split(line, '\t');
    if (cols.size() > 2) throw ParseError(source, ln + 1, "expected child<TAB>parent");
    std::string child = text::trim(cols[0]);
    if (child.empty()) throw ParseError(source, ln + 1, "empty type name");
    intern(child);
    if (cols.size() == 2) {
      std::string parent = text::trim(cols[1]);
      if (parent.empty()) throw ParseError(source, ln + 1, "empty parent name");
      intern(parent);
      edges.emplace_back(child, parent);
    }
  }
  std::vector<int> parents(names.size(), -1);
  for (auto &[child, parent] : edges) {
    int c = idx[child];
    if (parents[c] != -1 && parents[c] != idx[parent]) {
      throw DataError(source + ": type '" + child + "' has more than one parent");
    }
    parents[c] = idx[parent];
  }
  return TypeSystem(std::move(names), std::move(parents));
}

std::string TypeSystem::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < types_.size(); ++i) {
    out += types_[i];
    if (parents_[i] >= 0) {
      out += '\t';
      out += types_[parents_[i]];
    }
    out += '\n';
  }
  return out;
}

std::optional<int> TypeSystem::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int TypeSystem::index(std::string_view name) const {
  auto t = find(name);
  if (!t) throw DataError("unknown type '" + std::string(name) + "'");
  return *t;
}

DatasetSplit load_dataset(const std::filesystem::path &path, const TypeSystem &types) {
  return parse_dataset(read_file(path), types, path.string());
}

DatasetSplit parse_dataset(std::string_view content, const TypeSystem &types,
                           const std::string &source) {
  DatasetSplit split;
  std::vector<EntityRecord> *section = nullptr;
  bool dev_or_test = false;
  auto lines = lines_of(content);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string_view raw = lines[ln];
    std::string line = text::trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line == "#train") {
        section = &split.train;
        dev_or_test = false;
      } else if (line == "#dev") {
        section = &split.dev;
        dev_or_test = true;
      } else if (line == "#test") {
        section = &split.test;
        dev_or_test = true;
      } else {
        throw ParseError(source, ln + 1, "unknown section '" + line + "'");
      }
      continue;
    }
    if (section == nullptr) throw ParseError(source, ln + 1, "row before any section marker");
    auto cols = text::split(raw, '\t');
    if (cols.size() != 4) {
      throw ParseError(source, ln + 1,
                       "expected 4 tab-separated columns, got " + std::to_string(cols.size()));
    }
    EntityRecord e;
    e.id = text::trim(cols[0]);
    if (e.id.empty()) throw ParseError(source, ln + 1, "empty entity id");
    for (auto &n : text::split(cols[1], '|')) {
      std::string name = text::trim(n);
      if (name.empty()) throw ParseError(source, ln + 1, "empty entity name");
      e.names.push_back(std::move(name));
    }
    std::size_t keep = dev_or_test ? 1 : kMaxTrainNames;
    if (e.names.size() > keep) e.names.resize(keep);
    std::string type_col = text::trim(cols[2]);
    if (!type_col.empty()) {
      for (auto &t : text::split(type_col, ',')) {
        std::string tn = text::trim(t);
        if (tn.empty()) throw ParseError(source, ln + 1, "empty type name");
        auto idx = types.find(tn);
        if (!idx) throw ParseError(source, ln + 1, "unknown type '" + tn + "'");
        e.gold_types.push_back(*idx);
      }
    }
    std::sort(e.gold_types.begin(), e.gold_types.end());
    e.gold_types.erase(std::unique(e.gold_types.begin(), e.gold_types.end()),
                       e.gold_types.end());
    std::string freq = text::trim(cols[3]);
    auto [ptr, ec] = std::from_chars(freq.data(), freq.data() + freq.size(), e.corpus_frequency);
    if (ec != std::errc() || ptr != freq.data() + freq.size() || e.corpus_frequency < 0) {
      throw ParseError(source, ln + 1, "bad frequency '" + freq + "'");
    }
    section->push_back(std::move(e));
  }
  if (split.train.empty() && split.dev.empty() && split.test.empty()) {
    throw DataError(source + ": no entities");
  }
  validate(split, types);
  return split;
}

void validate(const DatasetSplit &split, const TypeSystem &types) {
  std::unordered_set<std::string> seen;
  auto check = [&](const std::vector<EntityRecord> &records, const char *section,
                   std::size_t max_names) {
    for (const auto &e : records) {
      if (!seen.insert(e.id).second) {
        throw DataError(std::string("duplicate entity id '") + e.id + "' (in " + section + ")");
      }
      if (e.names.empty() || e.names.size() > max_names) {
        throw DataError("entity '" + e.id + "' has " + std::to_string(e.names.size()) +
                        " names in " + section);
      }
      for (const auto &n : e.names) {
        if (text::trim(n).empty()) throw DataError("entity '" + e.id + "' has an empty name");
      }
      for (int t : e.gold_types) {
        if (t < 0 || t >= static_cast<int>(types.size())) {
          throw DataError("entity '" + e.id + "' references an unknown type index");
        }
      }
      if (e.corpus_frequency < 0) throw DataError("entity '" + e.id + "' has negative frequency");
    }
  };
  check(split.train, "train", kMaxTrainNames);
  check(split.dev, "dev", 1);
  check(split.test, "test", 1);
}

std::string serialize_dataset(const DatasetSplit &split, const TypeSystem &types) {
  std::string out;
  auto emit = [&](const char *header, const std::vector<EntityRecord> &records) {
    out += header;
    out += '\n';
    for (const auto &e : records) {
      out += e.id;
      out += '\t';
      for (std::size_t i = 0; i < e.names.size(); ++i) {
        if (i) out += '|';
        out += e.names[i];
      }
      out += '\t';
      for (std::size_t i = 0; i < e.gold_types.size(); ++i) {
        if (i) out += ',';
        out += types.name(e.gold_types[i]);
      }
      out += '\t';
      out += std::to_string(e.corpus_frequency);
      out += '\n';
    }
  };
  emit("#train", split.train);
  emit("#dev", split.dev);
  emit("#test", split.test);
  return out;
}

void save_dataset(const std::filesystem::path &path, const DatasetSplit &split,
                  const TypeSystem &types) {
  io::write_file(path, serialize_dataset(split, types));
}

EntityRecord close_under_parents(const EntityRecord &e, const TypeSystem &ts) {
  EntityRecord out = e;
  std::set<int> closed(e.gold_types.begin(), e.gold_types.end());
  for (int t : e.gold_types) {
    for (int p = ts.parent(t); p != -1; p = ts.parent(p)) closed.insert(p);
  }
  out.gold_types.assign(closed.begin(), closed.end());
  return out;
}

DatasetSplit close_under_parents(const DatasetSplit &split, const TypeSystem &ts) {
  DatasetSplit out;
  for (const auto &e : split.train) out.train.push_back(close_under_parents(e, ts));
  for (const auto &e : split.dev) out.dev.push_back(close_under_parents(e, ts));
  for (const auto &e : split.test) out.test.push_back(close_under_parents(e, ts));
  return out;
}

std::vector<std::string> name_words(std::string_view name) {
  auto words = text::split_whitespace(name);
  for (auto &w : words) w = text::to_lower(w);
  return words;
}

EntitySlices slice_entities(const DatasetSplit &split) {
  std::unordered_set<std::string> train_words;
  for (const auto &e : split.train) {
    for (const auto &n : e.names) {
      for (auto &w : name_words(n)) train_words.insert(std::move(w));
    }
  }
  EntitySlices s;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const auto &e = split.test[i];
    s.all.push_back(i);
    if (e.corpus_frequency >= kHeadMinFrequency) s.head.push_back(i);
    if (e.corpus_frequency <= kTailMaxFrequency) s.tail.push_back(i);
    bool known = false;
    for (const auto &n : e.names) {
      for (const auto &w : name_words(n)) {
        if (train_words.count(w)) {
          known = true;
          break;
        }
      }
      if (known) break;
    }
    (known ? s.known : s.unknown).push_back(i);
  }
  return s;
}

}  // namespace mulr
