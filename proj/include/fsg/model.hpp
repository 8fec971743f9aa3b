#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fsg/error.hpp"

namespace fsg {

using BlockNo = std::uint64_t;

// Ordered physical locations of one file's data blocks. No duplicates.
using BlockList = std::vector<BlockNo>;

struct Uuid {
  std::array<std::uint8_t, 16> bytes{};

  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(32);
    for (auto b : bytes) {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0xF]);
    }
    return out;
  }

  static std::optional<Uuid> from_hex(std::string_view text) {
    if (text.size() != 32) return std::nullopt;
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      return -1;
    };
    Uuid u;
    for (std::size_t i = 0; i < 16; ++i) {
      int hi = nibble(text[2 * i]), lo = nibble(text[2 * i + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      u.bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return u;
  }

  friend bool operator==(const Uuid&, const Uuid&) = default;
};

/// One installation's genome: every file path mapped to the ordered list of
/// physical blocks holding its data. `entries` is a std::map, so paths are
/// unique and iterate in lexicographic order.
struct Fsg {
  std::string device_label;
  std::optional<Uuid> volume_uuid;
  std::uint32_t block_size = 4096;
  std::map<std::string, BlockList> entries;

  friend bool operator==(const Fsg&, const Fsg&) = default;
};

/// A set of installations compared over a shared file universe.
struct Corpus {
  std::string label;
  std::vector<Fsg> installations;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

enum class UniverseMode { intersection, union_ };

struct FileUniverse {
  std::vector<std::string> paths;  // sorted, deduplicated
  UniverseMode mode = UniverseMode::intersection;

  bool empty() const { return paths.empty(); }
  std::size_t size() const { return paths.size(); }
};

inline std::string_view to_string(UniverseMode m) {
  return m == UniverseMode::intersection ? "intersection" : "union";
}

inline UniverseMode parse_universe_mode(std::string_view s) {
  if (s == "intersection") return UniverseMode::intersection;
  if (s == "union") return UniverseMode::union_;
  throw Error("unknown universe mode: " + std::string(s));
}

// Throws unless the corpus is non-empty and all members share a block size.
inline void validate(const Corpus& corpus) {
  if (corpus.installations.empty()) throw Error("empty corpus");
  const auto bs = corpus.installations.front().block_size;
  for (const auto& g : corpus.installations)
    if (g.block_size != bs) throw Error("corpus members disagree on block_size");
}

inline FileUniverse make_universe(std::vector<std::string> paths,
                                  UniverseMode mode = UniverseMode::intersection) {
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  return FileUniverse{std::move(paths), mode};
}

inline FileUniverse file_universe(const Corpus& corpus, UniverseMode mode) {
  validate(corpus);
  FileUniverse u{{}, mode};
  if (mode == UniverseMode::union_) {
    std::set<std::string> all;
    for (const auto& g : corpus.installations)
      for (const auto& [path, _] : g.entries) all.insert(path);
    u.paths.assign(all.begin(), all.end());
    return u;
  }
  const auto& first = corpus.installations.front();
  for (const auto& [path, _] : first.entries) {
    bool everywhere = std::all_of(
        corpus.installations.begin() + 1, corpus.installations.end(),
        [&](const Fsg& g) { return g.entries.contains(path); });
    if (everywhere) u.paths.push_back(path);
  }
  return u;
}

// Keeps only each file's first allocated block.
inline Fsg project_first_block(Fsg fsg) {
  for (auto& [_, blocks] : fsg.entries)
    if (blocks.size() > 1) blocks.resize(1);
  return fsg;
}

// Copy of `fsg` holding only the universe's paths. Throws naming the first
// missing path.
inline Fsg restrict_to(const Fsg& fsg, const FileUniverse& universe) {
  Fsg out{fsg.device_label, fsg.volume_uuid, fsg.block_size, {}};
  for (const auto& path : universe.paths) {
    auto it = fsg.entries.find(path);
    if (it == fsg.entries.end()) throw Error("file absent from genome: " + path);
    out.entries.emplace_hint(out.entries.end(), path, it->second);
  }
  return out;
}

// First path component ("/usr/bin/ls" -> "usr"); empty for "/".
inline std::string top_dir_of(std::string_view path) {
  while (!path.empty() && path.front() == '/') path.remove_prefix(1);
  return std::string(path.substr(0, path.find('/')));
}

}  // namespace fsg
