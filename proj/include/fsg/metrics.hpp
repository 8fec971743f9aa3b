#pragma once

// Diversity measures over genome corpora: occurrence counts, Shannon and
// min-entropy per file, per-file location CDFs with a KS distance to the
// uniform, the block-count histogram, corpus size summary and the Hamming
// distance between two genomes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fsg/error.hpp"
#include "fsg/model.hpp"

namespace fsg::metrics {

/// Sparse per-file histogram of block locations across installations.
/// Absent locations have count zero.
struct OccurrenceMatrix {
  std::map<std::string, std::map<BlockNo, std::uint64_t>> per_file;
  std::uint64_t num_installations = 0;
  std::map<std::string, std::uint64_t> slots_per_file;

  // Adds another partial matrix built over disjoint installations.
  void merge(const OccurrenceMatrix& other) {
    num_installations += other.num_installations;
    for (const auto& [path, counts] : other.per_file) {
      auto& mine = per_file[path];
      for (const auto& [loc, n] : counts) mine[loc] += n;
    }
    for (const auto& [path, n] : other.slots_per_file) slots_per_file[path] += n;
  }
};

inline OccurrenceMatrix build_occurrence_matrix(const Corpus& corpus,
                                                const FileUniverse& universe,
                                                bool first_block_only) {
  if (universe.empty()) throw Error("empty file universe");
  validate(corpus);
  OccurrenceMatrix m;
  m.num_installations = corpus.installations.size();
  for (const auto& path : universe.paths) {
    m.per_file[path];
    m.slots_per_file[path] = 0;
  }
  for (const auto& install : corpus.installations) {
    for (const auto& path : universe.paths) {
      auto it = install.entries.find(path);
      if (it == install.entries.end()) {
        if (universe.mode == UniverseMode::intersection)
          throw Error("file absent from genome: " + path + " in " + install.device_label);
        continue;
      }
      const BlockList& blocks = it->second;
      const std::size_t take = first_block_only ? std::min<std::size_t>(1, blocks.size())
                                                : blocks.size();
      auto& counts = m.per_file[path];
      for (std::size_t k = 0; k < take; ++k) ++counts[blocks[k]];
      m.slots_per_file[path] += take;
    }
  }
  return m;
}

struct FileEntropy {
  double shannon_bits = 0.0;
  double min_entropy_bits = 0.0;
};

struct EntropyReport {
  std::map<std::string, FileEntropy> per_file;
  std::uint64_t corpus_size = 0;
  std::uint64_t excluded_files = 0;  // files with no recorded slot
};

namespace detail {
inline std::uint64_t max_count(const std::map<BlockNo, std::uint64_t>& counts) {
  std::uint64_t v = 0;
  for (const auto& [_, n] : counts) v = std::max(v, n);
  return v;
}

inline double shannon(const std::map<BlockNo, std::uint64_t>& counts, std::uint64_t slots) {
  double h = 0.0;
  for (const auto& [_, n] : counts) {
    if (n == 0) continue;
    const double p = static_cast<double>(n) / static_cast<double>(slots);
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;  // no negative zero
}

inline double min_entropy(std::uint64_t max_count, std::uint64_t installations) {
  const double h = -std::log2(static_cast<double>(max_count) /
                              static_cast<double>(installations));
  return h == 0.0 ? 0.0 : h;
}
}  // namespace detail

/// Min-entropy per file: v = most frequent location count, H = -log2(v/|I|).
/// Dividing by the number of installations rather than by the disk size
/// makes this an underestimate of the generating process's min-entropy.
inline EntropyReport min_entropy_per_file(const OccurrenceMatrix& m) {
  if (m.num_installations == 0) throw Error("empty corpus");
  EntropyReport r;
  r.corpus_size = m.num_installations;
  for (const auto& [path, counts] : m.per_file) {
    const auto slots = m.slots_per_file.at(path);
    if (slots == 0) {
      ++r.excluded_files;
      continue;
    }
    r.per_file[path].min_entropy_bits =
        detail::min_entropy(detail::max_count(counts), m.num_installations);
  }
  return r;
}

/// Shannon entropy per file with p_j = count_j / slots.
inline EntropyReport shannon_entropy_per_file(const OccurrenceMatrix& m) {
  if (m.num_installations == 0) throw Error("empty corpus");
  EntropyReport r;
  r.corpus_size = m.num_installations;
  for (const auto& [path, counts] : m.per_file) {
    const auto slots = m.slots_per_file.at(path);
    if (slots == 0) {
      ++r.excluded_files;
      continue;
    }
    r.per_file[path].shannon_bits = detail::shannon(counts, slots);
  }
  return r;
}

// Both estimates in one report.
inline EntropyReport entropy_per_file(const OccurrenceMatrix& m) {
  EntropyReport r = shannon_entropy_per_file(m);
  const EntropyReport mins = min_entropy_per_file(m);
  for (auto& [path, e] : r.per_file) e.min_entropy_bits = mins.per_file.at(path).min_entropy_bits;
  return r;
}

struct CdfPoint {
  BlockNo location;
  double cumulative;
};

using Cdf = std::vector<CdfPoint>;

inline Cdf location_cdf(const OccurrenceMatrix& m, const std::string& path) {
  auto it = m.per_file.find(path);
  if (it == m.per_file.end()) throw Error("file not in matrix: " + path);
  const auto slots = m.slots_per_file.at(path);
  Cdf cdf;
  if (slots == 0) return cdf;
  cdf.reserve(it->second.size());
  std::uint64_t running = 0;
  for (const auto& [loc, n] : it->second) {
    running += n;
    cdf.push_back({loc, static_cast<double>(running) / static_cast<double>(slots)});
  }
  cdf.back().cumulative = 1.0;
  return cdf;
}

/// Half-open interval [lo, hi) of block locations.
struct Support {
  BlockNo lo = 0;
  BlockNo hi = 0;
};

/// sup |F_emp - F_unif| where F_unif is the discrete uniform CDF over the
/// integers of `support`. Both are step functions, so the supremum is
/// reached at an empirical jump point or the integer right before one.
inline double ks_distance_to_uniform(const Cdf& cdf, Support support) {
  if (support.hi <= support.lo) throw Error("degenerate support");
  if (cdf.empty()) throw Error("empty cdf");
  if (cdf.front().location < support.lo || cdf.back().location >= support.hi)
    throw Error("support does not cover cdf");
  const double width = static_cast<double>(support.hi - support.lo);
  auto uniform = [&](BlockNo x) { return static_cast<double>(x - support.lo + 1) / width; };
  double d = 0.0;
  double previous = 0.0;
  for (const auto& point : cdf) {
    d = std::max(d, std::abs(point.cumulative - uniform(point.location)));
    if (point.location > support.lo)
      d = std::max(d, std::abs(previous - uniform(point.location - 1)));
    previous = point.cumulative;
  }
  return d;
}

struct HistogramRow {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;  // inclusive; UINT64_MAX for the open bucket
  std::uint64_t count = 0;
  double percent = 0.0;

  std::string label() const {
    if (hi == std::numeric_limits<std::uint64_t>::max()) return ">=" + std::to_string(lo);
    return std::to_string(lo) + "-" + std::to_string(hi);
  }
};

// Bucket edges follow the installation size table; the last bucket is closed
// at 4000 so that every count lands somewhere.
inline constexpr std::array<std::pair<std::uint64_t, std::uint64_t>, 7> kHistogramBuckets{{
    {0, 9},
    {10, 99},
    {100, 499},
    {500, 999},
    {1000, 1999},
    {2000, 3999},
    {4000, std::numeric_limits<std::uint64_t>::max()},
}};

inline std::size_t bucket_index(std::uint64_t blocks) {
  for (std::size_t i = 0; i < kHistogramBuckets.size(); ++i)
    if (blocks <= kHistogramBuckets[i].second) return i;
  return kHistogramBuckets.size() - 1;
}

inline std::vector<HistogramRow> block_count_histogram(const Fsg& fsg) {
  std::vector<HistogramRow> rows;
  for (const auto& [lo, hi] : kHistogramBuckets) rows.push_back({lo, hi, 0, 0.0});
  for (const auto& [_, blocks] : fsg.entries) ++rows[bucket_index(blocks.size())].count;
  const auto total = fsg.entries.size();
  if (total > 0)
    for (auto& row : rows)
      row.percent = 100.0 * static_cast<double>(row.count) / static_cast<double>(total);
  return rows;
}

struct CorpusSummary {
  std::uint64_t total_files = 0;
  std::uint64_t total_blocks = 0;
  std::uint64_t required_space = 0;  // bytes

  double required_mib() const { return static_cast<double>(required_space) / (1024.0 * 1024.0); }
};

inline CorpusSummary corpus_summary(const Fsg& fsg) {
  CorpusSummary s;
  s.total_files = fsg.entries.size();
  for (const auto& [_, blocks] : fsg.entries) s.total_blocks += blocks.size();
  s.required_space = s.total_blocks * fsg.block_size;
  return s;
}

// Positionwise mismatches plus the length difference.
inline std::uint64_t hamming_distance(const BlockList& a, const BlockList& b) {
  const std::size_t common = std::min(a.size(), b.size());
  std::uint64_t d = 0;
  for (std::size_t k = 0; k < common; ++k) d += a[k] != b[k];
  return d + (std::max(a.size(), b.size()) - common);
}

inline std::uint64_t hamming_distance(const Fsg& a, const Fsg& b, const FileUniverse& universe) {
  std::uint64_t total = 0;
  for (const auto& path : universe.paths) {
    auto ia = a.entries.find(path);
    if (ia == a.entries.end())
      throw Error("file absent from genome: " + path + " (" + a.device_label + ")");
    auto ib = b.entries.find(path);
    if (ib == b.entries.end())
      throw Error("file absent from genome: " + path + " (" + b.device_label + ")");
    total += hamming_distance(ia->second, ib->second);
  }
  return total;
}

}  // namespace fsg::metrics
