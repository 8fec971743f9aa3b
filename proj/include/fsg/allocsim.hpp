#pragma once

// Synthetic installations. A seeded model of how a delayed-allocation file
// system places the blocks of an installer's writes:
//
//  * files are written in plan order, one single-block write request at a
//    time. Requests of the same file join one write-cache entry; a file's
//    entry arrives at the position the cache had when its first pending
//    block was queued;
//  * after every request a sync fires with probability
//    min(1, 1/sync_mean_writes), so a sync can split a file;
//  * a sync flushes the cache. Entries with at least small_file_threshold
//    pending blocks form their own group with a per-file goal: the block
//    after the file's last placed block, or the goal of its top-level
//    directory for a file not yet placed. Smaller entries (including the
//    tail of a split large file) are grouped by CPU slot (arrival mod
//    cpu_slots) and share that slot's goal. Groups are handled in order of
//    their first arrival;
//  * a group takes the first contiguous free run at or after its goal,
//    scanning to the disk end and then from block 0 (runs never straddle the
//    end). Members are laid out in arrival order and the goal moves past the
//    run;
//  * if no run fits, the goal is redrawn as a random group start and the
//    group is placed block by block, first free block at or after a cursor
//    that starts at the new goal and wraps;
//  * a final sync flushes what is left.
//
// Initial goals: CPU slot s starts at group floor(s * G / cpu_slots); the
// k-th distinct top-level directory in the plan starts at group k mod G,
// where G = disk_blocks / group_size. Bad blocks are never free.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fsg/error.hpp"
#include "fsg/model.hpp"
#include "fsg/rng.hpp"

namespace fsg::sim {

struct PlannedFile {
  std::string path;
  std::uint64_t blocks = 0;

  friend bool operator==(const PlannedFile&, const PlannedFile&) = default;
};

struct SimConfig {
  std::uint64_t disk_blocks = 32768;
  std::uint32_t block_size = 4096;
  std::vector<PlannedFile> file_plan;
  double sync_mean_writes = 32.0;
  std::uint32_t cpu_slots = 2;
  std::uint64_t group_size = 2048;
  std::uint64_t small_file_threshold = 16;
  std::set<BlockNo> bad_blocks;
  std::uint64_t seed = 0;

  std::uint64_t group_count() const { return disk_blocks / group_size; }
  std::uint64_t planned_blocks() const {
    std::uint64_t n = 0;
    for (const auto& f : file_plan) n += f.blocks;
    return n;
  }

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct WriteCacheEntry {
  std::size_t plan_index = 0;
  std::uint64_t pending_blocks = 0;
  std::uint64_t arrival_index = 0;
};

// Structural checks; capacity is checked by simulate_installation.
inline void validate(const SimConfig& cfg) {
  if (cfg.disk_blocks == 0) throw Error("disk_blocks must be positive");
  if (cfg.block_size == 0) throw Error("block_size must be positive");
  if (cfg.group_size == 0 || cfg.disk_blocks % cfg.group_size != 0)
    throw Error("group_size must divide disk_blocks");
  if (cfg.cpu_slots == 0) throw Error("cpu_slots must be at least 1");
  if (!(cfg.sync_mean_writes > 0) || !std::isfinite(cfg.sync_mean_writes))
    throw Error("sync_mean_writes must be a positive real");
  if (!cfg.bad_blocks.empty() && *cfg.bad_blocks.rbegin() >= cfg.disk_blocks)
    throw Error("bad block beyond disk end");
  std::set<std::string_view> seen;
  for (const auto& f : cfg.file_plan) {
    if (f.path.empty() || f.path.front() != '/')
      throw Error("plan path must be absolute: " + f.path);
    if (!seen.insert(f.path).second) throw Error("duplicate plan path: " + f.path);
  }
}

/// Free space as an ordered map of extents start -> length.
class FreeSpace {
 public:
  FreeSpace(std::uint64_t disk_blocks, const std::set<BlockNo>& bad) : disk_(disk_blocks) {
    BlockNo start = 0;
    for (BlockNo b : bad) {
      if (b > start) extents_.emplace(start, b - start);
      start = b + 1;
    }
    if (start < disk_) extents_.emplace(start, disk_ - start);
  }

  std::uint64_t free_blocks() const {
    std::uint64_t n = 0;
    for (const auto& [_, len] : extents_) n += len;
    return n;
  }

  // First start position p of n free blocks, scanning p = goal .. end then
  // 0 .. goal-1.
  std::optional<BlockNo> find_run(BlockNo goal, std::uint64_t n) const {
    auto it = extents_.upper_bound(goal);
    if (it != extents_.begin()) {
      auto prev = std::prev(it);
      if (prev->first + prev->second > goal) it = prev;
    }
    for (auto j = it; j != extents_.end(); ++j) {
      const BlockNo from = std::max(j->first, goal);
      if (j->first + j->second - from >= n) return from;
    }
    for (auto j = extents_.begin(); j != extents_.end() && j->first < goal; ++j)
      if (j->second >= n) return j->first;
    return std::nullopt;
  }

  // First free block at or after `cursor`, wrapping to block 0.
  std::optional<BlockNo> next_free(BlockNo cursor) const {
    if (extents_.empty()) return std::nullopt;
    auto it = extents_.upper_bound(cursor);
    if (it != extents_.begin()) {
      auto prev = std::prev(it);
      if (prev->first + prev->second > cursor) return cursor;
    }
    if (it == extents_.end()) it = extents_.begin();
    return it->first;
  }

  // Marks [start, start+n) used; the range must be free.
  void take(BlockNo start, std::uint64_t n) {
    auto it = std::prev(extents_.upper_bound(start));
    const BlockNo ext_start = it->first;
    const std::uint64_t ext_len = it->second;
    extents_.erase(it);
    if (start > ext_start) extents_.emplace(ext_start, start - ext_start);
    const BlockNo end = start + n;
    if (end < ext_start + ext_len) extents_.emplace(end, ext_start + ext_len - end);
  }

 private:
  std::uint64_t disk_;
  std::map<BlockNo, std::uint64_t> extents_;
};

namespace detail {

class Installation {
 public:
  Installation(const SimConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed), free_(cfg.disk_blocks, cfg.bad_blocks),
        blocks_(cfg.file_plan.size()), file_goal_(cfg.file_plan.size()) {
    const std::uint64_t groups = cfg.group_count();
    for (std::uint32_t s = 0; s < cfg.cpu_slots; ++s)
      slot_goal_.push_back(s * groups / cfg.cpu_slots * cfg.group_size);
    std::unordered_map<std::string, std::size_t> dir_ids;
    for (const auto& f : cfg.file_plan) {
      auto [it, fresh] = dir_ids.emplace(top_dir_of(f.path), dir_goal_.size());
      if (fresh) dir_goal_.push_back((dir_goal_.size() % groups) * cfg.group_size);
      file_dir_.push_back(it->second);
    }
  }

  Fsg run() {
    const double p_sync = std::min(1.0, 1.0 / cfg_.sync_mean_writes);
    for (std::size_t i = 0; i < cfg_.file_plan.size(); ++i) {
      for (std::uint64_t k = 0; k < cfg_.file_plan[i].blocks; ++k) {
        if (cache_.empty() || cache_.back().plan_index != i)
          cache_.push_back({i, 0, cache_.size()});
        ++cache_.back().pending_blocks;
        if (rng_.next_unit() < p_sync) flush();
      }
    }
    flush();

    Fsg out;
    out.device_label = "sim";
    out.block_size = cfg_.block_size;
    for (std::size_t i = 0; i < cfg_.file_plan.size(); ++i)
      out.entries.emplace(cfg_.file_plan[i].path, std::move(blocks_[i]));
    return out;
  }

 private:
  struct Group {
    BlockNo* goal;
    std::vector<const WriteCacheEntry*> members;
  };

  void flush() {
    std::vector<Group> groups;
    std::vector<std::optional<std::size_t>> slot_group(cfg_.cpu_slots);
    for (const auto& e : cache_) {
      if (e.pending_blocks >= cfg_.small_file_threshold) {
        BlockNo* goal = blocks_[e.plan_index].empty() ? &dir_goal_[file_dir_[e.plan_index]]
                                                      : &file_goal_[e.plan_index];
        groups.push_back({goal, {&e}});
        continue;
      }
      const auto slot = e.arrival_index % cfg_.cpu_slots;
      if (!slot_group[slot]) {
        slot_group[slot] = groups.size();
        groups.push_back({&slot_goal_[slot], {}});
      }
      groups[*slot_group[slot]].members.push_back(&e);
    }
    for (auto& g : groups) place(g);
    cache_.clear();
  }

  void place(Group& g) {
    std::uint64_t n = 0;
    for (const auto* m : g.members) n += m->pending_blocks;
    if (auto start = free_.find_run(*g.goal, n)) {
      free_.take(*start, n);
      BlockNo next = *start;
      for (const auto* m : g.members) {
        for (std::uint64_t k = 0; k < m->pending_blocks; ++k) blocks_[m->plan_index].push_back(next++);
        file_goal_[m->plan_index] = next % cfg_.disk_blocks;
      }
      *g.goal = next % cfg_.disk_blocks;
      return;
    }
    *g.goal = rng_.below(cfg_.group_count()) * cfg_.group_size;
    BlockNo cursor = *g.goal;
    for (const auto* m : g.members) {
      for (std::uint64_t k = 0; k < m->pending_blocks; ++k) {
        const BlockNo b = *free_.next_free(cursor);
        free_.take(b, 1);
        blocks_[m->plan_index].push_back(b);
        cursor = (b + 1) % cfg_.disk_blocks;
      }
      file_goal_[m->plan_index] = cursor;
    }
    *g.goal = cursor;
  }

  const SimConfig& cfg_;
  SplitMix64 rng_;
  FreeSpace free_;
  std::vector<BlockList> blocks_;
  std::vector<BlockNo> file_goal_;
  std::vector<BlockNo> slot_goal_;
  std::vector<BlockNo> dir_goal_;
  std::vector<std::size_t> file_dir_;
  std::vector<WriteCacheEntry> cache_;
};

}  // namespace detail

inline Fsg simulate_installation(const SimConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const std::uint64_t capacity = cfg.disk_blocks - cfg.bad_blocks.size();
  std::uint64_t used = 0;
  for (const auto& f : cfg.file_plan) {
    used += f.blocks;
    if (used > capacity) throw Error("disk full at path " + f.path);
  }
  return detail::Installation(cfg, seed).run();
}

inline Fsg simulate_installation(const SimConfig& cfg) {
  return simulate_installation(cfg, cfg.seed);
}

inline Corpus simulate_corpus(const SimConfig& cfg, std::size_t n, std::uint64_t base_seed) {
  if (n == 0) throw Error("corpus size must be at least 1");
  Corpus corpus;
  corpus.label = "sim";
  corpus.installations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Fsg g = simulate_installation(cfg, mix_seed(base_seed, i));
    g.device_label = "install-" + std::to_string(i);
    corpus.installations.push_back(std::move(g));
  }
  return corpus;
}

// Files per block-count bucket in the standard installation size table.
inline constexpr std::array<std::uint64_t, 7> kStandardMixCounts{24108, 2096, 154, 24, 3, 4, 0};
inline constexpr std::array<std::pair<std::uint64_t, std::uint64_t>, 7> kStandardMixSizes{{
    {1, 9}, {10, 99}, {100, 499}, {500, 999}, {1000, 1999}, {2000, 3999}, {4000, 7999}}};

/// A plan of `files` files whose block-count bucket proportions follow the
/// standard installation mix (largest-remainder apportionment), with sizes
/// uniform inside each bucket and a shuffled write order.
inline std::vector<PlannedFile> standard_mix_plan(std::size_t files, std::uint64_t seed) {
  std::uint64_t total = 0;
  for (auto c : kStandardMixCounts) total += c;
  std::array<std::uint64_t, 7> counts{};
  std::array<std::pair<double, std::size_t>, 7> remainders{};
  std::uint64_t assigned = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const double exact = static_cast<double>(files) * kStandardMixCounts[b] / total;
    counts[b] = static_cast<std::uint64_t>(exact);
    assigned += counts[b];
    remainders[b] = {exact - counts[b], b};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; assigned < files; ++k, ++assigned) ++counts[remainders[k].second];

  SplitMix64 rng(seed);
  std::vector<std::size_t> buckets;
  for (std::size_t b = 0; b < counts.size(); ++b) buckets.insert(buckets.end(), counts[b], b);
  for (std::size_t i = buckets.size(); i > 1; --i) std::swap(buckets[i - 1], buckets[rng.below(i)]);

  static constexpr std::array<std::pair<const char*, std::uint64_t>, 6> kDirs{{
      {"usr", 60}, {"lib", 15}, {"etc", 10}, {"var", 8}, {"root", 4}, {"boot", 3}}};
  std::vector<PlannedFile> plan;
  plan.reserve(files);
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const auto [lo, hi] = kStandardMixSizes[buckets[i]];
    const std::uint64_t size = lo + rng.below(hi - lo + 1);
    std::uint64_t pick = rng.below(100);
    std::size_t d = 0;
    while (pick >= kDirs[d].second) pick -= kDirs[d++].second;
    char name[64];
    std::snprintf(name, sizeof name, "/%s/d%02u/f%05zu", kDirs[d].first,
                  static_cast<unsigned>(rng.below(16)), i);
    plan.push_back({name, size});
  }
  return plan;
}

/// The bundled desk-scale configuration: a 1,000-file plan on a 128 MiB disk.
inline SimConfig default_config() {
  SimConfig cfg;
  cfg.file_plan = standard_mix_plan(1000, 2024);
  cfg.seed = 1;
  return cfg;
}

// JSON form. A config either lists "file_plan" explicitly or names a
// generator: "plan_generator": {"kind": "standard_mix", "files": N, "seed": S}.
inline nlohmann::json to_json(const SimConfig& cfg) {
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& f : cfg.file_plan) plan.push_back({{"path", f.path}, {"blocks", f.blocks}});
  return {
      {"disk_blocks", cfg.disk_blocks},
      {"block_size", cfg.block_size},
      {"sync_mean_writes", cfg.sync_mean_writes},
      {"cpu_slots", cfg.cpu_slots},
      {"group_size", cfg.group_size},
      {"small_file_threshold", cfg.small_file_threshold},
      {"bad_blocks", std::vector<BlockNo>(cfg.bad_blocks.begin(), cfg.bad_blocks.end())},
      {"seed", cfg.seed},
      {"file_plan", plan},
  };
}

inline SimConfig config_from_json(const nlohmann::json& j) {
  try {
    SimConfig cfg;
    cfg.disk_blocks = j.value("disk_blocks", cfg.disk_blocks);
    cfg.block_size = j.value("block_size", cfg.block_size);
    cfg.sync_mean_writes = j.value("sync_mean_writes", cfg.sync_mean_writes);
    cfg.cpu_slots = j.value("cpu_slots", cfg.cpu_slots);
    cfg.group_size = j.value("group_size", cfg.group_size);
    cfg.small_file_threshold = j.value("small_file_threshold", cfg.small_file_threshold);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("bad_blocks"))
      for (const auto& b : j.at("bad_blocks")) cfg.bad_blocks.insert(b.get<BlockNo>());
    if (j.contains("file_plan")) {
      for (const auto& f : j.at("file_plan"))
        cfg.file_plan.push_back({f.at("path").get<std::string>(), f.at("blocks").get<std::uint64_t>()});
    } else if (j.contains("plan_generator")) {
      const auto& g = j.at("plan_generator");
      if (g.value("kind", std::string{"standard_mix"}) != "standard_mix")
        throw Error("unknown plan generator: " + g.at("kind").get<std::string>());
      cfg.file_plan = standard_mix_plan(g.at("files").get<std::size_t>(), g.value("seed", 0ULL));
    } else {
      throw Error("config needs file_plan or plan_generator");
    }
    validate(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad simulator config: " + std::string(e.what()));
  }
}

}  // namespace fsg::sim
