#pragma once

// Forensic decisions over genomes: similarity scoring, identification
// against an enrolled set of devices, and ownership verification restricted
// to read-only files.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsg/error.hpp"
#include "fsg/fsg_io.hpp"
#include "fsg/metrics.hpp"
#include "fsg/model.hpp"

namespace fsg::matcher {

inline constexpr double kDefaultThreshold = 0.9;

struct MatchScore {
  double similarity = 0.0;
  std::uint64_t raw_distance = 0;
  std::uint64_t slots = 0;
};

/// 1 - d_H / slots, where a slot is one (file, position) pair of the longer
/// of the two block lists. Two all-empty genomes score 1.
inline MatchScore similarity(const Fsg& a, const Fsg& b, const FileUniverse& universe) {
  if (universe.empty()) throw Error("empty file universe");
  MatchScore s;
  s.raw_distance = metrics::hamming_distance(a, b, universe);
  for (const auto& path : universe.paths)
    s.slots += std::max(a.entries.at(path).size(), b.entries.at(path).size());
  s.similarity = s.slots == 0 ? 1.0
                              : 1.0 - static_cast<double>(s.raw_distance) /
                                          static_cast<double>(s.slots);
  return s;
}

struct EnrolledSet {
  std::map<std::string, Fsg> fingerprints;  // label -> genome over the universe
  FileUniverse reference_universe;
  double threshold = kDefaultThreshold;
};

// Builds an enrolled set, restricting every genome to `universe`.
inline EnrolledSet enroll(const std::vector<Fsg>& devices, FileUniverse universe,
                          double threshold = kDefaultThreshold) {
  if (universe.empty()) throw Error("empty reference universe");
  EnrolledSet set;
  set.reference_universe = std::move(universe);
  set.threshold = threshold;
  for (const auto& d : devices) {
    if (d.device_label.empty()) throw Error("enrolled genome without a device label");
    if (!set.fingerprints.emplace(d.device_label, restrict_to(d, set.reference_universe)).second)
      throw Error("duplicate device label: " + d.device_label);
  }
  return set;
}

struct Identification {
  bool matched = false;
  std::string label;  // best-scoring label, matched or not
  MatchScore score;
  std::vector<std::string> tied;  // all labels sharing the best score when > 1
  bool tie() const { return tied.size() > 1; }
};

inline Identification identify(const Fsg& candidate, const EnrolledSet& enrolled,
                               double threshold) {
  if (enrolled.fingerprints.empty()) throw Error("empty enrolled set");
  std::vector<std::string> missing;
  for (const auto& path : enrolled.reference_universe.paths)
    if (!candidate.entries.contains(path)) missing.push_back(path);
  if (!missing.empty()) {
    std::string msg = "candidate incomplete:";
    for (const auto& p : missing) msg += " " + p;
    throw Error(msg);
  }

  Identification best;
  bool first = true;
  // Map iteration is label-ordered, so the first label reaching the best
  // score is the lexicographically smallest.
  for (const auto& [label, fp] : enrolled.fingerprints) {
    const MatchScore s = similarity(candidate, fp, enrolled.reference_universe);
    if (first || s.similarity > best.score.similarity) {
      best.label = label;
      best.score = s;
      best.tied = {label};
      first = false;
    } else if (s.similarity == best.score.similarity) {
      best.tied.push_back(label);
    }
  }
  best.matched = best.score.similarity >= threshold;
  return best;
}

struct Verdict {
  bool accepted = false;
  MatchScore score;
};

/// Compares only the read-only files. Candidate files outside that set are
/// ignored; a read-only file missing from the candidate counts as fully
/// mismatched.
inline Verdict verify_ownership(const Fsg& candidate, const Fsg& reference,
                                const FileUniverse& readonly_universe, double threshold) {
  if (readonly_universe.empty()) throw Error("empty reference universe");
  Fsg restricted_candidate{candidate.device_label, candidate.volume_uuid,
                           candidate.block_size, {}};
  for (const auto& path : readonly_universe.paths) {
    if (!reference.entries.contains(path)) throw Error("reference incomplete: " + path);
    auto it = candidate.entries.find(path);
    restricted_candidate.entries.emplace(path,
                                         it == candidate.entries.end() ? BlockList{} : it->second);
  }
  Verdict v;
  v.score = similarity(restricted_candidate, reference, readonly_universe);
  v.accepted = v.score.similarity >= threshold;
  return v;
}

// Enrolled sets on disk: <label>.fsg per device plus manifest.json
//   {"format":"fsg-enrolled/1","labels":[...],"reference_universe":[...],"threshold":0.9}

inline void check_label(const std::string& label) {
  if (label.empty() || label.front() == '.' || label.find('/') != std::string::npos)
    throw Error("label not usable as a file name: " + label);
}

inline void save_enrolled(const EnrolledSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "fsg-enrolled/1";
  manifest["labels"] = nlohmann::json::array();
  for (const auto& [label, fp] : set.fingerprints) {
    check_label(label);
    save_fsg(fp, dir / (label + ".fsg"));
    manifest["labels"].push_back(label);
  }
  manifest["reference_universe"] = set.reference_universe.paths;
  manifest["threshold"] = set.threshold;
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(1) << '\n';
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
}

inline EnrolledSet load_enrolled(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
    if (manifest.at("format") != "fsg-enrolled/1") throw Error("unknown enrolled-set format");
    EnrolledSet set;
    set.threshold = manifest.value("threshold", kDefaultThreshold);
    set.reference_universe =
        make_universe(manifest.at("reference_universe").get<std::vector<std::string>>());
    if (set.reference_universe.empty()) throw Error("empty reference universe");
    for (const auto& label : manifest.at("labels").get<std::vector<std::string>>()) {
      check_label(label);
      Fsg fp = load_fsg(dir / (label + ".fsg"));
      set.fingerprints.emplace(label, restrict_to(fp, set.reference_universe));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad enrolled manifest: " + std::string(e.what()));
  }
}

}  // namespace fsg::matcher
