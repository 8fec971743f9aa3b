#pragma once

// Command-line front end. run() is the whole tool minus main(), so tests can
// drive it in-process.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fsg/allocsim.hpp"
#include "fsg/error.hpp"
#include "fsg/ext4_reader.hpp"
#include "fsg/fsg_io.hpp"
#include "fsg/matcher.hpp"
#include "fsg/metrics.hpp"
#include "fsg/model.hpp"

namespace fsg::cli {

enum ExitCode : int { kSuccess = 0, kDomainError = 1, kUsageError = 2 };

struct ScatterRow {
  std::size_t file_index = 0;
  BlockNo first_block = 0;
  std::string top_dir;
};

inline const std::vector<std::string>& scatter_dirs() {
  static const std::vector<std::string> dirs{"boot", "etc", "lib", "root", "usr", "var"};
  return dirs;
}

/// First-block location of every non-empty file, in path order, tagged with
/// its top-level directory (or "other").
inline std::vector<ScatterRow> render_genome_scatter(const Fsg& fsg) {
  std::vector<ScatterRow> rows;
  const auto& known = scatter_dirs();
  for (const auto& [path, blocks] : fsg.entries) {
    if (blocks.empty()) continue;
    std::string top = top_dir_of(path);
    if (std::find(known.begin(), known.end(), top) == known.end()) top = "other";
    rows.push_back({rows.size(), blocks.front(), std::move(top)});
  }
  return rows;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Writes to -o FILE when given, else to the tool's standard output.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error("cannot create " + path);
      out_ = &file_;
    }
  }
  std::ostream& get() { return *out_; }
  void finish() {
    out_->flush();
    if (!*out_) throw Error("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

inline std::vector<std::string> read_path_list(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file);
  std::vector<std::string> paths;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    paths.push_back(line);
  }
  return paths;
}

inline void write_analysis(const std::string& metric, const Corpus& corpus,
                           const FileUniverse& universe, bool first_block,
                           const std::string& cdf_file, std::ostream& out, std::ostream& err) {
  using namespace metrics;
  auto project = [&](const Fsg& g) { return first_block ? project_first_block(g) : g; };

  if (metric == "entropy" || metric == "min-entropy") {
    const auto m = build_occurrence_matrix(corpus, universe, first_block);
    const auto report = entropy_per_file(m);
    if (report.excluded_files > 0)
      err << "warning: " << report.excluded_files << " files with no recorded slots excluded\n";
    out << (metric == "entropy" ? "path,shannon_bits,min_entropy_bits\n" : "path,min_entropy_bits\n");
    for (const auto& [path, e] : report.per_file) {
      out << csv_field(path) << ',';
      if (metric == "entropy") out << fmt(e.shannon_bits) << ',';
      out << fmt(e.min_entropy_bits) << '\n';
    }
  } else if (metric == "cdf") {
    const auto m = build_occurrence_matrix(corpus, universe, first_block);
    out << "path,location,cumulative\n";
    for (const auto& [path, _] : m.per_file) {
      if (!cdf_file.empty() && path != cdf_file) continue;
      for (const auto& p : location_cdf(m, path))
        out << csv_field(path) << ',' << p.location << ',' << fmt(p.cumulative) << '\n';
    }
    if (!cdf_file.empty() && !m.per_file.contains(cdf_file))
      throw Error("file not in matrix: " + cdf_file);
  } else if (metric == "histogram") {
    out << "installation,bucket,count,percent\n";
    for (const auto& g : corpus.installations)
      for (const auto& row : block_count_histogram(project(g)))
        out << csv_field(g.device_label) << ',' << row.label() << ',' << row.count << ','
            << fmt(row.percent) << '\n';
  } else if (metric == "summary") {
    out << "installation,total_files,total_blocks,required_space_bytes,required_space_mib\n";
    for (const auto& g : corpus.installations) {
      const auto s = corpus_summary(project(g));
      out << csv_field(g.device_label) << ',' << s.total_files << ',' << s.total_blocks << ','
          << s.required_space << ',' << fmt(s.required_mib()) << '\n';
    }
  } else if (metric == "hamming") {
    out << "a,b,distance\n";
    const auto& all = corpus.installations;
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        out << csv_field(all[i].device_label) << ',' << csv_field(all[j].device_label) << ','
            << hamming_distance(project(all[i]), project(all[j]), universe) << '\n';
  }
}

inline nlohmann::json score_json(const matcher::MatchScore& s) {
  return {{"similarity", s.similarity}, {"raw_distance", s.raw_distance}, {"slots", s.slots}};
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"File system genome extraction, analysis, matching and simulation", "fsgtool"};
  app.require_subcommand(1);

  // extract
  auto* extract = app.add_subcommand("extract", "Extract the genome of an ext4 image");
  std::string image, extract_label, output;
  bool first_block = false;
  extract->add_option("image", image, "Raw ext4 image")->required();
  extract->add_flag("--first-block", first_block, "Keep only each file's first block");
  extract->add_option("--label", extract_label, "Device label (default: image file stem)");
  extract->add_option("-o,--output", output, "Output FSG file");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert a debugfs block dump (TSV) to FSG");
  std::string tsv, ingest_label;
  std::uint32_t block_size = 0;
  ingest->add_option("tsv", tsv, "path<TAB>blocks dump")->required();
  ingest->add_option("--label", ingest_label, "Device label")->required();
  ingest->add_option("--block-size", block_size, "Block size in bytes")->required();
  ingest->add_option("-o,--output", output, "Output FSG file");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Diversity metrics over a corpus directory");
  std::string corpus_dir, metric, universe_mode = "intersection", cdf_file;
  analyze->add_option("--corpus", corpus_dir, "Directory of .fsg files")->required();
  analyze->add_option("--metric", metric, "Metric")
      ->required()
      ->check(CLI::IsMember({"entropy", "min-entropy", "cdf", "histogram", "summary", "hamming"}));
  analyze->add_option("--universe", universe_mode, "File universe")
      ->check(CLI::IsMember({"intersection", "union"}));
  analyze->add_flag("--first-block", first_block, "Use only each file's first block");
  analyze->add_option("--file", cdf_file, "Restrict cdf output to one path");
  analyze->add_option("-o,--output", output, "Output CSV file");

  // match
  auto* match = app.add_subcommand("match", "Identify a genome against an enrolled set");
  std::string candidate, enrolled_dir;
  std::optional<double> threshold;
  match->add_option("--candidate", candidate, "Candidate FSG")->required();
  match->add_option("--enrolled", enrolled_dir, "Enrolled-set directory")->required();
  match->add_option("--threshold", threshold, "Decision threshold in [0,1]")
      ->check(CLI::Range(0.0, 1.0));
  match->add_option("-o,--output", output, "Output JSON file");

  // verify
  auto* verify = app.add_subcommand("verify", "Ownership verification over read-only files");
  std::string reference, readonly_list;
  verify->add_option("--candidate", candidate, "Candidate FSG")->required();
  verify->add_option("--reference", reference, "Reference FSG")->required();
  verify->add_option("--readonly", readonly_list, "File listing read-only paths")->required();
  verify->add_option("--threshold", threshold, "Decision threshold in [0,1]")
      ->check(CLI::Range(0.0, 1.0));
  verify->add_option("-o,--output", output, "Output JSON file");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic installation corpus");
  std::string config_file;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  simulate->add_option("--config", config_file, "SimConfig JSON")->required();
  simulate->add_option("--count", count, "Number of installations")->required()->check(
      CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Base seed")->required();
  simulate->add_option("-o,--output", output, "Output directory")->required();

  // scatter
  auto* scatter = app.add_subcommand("scatter", "First-block scatter data of one genome");
  std::string scatter_input;
  scatter->add_option("fsg", scatter_input, "FSG file")->required();
  scatter->add_option("-o,--output", output, "Output CSV file");

  // enroll
  auto* enroll = app.add_subcommand("enroll", "Create an enrolled-set directory");
  std::vector<std::string> enroll_inputs;
  std::string universe_list;
  enroll->add_option("fsg", enroll_inputs, "Device FSG files")->required();
  enroll->add_option("--universe-file", universe_list,
                     "Reference paths (default: files common to all devices)");
  enroll->add_option("--threshold", threshold, "Stored decision threshold")
      ->check(CLI::Range(0.0, 1.0));
  enroll->add_option("-o,--output", output, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    if (*extract) {
      const auto img = ext4::open_image(std::filesystem::path(image));
      std::string label =
          extract_label.empty() ? std::filesystem::path(image).stem().string() : extract_label;
      detail::Sink sink(output, out);
      write_fsg(ext4::extract_fsg(img, first_block, label), sink.get());
      sink.finish();
    } else if (*ingest) {
      std::ifstream in(tsv);
      if (!in) throw Error("cannot open " + tsv);
      const Fsg fsg = ingest_debugfs_dump(in, ingest_label, block_size);
      detail::Sink sink(output, out);
      write_fsg(fsg, sink.get());
      sink.finish();
    } else if (*analyze) {
      const Corpus corpus = load_corpus(corpus_dir);
      const FileUniverse universe = file_universe(corpus, parse_universe_mode(universe_mode));
      if (universe.empty()) throw Error("empty file universe");
      detail::Sink sink(output, out);
      detail::write_analysis(metric, corpus, universe, first_block, cdf_file, sink.get(), err);
      sink.finish();
    } else if (*match) {
      const auto enrolled = matcher::load_enrolled(enrolled_dir);
      const auto result =
          matcher::identify(load_fsg(candidate), enrolled, threshold.value_or(enrolled.threshold));
      nlohmann::json j = detail::score_json(result.score);
      j["decision"] = result.matched ? "matched" : "unmatched";
      j["label"] = result.label;
      j["tie"] = result.tie();
      j["tied"] = result.tied;
      detail::Sink sink(output, out);
      sink.get() << j.dump() << '\n';
      sink.finish();
    } else if (*verify) {
      const auto universe = make_universe(detail::read_path_list(readonly_list));
      const auto verdict =
          matcher::verify_ownership(load_fsg(candidate), load_fsg(reference), universe,
                                    threshold.value_or(matcher::kDefaultThreshold));
      nlohmann::json j = detail::score_json(verdict.score);
      j["decision"] = verdict.accepted ? "accept" : "reject";
      detail::Sink sink(output, out);
      sink.get() << j.dump() << '\n';
      sink.finish();
    } else if (*simulate) {
      std::ifstream in(config_file);
      if (!in) throw Error("cannot open " + config_file);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error("bad simulator config: " + std::string(e.what()));
      }
      const auto cfg = sim::config_from_json(j);
      const auto corpus = sim::simulate_corpus(cfg, count, seed);
      const std::filesystem::path dir(output);
      std::filesystem::create_directories(dir);
      for (const auto& g : corpus.installations) save_fsg(g, dir / (g.device_label + ".fsg"));
      nlohmann::json record = sim::to_json(cfg);
      record["base_seed"] = seed;
      record["count"] = count;
      std::ofstream rec(dir / "simulate.json", std::ios::binary | std::ios::trunc);
      rec << record.dump(1) << '\n';
      if (!rec) throw Error("cannot write " + (dir / "simulate.json").string());
    } else if (*scatter) {
      const Fsg fsg = load_fsg(scatter_input);
      detail::Sink sink(output, out);
      sink.get() << "file_index,first_block,top_dir\n";
      for (const auto& row : render_genome_scatter(fsg))
        sink.get() << row.file_index << ',' << row.first_block << ',' << row.top_dir << '\n';
      sink.finish();
    } else if (*enroll) {
      std::vector<Fsg> devices;
      for (const auto& f : enroll_inputs) devices.push_back(load_fsg(f));
      FileUniverse universe;
      if (!universe_list.empty()) {
        universe = make_universe(detail::read_path_list(universe_list));
      } else {
        Corpus c{"enroll", devices};
        universe = file_universe(c, UniverseMode::intersection);
      }
      const auto set =
          matcher::enroll(devices, universe, threshold.value_or(matcher::kDefaultThreshold));
      matcher::save_enrolled(set, output);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kSuccess;
}

}  // namespace fsg::cli
