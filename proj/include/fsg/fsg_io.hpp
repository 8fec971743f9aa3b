#pragma once

// Persistence for genomes and corpora.
//
// FSG files are UTF-8 JSON Lines. Line 1 is a header object
//   {"block_size":4096,"device_label":"...","format":"fsg/1","volume_uuid":"<32 hex>"|null}
// and every following line is one entry
//   {"blocks":[8193,8194],"path":"/etc/hosts"}
// Keys are sorted and entries are written in path order, so output is
// byte-deterministic for a given genome.
//
// The debugfs dump layout is one "path<TAB>b1,b2,..." line per file.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "fsg/error.hpp"
#include "fsg/model.hpp"

namespace fsg {

inline constexpr std::string_view kFsgFormat = "fsg/1";

namespace detail {

inline std::size_t write_line(std::ostream& out, const std::string& line,
                              std::size_t written) {
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  if (!out) throw Error("write failed after " + std::to_string(written) + " bytes");
  return written + line.size() + 1;
}

[[noreturn]] inline void parse_error(std::size_t line_no, std::string_view what = {}) {
  std::string msg = "parse error at line " + std::to_string(line_no);
  if (!what.empty()) msg += ": " + std::string(what);
  throw Error(msg);
}

inline bool has_duplicates(const BlockList& blocks) {
  std::unordered_set<BlockNo> seen;
  seen.reserve(blocks.size());
  for (auto b : blocks)
    if (!seen.insert(b).second) return true;
  return false;
}

}  // namespace detail

inline std::size_t write_fsg(const Fsg& fsg, std::ostream& out) {
  nlohmann::json header = {
      {"format", kFsgFormat},
      {"device_label", fsg.device_label},
      {"volume_uuid", fsg.volume_uuid ? nlohmann::json(fsg.volume_uuid->hex())
                                      : nlohmann::json(nullptr)},
      {"block_size", fsg.block_size},
  };
  std::size_t written = detail::write_line(out, header.dump(), 0);
  for (const auto& [path, blocks] : fsg.entries) {
    nlohmann::json entry = {{"path", path}, {"blocks", blocks}};
    written = detail::write_line(out, entry.dump(), written);
  }
  out.flush();
  if (!out) throw Error("write failed after " + std::to_string(written) + " bytes");
  return written;
}

inline Fsg read_fsg(std::istream& in) {
  using nlohmann::json;
  Fsg fsg;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception&) {
      detail::parse_error(line_no);
    }
    if (!obj.is_object()) detail::parse_error(line_no);
    try {
      if (!have_header) {
        if (obj.value("format", std::string{}) != kFsgFormat)
          detail::parse_error(line_no, "missing fsg/1 header");
        fsg.device_label = obj.at("device_label").get<std::string>();
        const auto& uuid = obj.at("volume_uuid");
        if (!uuid.is_null()) {
          fsg.volume_uuid = Uuid::from_hex(uuid.get<std::string>());
          if (!fsg.volume_uuid) detail::parse_error(line_no, "bad volume_uuid");
        }
        const auto& bs = obj.at("block_size");
        if (!bs.is_number_unsigned() || bs.get<std::uint64_t>() == 0 ||
            bs.get<std::uint64_t>() > UINT32_MAX)
          detail::parse_error(line_no, "bad block_size");
        fsg.block_size = bs.get<std::uint32_t>();
        have_header = true;
        continue;
      }
      auto path = obj.at("path").get<std::string>();
      const auto& arr = obj.at("blocks");
      if (!arr.is_array()) detail::parse_error(line_no);
      BlockList blocks;
      blocks.reserve(arr.size());
      for (const auto& b : arr) {
        if (!b.is_number_unsigned()) detail::parse_error(line_no, "bad block number");
        blocks.push_back(b.get<BlockNo>());
      }
      if (detail::has_duplicates(blocks)) detail::parse_error(line_no, "duplicate block");
      if (!fsg.entries.emplace(path, std::move(blocks)).second)
        throw Error("duplicate entry: " + path);
    } catch (const json::exception&) {
      detail::parse_error(line_no);
    }
  }
  if (!have_header) detail::parse_error(line_no == 0 ? 1 : line_no, "missing fsg/1 header");
  return fsg;
}

inline Fsg ingest_debugfs_dump(std::istream& in, std::string device_label,
                               std::uint32_t block_size) {
  if (block_size == 0) throw Error("block_size must be positive");
  Fsg fsg;
  fsg.device_label = std::move(device_label);
  fsg.block_size = block_size;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) detail::parse_error(line_no, "missing tab");
    std::string path = line.substr(0, tab);
    std::string_view field = std::string_view(line).substr(tab + 1);
    BlockList blocks;
    while (!field.empty()) {
      auto comma = field.find(',');
      auto token = field.substr(0, comma);
      BlockNo value = 0;
      auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (token.empty() || ec != std::errc{} || end != token.data() + token.size())
        detail::parse_error(line_no, "bad block number");
      blocks.push_back(value);
      if (comma == std::string_view::npos) break;
      field.remove_prefix(comma + 1);
      if (field.empty()) detail::parse_error(line_no, "bad block number");
    }
    if (detail::has_duplicates(blocks)) detail::parse_error(line_no, "duplicate block");
    if (!fsg.entries.emplace(std::move(path), std::move(blocks)).second)
      throw Error("duplicate entry at line " + std::to_string(line_no));
  }
  return fsg;
}

// Reverse of ingest_debugfs_dump.
inline void write_debugfs_dump(const Fsg& fsg, std::ostream& out) {
  for (const auto& [path, blocks] : fsg.entries) {
    out << path << '\t';
    for (std::size_t i = 0; i < blocks.size(); ++i) out << (i ? "," : "") << blocks[i];
    out << '\n';
  }
}

inline Fsg load_fsg(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return read_fsg(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void save_fsg(const Fsg& fsg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  write_fsg(fsg, out);
}

// Every *.fsg file in `dir`, ordered by file name.
inline Corpus load_corpus(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("not a corpus directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".fsg") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Corpus corpus;
  corpus.label = dir.filename().string();
  for (const auto& f : files) corpus.installations.push_back(load_fsg(f));
  if (corpus.installations.empty()) throw Error("no .fsg files in " + dir.string());
  validate(corpus);
  return corpus;
}

}  // namespace fsg
