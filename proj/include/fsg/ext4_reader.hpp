#pragma once

// Read-only ext4 image reader: superblock, group descriptors, inodes, extent
// trees and directory traversal, enough to recover per-file block lists.
//
// All on-disk integers are little-endian. Checksums are never verified.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "fsg/byte_source.hpp"
#include "fsg/error.hpp"
#include "fsg/model.hpp"

namespace fsg::ext4 {

inline constexpr std::uint16_t kSuperMagic = 0xEF53;
inline constexpr std::uint16_t kExtentMagic = 0xF30A;
inline constexpr std::uint64_t kSuperblockOffset = 1024;
inline constexpr std::size_t kSuperblockSize = 1024;
inline constexpr std::uint32_t kRootIno = 2;
inline constexpr int kMaxExtentDepth = 5;

// Directories' own data blocks are not part of a genome; only regular files.
inline constexpr bool kGenomeIncludesDirectories = false;

namespace incompat {
inline constexpr std::uint32_t compression = 0x1;
inline constexpr std::uint32_t filetype = 0x2;
inline constexpr std::uint32_t recover = 0x4;
inline constexpr std::uint32_t journal_dev = 0x8;
inline constexpr std::uint32_t meta_bg = 0x10;
inline constexpr std::uint32_t extents = 0x40;
inline constexpr std::uint32_t bit64 = 0x80;
inline constexpr std::uint32_t mmp = 0x100;
inline constexpr std::uint32_t flex_bg = 0x200;
inline constexpr std::uint32_t ea_inode = 0x400;
inline constexpr std::uint32_t dirdata = 0x1000;
inline constexpr std::uint32_t csum_seed = 0x2000;
inline constexpr std::uint32_t largedir = 0x4000;
inline constexpr std::uint32_t inline_data = 0x8000;
inline constexpr std::uint32_t encrypt = 0x10000;
inline constexpr std::uint32_t casefold = 0x20000;

inline constexpr std::uint32_t supported = filetype | extents | bit64 | flex_bg;

inline std::string name(std::uint32_t bit) {
  switch (bit) {
    case compression: return "compression";
    case filetype: return "filetype";
    case recover: return "needs_recovery";
    case journal_dev: return "journal_dev";
    case meta_bg: return "meta_bg";
    case extents: return "extents";
    case bit64: return "64bit";
    case mmp: return "mmp";
    case flex_bg: return "flex_bg";
    case ea_inode: return "ea_inode";
    case dirdata: return "dirdata";
    case csum_seed: return "metadata_csum_seed";
    case largedir: return "large_dir";
    case inline_data: return "inline_data";
    case encrypt: return "encrypt";
    case casefold: return "casefold";
    default: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%x", bit);
      return buf;
    }
  }
}
}  // namespace incompat

namespace inode_flag {
inline constexpr std::uint32_t extents = 0x80000;
inline constexpr std::uint32_t inline_data = 0x10000000;
}  // namespace inode_flag

struct Superblock {
  std::uint32_t block_size = 0;
  std::uint64_t blocks_count = 0;
  std::uint32_t inodes_count = 0;
  std::uint32_t blocks_per_group = 0;
  std::uint32_t inodes_per_group = 0;
  std::uint16_t inode_size = 0;
  std::uint32_t first_data_block = 0;
  std::uint32_t feature_compat = 0;
  std::uint32_t feature_incompat = 0;
  std::uint32_t feature_ro_compat = 0;
  std::uint16_t desc_size = 32;
  Uuid volume_uuid;
  std::uint16_t magic = 0;

  bool has_incompat(std::uint32_t bit) const { return (feature_incompat & bit) != 0; }
  std::uint64_t group_count() const {
    return (blocks_count - first_data_block + blocks_per_group - 1) / blocks_per_group;
  }
};

struct GroupDescriptor {
  std::uint64_t block_bitmap_loc = 0;
  std::uint64_t inode_bitmap_loc = 0;
  std::uint64_t inode_table_loc = 0;
  std::uint32_t free_blocks = 0;
  std::uint32_t free_inodes = 0;
};

enum class FileType { regular, directory, symlink, other };

struct InodeRecord {
  std::uint32_t ino = 0;
  FileType file_type = FileType::other;
  std::uint16_t mode = 0;
  std::uint64_t size = 0;
  bool uses_extents = false;
  std::array<std::uint8_t, 60> block_map_raw{};
  std::uint32_t flags = 0;
};

struct Extent {
  std::uint32_t logical_start = 0;
  std::uint64_t physical_start = 0;
  std::uint32_t length = 0;
  bool unwritten = false;

  friend bool operator==(const Extent&, const Extent&) = default;
};

struct DirEntry {
  std::string name;
  std::uint32_t ino = 0;
};

struct FileRecord {
  std::string path;
  std::uint32_t ino = 0;
  BlockList blocks;
  std::string top_dir;
};

/// Immutable parsed view of an ext4 image. Cheap to copy; copies share the
/// underlying byte source. Safe for concurrent readers.
class Image {
 public:
  static Image open(std::shared_ptr<const ByteSource> source) {
    Image img;
    img.source_ = std::move(source);
    if (img.source_->size() < kSuperblockOffset + kSuperblockSize)
      throw Error("image truncated");
    img.parse_superblock();
    img.parse_group_descriptors();
    return img;
  }

  static Image open(const std::filesystem::path& path) {
    return open(std::make_shared<FileSource>(path));
  }

  const Superblock& superblock() const { return sb_; }
  std::span<const GroupDescriptor> groups() const { return groups_; }
  std::uint64_t byte_size() const { return source_->size(); }

  std::vector<std::uint8_t> read_block(std::uint64_t block) const {
    if (block >= sb_.blocks_count) throw Error("image truncated");
    std::vector<std::uint8_t> buf(sb_.block_size);
    source_->read_at(block * sb_.block_size, buf);
    return buf;
  }

  InodeRecord read_inode(std::uint32_t ino) const {
    if (ino < 1 || ino > sb_.inodes_count) throw Error("inode out of range");
    const std::uint64_t group = (ino - 1) / sb_.inodes_per_group;
    const std::uint64_t index = (ino - 1) % sb_.inodes_per_group;
    if (group >= groups_.size()) throw Error("inode out of range");
    const std::uint64_t offset =
        groups_[group].inode_table_loc * sb_.block_size + index * sb_.inode_size;
    std::array<std::uint8_t, 160> raw{};
    const std::size_t len = std::min<std::size_t>(raw.size(), sb_.inode_size);
    source_->read_at(offset, std::span(raw.data(), len));

    InodeRecord rec;
    rec.ino = ino;
    rec.mode = le16(raw, 0x00);
    switch (rec.mode & 0xF000) {
      case 0x8000: rec.file_type = FileType::regular; break;
      case 0x4000: rec.file_type = FileType::directory; break;
      case 0xA000: rec.file_type = FileType::symlink; break;
      default: rec.file_type = FileType::other; break;
    }
    rec.size = le32(raw, 0x04) | static_cast<std::uint64_t>(le32(raw, 0x6C)) << 32;
    rec.flags = le32(raw, 0x20);
    rec.uses_extents = (rec.flags & inode_flag::extents) != 0;
    std::copy_n(raw.begin() + 0x28, 60, rec.block_map_raw.begin());
    return rec;
  }

  /// Leaf extents of an inode in ascending logical order. Empty for inline
  /// data and for a legacy inode whose block map is all zero.
  std::vector<Extent> extents(const InodeRecord& inode) const {
    std::vector<Extent> out;
    if (inode.flags & inode_flag::inline_data) return out;
    if (!inode.uses_extents) {
      bool empty = std::all_of(inode.block_map_raw.begin(), inode.block_map_raw.end(),
                               [](std::uint8_t b) { return b == 0; });
      if (empty) return out;
      throw Error("unsupported legacy block map");
    }
    walk_extent_node(inode.block_map_raw, -1, out);
    std::stable_sort(out.begin(), out.end(), [](const Extent& a, const Extent& b) {
      return a.logical_start < b.logical_start;
    });
    return out;
  }

  /// Physical blocks of a regular file in ascending logical order. Holes
  /// contribute nothing.
  BlockList resolve_blocks(const InodeRecord& inode) const {
    if (inode.file_type != FileType::regular)
      throw Error("inode " + std::to_string(inode.ino) + " is not a regular file");
    return blocks_of(inode);
  }

  /// Depth-first traversal from the root; regular files only, entries
  /// visited in lexicographic name order at each level.
  std::vector<FileRecord> walk_tree() const {
    std::vector<FileRecord> out;
    std::vector<std::uint32_t> on_path;
    walk_directory(read_inode(kRootIno), "", on_path, out);
    return out;
  }

  /// Live entries of a directory other than "." and "..", sorted by name.
  std::vector<DirEntry> read_directory(const InodeRecord& dir) const {
    if (dir.file_type != FileType::directory)
      throw Error("inode " + std::to_string(dir.ino) + " is not a directory");
    std::vector<DirEntry> entries;
    const bool typed_names = sb_.has_incompat(incompat::filetype);
    for (BlockNo blk : blocks_of(dir)) {
      const auto data = read_block(blk);
      std::span<const std::uint8_t> b(data);
      std::size_t off = 0;
      while (off + 8 <= b.size()) {
        const std::uint32_t ino = le32(b, off);
        const std::uint16_t rec_len = le16(b, off + 4);
        const std::uint16_t name_len = typed_names ? b[off + 6] : le16(b, off + 6);
        if (rec_len < 8 || rec_len % 4 != 0 || off + rec_len > b.size() ||
            8u + name_len > rec_len)
          throw Error("corrupt directory");
        if (ino != 0 && name_len > 0) {
          if (ino > sb_.inodes_count) throw Error("corrupt directory");
          std::string name(reinterpret_cast<const char*>(b.data() + off + 8), name_len);
          if (name != "." && name != "..") entries.push_back({std::move(name), ino});
        }
        off += rec_len;
      }
    }
    std::sort(entries.begin(), entries.end(),
              [](const DirEntry& a, const DirEntry& c) { return a.name < c.name; });
    return entries;
  }

 private:
  Image() = default;

  void parse_superblock() {
    std::array<std::uint8_t, kSuperblockSize> raw{};
    source_->read_at(kSuperblockOffset, raw);
    sb_.magic = le16(raw, 0x38);
    if (sb_.magic != kSuperMagic) throw Error("not an ext4 image");
    sb_.inodes_count = le32(raw, 0x00);
    sb_.first_data_block = le32(raw, 0x14);
    const std::uint32_t log_block = le32(raw, 0x18);
    if (log_block > 6) throw Error("not an ext4 image");
    sb_.block_size = 1024u << log_block;
    sb_.blocks_per_group = le32(raw, 0x20);
    sb_.inodes_per_group = le32(raw, 0x28);
    const std::uint32_t rev_level = le32(raw, 0x4C);
    sb_.inode_size = rev_level == 0 ? 128 : le16(raw, 0x58);
    sb_.feature_compat = le32(raw, 0x5C);
    sb_.feature_incompat = le32(raw, 0x60);
    sb_.feature_ro_compat = le32(raw, 0x64);
    std::copy_n(raw.begin() + 0x68, 16, sb_.volume_uuid.bytes.begin());
    sb_.blocks_count = le32(raw, 0x04);
    if (sb_.has_incompat(incompat::bit64)) {
      sb_.blocks_count |= static_cast<std::uint64_t>(le32(raw, 0x150)) << 32;
      sb_.desc_size = le16(raw, 0xFE);
      if (sb_.desc_size < 64) sb_.desc_size = 64;
    } else {
      sb_.desc_size = 32;
    }

    for (std::uint32_t bit = 1; bit != 0; bit <<= 1)
      if ((sb_.feature_incompat & bit) && !(incompat::supported & bit))
        throw Error("unsupported feature: " + incompat::name(bit));

    if (sb_.blocks_per_group == 0 || sb_.inodes_per_group == 0 ||
        sb_.blocks_per_group > 8u * sb_.block_size || sb_.inode_size < 128 ||
        (sb_.inode_size & (sb_.inode_size - 1)) != 0 ||
        sb_.inode_size > sb_.block_size || sb_.first_data_block >= sb_.blocks_count)
      throw Error("not an ext4 image");
  }

  void parse_group_descriptors() {
    const std::uint64_t count = sb_.group_count();
    const std::uint64_t table_block = sb_.first_data_block + 1;
    const std::uint64_t bytes = count * sb_.desc_size;
    std::vector<std::uint8_t> raw(bytes);
    source_->read_at(table_block * sb_.block_size, raw);
    const bool wide = sb_.has_incompat(incompat::bit64);
    groups_.reserve(count);
    for (std::uint64_t g = 0; g < count; ++g) {
      std::span<const std::uint8_t> d(raw.data() + g * sb_.desc_size, sb_.desc_size);
      GroupDescriptor gd;
      gd.block_bitmap_loc = le32(d, 0x00);
      gd.inode_bitmap_loc = le32(d, 0x04);
      gd.inode_table_loc = le32(d, 0x08);
      gd.free_blocks = le16(d, 0x0C);
      gd.free_inodes = le16(d, 0x0E);
      if (wide) {
        gd.block_bitmap_loc |= static_cast<std::uint64_t>(le32(d, 0x20)) << 32;
        gd.inode_bitmap_loc |= static_cast<std::uint64_t>(le32(d, 0x24)) << 32;
        gd.inode_table_loc |= static_cast<std::uint64_t>(le32(d, 0x28)) << 32;
        gd.free_blocks |= static_cast<std::uint32_t>(le16(d, 0x2C)) << 16;
        gd.free_inodes |= static_cast<std::uint32_t>(le16(d, 0x2E)) << 16;
      }
      if (gd.block_bitmap_loc >= sb_.blocks_count || gd.inode_bitmap_loc >= sb_.blocks_count ||
          gd.inode_table_loc >= sb_.blocks_count)
        throw Error("corrupt group descriptor " + std::to_string(g));
      groups_.push_back(gd);
    }
  }

  // `node` holds a 12-byte header followed by 12-byte entries. `expected_depth`
  // is -1 for the root held in the inode.
  void walk_extent_node(std::span<const std::uint8_t> node, int expected_depth,
                        std::vector<Extent>& out) const {
    if (node.size() < 12 || le16(node, 0) != kExtentMagic) throw Error("corrupt extent tree");
    const std::uint16_t entries = le16(node, 2);
    const std::uint16_t depth = le16(node, 6);
    if (depth > kMaxExtentDepth || (expected_depth >= 0 && depth != expected_depth) ||
        12 + static_cast<std::size_t>(entries) * 12 > node.size())
      throw Error("corrupt extent tree");
    for (std::uint16_t i = 0; i < entries; ++i) {
      auto e = node.subspan(12 + i * 12, 12);
      if (depth == 0) {
        Extent ext;
        ext.logical_start = le32(e, 0);
        std::uint16_t len = le16(e, 4);
        if (len > 32768) {
          ext.unwritten = true;
          len = static_cast<std::uint16_t>(len - 32768);
        }
        ext.length = len;
        ext.physical_start = static_cast<std::uint64_t>(le16(e, 6)) << 32 | le32(e, 8);
        if (ext.length == 0 || ext.physical_start < sb_.first_data_block ||
            ext.physical_start + ext.length > sb_.blocks_count)
          throw Error("corrupt extent tree");
        out.push_back(ext);
      } else {
        const std::uint64_t child = le32(e, 4) | static_cast<std::uint64_t>(le16(e, 8)) << 32;
        if (child >= sb_.blocks_count) throw Error("corrupt extent tree");
        walk_extent_node(read_block(child), depth - 1, out);
      }
    }
  }

  BlockList blocks_of(const InodeRecord& inode) const {
    BlockList blocks;
    for (const auto& ext : extents(inode))
      for (std::uint32_t i = 0; i < ext.length; ++i) blocks.push_back(ext.physical_start + i);
    return blocks;
  }

  void walk_directory(const InodeRecord& dir, const std::string& prefix,
                      std::vector<std::uint32_t>& on_path,
                      std::vector<FileRecord>& out) const {
    on_path.push_back(dir.ino);
    for (const auto& entry : read_directory(dir)) {
      const std::string path = prefix + "/" + entry.name;
      const InodeRecord child = read_inode(entry.ino);
      if (child.file_type == FileType::directory) {
        if (std::find(on_path.begin(), on_path.end(), child.ino) != on_path.end())
          throw Error("directory cycle at " + path);
        walk_directory(child, path, on_path, out);
      } else if (child.file_type == FileType::regular) {
        FileRecord rec;
        rec.path = path;
        rec.ino = child.ino;
        try {
          rec.blocks = resolve_blocks(child);
        } catch (const Error& e) {
          throw Error(std::string(e.what()) + " at " + path);
        }
        rec.top_dir = top_dir_of(path);
        out.push_back(std::move(rec));
      }
    }
    on_path.pop_back();
  }

  std::shared_ptr<const ByteSource> source_;
  Superblock sb_;
  std::vector<GroupDescriptor> groups_;
};

inline Image open_image(std::shared_ptr<const ByteSource> source) {
  return Image::open(std::move(source));
}

inline Image open_image(const std::filesystem::path& path) { return Image::open(path); }

/// Genome of every regular file in the image, optionally truncated to each
/// file's first block.
inline Fsg extract_fsg(const Image& img, bool first_block_only, std::string device_label = {}) {
  Fsg fsg;
  fsg.device_label = std::move(device_label);
  fsg.volume_uuid = img.superblock().volume_uuid;
  fsg.block_size = img.superblock().block_size;
  for (auto& rec : img.walk_tree()) {
    if (first_block_only && rec.blocks.size() > 1) rec.blocks.resize(1);
    fsg.entries.insert_or_assign(std::move(rec.path), std::move(rec.blocks));
  }
  return fsg;
}

}  // namespace fsg::ext4
