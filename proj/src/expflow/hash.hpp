#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace expflow {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Content digest of a file or directory tree. A file hashes its raw bytes.
// A directory hashes the manifest built from `<relpath>\t<file-digest>\n`
// lines in sorted relative-path order; symlinks are followed and metadata is
// excluded, so the digest is a pure function of content.
std::string hash_tree(const std::filesystem::path& path);

} // namespace expflow
