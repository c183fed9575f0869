#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace censorsim {

// SHA-256 hex digest; used for manifest content hashes.
std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace censorsim
