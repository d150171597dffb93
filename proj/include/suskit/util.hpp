#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace suskit {

// FNV-1a, used for content digests in manifests and model files.
std::uint64_t fnv1a64(std::string_view data);
std::string digest_hex(std::string_view data);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);
std::string lower_ascii(std::string_view s);

// One CSV cell, quoted only when needed.
std::string csv_escape(std::string_view cell);

void warn(const std::string& message);

}  // namespace suskit
