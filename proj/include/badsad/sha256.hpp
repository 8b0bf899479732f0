#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace badsad {

// SHA-256 of a byte string, returned as lowercase hex.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);

}  // namespace badsad
