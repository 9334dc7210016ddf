#pragma once

#include <string>
#include <string_view>

namespace molstyle {

// Lowercase hex SHA-1 of the bytes.
std::string sha1_hex(std::string_view bytes);

// Git blob id of the bytes ("blob <size>\0" prefix), matching `git hash-object`.
std::string git_blob_hash(std::string_view bytes);

// Git blob id of a file's contents; throws std::runtime_error if unreadable.
std::string git_blob_hash_file(const std::string& path);

}  // namespace molstyle
