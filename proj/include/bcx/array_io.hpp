#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace bcx {

using json = nlohmann::json;

inline constexpr int format_version = 1;

enum class DType { f32, f64, i32, u8 };

std::size_t dtype_size(DType t);
std::string dtype_name(DType t);
DType parse_dtype(const std::string& name);

// A named raw array: little-endian, row-major.
struct ArrayEntry {
    std::string name;
    DType dtype = DType::f64;
    std::vector<std::int64_t> shape;
    std::vector<std::byte> bytes;

    std::int64_t element_count() const;

    template <class T>
    std::vector<T> as() const;
};

template <class T>
ArrayEntry make_array(std::string name, std::span<const T> values, std::vector<std::int64_t> shape);

std::uint32_t crc32_of(std::span<const std::byte> bytes);

// Directory of `manifest.json` plus one `<name>.bin` per array. `meta` keys are
// merged into the manifest next to format_version and the array table.
void write_array_dir(const std::filesystem::path& dir, const json& meta, std::span<const ArrayEntry> arrays);

struct ArrayDir {
    json manifest;
    std::map<std::string, ArrayEntry> arrays;

    const ArrayEntry& get(const std::string& name) const;
    // Throws DataError(shape) naming the array when the shape differs.
    const ArrayEntry& expect(const std::string& name, DType dtype, const std::vector<std::int64_t>& shape) const;
};

// Throws DataError: manifest (malformed JSON or keys), shape (byte length
// inconsistent with shape), checksum (size or CRC32 mismatch), io.
ArrayDir read_array_dir(const std::filesystem::path& dir);

}  // namespace bcx
