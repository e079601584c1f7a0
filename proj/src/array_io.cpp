#include "bcx/array_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "bcx/error.hpp"

static_assert(std::endian::native == std::endian::little, "array files are written in host byte order");

namespace bcx {

std::size_t dtype_size(DType t) {
    switch (t) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::i32: return 4;
    case DType::u8: return 1;
    }
    return 0;
}

std::string dtype_name(DType t) {
    switch (t) {
    case DType::f32: return "float32";
    case DType::f64: return "float64";
    case DType::i32: return "int32";
    case DType::u8: return "uint8";
    }
    return "?";
}

DType parse_dtype(const std::string& name) {
    if (name == "float32") return DType::f32;
    if (name == "float64") return DType::f64;
    if (name == "int32") return DType::i32;
    if (name == "uint8") return DType::u8;
    throw DataError(DataError::Kind::manifest, "unknown dtype '" + name + "'");
}

namespace {

template <class T>
constexpr DType dtype_of() {
    if constexpr (std::is_same_v<T, float>) return DType::f32;
    else if constexpr (std::is_same_v<T, double>) return DType::f64;
    else if constexpr (std::is_same_v<T, std::int32_t>) return DType::i32;
    else {
        static_assert(std::is_same_v<T, std::uint8_t>);
        return DType::u8;
    }
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

}  // namespace

std::int64_t ArrayEntry::element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

template <class T>
std::vector<T> ArrayEntry::as() const {
    if (dtype != dtype_of<T>()) {
        throw DataError(DataError::Kind::shape, "array '" + name + "' has dtype " + dtype_name(dtype));
    }
    std::vector<T> out(bytes.size() / sizeof(T));
    std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
    return out;
}

template <class T>
ArrayEntry make_array(std::string name, std::span<const T> values, std::vector<std::int64_t> shape) {
    ArrayEntry e;
    e.name = std::move(name);
    e.dtype = dtype_of<T>();
    e.shape = std::move(shape);
    if (e.element_count() != static_cast<std::int64_t>(values.size())) {
        throw DataError(DataError::Kind::shape, "array '" + e.name + "': " + std::to_string(values.size()) +
                                                    " values do not fill shape " + shape_string(e.shape));
    }
    e.bytes.resize(values.size_bytes());
    std::memcpy(e.bytes.data(), values.data(), values.size_bytes());
    return e;
}

template std::vector<float> ArrayEntry::as<float>() const;
template std::vector<double> ArrayEntry::as<double>() const;
template std::vector<std::int32_t> ArrayEntry::as<std::int32_t>() const;
template std::vector<std::uint8_t> ArrayEntry::as<std::uint8_t>() const;
template ArrayEntry make_array<float>(std::string, std::span<const float>, std::vector<std::int64_t>);
template ArrayEntry make_array<double>(std::string, std::span<const double>, std::vector<std::int64_t>);
template ArrayEntry make_array<std::int32_t>(std::string, std::span<const std::int32_t>, std::vector<std::int64_t>);
template ArrayEntry make_array<std::uint8_t>(std::string, std::span<const std::uint8_t>, std::vector<std::int64_t>);

std::uint32_t crc32_of(std::span<const std::byte> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + offset), chunk);
        offset += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

namespace {

std::string file_name_for(const std::string& name) {
    std::string f = name;
    for (auto& c : f) {
        if (c == '/') c = '.';
    }
    return f + ".bin";
}

}  // namespace

void write_array_dir(const std::filesystem::path& dir, const json& meta, std::span<const ArrayEntry> arrays) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError(DataError::Kind::io, "cannot create directory " + dir.string() + ": " + ec.message());
    json manifest = meta;
    manifest["format_version"] = format_version;
    json table = json::array();
    for (const auto& a : arrays) {
        const std::string file = file_name_for(a.name);
        std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(a.bytes.data()), static_cast<std::streamsize>(a.bytes.size()));
        if (!out) throw DataError(DataError::Kind::io, "cannot write " + (dir / file).string());
        table.push_back({{"name", a.name},
                         {"file", file},
                         {"dtype", dtype_name(a.dtype)},
                         {"shape", a.shape},
                         {"byte_length", a.bytes.size()},
                         {"crc32", crc32_of(a.bytes)}});
    }
    manifest["arrays"] = table;
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw DataError(DataError::Kind::io, "cannot write manifest in " + dir.string());
}

const ArrayEntry& ArrayDir::get(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw DataError(DataError::Kind::manifest, "missing array '" + name + "'");
    return it->second;
}

const ArrayEntry& ArrayDir::expect(const std::string& name, DType dtype, const std::vector<std::int64_t>& shape) const {
    const auto& a = get(name);
    if (a.dtype != dtype || a.shape != shape) {
        throw DataError(DataError::Kind::shape, "shape mismatch for array '" + name + "': expected " + dtype_name(dtype) +
                                                    shape_string(shape) + ", found " + dtype_name(a.dtype) +
                                                    shape_string(a.shape));
    }
    return a;
}

ArrayDir read_array_dir(const std::filesystem::path& dir) {
    ArrayDir out;
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError(DataError::Kind::io, "cannot open " + (dir / "manifest.json").string());
    try {
        out.manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::manifest, std::string("malformed manifest: ") + e.what());
    }
    const auto& m = out.manifest;
    if (!m.is_object() || !m.contains("format_version") || !m.contains("arrays") || !m["arrays"].is_array()) {
        throw DataError(DataError::Kind::manifest, "malformed manifest: missing format_version or arrays");
    }
    if (m["format_version"] != format_version) {
        throw DataError(DataError::Kind::manifest, "unsupported format_version " + m["format_version"].dump());
    }
    for (const auto& row : m["arrays"]) {
        ArrayEntry a;
        std::string file;
        std::uint64_t byte_length = 0;
        std::uint32_t crc = 0;
        try {
            a.name = row.at("name").get<std::string>();
            file = row.at("file").get<std::string>();
            a.dtype = parse_dtype(row.at("dtype").get<std::string>());
            a.shape = row.at("shape").get<std::vector<std::int64_t>>();
            byte_length = row.at("byte_length").get<std::uint64_t>();
            crc = row.at("crc32").get<std::uint32_t>();
        } catch (const json::exception& e) {
            throw DataError(DataError::Kind::manifest, std::string("malformed array entry: ") + e.what());
        }
        if (file.find('/') != std::string::npos || file.find("..") != std::string::npos) {
            throw DataError(DataError::Kind::manifest, "array '" + a.name + "' names a file outside the directory");
        }
        for (auto d : a.shape) {
            if (d < 0) throw DataError(DataError::Kind::shape, "array '" + a.name + "' has a negative dimension");
        }
        if (static_cast<std::uint64_t>(a.element_count()) * dtype_size(a.dtype) != byte_length) {
            throw DataError(DataError::Kind::shape, "shape mismatch for array '" + a.name + "': shape " +
                                                        shape_string(a.shape) + " does not match byte_length " +
                                                        std::to_string(byte_length));
        }
        std::ifstream bin(dir / file, std::ios::binary);
        if (!bin) throw DataError(DataError::Kind::io, "cannot open " + (dir / file).string());
        std::vector<char> raw((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
        a.bytes.resize(raw.size());
        std::memcpy(a.bytes.data(), raw.data(), raw.size());
        if (a.bytes.size() != byte_length || crc32_of(a.bytes) != crc) {
            throw DataError(DataError::Kind::checksum, "checksum failure for array '" + a.name + "' (" +
                                                           std::to_string(a.bytes.size()) + " of " +
                                                           std::to_string(byte_length) + " bytes)");
        }
        out.arrays.emplace(a.name, std::move(a));
    }
    return out;
}

}  // namespace bcx
