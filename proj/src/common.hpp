#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtlb {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes used by the CLI: 0 ok, 2 config, 3 data, 4 numeric.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Shape mismatches, bad op usage (programming errors surfaced at runtime).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a, used for config hashing (stability matters, cryptographic strength does not).
uint64_t fnv1a64(const void* data, size_t len);
inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }
std::string hex64(uint64_t v);

uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

// Little-endian buffer serialization. All on-disk formats go through these.
struct ByteWriter {
    std::vector<uint8_t> buf;
    void raw(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void f64(double v);
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct ByteReader {
    const uint8_t* p;
    const uint8_t* end;
    ByteReader(const void* data, size_t n)
        : p(static_cast<const uint8_t*>(data)), end(p + n) {}
    void need(size_t n) const {
        if (static_cast<size_t>(end - p) < n) throw DataError("truncated input");
    }
    void raw(void* out, size_t n) {
        need(n);
        std::memcpy(out, p, n);
        p += n;
    }
    uint8_t u8() {
        need(1);
        return *p++;
    }
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    int32_t i32() { return static_cast<int32_t>(u32()); }
    double f64();
    std::string str();
    size_t remaining() const { return static_cast<size_t>(end - p); }
};

std::vector<uint8_t> read_file(const std::string& path);
// Writes to path.tmp then renames, so partially written files are never visible.
void write_file_atomic(const std::string& path, const void* data, size_t len);
inline void write_file_atomic(const std::string& path, const std::vector<uint8_t>& buf) {
    write_file_atomic(path, buf.data(), buf.size());
}

std::string format_fixed(double v, int decimals);

}  // namespace mtlb
