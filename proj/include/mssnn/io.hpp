#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "mssnn/common.hpp"

namespace mssnn {

// Little-endian binary stream helpers. Byte order is written explicitly so
// the on-disk formats are identical on every host.
class BinaryWriter {
  public:
    explicit BinaryWriter(std::string path);
    ~BinaryWriter();
    BinaryWriter(const BinaryWriter&) = delete;
    BinaryWriter& operator=(const BinaryWriter&) = delete;

    void bytes(const void* p, std::size_t n);
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void str(const std::string& s);  // u32 length + raw bytes
    void f32_array(const float* p, std::size_t n);

    // Flushes and renames the temporary file onto the target path. Without a
    // commit the destructor discards the temporary, so failed writers never
    // leave partial output behind.
    void commit();

  private:
    std::string path_;
    std::string tmp_path_;
    std::FILE* f_ = nullptr;
    bool committed_ = false;
};

class BinaryReader {
  public:
    explicit BinaryReader(std::string path);
    ~BinaryReader();
    BinaryReader(const BinaryReader&) = delete;
    BinaryReader& operator=(const BinaryReader&) = delete;

    void bytes(void* p, std::size_t n);
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string str();
    void f32_array(float* p, std::size_t n);
    bool at_eof();

  private:
    std::string path_;
    std::FILE* f_ = nullptr;
};

// Atomic whole-file text write (temp file + rename).
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace mssnn
