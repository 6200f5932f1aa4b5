#include "mssnn/io.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mssnn {

namespace {

void put_le(std::FILE* f, std::uint64_t v, int nbytes, const std::string& path) {
    unsigned char buf[8];
    for (int i = 0; i < nbytes; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    if (std::fwrite(buf, 1, static_cast<std::size_t>(nbytes), f) != static_cast<std::size_t>(nbytes))
        throw DataError("write failed: " + path);
}

std::uint64_t get_le(std::FILE* f, int nbytes, const std::string& path) {
    unsigned char buf[8];
    if (std::fread(buf, 1, static_cast<std::size_t>(nbytes), f) != static_cast<std::size_t>(nbytes))
        throw DataError("truncated file: " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

BinaryWriter::BinaryWriter(std::string path)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp") {
    f_ = std::fopen(tmp_path_.c_str(), "wb");
    if (!f_) throw DataError("cannot open for writing: " + tmp_path_ + " (" + std::strerror(errno) + ")");
}

BinaryWriter::~BinaryWriter() {
    if (f_) std::fclose(f_);
    if (!committed_) std::remove(tmp_path_.c_str());
}

void BinaryWriter::bytes(const void* p, std::size_t n) {
    if (n && std::fwrite(p, 1, n, f_) != n) throw DataError("write failed: " + tmp_path_);
}

void BinaryWriter::u8(std::uint8_t v) { put_le(f_, v, 1, tmp_path_); }
void BinaryWriter::u32(std::uint32_t v) { put_le(f_, v, 4, tmp_path_); }
void BinaryWriter::u64(std::uint64_t v) { put_le(f_, v, 8, tmp_path_); }

void BinaryWriter::f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le(f_, bits, 4, tmp_path_);
}

void BinaryWriter::f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_le(f_, bits, 8, tmp_path_);
}

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
}

void BinaryWriter::f32_array(const float* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f32(p[i]);
}

void BinaryWriter::commit() {
    if (std::fflush(f_) != 0) throw DataError("flush failed: " + tmp_path_);
    std::fclose(f_);
    f_ = nullptr;
    std::error_code ec;
    std::filesystem::rename(tmp_path_, path_, ec);
    if (ec) throw DataError("rename failed: " + tmp_path_ + " -> " + path_);
    committed_ = true;
}

BinaryReader::BinaryReader(std::string path) : path_(std::move(path)) {
    f_ = std::fopen(path_.c_str(), "rb");
    if (!f_) throw DataError("cannot open: " + path_ + " (" + std::strerror(errno) + ")");
}

BinaryReader::~BinaryReader() {
    if (f_) std::fclose(f_);
}

void BinaryReader::bytes(void* p, std::size_t n) {
    if (n && std::fread(p, 1, n, f_) != n) throw DataError("truncated file: " + path_);
}

std::uint8_t BinaryReader::u8() { return static_cast<std::uint8_t>(get_le(f_, 1, path_)); }
std::uint32_t BinaryReader::u32() { return static_cast<std::uint32_t>(get_le(f_, 4, path_)); }
std::uint64_t BinaryReader::u64() { return get_le(f_, 8, path_); }

float BinaryReader::f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

double BinaryReader::f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string BinaryReader::str() {
    std::uint32_t n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
}

void BinaryReader::f32_array(float* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = f32();
}

bool BinaryReader::at_eof() {
    int c = std::fgetc(f_);
    if (c == EOF) return true;
    std::ungetc(c, f_);
    return false;
}

void write_text_file(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot open for writing: " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("rename failed: " + tmp + " -> " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace mssnn
