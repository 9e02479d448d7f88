#include "framecast/binio.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

#include "framecast/errors.hpp"

namespace fc {

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw io_error("write failed");
}

void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n))
        throw format_error("unexpected end of file");
}

void write_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    write_bytes(os, b, 4);
}

void write_u64le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    write_bytes(os, b, 8);
}

void write_f64le(std::ostream& os, double v) {
    write_u64le(os, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t read_u32le(std::istream& is) {
    unsigned char b[4];
    read_bytes(is, b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64le(std::istream& is) {
    unsigned char b[8];
    read_bytes(is, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64le(std::istream& is) {
    return std::bit_cast<double>(read_u64le(is));
}

void write_tensor(std::ostream& os, const Tensor2& t) {
    write_u32le(os, static_cast<std::uint32_t>(t.rows));
    write_u32le(os, static_cast<std::uint32_t>(t.cols));
    for (double v : t.data) write_f64le(os, v);
}

Tensor2 read_tensor(std::istream& is) {
    const std::uint32_t rows = read_u32le(is);
    const std::uint32_t cols = read_u32le(is);
    if (rows == 0 || cols == 0 || static_cast<std::uint64_t>(rows) * cols > (1ULL << 28))
        throw format_error("tensor header out of range: " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    Tensor2 t(rows, cols);
    for (auto& v : t.data) v = read_f64le(is);
    return t;
}

void atomic_write_file(const std::string& path, const std::function<void(std::ostream&)>& writer) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw io_error("cannot open for write: " + tmp);
        writer(os);
        os.flush();
        if (!os) {
            std::remove(tmp.c_str());
            throw io_error("write failed: " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw io_error("cannot rename " + tmp + " to " + path);
    }
}

} // namespace fc
