#pragma once
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cayley {

// scientific form with 13 significant digits; parses back within 5e-13
// relative, which is the round-trip tolerance used by the readers
std::string fmt_double(double x);

std::uint64_t fnv1a(const void* data, std::size_t n);
std::uint64_t fnv1a(const std::string& s);

// 8 little-endian bytes per double, independent of host byte order
void put_f64le(std::vector<unsigned char>& out, double x);
double get_f64le(const unsigned char* p);

void put_u32le(std::vector<unsigned char>& out, std::uint32_t x);
std::uint32_t get_u32le(const unsigned char* p);
void put_u64le(std::vector<unsigned char>& out, std::uint64_t x);
std::uint64_t get_u64le(const unsigned char* p);

// whole-file helpers; failures surface as IoError with the path in the text
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::vector<unsigned char> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, const std::vector<unsigned char>& bytes);

}  // namespace cayley
