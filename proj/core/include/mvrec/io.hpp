#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvrec/geometry.hpp"

namespace mvrec {

// All binary formats below use little-endian integers and IEEE-754 floats.
// Readers throw std::runtime_error naming the offending path on missing,
// truncated, or malformed input. Writers replace files atomically
// (temp + rename), so a crashed run never leaves a partial file behind.

struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, pixels[y*width + x]

  std::uint8_t at(int x, int y) const { return pixels[y * width + x]; }
};

struct ImageU16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;

  std::uint16_t at(int x, int y) const { return pixels[y * width + x]; }
};

// Voxel grid container, format "VXG1": magic, three u32 dims (must be
// equal), f32 extent, then res^3 f32 values in x-fastest order.
void write_vxg(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_vxg(const std::filesystem::path& path);

// Binary PGM (P5). 8-bit for masks, 16-bit for depth. 16-bit samples are
// little-endian, matching every other binary format here (note: classic
// netpbm specifies big-endian; readers/writers in this toolkit agree with
// each other and the choice is documented in the dataset docs).
void write_pgm(const std::filesystem::path& path, const ImageU8& img);
void write_pgm(const std::filesystem::path& path, const ImageU16& img);
ImageU8 read_pgm8(const std::filesystem::path& path);
ImageU16 read_pgm16(const std::filesystem::path& path);

// ASCII OBJ with v/f records only, 1-based indices.
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::filesystem::path& path);

// Binary little-endian PLY; vertices as float x/y/z plus an optional float
// "quality" scalar per vertex (one value per vertex, e.g. an error field),
// faces as uchar-count + three int32 indices.
void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh,
               const std::vector<float>& quality = {});
struct PlyData {
  TriangleMesh mesh;
  std::vector<float> quality;  // empty when the file has no quality channel
};
PlyData read_ply(const std::filesystem::path& path);

// Parameter checkpoint, format "PRM1": magic, u32 descriptor byte length,
// UTF-8 descriptor (JSON architecture record), u32 parameter count, then
// f32 parameters.
void write_prm(const std::filesystem::path& path, const std::string& descriptor,
               const std::vector<float>& params);
struct PrmData {
  std::string descriptor;
  std::vector<float> params;
};
PrmData read_prm(const std::filesystem::path& path);

// Whole-file text helpers (atomic on write).
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mvrec
